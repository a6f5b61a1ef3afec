//! Re-encoding a real 4x4 tap bank as a widely-linear map on the fields.
//!
//! With `z_X = x1 + j x2` and `z_Y = x3 + j x4`, a real map contributes to
//! output field `X` through `alpha x1 + beta x2` (and likewise for `Y`), where
//! `alpha = w[xi][i] + j w[xq][i]`. Substituting `x1 = (z + z*)/2` and
//! `x2 = (z - z*)/(2j)` splits every branch into a direct term on `z` with
//! coefficient `(alpha - j beta)/2` and a conjugate term on `z*` with
//! coefficient `(alpha + j beta)/2`. Real FIR taps commute with conjugation,
//! so the split holds tap by tap.

use num_complex::Complex64;

use super::{EqualizerTaps, Topology, TopologyKind};
use crate::{Error, Result};

/// Append the conjugate of every lane: `[x_1..x_K, x_1*..x_K*]`.
pub fn augment_conjugates(inputs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    inputs
        .iter()
        .cloned()
        .chain(inputs.iter().map(|l| l.iter().map(|z| z.conj()).collect()))
        .collect()
}

/// Exact re-encoding of a `real_4x4` bank as `widely_linear_2x4` taps acting
/// on `(z_X, z_Y, z_X*, z_Y*)`.
pub fn real4x4_to_widely_linear(taps: &EqualizerTaps) -> Result<EqualizerTaps> {
    if taps.topology.kind != TopologyKind::Real4x4 {
        return Err(Error::TopologyMismatch(format!(
            "widely-linear re-encoding needs real_4x4 taps, got {}",
            taps.topology.kind
        )));
    }
    let l = taps.topology.taps_per_branch();
    let top = Topology::new(TopologyKind::WidelyLinear2x4, l)?;
    let mut out = EqualizerTaps::zeros(top);
    out.class = taps.class;
    let j = Complex64::new(0.0, 1.0);
    for pol in 0..2 {
        let (row_i, row_q) = (2 * pol, 2 * pol + 1);
        for field in 0..2 {
            let (lane_i, lane_q) = (2 * field, 2 * field + 1);
            for k in 0..l {
                let alpha = Complex64::new(taps.branch(row_i, lane_i)[k].re, taps.branch(row_q, lane_i)[k].re);
                let beta = Complex64::new(taps.branch(row_i, lane_q)[k].re, taps.branch(row_q, lane_q)[k].re);
                out.branch_mut(pol, field)[k] = (alpha - j * beta) * 0.5;
                out.branch_mut(pol, 2 + field)[k] = (alpha + j * beta) * 0.5;
            }
        }
    }
    Ok(out)
}

/// `complex_2x4` bank producing `G` times the `real_4x4` output: output pair
/// `(2p, 2p + 1)` folds into `w_i + j w_q` on every branch.
pub fn real4x4_to_complex2x4(taps: &EqualizerTaps) -> Result<EqualizerTaps> {
    if taps.topology.kind != TopologyKind::Real4x4 {
        return Err(Error::TopologyMismatch(format!(
            "field projection needs real_4x4 taps, got {}",
            taps.topology.kind
        )));
    }
    let l = taps.topology.taps_per_branch();
    let mut out = EqualizerTaps::zeros(Topology::new(TopologyKind::Complex2x4, l)?);
    out.class = taps.class;
    let j = Complex64::new(0.0, 1.0);
    for pol in 0..2 {
        for b in 0..4 {
            for k in 0..l {
                out.branch_mut(pol, b)[k] = taps.branch(2 * pol, b)[k] + j * taps.branch(2 * pol + 1, b)[k];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equalizer::apply_taps;

    fn real_matrix_taps(m: [[f64; 4]; 4]) -> EqualizerTaps {
        let top = Topology::new(TopologyKind::Real4x4, 1).unwrap();
        let w = m.iter().flatten().map(|&v| Complex64::new(v, 0.0)).collect();
        EqualizerTaps::from_weights(top, w).unwrap()
    }

    #[test]
    fn identity_has_no_conjugate_terms() {
        let mut m = [[0.0; 4]; 4];
        (0..4).for_each(|i| m[i][i] = 1.0);
        let wl = real4x4_to_widely_linear(&real_matrix_taps(m)).unwrap();
        for pol in 0..2 {
            for b in 0..4 {
                let want = if b == pol { 1.0 } else { 0.0 };
                assert_eq!(wl.branch(pol, b)[0], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn lane_conjugation_is_pure_conjugate() {
        let m = [[1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, -1.0]];
        let wl = real4x4_to_widely_linear(&real_matrix_taps(m)).unwrap();
        for pol in 0..2 {
            for b in 0..4 {
                let want = if b == pol + 2 { 1.0 } else { 0.0 };
                assert_eq!(wl.branch(pol, b)[0], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn wrong_topology_rejected() {
        let top = Topology::new(TopologyKind::Complex2x4, 3).unwrap();
        assert!(real4x4_to_widely_linear(&EqualizerTaps::center_spike(top)).is_err());
    }

    #[test]
    fn outputs_match_on_a_small_case() {
        let m = [[0.2, -1.0, 0.5, 0.3], [0.7, 0.1, -0.4, 0.0], [-0.3, 0.8, 0.6, 0.2], [0.05, -0.5, 0.9, -0.7]];
        let taps = real_matrix_taps(m);
        let x: Vec<Vec<Complex64>> = (0..4)
            .map(|i| (0..8).map(|t| Complex64::new(((i * 5 + t * 3) % 7) as f64 - 3.0, 0.0)).collect())
            .collect();
        let y = apply_taps(&taps, &x).unwrap();
        let fields: Vec<Vec<Complex64>> = (0..2)
            .map(|p| (0..8).map(|t| Complex64::new(x[2 * p][t].re, x[2 * p + 1][t].re)).collect())
            .collect();
        let z = apply_taps(&real4x4_to_widely_linear(&taps).unwrap(), &fields).unwrap();
        for p in 0..2 {
            for t in 0..8 {
                let want = Complex64::new(y[2 * p][t].re, y[2 * p + 1][t].re);
                assert!((z[p][t] - want).norm() < 1e-12);
            }
        }
    }
}

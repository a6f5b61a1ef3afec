//! Output files: CSV for waveforms and taps, JSON for reports. Every file is
//! written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use mimo_lab::equalizer::{EqualizerTaps, Topology};
use mimo_lab::signal::{RealQuadSignal, LANE_NAMES};
use mimo_lab::Complex64;
use serde::Serialize;

pub const TAPS_HEADER: [&str; 5] = ["output", "branch", "tap", "re", "im"];

/// Write `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv_bytes<R>(header: &[&str], rows: R) -> anyhow::Result<Vec<u8>>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// One column per lane, header `xi,xq,yi,yq`. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_lanes(path: &Path, x: &RealQuadSignal) -> anyhow::Result<()> {
    let rows = (0..x.len()).map(|t| x.sample(t).iter().map(|v| v.to_string()).collect());
    write_atomic(path, &csv_bytes(&LANE_NAMES, rows)?)
}

pub fn read_lanes(path: &Path) -> anyhow::Result<RealQuadSignal> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().ne(LANE_NAMES) {
        bail!("{}: header must be {}", path.display(), LANE_NAMES.join(","));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut s = [0.0; 4];
        for (k, v) in s.iter_mut().enumerate() {
            *v = rec.get(k).unwrap_or_default().parse().with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        }
        samples.push(s);
    }
    Ok(RealQuadSignal::from_samples(&samples)?)
}

/// Complex output lanes as `<name>_re,<name>_im` column pairs.
pub fn write_complex_lanes(path: &Path, names: &[&str], lanes: &[Vec<Complex64>]) -> anyhow::Result<()> {
    let header: Vec<String> = names.iter().flat_map(|n| [format!("{n}_re"), format!("{n}_im")]).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let n = lanes.first().map_or(0, Vec::len);
    let rows = (0..n).map(|t| lanes.iter().flat_map(|l| [l[t].re.to_string(), l[t].im.to_string()]).collect());
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// Branch-major tap listing: `output,branch,tap,re,im`.
pub fn write_taps(path: &Path, taps: &EqualizerTaps) -> anyhow::Result<()> {
    let kind = taps.topology.kind;
    let l = taps.topology.taps_per_branch();
    let mut rows = Vec::with_capacity(taps.topology.coefficient_count());
    for o in 0..kind.outputs() {
        for b in 0..kind.branches() {
            for (k, w) in taps.branch(o, b).iter().enumerate() {
                rows.push(vec![o.to_string(), b.to_string(), k.to_string(), w.re.to_string(), w.im.to_string()]);
            }
        }
    }
    debug_assert_eq!(rows.len(), l * kind.outputs() * kind.branches());
    write_atomic(path, &csv_bytes(&TAPS_HEADER, rows)?)
}

/// Read a tap listing and check it against the expected topology.
pub fn read_taps(path: &Path, topology: Topology) -> anyhow::Result<EqualizerTaps> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().ne(TAPS_HEADER) {
        bail!("{}: header must be {}", path.display(), TAPS_HEADER.join(","));
    }
    let kind = topology.kind;
    let l = topology.taps_per_branch();
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or_default();
        let ctx = || format!("{}: row {}", path.display(), i + 2);
        let o: usize = field(0).parse().with_context(ctx)?;
        let b: usize = field(1).parse().with_context(ctx)?;
        let k: usize = field(2).parse().with_context(ctx)?;
        let w = Complex64::new(field(3).parse().with_context(ctx)?, field(4).parse().with_context(ctx)?);
        entries.push((o, b, k, w));
    }
    let max = |f: fn(&(usize, usize, usize, Complex64)) -> usize| entries.iter().map(f).max().map_or(0, |m| m + 1);
    let (outputs, branches, len) = (max(|e| e.0), max(|e| e.1), max(|e| e.2));
    if (outputs, branches, len) != (kind.outputs(), kind.branches(), l) || entries.len() != topology.coefficient_count() {
        return Err(mimo_lab::Error::TopologyMismatch(format!(
            "{} holds {outputs} outputs x {branches} branches x {len} taps ({} rows); {kind} with {l} taps needs {} x {} x {l}",
            path.display(),
            entries.len(),
            kind.outputs(),
            kind.branches(),
        ))
        .into());
    }
    let mut taps = EqualizerTaps::zeros(topology);
    for (o, b, k, w) in entries {
        taps.branch_mut(o, b)[k] = w;
    }
    Ok(EqualizerTaps::from_weights(topology, taps.weights().to_vec())?)
}

//! Frequency-flat polarization transform on the 4-lane representation.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::{Error, Result};

/// Unit-norm `(a, b, c, d)` parameterizing the 4x4 polarization matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub const NORM_TOLERANCE: f64 = 1e-9;

impl PolarizationParams {
    pub const IDENTITY: Self = Self {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    /// Checked constructor; the squared norm must be within 1e-9 of one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let p = Self { a, b, c, d };
        p.validate()?;
        Ok(p)
    }

    /// Scale arbitrary (non-zero) components onto the unit sphere.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let n = (a * a + b * b + c * c + d * d).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NotUnitNorm { norm_sq: n * n });
        }
        Ok(Self {
            a: a / n,
            b: b / n,
            c: c / n,
            d: d / n,
        })
    }

    /// Uniform draw on the unit 3-sphere.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        loop {
            let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
            if let Ok(p) = Self::normalized(v[0], v[1], v[2], v[3]) {
                return p;
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.norm_sq();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotUnitNorm { norm_sq: n });
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.a * other.a + self.b * other.b + self.c * other.c + self.d * other.d
    }

    pub fn negated(&self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
            c: -self.c,
            d: -self.d,
        }
    }

    /// The same transform acting on the complex fields `(X, Y)`:
    /// `[[a - jb, -c - jd], [c - jd, a + jb]]`.
    pub fn jones(&self) -> [[Complex64; 2]; 2] {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        [
            [Complex64::new(a, -b), Complex64::new(-c, -d)],
            [Complex64::new(c, -d), Complex64::new(a, b)],
        ]
    }
}

impl Default for PolarizationParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// The real 4x4 polarization matrix with rows
/// `(a, b, -c, d)`, `(-b, a, -d, -c)`, `(c, d, a, -b)`, `(-d, c, b, a)`.
pub fn make_unitary(p: &PolarizationParams) -> Result<Matrix4<f64>> {
    p.validate()?;
    Ok(unitary_pattern(p))
}

/// Sign pattern without the norm check; linear in `(a, b, c, d)`.
pub(crate) fn unitary_pattern(p: &PolarizationParams) -> Matrix4<f64> {
    let (a, b, c, d) = (p.a, p.b, p.c, p.d);
    #[rustfmt::skip]
    let m = Matrix4::new(
         a,  b, -c,  d,
        -b,  a, -d, -c,
         c,  d,  a, -b,
        -d,  c,  b,  a,
    );
    m
}

/// Max entrywise `|U R(θ) - R(θ) U|` for the block rotation `R(θ)`.
pub fn check_fo_pol_commutativity(p: &PolarizationParams, theta: f64) -> f64 {
    let u = unitary_pattern(p);
    let r = block_rotation_matrix(theta);
    (u * r - r * u).abs().max()
}

pub fn block_rotation_matrix(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    #[rustfmt::skip]
    let m = Matrix4::new(
        c, -s, 0.0, 0.0,
        s,  c, 0.0, 0.0,
        0.0, 0.0, c, -s,
        0.0, 0.0, s,  c,
    );
    m
}

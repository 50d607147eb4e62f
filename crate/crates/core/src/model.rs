//! Domain types shared across the crate: the Hurst model, off-diagonal time
//! pairs, regression coefficient quadruples and small d×d kernel matrices.

use thiserror::Error;

/// Relative gap below which a time pair is treated as diagonal. The pair
/// determinant degenerates there and every regression coefficient blows up.
pub const DIAGONAL_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hurst exponent must lie strictly inside (1/2, 1), got {0}")]
    InvalidHurst(f64),
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("time pair ({s}, {t}) is diagonal or touches an axis")]
    DiagonalPair { s: f64, t: f64 },
    #[error("ordered pair required (0 < s < t), got ({s}, {t})")]
    NotOrdered { s: f64, t: f64 },
    #[error("scale parameter must lie in (0, 1), got {0}")]
    InvalidScale(f64),
    #[error("grid is not strictly increasing from 0")]
    InvalidGrid,
    #[error("grid with {0} interior points exceeds the dense factorization budget ({1})")]
    GridTooLarge(usize, usize),
    #[error("covariance factorization failed even after jitter retry")]
    Factorization,
    #[error("grid step {dt} too coarse for averaging window {eps}")]
    GridTooCoarse { eps: f64, dt: f64 },
    #[error("path grid does not cover [0, {0}]")]
    GridTooShort(f64),
    #[error("partition point {0} is not a path grid point")]
    PartitionMismatch(f64),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("quadrature spec invalid: {0}")]
    InvalidQuadratureSpec(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureDiverged(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed path dump: {0}")]
    MalformedDump(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// The pair (H, d): Hurst exponent of the driving noise and its dimension.
///
/// Only the regular regime 1/2 < H < 1 is supported; boundary values are
/// rejected because every formula in the crate divides by quantities that
/// vanish at H = 1/2 or H = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstModel {
    h: f64,
    d: usize,
}

impl HurstModel {
    pub fn new(h: f64, d: usize) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) || !h.is_finite() {
            return Err(Error::InvalidHurst(h));
        }
        if d < 1 {
            return Err(Error::InvalidDimension);
        }
        Ok(Self { h, d })
    }

    /// Hurst exponent H.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// 2H, the exponent that actually appears in the covariance.
    pub fn two_h(&self) -> f64 {
        2.0 * self.h
    }
}

/// An off-diagonal time pair with positive entries.
///
/// Pairs closer to the diagonal than `DIAGONAL_REL_TOL` relative to the
/// larger time are rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexPoint {
    s: f64,
    t: f64,
}

impl SimplexPoint {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        if !(s > 0.0 && t > 0.0) || !s.is_finite() || !t.is_finite() {
            return Err(Error::DiagonalPair { s, t });
        }
        if (t - s).abs() < DIAGONAL_REL_TOL * s.max(t) {
            return Err(Error::DiagonalPair { s, t });
        }
        Ok(Self { s, t })
    }

    /// Strictly ordered constructor: requires 0 < s < t.
    pub fn ordered(s: f64, t: f64) -> Result<Self> {
        let p = Self::new(s, t)?;
        if s >= t {
            return Err(Error::NotOrdered { s, t });
        }
        Ok(p)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn is_ordered(&self) -> bool {
        self.s < self.t
    }

    /// |t - s|.
    pub fn gap(&self) -> f64 {
        (self.t - self.s).abs()
    }

    /// min(s, t).
    pub fn lo(&self) -> f64 {
        self.s.min(self.t)
    }

    /// max(s, t).
    pub fn hi(&self) -> f64 {
        self.s.max(self.t)
    }

    /// The same pair with the roles of s and t exchanged.
    pub fn swapped(&self) -> SimplexPoint {
        SimplexPoint {
            s: self.t,
            t: self.s,
        }
    }
}

/// A quadruple of regression weights (entries 11, 12, 21, 22).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoeffQuad {
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
}

impl CoeffQuad {
    pub fn is_finite(&self) -> bool {
        self.c11.is_finite() && self.c12.is_finite() && self.c21.is_finite() && self.c22.is_finite()
    }

    pub fn scale(&self, a: f64) -> CoeffQuad {
        CoeffQuad {
            c11: a * self.c11,
            c12: a * self.c12,
            c21: a * self.c21,
            c22: a * self.c22,
        }
    }
}

/// Conditioning values for one time pair: the d-vectors B_s and B_t.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub bs: Vec<f64>,
    pub bt: Vec<f64>,
}

impl PairSample {
    pub fn new(bs: Vec<f64>, bt: Vec<f64>) -> Result<Self> {
        if bs.len() != bt.len() || bs.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: bs.len().max(1),
                got: bt.len(),
            });
        }
        Ok(Self { bs, bt })
    }

    pub fn dim(&self) -> usize {
        self.bs.len()
    }
}

/// Dense row-major d×d matrix value of one of the kernels at a time pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    d: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d],
        }
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(f(i, j));
            }
        }
        Self { d, data }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.d + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Frobenius inner product with another matrix of the same size.
    pub fn dot(&self, other: &KernelMatrix) -> f64 {
        assert_eq!(self.d, other.d);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn sub(&self, other: &KernelMatrix) -> KernelMatrix {
        assert_eq!(self.d, other.d);
        KernelMatrix {
            d: self.d,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add_diagonal(&mut self, a: f64) {
        for i in 0..self.d {
            self.data[i * self.d + i] += a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// A scalar Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl EstimateWithCI {
    /// |value - reference| measured in units of the standard error.
    pub fn sigma_distance(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.std_error
    }

    /// Whether two independent estimates agree within k mutual standard errors.
    pub fn agrees_with(&self, other: &EstimateWithCI, k: f64) -> bool {
        let se = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        (self.value - other.value).abs() <= k * se
    }
}

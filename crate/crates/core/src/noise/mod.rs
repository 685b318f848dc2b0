//! Noise determination, covariance commitments and noise drawing.

mod commitment;

use serde::{Deserialize, Serialize};

use crate::numeric::{variance, Matrix, NumericError, Real, TraceRecorder, Vector};

pub use commitment::{commit_sigma, Commitment, ParseCommitmentError, MAGIC, VERSION};

/// Row-orthonormality tolerance for a supplied projection.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseError {
    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative variance at coordinate {index}")]
    NegativeVariance { index: usize },
    #[error("invalid noise parameters: {0}")]
    InvalidParams(String),
    #[error("malformed covariance encoding: {0}")]
    Malformed(String),
    #[error(transparent)]
    Numeric(NumericError),
}

impl From<NumericError> for NoiseError {
    fn from(e: NumericError) -> Self {
        match e {
            NumericError::TooFewSamples { needed, found } => Self::TooFewSamples { needed, found },
            NumericError::DimensionMismatch { expected, found } => {
                Self::DimensionMismatch { expected, found }
            }
            other => Self::Numeric(other),
        }
    }
}

/// Budget `beta`, sample count `m` and an optional orthonormal projection
/// (identity when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct NoiseParams<T = f64> {
    pub beta: T,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Matrix<T>>,
}

impl<T: Real> NoiseParams<T> {
    pub fn new(beta: T, m: usize) -> Result<Self, NoiseError> {
        let p = Self {
            beta,
            m,
            projection: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_projection(mut self, projection: Matrix<T>) -> Result<Self, NoiseError> {
        self.projection = Some(projection);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.beta.is_finite() && self.beta > T::zero()) {
            return Err(NoiseError::InvalidParams(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.m < 2 {
            return Err(NoiseError::TooFewSamples {
                needed: 2,
                found: self.m,
            });
        }
        if let Some(a) = &self.projection {
            if !a.is_square() {
                return Err(NoiseError::InvalidParams(format!(
                    "projection must be square, got {}x{}",
                    a.rows(),
                    a.cols()
                )));
            }
            if !a.has_orthonormal_rows(ORTHONORMAL_TOLERANCE) {
                return Err(NoiseError::InvalidParams(
                    "projection rows are not orthonormal".into(),
                ));
            }
        }
        Ok(())
    }

    /// The projection for output dimension `d`.
    pub fn basis(&self, d: usize) -> Result<Matrix<T>, NoiseError> {
        match &self.projection {
            Some(a) if a.rows() != d => Err(NoiseError::DimensionMismatch {
                expected: d,
                found: a.rows(),
            }),
            Some(a) => Ok(a.clone()),
            None => Ok(Matrix::identity(d)),
        }
    }
}

/// Diagonal noise covariance `diag(Σ)` expressed in an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T = f64> {
    diag: Vec<T>,
    basis: Matrix<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    pub fn new(diag: Vec<T>, basis: Matrix<T>) -> Result<Self, NoiseError> {
        if diag.is_empty() {
            return Err(NoiseError::Numeric(NumericError::Empty));
        }
        if !basis.is_square() || basis.rows() != diag.len() {
            return Err(NoiseError::DimensionMismatch {
                expected: diag.len(),
                found: basis.rows(),
            });
        }
        if let Some(index) = diag.iter().position(|v| !v.is_finite()) {
            return Err(NoiseError::Numeric(NumericError::NonFinite { index }));
        }
        if let Some(index) = diag.iter().position(|&v| v < T::zero()) {
            return Err(NoiseError::NegativeVariance { index });
        }
        Ok(Self { diag, basis })
    }

    pub fn diagonal(diag: Vec<T>) -> Result<Self, NoiseError> {
        let d = diag.len();
        if d == 0 {
            return Err(NoiseError::Numeric(NumericError::Empty));
        }
        Self::new(diag, Matrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    pub fn basis(&self) -> &Matrix<T> {
        &self.basis
    }

    /// Dense `Aᵀ·diag(Σ)·A` in the original coordinates, untraced.
    pub fn to_dense(&self) -> Matrix<T> {
        let scaled = Matrix::diagonal(&self.diag);
        let at = self.basis.transpose();
        at.matmul(&scaled)
            .and_then(|m| m.matmul(&self.basis))
            .expect("square factors of equal size")
    }

    /// Canonical encoding: `"PACS"`, version, `d` as u32 LE, the diagonal,
    /// then the basis row-major, each scalar as the LE bits of an `f64`.
    pub fn serialize(&self) -> Vec<u8> {
        let d = self.dim();
        let mut out = Vec::with_capacity(9 + 8 * (d + d * d));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(d as u32).to_le_bytes());
        for &v in self.diag.iter().chain(self.basis.entries()) {
            v.to_f64_lossy().write_le(&mut out);
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, NoiseError> {
        let malformed = |m: &str| NoiseError::Malformed(m.to_string());
        if bytes.len() < 9 {
            return Err(malformed("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(malformed("bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(NoiseError::Malformed(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let d = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        if d == 0 {
            return Err(malformed("zero dimension"));
        }
        let expected = d
            .checked_mul(d)
            .and_then(|dd| dd.checked_add(d))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(9))
            .ok_or_else(|| malformed("dimension overflow"))?;
        if bytes.len() != expected {
            return Err(NoiseError::Malformed(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let values: Vec<T> = bytes[9..]
            .chunks_exact(8)
            .map(|c| T::lit(f64::read_le(c)))
            .collect();
        let (diag, basis) = values.split_at(d);
        let basis = Matrix::new(d, d, basis.to_vec())?;
        Self::new(diag.to_vec(), basis)
    }
}

/// Per-coordinate variances of the projected samples turned into
/// `Σ[i] = √σᵢ · (Σₖ √σₖ) / (2β)`.
pub fn noise_determination<T: Real>(
    samples: &[Vector<T>],
    params: &NoiseParams<T>,
    rec: &mut TraceRecorder,
) -> Result<CovarianceMatrix<T>, NoiseError> {
    params.validate()?;
    if samples.len() < 2 {
        return Err(NoiseError::TooFewSamples {
            needed: 2,
            found: samples.len(),
        });
    }
    let d = samples[0].dim();
    for s in samples {
        s.ensure_dim(d)?;
    }
    let basis = params.basis(d)?;

    let mut projected = Vec::with_capacity(samples.len());
    for s in samples {
        projected.push(basis.mul_vec(s.as_slice(), rec)?);
    }

    let mut roots = Vec::with_capacity(d);
    let mut column = Vec::with_capacity(samples.len());
    for i in 0..d {
        column.clear();
        column.extend(projected.iter().map(|p| p[i]));
        let sigma = variance(&column, rec)?;
        roots.push(rec.sqrt(sigma));
    }
    let mut total = T::zero();
    for &r in &roots {
        total = rec.add(total, r);
    }
    let two_beta = rec.mul(T::lit(2.0), params.beta);
    let diag = roots
        .iter()
        .map(|&r| {
            let num = rec.mul(r, total);
            rec.div(num, two_beta)
        })
        .collect();
    CovarianceMatrix::new(diag, basis)
}

/// `B = Aᵀ · diag(√Σ) · z` for a standard-normal seed `z`.
pub fn draw_noise<T: Real>(
    sigma: &CovarianceMatrix<T>,
    z: &[T],
    rec: &mut TraceRecorder,
) -> Result<Vector<T>, NoiseError> {
    if z.len() != sigma.dim() {
        return Err(NoiseError::DimensionMismatch {
            expected: sigma.dim(),
            found: z.len(),
        });
    }
    let mut scaled = Vec::with_capacity(z.len());
    for (index, (&s, &zi)) in sigma.diag().iter().zip(z).enumerate() {
        let negative = rec.lt(s, T::zero());
        if negative {
            return Err(NoiseError::NegativeVariance { index });
        }
        let root = rec.sqrt(s);
        scaled.push(rec.mul(root, zi));
    }
    let b = sigma.basis().transpose_mul_vec(&scaled, rec)?;
    Ok(Vector::from_trusted(b))
}

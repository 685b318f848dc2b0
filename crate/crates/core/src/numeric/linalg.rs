//! Dense vectors, matrices and the Cholesky factorization.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::{ensure_finite, NumericError, Real, TraceRecorder};

/// Relative tolerance for the symmetry precondition of [`cholesky`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(
        serialize = "T: Real + Serialize",
        deserialize = "T: Real + Deserialize<'de>"
    )
)]
pub struct Vector<T = f64>(Vec<T>);

impl<T: Real> Vector<T> {
    /// Builds a vector, rejecting empty input and non-finite entries.
    pub fn new(values: Vec<T>) -> Result<Self, NumericError> {
        if values.is_empty() {
            return Err(NumericError::Empty);
        }
        ensure_finite(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self(vec![T::zero(); dim])
    }

    /// Wraps values produced inside a traced computation without re-validating.
    pub(crate) fn from_trusted(values: Vec<T>) -> Self {
        debug_assert!(!values.is_empty());
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    /// Euclidean norm, untraced.
    pub fn norm(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<(), NumericError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(NumericError::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Self {
        v.0
    }
}

impl<T: Real> TryFrom<Vec<T>> for Vector<T> {
    type Error = NumericError;

    fn try_from(values: Vec<T>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MatrixRepr<T>",
    into = "MatrixRepr<T>",
    bound(
        serialize = "T: Real + Serialize",
        deserialize = "T: Real + Deserialize<'de>"
    )
)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T: Real> TryFrom<MatrixRepr<T>> for Matrix<T> {
    type Error = NumericError;

    fn try_from(r: MatrixRepr<T>) -> Result<Self, Self::Error> {
        Self::new(r.rows, r.cols, r.entries)
    }
}

impl<T> From<Matrix<T>> for MatrixRepr<T> {
    fn from(m: Matrix<T>) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            entries: m.entries,
        }
    }
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self, NumericError> {
        if rows == 0 || cols == 0 {
            return Err(NumericError::Empty);
        }
        if entries.len() != rows * cols {
            return Err(NumericError::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        ensure_finite(&entries)?;
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NumericError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(NumericError::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        assert!(n > 0, "matrix dimension must be positive");
        let mut entries = vec![T::zero(); n * n];
        for (i, &v) in diag.iter().enumerate() {
            entries[i * n + i] = v;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Untraced product, for checks and verifier-side code.
    pub fn matmul(&self, other: &Self) -> Result<Self, NumericError> {
        if self.cols != other.rows {
            return Err(NumericError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut entries = vec![T::zero(); self.rows * other.cols];
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = T::zero();
                for k in 0..self.cols {
                    acc = acc + self.get(i, k) * other.get(k, j);
                }
                entries[i * other.cols + j] = acc;
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            entries,
        })
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// `true` when the rows are orthonormal: `|A·Aᵀ − I|` entrywise within `tol`.
    pub fn has_orthonormal_rows(&self, tol: f64) -> bool {
        let tol = T::lit(tol);
        for i in 0..self.rows {
            for j in 0..self.rows {
                let dot = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                let target = if i == j { T::one() } else { T::zero() };
                if (dot - target).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Traced `self · v`.
    pub fn mul_vec(&self, v: &[T], rec: &mut TraceRecorder) -> Result<Vec<T>, NumericError> {
        if v.len() != self.cols {
            return Err(NumericError::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| rec.dot(self.row(r), v)).collect())
    }

    /// Traced `selfᵀ · v`.
    pub fn transpose_mul_vec(
        &self,
        v: &[T],
        rec: &mut TraceRecorder,
    ) -> Result<Vec<T>, NumericError> {
        if v.len() != self.rows {
            return Err(NumericError::DimensionMismatch {
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = Vec::with_capacity(self.cols);
        for c in 0..self.cols {
            let mut acc = T::zero();
            for (r, &x) in v.iter().enumerate() {
                let p = rec.mul(self.get(r, c), x);
                acc = rec.add(acc, p);
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Lower-triangular factor with a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T = f64> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Real> LowerTriangular<T> {
    /// Validates the triangular shape and positive diagonal.
    pub fn new(matrix: Matrix<T>) -> Result<Self, NumericError> {
        if !matrix.is_square() {
            return Err(NumericError::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let n = matrix.rows();
        for i in 0..n {
            if matrix.get(i, i) <= T::zero() {
                return Err(NumericError::NotPositiveDefinite { pivot: i });
            }
            for j in i + 1..n {
                if matrix.get(i, j) != T::zero() {
                    return Err(NumericError::NotLowerTriangular { row: i, col: j });
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: matrix.entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.dim + col]
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            entries: self.entries.clone(),
        }
    }

    /// Untraced `A·Aᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let a = self.to_matrix();
        a.matmul(&a.transpose())
            .expect("square factor always multiplies with its transpose")
    }
}

/// Factors a symmetric positive-definite matrix as `A·Aᵀ` with `A` lower
/// triangular (Cholesky–Banachiewicz order, traced).
pub fn cholesky<T: Real>(
    sigma: &Matrix<T>,
    rec: &mut TraceRecorder,
) -> Result<LowerTriangular<T>, NumericError> {
    if !sigma.is_square() {
        return Err(NumericError::NotSquare {
            rows: sigma.rows(),
            cols: sigma.cols(),
        });
    }
    let n = sigma.rows();
    let scale = sigma
        .entries()
        .iter()
        .fold(T::zero(), |acc, &x| acc.max(x.abs()));
    let tol = T::lit(SYMMETRY_TOLERANCE) * scale;
    for i in 0..n {
        for j in i + 1..n {
            if (sigma.get(i, j) - sigma.get(j, i)).abs() > tol {
                return Err(NumericError::NotSymmetric { row: i, col: j });
            }
        }
    }

    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = sigma.get(i, j);
            for k in 0..j {
                let p = rec.mul(l[i * n + k], l[j * n + k]);
                acc = rec.sub(acc, p);
            }
            if i == j {
                // NaN also fails here
                if acc.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
                    return Err(NumericError::NotPositiveDefinite { pivot: i });
                }
                l[i * n + i] = rec.sqrt(acc);
            } else {
                l[i * n + j] = rec.div(acc, l[j * n + j]);
            }
        }
    }
    Ok(LowerTriangular { dim: n, entries: l })
}

/// Correlated Gaussian transform `A·z + μ` (traced).
pub fn correlate_noise<T: Real>(
    a: &LowerTriangular<T>,
    z: &Vector<T>,
    mu: &Vector<T>,
    rec: &mut TraceRecorder,
) -> Result<Vector<T>, NumericError> {
    z.ensure_dim(a.dim())?;
    mu.ensure_dim(a.dim())?;
    let n = a.dim();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = T::zero();
        for j in 0..=i {
            let p = rec.mul(a.get(i, j), z[j]);
            acc = rec.add(acc, p);
        }
        out.push(rec.add(acc, mu[i]));
    }
    Ok(Vector::from_trusted(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> TraceRecorder {
        TraceRecorder::new()
    }

    #[test]
    fn cholesky_identity() {
        let a = cholesky(&Matrix::<f64>::identity(3), &mut rec()).unwrap();
        assert_eq!(a.to_matrix(), Matrix::identity(3));
    }

    #[test]
    fn cholesky_diagonal_is_elementwise_sqrt() {
        let a = cholesky(&Matrix::diagonal(&[4.0, 9.0]), &mut rec()).unwrap();
        assert_eq!(a.to_matrix(), Matrix::diagonal(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_two_by_two() {
        let sigma = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let a = cholesky(&sigma, &mut rec()).unwrap();
        let expected = Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.to_matrix(), expected);
        // multiply back
        assert_eq!(a.reconstruct(), sigma);
    }

    #[test]
    fn cholesky_rejects_indefinite_and_asymmetric() {
        let indefinite = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(
            cholesky(&indefinite, &mut rec()),
            Err(NumericError::NotPositiveDefinite { pivot: 1 })
        );
        let asym = Matrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!(
            cholesky(&asym, &mut rec()),
            Err(NumericError::NotSymmetric { row: 0, col: 1 })
        );
        let zero = Matrix::diagonal(&[1.0, 0.0]);
        assert!(matches!(
            cholesky(&zero, &mut rec()),
            Err(NumericError::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn cholesky_in_single_precision() {
        let sigma = Matrix::from_rows(&[vec![4.0f32, 2.0], vec![2.0, 5.0]]).unwrap();
        let a = cholesky(&sigma, &mut rec()).unwrap();
        assert_eq!(a.get(1, 0), 1.0f32);
        assert_eq!(a.get(1, 1), 2.0f32);
    }

    #[test]
    fn correlate_examples() {
        let d = LowerTriangular::new(Matrix::diagonal(&[2.0, 3.0])).unwrap();
        let zero = Vector::zeros(2);
        assert_eq!(
            correlate_noise(&d, &zero, &zero, &mut rec()).unwrap(),
            Vector::zeros(2)
        );

        let id = LowerTriangular::new(Matrix::identity(2)).unwrap();
        let z = Vector::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(correlate_noise(&id, &z, &zero, &mut rec()).unwrap(), z);

        let a = LowerTriangular::new(Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 2.0]]).unwrap())
            .unwrap();
        let ones = Vector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(
            correlate_noise(&a, &ones, &zero, &mut rec())
                .unwrap()
                .into_inner(),
            vec![2.0, 3.0]
        );

        let short = Vector::new(vec![1.0]).unwrap();
        assert_eq!(
            correlate_noise(&a, &short, &zero, &mut rec()),
            Err(NumericError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn lower_triangular_validation() {
        let upper = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(
            LowerTriangular::new(upper),
            Err(NumericError::NotLowerTriangular { row: 0, col: 1 })
        );
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(Vector::<f64>::new(vec![]), Err(NumericError::Empty));
    }

    #[test]
    fn orthonormal_rows() {
        let (s, c) = (0.6, 0.8);
        let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        assert!(rot.has_orthonormal_rows(1e-12));
        assert!(!Matrix::diagonal(&[1.0, 2.0]).has_orthonormal_rows(1e-9));
    }

    #[test]
    fn serde_validates_shape() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Matrix<f64>>(&json).unwrap(), m);
        let bad = r#"{"rows":2,"cols":2,"entries":[1.0,2.0,3.0]}"#;
        assert!(serde_json::from_str::<Matrix<f64>>(bad).is_err());
        assert!(serde_json::from_str::<Vector<f64>>("[]").is_err());
        assert_eq!(
            serde_json::to_string(&Vector::new(vec![1.5]).unwrap()).unwrap(),
            "[1.5]"
        );
    }
}

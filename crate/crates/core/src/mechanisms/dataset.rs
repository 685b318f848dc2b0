use crate::numeric::{ensure_finite, Real, SeededRng};

use super::MechanismError;

/// `n × d` point set with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T = f64> {
    dim: usize,
    points: Vec<T>,
    labels: Option<Vec<usize>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(rows: Vec<Vec<T>>, labels: Option<Vec<usize>>) -> Result<Self, MechanismError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(MechanismError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::from_flat(dim, rows.concat(), labels)
    }

    pub fn from_flat(
        dim: usize,
        points: Vec<T>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, MechanismError> {
        if dim == 0 || points.is_empty() {
            return Err(MechanismError::Empty);
        }
        if !points.len().is_multiple_of(dim) {
            return Err(MechanismError::DimensionMismatch {
                expected: dim,
                found: points.len() % dim,
            });
        }
        ensure_finite(&points)?;
        let n = points.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(MechanismError::DimensionMismatch {
                    expected: n,
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            dim,
            points,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[T] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self {
            dim: self.dim,
            points,
            labels,
        }
    }

    /// Checks every label is below `classes`.
    pub fn ensure_labels_below(&self, classes: usize) -> Result<&[usize], MechanismError> {
        let labels = self.labels().ok_or(MechanismError::MissingLabels)?;
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(MechanismError::LabelOutOfRange {
                index,
                label,
                classes,
            });
        }
        Ok(labels)
    }
}

/// Uniform subset of exactly `⌊r·n⌋` points, drawn with a partial
/// Fisher–Yates shuffle and returned in original order. Verifier-side.
pub fn subsample<T: Real>(
    x: &Dataset<T>,
    ratio: f64,
    rng: &mut SeededRng,
) -> Result<Dataset<T>, MechanismError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(MechanismError::InvalidConfig(format!(
            "subsample ratio {ratio} outside (0, 1]"
        )));
    }
    let n = x.len();
    let take = (ratio * n as f64).floor() as usize;
    if take == 0 {
        return Err(MechanismError::EmptyResult);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..take {
        let j = i + rng.below((n - i) as u64) as usize;
        order.swap(i, j);
    }
    let mut chosen = order[..take].to_vec();
    chosen.sort_unstable();
    Ok(x.select(&chosen))
}

//! Fixed-epoch linear SVM trained by hinge-loss subgradient descent.

use serde::{Deserialize, Serialize};

use super::kmeans::default_ratio;
use super::{Dataset, MechanismError};
use crate::numeric::{Real, TraceRecorder, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_ratio")]
    pub subsample_ratio: f64,
}

impl SvmConfig {
    pub fn new(epochs: usize, learning_rate: f64, lambda: f64) -> Self {
        Self {
            epochs,
            learning_rate,
            lambda,
            subsample_ratio: default_ratio(),
        }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        if self.epochs == 0 {
            return Err(MechanismError::InvalidConfig(
                "epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(MechanismError::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(MechanismError::InvalidConfig(format!(
                "lambda {} must be non-negative",
                self.lambda
            )));
        }
        if !(self.subsample_ratio > 0.0 && self.subsample_ratio <= 1.0) {
            return Err(MechanismError::InvalidConfig(format!(
                "subsample ratio {} outside (0, 1]",
                self.subsample_ratio
            )));
        }
        Ok(())
    }
}

/// Raw `(w, b)` after `cfg.epochs` full passes. Labels 0/1 act as -1/+1.
///
/// Per point: `w ← w − η(λw − [y(w·x+b) < 1]·y·x)` and
/// `b ← b + η·[y(w·x+b) < 1]·y`, with `η = η₀ / (1 + λt)` at epoch `t`.
pub fn svm_train<T: Real>(
    x: &Dataset<T>,
    cfg: &SvmConfig,
    rec: &mut TraceRecorder,
) -> Result<(Vec<T>, T), MechanismError> {
    cfg.validate()?;
    let labels = x.ensure_labels_below(2)?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(MechanismError::DegenerateLabels);
    }

    let eta0 = T::lit(cfg.learning_rate);
    let lambda = T::lit(cfg.lambda);
    let two = T::lit(2.0);
    let mut w = vec![T::zero(); x.dim()];
    let mut b = T::zero();

    for epoch in 0..cfg.epochs {
        let t = T::from_count(epoch);
        let lt = rec.mul(lambda, t);
        let denom = rec.add(T::one(), lt);
        let eta = rec.div(eta0, denom);
        for (p, &label) in x.points().zip(labels) {
            let positive = rec.eq(label, 1);
            let ind: T = rec.indicator(positive);
            let twice = rec.mul(two, ind);
            let y = rec.sub(twice, T::one());

            let score = rec.dot(&w, p);
            let score = rec.add(score, b);
            let margin = rec.mul(y, score);
            let violated = rec.lt(margin, T::one());
            let mask: T = rec.indicator(violated);
            let my = rec.mul(mask, y);

            for (wj, &xj) in w.iter_mut().zip(p) {
                let reg = rec.mul(lambda, *wj);
                let pull = rec.mul(my, xj);
                let grad = rec.sub(reg, pull);
                let step = rec.mul(eta, grad);
                *wj = rec.sub(*wj, step);
            }
            let step = rec.mul(eta, my);
            b = rec.add(b, step);
        }
    }
    Ok((w, b))
}

/// Trains and returns the canonical `(w, b)`.
pub fn svm_fixed<T: Real>(
    x: &Dataset<T>,
    cfg: &SvmConfig,
    rec: &mut TraceRecorder,
) -> Result<(Vector<T>, T), MechanismError> {
    let (w, b) = svm_train(x, cfg, rec)?;
    canonicalize_svm(&w, b, rec)
}

/// Scales `(w, b)` to `‖w‖ = 1` and flips both signs so that the first
/// nonzero coordinate of `w` is positive.
pub fn canonicalize_svm<T: Real>(
    w: &[T],
    b: T,
    rec: &mut TraceRecorder,
) -> Result<(Vector<T>, T), MechanismError> {
    if w.is_empty() {
        return Err(MechanismError::Empty);
    }
    let sq = rec.dot(w, w);
    let norm = rec.sqrt(sq);
    let zero = rec.eq(norm, T::zero());
    if zero || !norm.is_finite() {
        return Err(MechanismError::ZeroVector);
    }

    let mut decided = false;
    let mut sign = T::one();
    for &v in w {
        let negative = rec.lt(v, T::zero());
        let candidate = rec.select(negative, -T::one(), T::one());
        sign = rec.select(decided, sign, candidate);
        let is_zero = rec.eq(v, T::zero());
        let nonzero = rec.not(is_zero);
        decided = rec.or(decided, nonzero);
    }
    let scale = rec.div(sign, norm);

    let out: Vec<T> = w.iter().map(|&v| rec.mul(v, scale)).collect();
    let b = rec.mul(b, scale);
    Ok((Vector::from_trusted(out), b))
}

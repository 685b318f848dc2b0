//! Monte-Carlo PAC game: `X ← D`, the adversary sees `M(X) + B` and wins
//! when its guess matches `X`.

use serde::Serialize;

use super::ProtocolError;
use crate::noise::{draw_noise, CovarianceMatrix};
use crate::numeric::{SeededRng, TraceRecorder};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub type Matcher<X> = Box<dyn Fn(&X, &X) -> bool>;
pub type Sampler<X> = Box<dyn Fn(&mut SeededRng) -> X>;

pub struct GameConfig<X> {
    /// Target failure bound; reported alongside the empirical rate.
    pub delta: f64,
    pub trials: usize,
    pub matcher: Matcher<X>,
    pub distribution: Sampler<X>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameReport {
    pub rate: f64,
    pub wins: usize,
    pub trials: usize,
    pub wilson_ci95: [f64; 2],
    pub delta: f64,
}

pub fn exact_match<X: PartialEq>(a: &X, b: &X) -> bool {
    a == b
}

/// Wilson score interval for `wins / trials` at normal quantile `z`.
pub fn wilson_interval(wins: usize, trials: usize, z: f64) -> [f64; 2] {
    if trials == 0 {
        return [0.0, 1.0];
    }
    let n = trials as f64;
    let p = wins as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

/// Adversary guessing the candidate whose mechanism output is nearest to the
/// observation; ties go to the earlier candidate.
pub fn nearest_candidate<X: Clone>(
    candidates: Vec<X>,
    mechanism: impl Fn(&X) -> Vec<f64>,
) -> impl Fn(&[f64]) -> X {
    let images: Vec<Vec<f64>> = candidates.iter().map(&mechanism).collect();
    move |y: &[f64]| {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, img) in images.iter().enumerate() {
            let dist: f64 = img.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        candidates[best].clone()
    }
}

/// Plays `cfg.trials` games. Secrets come from one stream and noise from
/// another, so runs with and without noise see the same secrets.
pub fn simulate_pac_game<X>(
    mechanism: &dyn Fn(&X) -> Vec<f64>,
    noise: Option<&CovarianceMatrix<f64>>,
    adversary: &dyn Fn(&[f64]) -> X,
    cfg: &GameConfig<X>,
    seed: u64,
) -> Result<GameReport, ProtocolError> {
    if cfg.trials == 0 {
        return Err(ProtocolError::InvalidInput(
            "trials must be positive".into(),
        ));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(ProtocolError::InvalidInput(format!(
            "delta {} outside (0, 1)",
            cfg.delta
        )));
    }
    let root = SeededRng::from_u64(seed);
    let mut secrets = root.fork("secrets");
    let mut noise_rng = root.fork("noise");
    let mut wins = 0;
    for _ in 0..cfg.trials {
        let x = (cfg.distribution)(&mut secrets);
        let mut y = mechanism(&x);
        if let Some(sigma) = noise {
            let z: Vec<f64> = (0..sigma.dim())
                .map(|_| noise_rng.standard_normal())
                .collect();
            let b = draw_noise(sigma, &z, &mut TraceRecorder::new())?;
            for (v, e) in y.iter_mut().zip(b.iter()) {
                *v += e;
            }
        }
        let guess = adversary(&y);
        if (cfg.matcher)(&x, &guess) {
            wins += 1;
        }
    }
    Ok(GameReport {
        rate: wins as f64 / cfg.trials as f64,
        wins,
        trials: cfg.trials,
        wilson_ci95: wilson_interval(wins, cfg.trials, Z95),
        delta: cfg.delta,
    })
}

//! Cycle-count sweeps over one shape parameter at a time.
//!
//! A point's cost is the traced cost of evaluating the mechanism on `m`
//! sample inputs, the loop that dominates noise generation. Inputs are
//! synthetic and seeded, so every row is reproducible.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mechanisms::{
    evaluate, subsample, Dataset, DbStatsConfig, DbTable, KMeansConfig, MechanismConfig,
    MechanismError, MechanismInput, MechanismSpec, SvmConfig,
};
use crate::numeric::{SeededRng, TraceDigest, TraceRecorder};
use crate::query::{random_formula, Attribute, AttributeKind, AttributeSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sweep {
    M,
    K,
    D,
    N,
    Iters,
    Epochs,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Self::M => "M",
            Self::K => "K",
            Self::D => "d",
            Self::N => "n",
            Self::Iters => "iters",
            Self::Epochs => "epochs",
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sweep {
    type Err = MechanismError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "M" | "m" => Ok(Self::M),
            "K" | "k" => Ok(Self::K),
            "d" | "D" => Ok(Self::D),
            "n" | "N" => Ok(Self::N),
            "iters" => Ok(Self::Iters),
            "epochs" => Ok(Self::Epochs),
            other => Err(MechanismError::InvalidConfig(format!(
                "unknown sweep variable `{other}` (expected M, K, d, n, iters or epochs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMechanism {
    Kmeans,
    Svm,
    Dbstats,
}

impl FromStr for BenchMechanism {
    type Err = MechanismError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmeans" => Ok(Self::Kmeans),
            "svm" => Ok(Self::Svm),
            "dbstats" => Ok(Self::Dbstats),
            other => Err(MechanismError::InvalidConfig(format!(
                "unknown mechanism `{other}`"
            ))),
        }
    }
}

/// Base shape; the swept field is overridden per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub mechanism: BenchMechanism,
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub iters: usize,
    pub epochs: usize,
    pub subsample_ratio: f64,
    pub seed: u64,
}

impl BenchSettings {
    pub fn new(mechanism: BenchMechanism) -> Self {
        Self {
            mechanism,
            m: 10,
            n: 100,
            d: 2,
            k: 2,
            iters: 10,
            epochs: 50,
            subsample_ratio: 0.5,
            seed: 1,
        }
    }

    fn with(&self, sweep: Sweep, value: usize) -> Self {
        let mut s = self.clone();
        match sweep {
            Sweep::M => s.m = value,
            Sweep::K => s.k = value,
            Sweep::D => s.d = value,
            Sweep::N => s.n = value,
            Sweep::Iters => s.iters = value,
            Sweep::Epochs => s.epochs = value,
        }
        s
    }

    fn applies(&self, sweep: Sweep) -> bool {
        match (self.mechanism, sweep) {
            (_, Sweep::M | Sweep::N) => true,
            (BenchMechanism::Kmeans, Sweep::K | Sweep::D | Sweep::Iters) => true,
            (BenchMechanism::Svm, Sweep::D | Sweep::Epochs) => true,
            (BenchMechanism::Dbstats, _) => false,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub sweep: Sweep,
    pub value: usize,
    pub cycles: u64,
    pub digest: TraceDigest,
}

pub const CSV_HEADER: &str = "sweep,value,cycles,digest";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.sweep, self.value, self.cycles, self.digest
        )
    }
}

/// Points labelled `j mod classes`, each centred on its class.
fn synthetic_points(n: usize, d: usize, classes: usize, rng: &mut SeededRng) -> Dataset<f64> {
    let mut points = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let class = j % classes;
        for axis in 0..d {
            let centre = if axis % classes == class { 6.0 } else { 0.0 };
            points.push(centre + rng.standard_normal());
        }
        labels.push(class);
    }
    Dataset::from_flat(d, points, Some(labels)).expect("synthetic points are well formed")
}

fn synthetic_table(n: usize, rng: &mut SeededRng) -> DbTable<f64> {
    let schema = AttributeSchema::new(vec![
        Attribute::new("Age", AttributeKind::Integer, 17.0, 65.0),
        Attribute::new("Wealth", AttributeKind::Integer, 6000.0, 140000.0),
    ])
    .expect("fixed schema");
    let rows = (0..n)
        .map(|_| {
            vec![
                rng.int_inclusive(17, 65) as f64,
                rng.int_inclusive(6000, 140000) as f64,
            ]
        })
        .collect();
    DbTable::new(schema, rows).expect("rows within spans")
}

/// Traced cost of evaluating the mechanism on `settings.m` sample inputs.
pub fn measure(settings: &BenchSettings) -> Result<(u64, TraceDigest), MechanismError> {
    let mut rng = SeededRng::from_u64(settings.seed);
    let mut rec = TraceRecorder::new();
    match settings.mechanism {
        BenchMechanism::Kmeans | BenchMechanism::Svm => {
            let config = if settings.mechanism == BenchMechanism::Kmeans {
                let mut c = KMeansConfig::new(settings.k, settings.iters);
                c.subsample_ratio = settings.subsample_ratio;
                MechanismConfig::Kmeans(c)
            } else {
                let mut c = SvmConfig::new(settings.epochs, 0.05, 0.01);
                c.subsample_ratio = settings.subsample_ratio;
                MechanismConfig::Svm(c)
            };
            config.validate()?;
            let classes = if settings.mechanism == BenchMechanism::Kmeans {
                settings.k
            } else {
                2
            };
            let data = synthetic_points(settings.n, settings.d, classes, &mut rng);
            for _ in 0..settings.m {
                let x = subsample(&data, settings.subsample_ratio, &mut rng)?;
                evaluate::<f64>(&config, None, &MechanismInput::Points(x), &mut rec)?;
            }
        }
        BenchMechanism::Dbstats => {
            let table = synthetic_table(settings.n, &mut rng);
            let spec =
                MechanismSpec::new(vec!["average of Age".parse()?, "median of Wealth".parse()?])?;
            let config = MechanismConfig::Dbstats(DbStatsConfig { spec });
            for _ in 0..settings.m {
                let f = random_formula(table.schema(), &mut rng);
                evaluate(&config, Some(&table), &MechanismInput::Filter(f), &mut rec)?;
            }
        }
    }
    Ok((rec.cycle_count(), rec.digest()))
}

pub fn run_sweep(
    settings: &BenchSettings,
    sweep: Sweep,
    values: &[usize],
) -> Result<Vec<BenchRow>, MechanismError> {
    if !settings.applies(sweep) {
        return Err(MechanismError::InvalidConfig(format!(
            "sweep `{sweep}` does not apply to this mechanism"
        )));
    }
    values
        .iter()
        .map(|&value| {
            let (cycles, digest) = measure(&settings.with(sweep, value))?;
            Ok(BenchRow {
                sweep,
                value,
                cycles,
                digest,
            })
        })
        .collect()
}

/// Largest deviation from the line through the first two rows.
pub fn affine_residual(rows: &[BenchRow]) -> Option<i128> {
    let (a, b) = (rows.first()?, rows.get(1)?);
    let dx = b.value as i128 - a.value as i128;
    let dy = b.cycles as i128 - a.cycles as i128;
    if dx == 0 {
        return None;
    }
    rows.iter()
        .map(|r| {
            let x = r.value as i128 - a.value as i128;
            // compare cross-multiplied to stay in integers
            (r.cycles as i128 - a.cycles as i128) * dx - dy * x
        })
        .map(i128::abs)
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmeans_sweeps_are_affine() {
        let s = BenchSettings::new(BenchMechanism::Kmeans);
        let rows = run_sweep(&s, Sweep::M, &[1, 2, 3, 7]).unwrap();
        assert_eq!(affine_residual(&rows), Some(0));
        let rows = run_sweep(&s, Sweep::K, &[2, 3, 4, 6]).unwrap();
        assert_eq!(affine_residual(&rows), Some(0));
        let rows = run_sweep(&s, Sweep::D, &[1, 2, 5]).unwrap();
        assert_eq!(affine_residual(&rows), Some(0));
        let rows = run_sweep(&s, Sweep::Iters, &[1, 2, 5]).unwrap();
        assert_eq!(affine_residual(&rows), Some(0));
    }

    #[test]
    fn dbstats_rows_monotone() {
        let mut s = BenchSettings::new(BenchMechanism::Dbstats);
        s.m = 2;
        let rows = run_sweep(&s, Sweep::N, &[10, 20, 40, 64, 100]).unwrap();
        assert!(rows.windows(2).all(|w| w[0].cycles <= w[1].cycles));
        assert!(run_sweep(&s, Sweep::K, &[2]).is_err());
    }

    #[test]
    fn sweep_names() {
        assert_eq!("d".parse::<Sweep>().unwrap(), Sweep::D);
        assert!("x".parse::<Sweep>().is_err());
        let row = BenchRow {
            sweep: Sweep::M,
            value: 3,
            cycles: 10,
            digest: TraceDigest(1),
        };
        assert_eq!(row.csv_line(), "M,3,10,0000000000000001");
    }
}

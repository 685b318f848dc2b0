//! Fixed-trace mechanisms: K-means, linear SVM and filtered table statistics.

mod dataset;
mod dbstats;
mod kmeans;
mod svm;

use serde::{Deserialize, Serialize};

use crate::numeric::{NumericError, Real, TraceRecorder, Vector};
use crate::query::{Formula, QueryError};

pub use dataset::{subsample, Dataset};
pub use dbstats::{
    bitonic_sort, db_stat_eval, DbStats, DbStatsConfig, DbTable, MechanismSpec, SpecEntry,
};
pub use kmeans::{
    canonicalize_kmeans, kmeans_fixed, kmeans_train, ClusterGroups, KMeansConfig, KMeansModel,
};
pub use svm::{canonicalize_svm, svm_fixed, svm_train, SvmConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MechanismError {
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("all points carry the same label")]
    DegenerateLabels,
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("label {label} at row {index} is outside 0..{classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("weight vector is zero")]
    ZeroVector,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty dataset")]
    Empty,
    #[error("subsample would be empty")]
    EmptyResult,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Which mechanism to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MechanismConfig {
    Kmeans(KMeansConfig),
    Svm(SvmConfig),
    Dbstats(DbStatsConfig),
}

impl MechanismConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Kmeans(_) => "kmeans",
            Self::Svm(_) => "svm",
            Self::Dbstats(_) => "dbstats",
        }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        match self {
            Self::Kmeans(c) => c.validate(),
            Self::Svm(c) => c.validate(),
            Self::Dbstats(c) => c.spec.validate(),
        }
    }

    /// Output dimension for inputs of point dimension `d` (ignored for
    /// table statistics).
    pub fn output_dim(&self, d: usize) -> usize {
        match self {
            Self::Kmeans(c) => c.k * d,
            Self::Svm(_) => d + 1,
            Self::Dbstats(c) => c.spec.output_dim(),
        }
    }

    /// Subsample ratio used for phase-one training sets, if any.
    pub fn subsample_ratio(&self) -> Option<f64> {
        match self {
            Self::Kmeans(c) => Some(c.subsample_ratio),
            Self::Svm(c) => Some(c.subsample_ratio),
            Self::Dbstats(_) => None,
        }
    }
}

/// One mechanism input: a training set for the ML mechanisms or a filter
/// box for table statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismInput<T = f64> {
    Points(Dataset<T>),
    Filter(Formula<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutput<T = f64> {
    pub values: Vector<T>,
    /// Number of matching rows; table statistics only.
    pub match_count: Option<usize>,
}

/// Runs `config` on `input`. Table statistics read rows from `table`.
pub fn evaluate<T: Real>(
    config: &MechanismConfig,
    table: Option<&DbTable<T>>,
    input: &MechanismInput<T>,
    rec: &mut TraceRecorder,
) -> Result<MechanismOutput<T>, MechanismError> {
    match (config, input) {
        (MechanismConfig::Kmeans(cfg), MechanismInput::Points(x)) => Ok(MechanismOutput {
            values: kmeans_fixed(x, cfg, rec)?,
            match_count: None,
        }),
        (MechanismConfig::Svm(cfg), MechanismInput::Points(x)) => {
            let (w, b) = svm_fixed(x, cfg, rec)?;
            let mut values = w.into_inner();
            values.push(b);
            Ok(MechanismOutput {
                values: Vector::from_trusted(values),
                match_count: None,
            })
        }
        (MechanismConfig::Dbstats(cfg), MechanismInput::Filter(f)) => {
            let table = table.ok_or_else(|| {
                MechanismError::InvalidConfig("table statistics need a table".into())
            })?;
            let stats = db_stat_eval(table, &cfg.spec, f, rec)?;
            Ok(MechanismOutput {
                values: stats.values,
                match_count: Some(stats.match_count),
            })
        }
        (cfg, _) => Err(MechanismError::InvalidConfig(format!(
            "input kind does not fit mechanism `{}`",
            cfg.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_shapes() {
        let cfg: MechanismConfig =
            serde_json::from_str(r#"{"kind":"kmeans","k":3,"iters":5}"#).unwrap();
        assert_eq!(cfg, MechanismConfig::Kmeans(KMeansConfig::new(3, 5)));
        assert_eq!(cfg.output_dim(2), 6);

        let cfg: MechanismConfig = serde_json::from_str(
            r#"{"kind":"dbstats","spec":["average of Age","median of Wealth"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.output_dim(0), 2);
        let back: MechanismConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn mismatched_input_is_rejected() {
        let cfg = MechanismConfig::Kmeans(KMeansConfig::new(2, 1));
        let f = Formula::new(vec![0.0, 1.0]).unwrap();
        let err = evaluate::<f64>(
            &cfg,
            None,
            &MechanismInput::Filter(f),
            &mut TraceRecorder::new(),
        );
        assert!(matches!(err, Err(MechanismError::InvalidConfig(_))));
    }
}

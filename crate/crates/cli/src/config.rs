use std::path::{Path, PathBuf};

use pacproof::io::{read_dataset, read_json, read_schema, read_table};
use pacproof::mechanisms::MechanismConfig;
use pacproof::noise::NoiseParams;
use pacproof::protocol::{PrivateData, ProtocolConfig, Visibility};
use serde::Deserialize;

use crate::error::CliError;

/// One deployment: mechanism, noise budget, seed and artifact paths.
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mechanism: MechanismConfig,
    pub noise: NoiseParams<f64>,
    #[serde(default)]
    pub input_visibility: Option<Visibility>,
    /// Seeds the verifier's phase-one sample inputs.
    pub seed: u64,
    pub data: PathBuf,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    pub sigma: PathBuf,
    pub proof: PathBuf,
    #[serde(default)]
    pub query_proof: Option<PathBuf>,
    #[serde(default)]
    pub commitment: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = read_json(path).map_err(CliError::config)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data);
        resolve(&mut cfg.sigma);
        resolve(&mut cfg.proof);
        for p in [&mut cfg.schema, &mut cfg.query_proof, &mut cfg.commitment]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        cfg.mechanism.validate().map_err(CliError::config)?;
        cfg.noise.validate().map_err(CliError::config)?;
        if matches!(cfg.mechanism, MechanismConfig::Dbstats(_)) && cfg.schema.is_none() {
            return Err(CliError::config("dbstats needs a `schema` path"));
        }
        Ok(cfg)
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            mechanism: self.mechanism.clone(),
            noise: self.noise.clone(),
            input_visibility: self.input_visibility,
        }
    }

    pub fn load_data(&self) -> Result<PrivateData, CliError> {
        match (&self.mechanism, &self.schema) {
            (MechanismConfig::Dbstats(_), Some(schema)) => {
                let schema = read_schema(schema).map_err(CliError::data)?;
                let table = read_table(&self.data, &schema).map_err(CliError::data)?;
                Ok(PrivateData::Table(table))
            }
            _ => {
                let x = read_dataset(&self.data, self.label_column.as_deref())
                    .map_err(CliError::data)?;
                Ok(PrivateData::Points(x))
            }
        }
    }
}

/// Game setup: a finite domain `0..domain`, a mechanism over it and
/// isotropic Gaussian noise of the given variance.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub domain: u64,
    #[serde(default)]
    pub mechanism: GameMechanism,
    #[serde(default)]
    pub noise_variance: f64,
    pub trials: usize,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameMechanism {
    #[default]
    Identity,
    /// `x / 2`, two secrets per output.
    Halve,
}

impl GameFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let g: GameFile = read_json(path).map_err(CliError::config)?;
        if g.trials == 0 {
            return Err(CliError::config("trials must be positive"));
        }
        if g.domain == 0 {
            return Err(CliError::config("domain must be non-empty"));
        }
        if !(g.noise_variance >= 0.0 && g.noise_variance.is_finite()) {
            return Err(CliError::config(
                "noise_variance must be finite and non-negative",
            ));
        }
        if !(g.delta > 0.0 && g.delta < 1.0) {
            return Err(CliError::config("delta must lie in (0, 1)"));
        }
        Ok(g)
    }
}

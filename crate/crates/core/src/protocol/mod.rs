//! Two-phase prover/verifier protocol.
//!
//! Phase one evaluates the mechanism on `m` sample inputs, derives the noise
//! covariance `Σ` and publishes only its commitment. Phase two answers a
//! query with `M(x) + B`, where `B` is drawn from the stored `Σ` and a seed
//! supplied by the verifier, after checking `Σ` against the commitment.
//! Both phases emit a [`Proof`] through a [`ProofBackend`].

mod backend;
mod encoding;
mod game;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mechanisms::{
    evaluate, subsample, Dataset, DbTable, MechanismConfig, MechanismError, MechanismInput,
};
use crate::noise::{
    commit_sigma, draw_noise, noise_determination, Commitment, CovarianceMatrix, NoiseError,
    NoiseParams,
};
use crate::numeric::{SeededRng, TraceRecorder, Vector};
use crate::query::{random_formula, AttributeSchema};

pub use backend::{
    canonical_trace, verify_proof, Proof, ProofBackend, PublicIo, SimulatedBackend, Statement,
    Verdict, SIMULATED_TAG,
};
pub use encoding::{decode_inputs, encode_inputs, PublicInput};
pub use game::{
    exact_match, nearest_candidate, simulate_pac_game, wilson_interval, GameConfig, GameReport,
};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("no covariance stored; run noise generation first")]
    MissingSigma,
    #[error("commitment mismatch: stored {stored}, claimed {claimed}")]
    CommitmentMismatch {
        stored: Commitment,
        claimed: Commitment,
    },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed public inputs: {0}")]
    Encoding(String),
}

/// Whether query inputs enter the public transcript or only their shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NoiseGeneration,
    Query,
}

/// Mechanism, noise parameters and input visibility of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mechanism: MechanismConfig,
    pub noise: NoiseParams<f64>,
    /// Defaults to public for table statistics and private otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_visibility: Option<Visibility>,
}

impl ProtocolConfig {
    pub fn new(mechanism: MechanismConfig, noise: NoiseParams<f64>) -> Self {
        Self {
            mechanism,
            noise,
            input_visibility: None,
        }
    }

    pub fn visibility(&self) -> Visibility {
        self.input_visibility.unwrap_or(match self.mechanism {
            MechanismConfig::Dbstats(_) => Visibility::Public,
            _ => Visibility::Private,
        })
    }
}

/// Public shape of the prover's private data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataShape {
    Points {
        n: usize,
        d: usize,
        labeled: bool,
    },
    Table {
        rows: usize,
        schema: AttributeSchema,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrivateData {
    Points(Dataset<f64>),
    Table(DbTable<f64>),
}

impl PrivateData {
    pub fn shape(&self) -> DataShape {
        match self {
            Self::Points(x) => DataShape::Points {
                n: x.len(),
                d: x.dim(),
                labeled: x.labels().is_some(),
            },
            Self::Table(t) => DataShape::Table {
                rows: t.len(),
                schema: t.schema().clone(),
            },
        }
    }

    fn table(&self) -> Option<&DbTable<f64>> {
        match self {
            Self::Table(t) => Some(t),
            Self::Points(_) => None,
        }
    }
}

/// Everything that fixes a circuit: its hash is the program id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramDescriptor {
    pub version: u32,
    pub phase: Phase,
    pub mechanism: MechanismConfig,
    pub noise: NoiseParams<f64>,
    pub data_shape: DataShape,
    /// Number of mechanism inputs the program consumes.
    pub inputs: usize,
    pub output_dim: usize,
    pub input_visibility: Visibility,
}

impl ProgramDescriptor {
    /// Lowercase hex SHA-256 of the descriptor's JSON encoding.
    pub fn program_id(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("descriptor serializes");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn point_dim(&self) -> usize {
        match &self.data_shape {
            DataShape::Points { d, .. } => *d,
            DataShape::Table { .. } => 0,
        }
    }
}

/// Prover-side session: private data plus the covariance once phase one ran.
#[derive(Debug, Clone)]
pub struct ProverState {
    config: ProtocolConfig,
    data: PrivateData,
    sigma: Option<CovarianceMatrix<f64>>,
}

impl ProverState {
    pub fn new(config: ProtocolConfig, data: PrivateData) -> Result<Self, ProtocolError> {
        config.mechanism.validate()?;
        config.noise.validate()?;
        let fits = matches!(
            (&config.mechanism, &data),
            (MechanismConfig::Dbstats(_), PrivateData::Table(_))
                | (MechanismConfig::Kmeans(_), PrivateData::Points(_))
                | (MechanismConfig::Svm(_), PrivateData::Points(_))
        );
        if !fits {
            return Err(ProtocolError::InvalidInput(format!(
                "mechanism `{}` does not fit the supplied data",
                config.mechanism.name()
            )));
        }
        Ok(Self {
            config,
            data,
            sigma: None,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn data(&self) -> &PrivateData {
        &self.data
    }

    /// Stored covariance (prover-private).
    pub fn sigma(&self) -> Option<&CovarianceMatrix<f64>> {
        self.sigma.as_ref()
    }

    /// Restores a covariance saved by an earlier session.
    pub fn load_sigma(&mut self, sigma: CovarianceMatrix<f64>) -> Result<(), ProtocolError> {
        let expected = self.output_dim();
        if sigma.dim() != expected {
            return Err(NoiseError::DimensionMismatch {
                expected,
                found: sigma.dim(),
            }
            .into());
        }
        self.sigma = Some(sigma);
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        let d = match &self.data {
            PrivateData::Points(x) => x.dim(),
            PrivateData::Table(_) => 0,
        };
        self.config.mechanism.output_dim(d)
    }

    pub fn descriptor(&self, phase: Phase, inputs: usize) -> ProgramDescriptor {
        ProgramDescriptor {
            version: PROTOCOL_VERSION,
            phase,
            mechanism: self.config.mechanism.clone(),
            noise: self.config.noise.clone(),
            data_shape: self.data.shape(),
            inputs,
            output_dim: self.output_dim(),
            input_visibility: self.config.visibility(),
        }
    }

    /// The verifier's `m` phase-one inputs: random subsamples of the
    /// training set, or random filter boxes over the table schema.
    pub fn sample_inputs(
        &self,
        rng: &mut SeededRng,
    ) -> Result<Vec<MechanismInput<f64>>, ProtocolError> {
        let m = self.config.noise.m;
        match &self.data {
            PrivateData::Points(x) => {
                let ratio = self.config.mechanism.subsample_ratio().unwrap_or(1.0);
                (0..m)
                    .map(|_| Ok(MechanismInput::Points(subsample(x, ratio, rng)?)))
                    .collect()
            }
            PrivateData::Table(t) => Ok((0..m)
                .map(|_| MechanismInput::Filter(random_formula(t.schema(), rng)))
                .collect()),
        }
    }

    fn check_input(&self, input: &MechanismInput<f64>) -> Result<(), ProtocolError> {
        if let (MechanismInput::Points(x), PrivateData::Points(data)) = (input, &self.data) {
            if x.dim() != data.dim() {
                return Err(ProtocolError::InvalidInput(format!(
                    "input dimension {} differs from data dimension {}",
                    x.dim(),
                    data.dim()
                )));
            }
            if x.labels().is_some() != data.labels().is_some() {
                return Err(ProtocolError::InvalidInput(
                    "input and data disagree on labels".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Phase-one circuit: mechanism on every input, noise determination, commit.
pub(crate) fn noise_program(
    mechanism: &MechanismConfig,
    params: &NoiseParams<f64>,
    table: Option<&DbTable<f64>>,
    inputs: &[MechanismInput<f64>],
    rec: &mut TraceRecorder,
) -> Result<(CovarianceMatrix<f64>, Commitment), ProtocolError> {
    let mut outputs = Vec::with_capacity(inputs.len());
    for x in inputs {
        outputs.push(evaluate(mechanism, table, x, rec)?.values);
    }
    let sigma = noise_determination(&outputs, params, rec)?;
    let commitment = commit_sigma(&sigma, rec);
    Ok((sigma, commitment))
}

/// Phase-two circuit: recommit, compare, evaluate, add noise.
pub(crate) fn query_program(
    mechanism: &MechanismConfig,
    table: Option<&DbTable<f64>>,
    x: &MechanismInput<f64>,
    sigma: &CovarianceMatrix<f64>,
    seed: &[f64],
    claimed: &Commitment,
    rec: &mut TraceRecorder,
) -> Result<(Vector<f64>, Option<usize>), ProtocolError> {
    let stored = commit_sigma(sigma, rec);
    if stored != *claimed {
        return Err(ProtocolError::CommitmentMismatch {
            stored,
            claimed: *claimed,
        });
    }
    let out = evaluate(mechanism, table, x, rec)?;
    let noise = draw_noise(sigma, seed, rec)?;
    let noised: Vec<f64> = out
        .values
        .iter()
        .zip(noise.iter())
        .map(|(&v, &b)| rec.add(v, b))
        .collect();
    Ok((
        Vector::new(noised).map_err(NoiseError::from)?,
        out.match_count,
    ))
}

/// Phase one: stores `Σ` in the prover and returns its commitment and proof.
pub fn run_noise_generation(
    prover: &mut ProverState,
    sample_inputs: &[MechanismInput<f64>],
    backend: &dyn ProofBackend,
) -> Result<(Commitment, Proof), ProtocolError> {
    if sample_inputs.len() != prover.config.noise.m {
        return Err(ProtocolError::InvalidInput(format!(
            "expected {} sample inputs, got {}",
            prover.config.noise.m,
            sample_inputs.len()
        )));
    }
    for x in sample_inputs {
        prover.check_input(x)?;
    }
    let mut rec = TraceRecorder::new();
    let (sigma, commitment) = noise_program(
        &prover.config.mechanism,
        &prover.config.noise,
        prover.data.table(),
        sample_inputs,
        &mut rec,
    )?;
    prover.sigma = Some(sigma);
    let statement = Statement {
        program: prover.descriptor(Phase::NoiseGeneration, sample_inputs.len()),
        public_inputs: encode_inputs(sample_inputs, prover.config.visibility()),
        public_outputs: Vec::new(),
        commitment,
    };
    Ok((commitment, backend.prove(statement, &rec.finalize())))
}

/// Phase two: `M(x) + B` with `B` drawn from the stored `Σ` and seed `s`.
///
/// For table statistics the public outputs carry the match count after the
/// noised values.
pub fn run_pac_query(
    prover: &ProverState,
    x: &MechanismInput<f64>,
    s: &[f64],
    h_claimed: &Commitment,
    backend: &dyn ProofBackend,
) -> Result<(Vector<f64>, Proof), ProtocolError> {
    let sigma = prover.sigma.as_ref().ok_or(ProtocolError::MissingSigma)?;
    prover.check_input(x)?;
    let mut rec = TraceRecorder::new();
    let (noised, count) = query_program(
        &prover.config.mechanism,
        prover.data.table(),
        x,
        sigma,
        s,
        h_claimed,
        &mut rec,
    )?;
    let mut public_outputs = noised.as_slice().to_vec();
    if let Some(c) = count {
        public_outputs.push(c as f64);
    }
    let statement = Statement {
        program: prover.descriptor(Phase::Query, 1),
        public_inputs: encode_inputs(std::slice::from_ref(x), prover.config.visibility()),
        public_outputs,
        commitment: *h_claimed,
    };
    Ok((noised, backend.prove(statement, &rec.finalize())))
}

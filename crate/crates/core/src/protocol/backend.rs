use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    decode_inputs, noise_program, query_program, DataShape, Phase, ProgramDescriptor,
    ProtocolError, PublicInput,
};
use crate::mechanisms::{Dataset, DbTable, MechanismConfig, MechanismInput};
use crate::noise::{commit_sigma, Commitment, CovarianceMatrix};
use crate::numeric::{SeededRng, TraceDigest, TraceRecorder, TraceSummary};
use crate::query::{AttributeKind, AttributeSchema};

pub const SIMULATED_TAG: &str = "simulated-v1";

/// Seed for the stand-in values the verifier replays a program on.
const REPLAY_SEED: u64 = 0x7061_6373_7265_706c;

/// What a prover claims: program, public io and the commitment in force.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub program: ProgramDescriptor,
    pub public_inputs: Vec<u8>,
    pub public_outputs: Vec<f64>,
    pub commitment: Commitment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proof {
    pub program_id: String,
    /// Base64 of the canonical public-input bytes.
    pub public_inputs: String,
    pub public_outputs: Vec<f64>,
    pub trace_digest: TraceDigest,
    pub sigma_commitment: Commitment,
    pub backend_tag: String,
    pub program: ProgramDescriptor,
    /// SHA-256 over every other field.
    pub seal: String,
}

#[derive(Serialize)]
struct SealBody<'a> {
    program_id: &'a str,
    public_inputs: &'a str,
    public_outputs: &'a [f64],
    trace_digest: TraceDigest,
    sigma_commitment: Commitment,
    backend_tag: &'a str,
    program: &'a ProgramDescriptor,
}

impl Proof {
    pub fn compute_seal(&self) -> String {
        let body = SealBody {
            program_id: &self.program_id,
            public_inputs: &self.public_inputs,
            public_outputs: &self.public_outputs,
            trace_digest: self.trace_digest,
            sigma_commitment: self.sigma_commitment,
            backend_tag: &self.backend_tag,
            program: &self.program,
        };
        let bytes = serde_json::to_vec(&body).expect("proof serializes");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Recomputes the seal after fields were edited.
    pub fn reseal(&mut self) {
        self.seal = self.compute_seal();
    }

    pub fn public_input_bytes(&self) -> Result<Vec<u8>, ProtocolError> {
        BASE64
            .decode(&self.public_inputs)
            .map_err(|e| ProtocolError::Encoding(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("proof serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Values the verifier already knows and wants the proof bound to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PublicIo {
    pub inputs: Option<Vec<u8>>,
    pub outputs: Option<Vec<f64>>,
    pub commitment: Option<Commitment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(String),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Self::Accept)
    }
}

pub trait ProofBackend {
    fn tag(&self) -> &str;

    fn prove(&self, statement: Statement, trace: &TraceSummary) -> Proof;

    fn verify(&self, proof: &Proof, expected_program_id: &str, io: &PublicIo) -> Verdict;
}

/// Honest-prover stand-in for a succinct proof system.
///
/// Verification replays the program on stand-in values of the public shapes
/// and compares trace digests. It offers no soundness against a prover that
/// forges the seal.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedBackend;

impl ProofBackend for SimulatedBackend {
    fn tag(&self) -> &str {
        SIMULATED_TAG
    }

    fn prove(&self, statement: Statement, trace: &TraceSummary) -> Proof {
        let mut proof = Proof {
            program_id: statement.program.program_id(),
            public_inputs: BASE64.encode(&statement.public_inputs),
            public_outputs: statement.public_outputs,
            trace_digest: trace.digest,
            sigma_commitment: statement.commitment,
            backend_tag: SIMULATED_TAG.to_string(),
            program: statement.program,
            seal: String::new(),
        };
        proof.reseal();
        proof
    }

    fn verify(&self, proof: &Proof, expected_program_id: &str, io: &PublicIo) -> Verdict {
        let reject = |why: &str| Verdict::Reject(why.to_string());
        if proof.backend_tag != SIMULATED_TAG {
            return reject("unknown backend tag");
        }
        if proof.seal != proof.compute_seal() {
            return reject("seal does not match proof contents");
        }
        if proof.program_id != proof.program.program_id() {
            return reject("program id does not match the embedded program");
        }
        if proof.program_id != expected_program_id {
            return reject("program id differs from the expected program");
        }
        let inputs = match proof.public_input_bytes() {
            Ok(b) => b,
            Err(_) => return reject("public inputs are not valid base64"),
        };
        if io.inputs.as_ref().is_some_and(|i| *i != inputs) {
            return reject("public inputs differ from the expected inputs");
        }
        if io
            .outputs
            .as_ref()
            .is_some_and(|o| *o != proof.public_outputs)
        {
            return reject("public outputs differ from the expected outputs");
        }
        if io.commitment.is_some_and(|c| c != proof.sigma_commitment) {
            return reject("commitment differs from the published commitment");
        }
        let expected_len = match proof.program.phase {
            Phase::NoiseGeneration => 0,
            Phase::Query => {
                proof.program.output_dim
                    + usize::from(matches!(
                        proof.program.mechanism,
                        MechanismConfig::Dbstats(_)
                    ))
            }
        };
        if proof.public_outputs.len() != expected_len {
            return reject("public output length does not fit the program");
        }
        match canonical_trace(&proof.program, &inputs) {
            Ok(t) if t.digest == proof.trace_digest => Verdict::Accept,
            Ok(_) => reject("trace digest differs from the program's canonical trace"),
            Err(e) => Verdict::Reject(format!("program replay failed: {e}")),
        }
    }
}

/// Checks `proof` with `backend` against the expected program and public io.
pub fn verify_proof(
    backend: &dyn ProofBackend,
    proof: &Proof,
    expected_program_id: &str,
    io: &PublicIo,
) -> Verdict {
    backend.verify(proof, expected_program_id, io)
}

fn stand_in_points(
    n: usize,
    d: usize,
    labeled: bool,
    mechanism: &MechanismConfig,
    rng: &mut SeededRng,
) -> Result<Dataset<f64>, ProtocolError> {
    let points = (0..n * d).map(|_| rng.standard_normal()).collect();
    let labels = labeled.then(|| {
        let classes = match mechanism {
            MechanismConfig::Kmeans(c) => c.k,
            _ => 2,
        };
        (0..n).map(|j| j % classes).collect()
    });
    Ok(Dataset::from_flat(d, points, labels)?)
}

fn stand_in_table(rows: usize, schema: &AttributeSchema) -> Result<DbTable<f64>, ProtocolError> {
    let row: Vec<f64> = schema
        .attributes()
        .iter()
        .map(|a| match a.kind {
            AttributeKind::Integer => a.min.ceil(),
            AttributeKind::Real => a.min,
        })
        .collect();
    Ok(DbTable::new(schema.clone(), vec![row; rows])?)
}

/// Trace of `program` run on stand-in private values with the given public
/// inputs. Equal to the honest prover's trace because no traced path
/// depends on private values.
pub fn canonical_trace(
    program: &ProgramDescriptor,
    public_inputs: &[u8],
) -> Result<TraceSummary, ProtocolError> {
    let decoded = decode_inputs(public_inputs)?;
    if decoded.len() != program.inputs {
        return Err(ProtocolError::Encoding(format!(
            "program takes {} inputs, found {}",
            program.inputs,
            decoded.len()
        )));
    }
    let mut rng = SeededRng::from_u64(REPLAY_SEED);
    let table = match &program.data_shape {
        DataShape::Table { rows, schema } => Some(stand_in_table(*rows, schema)?),
        DataShape::Points { .. } => None,
    };
    let inputs =
        decoded
            .into_iter()
            .map(|p| match p {
                PublicInput::Filter(f) => Ok(MechanismInput::Filter(f)),
                PublicInput::Points(x) => Ok(MechanismInput::Points(x)),
                PublicInput::Hidden { n, d, labeled } => Ok(MechanismInput::Points(
                    stand_in_points(n, d, labeled, &program.mechanism, &mut rng)?,
                )),
            })
            .collect::<Result<Vec<_>, ProtocolError>>()?;
    if let (Some(MechanismInput::Points(x)), DataShape::Points { d, .. }) =
        (inputs.first(), &program.data_shape)
    {
        if x.dim() != *d {
            return Err(ProtocolError::Encoding(
                "input dimension differs from data".into(),
            ));
        }
    }

    let mut rec = TraceRecorder::new();
    match program.phase {
        Phase::NoiseGeneration => {
            noise_program(
                &program.mechanism,
                &program.noise,
                table.as_ref(),
                &inputs,
                &mut rec,
            )?;
        }
        Phase::Query => {
            let dim = program.output_dim;
            if dim != program.mechanism.output_dim(program.point_dim()) {
                return Err(ProtocolError::Encoding(
                    "output dimension does not fit program".into(),
                ));
            }
            let sigma = CovarianceMatrix::new(vec![1.0; dim], program.noise.basis(dim)?)?;
            let claimed = commit_sigma(&sigma, &mut TraceRecorder::new());
            let seed = vec![0.0; dim];
            query_program(
                &program.mechanism,
                table.as_ref(),
                &inputs[0],
                &sigma,
                &seed,
                &claimed,
                &mut rec,
            )?;
        }
    }
    Ok(rec.finalize())
}

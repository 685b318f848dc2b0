//! `pacproof`: noise generation, PAC queries, verification, cycle
//! benchmarks and the PAC game from the command line.

mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pacproof::bench::{run_sweep, BenchMechanism, BenchSettings, Sweep, CSV_HEADER};
use pacproof::io::{read_dataset, read_seed, write_atomic};
use pacproof::mechanisms::{MechanismConfig, MechanismInput, SpecEntry};
use pacproof::noise::{Commitment, CovarianceMatrix};
use pacproof::protocol::{
    exact_match, nearest_candidate, run_noise_generation, run_pac_query, simulate_pac_game,
    verify_proof, GameConfig, Phase, PrivateData, Proof, ProverState, PublicIo, SimulatedBackend,
    Verdict,
};
use pacproof::query::{compile_to_formula, parse_filter, parse_query};
use pacproof::SeededRng;

use config::{GameFile, GameMechanism, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "pacproof",
    version,
    about = "Verifiable PAC-private mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase one: derive and commit the noise covariance.
    Noisegen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Phase two: answer one query with noise from the committed covariance.
    Query {
        #[arg(long)]
        config: PathBuf,
        /// Statistic query, e.g. "average of Age with Wealth>11000".
        #[arg(long, conflicts_with_all = ["filter", "points"])]
        query: Option<String>,
        /// Filter only; the statistics come from the configured spec.
        #[arg(long, conflicts_with = "points")]
        filter: Option<String>,
        /// CSV of points for ML mechanisms (defaults to the configured data).
        #[arg(long)]
        points: Option<PathBuf>,
        /// JSON array holding the verifier's noise seed.
        #[arg(long)]
        seed_file: PathBuf,
        /// Published commitment, 64 lowercase hex characters.
        #[arg(long)]
        commitment: String,
        /// Where to write the proof (defaults to `query_proof` in the config).
        #[arg(long)]
        proof: Option<PathBuf>,
    },
    /// Check a proof against the expected program id.
    Verify {
        proof: PathBuf,
        #[arg(long)]
        program_id: String,
        /// Also require this commitment.
        #[arg(long)]
        commitment: Option<String>,
    },
    /// Print the program id a verifier should expect.
    ProgramId {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        phase: PhaseArg,
    },
    /// Write a random noise seed of the right dimension.
    Seed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// All-zero seed instead of a random one.
        #[arg(long)]
        zero: bool,
    },
    /// Cycle counts over one swept parameter, as CSV.
    Bench {
        #[arg(long, default_value = "kmeans")]
        mechanism: String,
        /// One of M, K, d, n, iters, epochs.
        #[arg(long)]
        sweep: String,
        /// Values such as "1..15", "100..1000:100" or "2,4,8".
        #[arg(long)]
        values: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo PAC game.
    Game { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Noisegen,
    Query,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Noisegen { config } => noisegen(&config),
        Command::Query {
            config,
            query,
            filter,
            points,
            seed_file,
            commitment,
            proof,
        } => query_cmd(
            &config,
            QueryArgs {
                query,
                filter,
                points,
            },
            &seed_file,
            &commitment,
            proof,
        ),
        Command::Verify {
            proof,
            program_id,
            commitment,
        } => verify(&proof, &program_id, commitment.as_deref()),
        Command::ProgramId { config, phase } => program_id(&config, phase),
        Command::Seed {
            config,
            rng_seed,
            out,
            zero,
        } => seed(&config, rng_seed, &out, zero),
        Command::Bench {
            mechanism,
            sweep,
            values,
            m,
            n,
            d,
            k,
            iters,
            epochs,
            seed,
            out,
        } => {
            let overrides = [m, n, d, k, iters, epochs];
            bench(&mechanism, &sweep, &values, overrides, seed, out.as_deref())
        }
        Command::Game { config } => game(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code()
        }
    }
}

fn prover(cfg: &RunConfig) -> Result<ProverState, CliError> {
    let data = cfg.load_data()?;
    ProverState::new(cfg.protocol(), data).map_err(CliError::config)
}

fn noisegen(config: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let mut prover = prover(&cfg)?;
    let inputs = prover
        .sample_inputs(&mut SeededRng::from_u64(cfg.seed))
        .map_err(CliError::protocol)?;
    let (h, proof) = run_noise_generation(&mut prover, &inputs, &SimulatedBackend)
        .map_err(CliError::protocol)?;
    let sigma = prover.sigma().expect("phase one stores the covariance");
    write_atomic(&cfg.sigma, &sigma.serialize()).map_err(CliError::data)?;
    write_atomic(&cfg.proof, proof.to_json().as_bytes()).map_err(CliError::data)?;
    if let Some(path) = &cfg.commitment {
        write_atomic(path, format!("{h}\n").as_bytes()).map_err(CliError::data)?;
    }
    println!("{h}");
    eprintln!("program id: {}", proof.program_id);
    Ok(())
}

struct QueryArgs {
    query: Option<String>,
    filter: Option<String>,
    points: Option<PathBuf>,
}

fn query_input(
    cfg: &RunConfig,
    prover: &ProverState,
    args: QueryArgs,
) -> Result<MechanismInput<f64>, CliError> {
    match (prover.data(), &cfg.mechanism) {
        (PrivateData::Table(table), MechanismConfig::Dbstats(db)) => {
            let schema = table.schema();
            let filter = match (args.query, args.filter) {
                (Some(text), _) => {
                    let q = parse_query(&text, schema).map_err(CliError::config)?;
                    let asked = SpecEntry::new(q.function, &q.attribute);
                    if db.spec.entries != [asked.clone()] {
                        return Err(CliError::config(format!(
                            "query asks for `{asked}` but the committed program computes {:?}",
                            db.spec
                                .entries
                                .iter()
                                .map(ToString::to_string)
                                .collect::<Vec<_>>()
                        )));
                    }
                    q.filter
                }
                (None, Some(text)) => parse_filter(&text, schema).map_err(CliError::config)?,
                (None, None) => return Err(CliError::config("dbstats needs --query or --filter")),
            };
            let f = compile_to_formula(&filter, schema).map_err(CliError::config)?;
            Ok(MechanismInput::Filter(f))
        }
        _ => {
            if args.query.is_some() || args.filter.is_some() {
                return Err(CliError::config("ML mechanisms take --points, not a query"));
            }
            let path = args.points.as_deref().unwrap_or(&cfg.data);
            let x = read_dataset(path, cfg.label_column.as_deref()).map_err(CliError::data)?;
            Ok(MechanismInput::Points(x))
        }
    }
}

fn query_cmd(
    config: &Path,
    args: QueryArgs,
    seed_file: &Path,
    commitment: &str,
    proof_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let proof_path = proof_path
        .or_else(|| cfg.query_proof.clone())
        .ok_or_else(|| CliError::config("no proof path: pass --proof or set `query_proof`"))?;
    let h: Commitment = commitment.trim().parse().map_err(CliError::config)?;
    let mut prover = prover(&cfg)?;
    let x = query_input(&cfg, &prover, args)?;

    let bytes = pacproof::io::read_bytes(&cfg.sigma).map_err(CliError::data)?;
    let sigma = CovarianceMatrix::<f64>::parse(&bytes)
        .map_err(|e| CliError::data(format!("{}: {e}", cfg.sigma.display())))?;
    prover.load_sigma(sigma).map_err(CliError::data)?;

    let s = read_seed(seed_file).map_err(CliError::data)?;
    if s.len() != prover.output_dim() {
        return Err(CliError::config(format!(
            "seed has {} entries, the mechanism outputs {}",
            s.len(),
            prover.output_dim()
        )));
    }

    let (out, proof) =
        run_pac_query(&prover, &x, &s, &h, &SimulatedBackend).map_err(CliError::protocol)?;
    write_atomic(&proof_path, proof.to_json().as_bytes()).map_err(CliError::data)?;
    println!(
        "{}",
        serde_json::to_string(out.as_slice()).expect("floats serialize")
    );
    if let Some(count) = proof.public_outputs.get(out.dim()) {
        eprintln!("match count: {count}");
    }
    Ok(())
}

fn verify(path: &Path, program_id: &str, commitment: Option<&str>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let proof = Proof::from_json(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let commitment = commitment
        .map(|c| c.trim().parse::<Commitment>())
        .transpose()
        .map_err(CliError::config)?;
    let io = PublicIo {
        commitment,
        ..PublicIo::default()
    };
    match verify_proof(&SimulatedBackend, &proof, program_id.trim(), &io) {
        Verdict::Accept => {
            println!("accept");
            Ok(())
        }
        Verdict::Reject(why) => {
            println!("reject");
            Err(CliError::reject(why))
        }
    }
}

fn program_id(config: &Path, phase: PhaseArg) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let prover = prover(&cfg)?;
    let descriptor = match phase {
        PhaseArg::Noisegen => prover.descriptor(Phase::NoiseGeneration, cfg.noise.m),
        PhaseArg::Query => prover.descriptor(Phase::Query, 1),
    };
    println!("{}", descriptor.program_id());
    Ok(())
}

fn seed(config: &Path, rng_seed: u64, out: &Path, zero: bool) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let dim = prover(&cfg)?.output_dim();
    let mut rng = SeededRng::from_u64(rng_seed);
    let s: Vec<f64> = (0..dim)
        .map(|_| if zero { 0.0 } else { rng.standard_normal() })
        .collect();
    let mut text = serde_json::to_string(&s).expect("floats serialize");
    text.push('\n');
    write_atomic(out, text.as_bytes()).map_err(CliError::data)
}

/// Parses "a..b" (inclusive), "a..b:step" and comma lists of either.
fn parse_values(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::config(format!("invalid sweep values `{spec}`"));
    let mut values = Vec::new();
    for part in spec.split(',').map(str::trim) {
        if let Some((lo, rest)) = part.split_once("..") {
            let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi
                .trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| bad())?;
            let step: usize = step.trim().parse().map_err(|_| bad())?;
            if step == 0 || hi < lo {
                return Err(bad());
            }
            values.extend((lo..=hi).step_by(step));
        } else {
            values.push(part.parse().map_err(|_| bad())?);
        }
    }
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn bench(
    mechanism: &str,
    sweep: &str,
    values: &str,
    overrides: [Option<usize>; 6],
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mechanism: BenchMechanism = mechanism.parse().map_err(CliError::config)?;
    let sweep: Sweep = sweep.parse().map_err(CliError::config)?;
    let values = parse_values(values)?;
    let mut settings = BenchSettings::new(mechanism);
    let [m, n, d, k, iters, epochs] = overrides;
    settings.m = m.unwrap_or(settings.m);
    settings.n = n.unwrap_or(settings.n);
    settings.d = d.unwrap_or(settings.d);
    settings.k = k.unwrap_or(settings.k);
    settings.iters = iters.unwrap_or(settings.iters);
    settings.epochs = epochs.unwrap_or(settings.epochs);
    settings.seed = seed;
    let rows = run_sweep(&settings, sweep, &values).map_err(CliError::config)?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    match out {
        Some(path) => write_atomic(path, csv.as_bytes()).map_err(CliError::data),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(CliError::data),
    }
}

fn game(path: &Path) -> Result<(), CliError> {
    let g = GameFile::load(path)?;
    let mechanism = move |x: &u64| -> Vec<f64> {
        match g.mechanism {
            GameMechanism::Identity => vec![*x as f64],
            GameMechanism::Halve => vec![(*x / 2) as f64],
        }
    };
    let sigma = (g.noise_variance > 0.0)
        .then(|| CovarianceMatrix::diagonal(vec![g.noise_variance]))
        .transpose()
        .map_err(CliError::config)?;
    let adversary = nearest_candidate((0..g.domain).collect(), mechanism);
    let domain = g.domain;
    let cfg = GameConfig {
        delta: g.delta,
        trials: g.trials,
        matcher: Box::new(exact_match),
        distribution: Box::new(move |rng: &mut SeededRng| rng.below(domain)),
    };
    let report = simulate_pac_game(&mechanism, sigma.as_ref(), &adversary, &cfg, g.seed)
        .map_err(CliError::config)?;
    let out = serde_json::json!({
        "rate": report.rate,
        "trials": report.trials,
        "wilson_ci95": report.wilson_ci95,
    });
    println!("{out}");
    Ok(())
}

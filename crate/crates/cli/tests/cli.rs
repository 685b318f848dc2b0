use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pacproof::noise::CovarianceMatrix;
use tempfile::TempDir;

const QUERY: &str = "average of Age with Wealth>11000";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pacproof"))
}

/// Scratch copy of the bundled data directory.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for entry in fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn noisegen(dir: &Path, config: &str) -> String {
    let o = run(dir, &["noisegen", "--config", config]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    stdout(&o).trim().to_string()
}

fn seed(dir: &Path, config: &str, zero: bool) -> PathBuf {
    let out = dir.join(format!("{config}.seed"));
    let mut args = vec!["seed", "--config", config, "--rng-seed", "9", "--out"];
    let out_str = out.to_str().unwrap().to_string();
    args.push(&out_str);
    if zero {
        args.push("--zero");
    }
    assert_eq!(code(&run(dir, &args)), 0);
    out
}

fn program_id(dir: &Path, config: &str, phase: &str) -> String {
    let o = run(dir, &["program-id", "--config", config, "--phase", phase]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    stdout(&o).trim().to_string()
}

fn query(dir: &Path, config: &str, extra: &[&str], seed: &Path, h: &str) -> Output {
    let mut args = vec!["query", "--config", config];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--seed-file", seed.to_str().unwrap(), "--commitment", h]);
    run(dir, &args)
}

fn verify(dir: &Path, proof: &Path, id: &str) -> i32 {
    code(&run(
        dir,
        &["verify", proof.to_str().unwrap(), "--program-id", id],
    ))
}

#[test]
fn kmeans_noisegen_prints_commitment_and_is_deterministic() {
    let dir = workspace();
    let h = noisegen(dir.path(), "kmeans.json");
    assert_eq!(h.len(), 64);
    assert!(h
        .bytes()
        .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
    let proof = fs::read(dir.path().join("out/kmeans.noisegen.json")).unwrap();
    let sigma = fs::read(dir.path().join("out/kmeans.sigma")).unwrap();

    assert_eq!(noisegen(dir.path(), "kmeans.json"), h);
    assert_eq!(
        fs::read(dir.path().join("out/kmeans.noisegen.json")).unwrap(),
        proof
    );
    assert_eq!(
        fs::read(dir.path().join("out/kmeans.sigma")).unwrap(),
        sigma
    );

    let id = program_id(dir.path(), "kmeans.json", "noisegen");
    assert_eq!(
        verify(
            dir.path(),
            &dir.path().join("out/kmeans.noisegen.json"),
            &id
        ),
        0
    );
}

#[test]
fn single_sample_is_a_config_error() {
    let dir = workspace();
    let text = fs::read_to_string(dir.path().join("kmeans.json")).unwrap();
    fs::write(
        dir.path().join("k1.json"),
        text.replace("\"m\": 10", "\"m\": 1"),
    )
    .unwrap();
    let o = run(dir.path(), &["noisegen", "--config", "k1.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("too few samples"), "{}", stderr(&o));
    assert!(!dir.path().join("out/kmeans.sigma").exists());
}

#[test]
fn dbstats_query_on_people_table() {
    let dir = workspace();
    let h = noisegen(dir.path(), "dbstats.json");
    let s = seed(dir.path(), "dbstats.json", true);
    let o = query(dir.path(), "dbstats.json", &["--query", QUERY], &s, &h);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out: Vec<f64> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(out, vec![56.0]);
    assert!(stderr(&o).contains("match count: 2"));

    let proof = dir.path().join("out/dbstats.query.json");
    let id = program_id(dir.path(), "dbstats.json", "query");
    assert_eq!(verify(dir.path(), &proof, &id), 0);
    let with_h = run(
        dir.path(),
        &[
            "verify",
            proof.to_str().unwrap(),
            "--program-id",
            &id,
            "--commitment",
            &h,
        ],
    );
    assert_eq!(code(&with_h), 0);

    // a filter-only query against the same program gives the same answer
    let o = query(
        dir.path(),
        "dbstats.json",
        &["--filter", "Wealth>11000"],
        &s,
        &h,
    );
    assert_eq!(stdout(&o).trim(), "[56.0]");
}

#[test]
fn ml_queries_verify() {
    for config in ["kmeans.json", "svm.json"] {
        let dir = workspace();
        let h = noisegen(dir.path(), config);
        let s = seed(dir.path(), config, false);
        let o = query(dir.path(), config, &[], &s, &h);
        assert_eq!(code(&o), 0, "{config}: {}", stderr(&o));
        let out: Vec<f64> = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(out.len(), if config == "svm.json" { 3 } else { 4 });
        let name = config.trim_end_matches(".json");
        let proof = dir.path().join(format!("out/{name}.query.json"));
        assert_eq!(
            verify(dir.path(), &proof, &program_id(dir.path(), config, "query")),
            0
        );
        // the noise-generation id does not accept a query proof
        assert_eq!(
            verify(
                dir.path(),
                &proof,
                &program_id(dir.path(), config, "noisegen")
            ),
            1
        );
    }
}

#[test]
fn wrong_commitment_exits_5_without_proof() {
    let dir = workspace();
    let h = noisegen(dir.path(), "dbstats.json");
    let s = seed(dir.path(), "dbstats.json", true);
    let flipped = format!("{}{}", &h[..63], if h.ends_with('0') { '1' } else { '0' });
    let o = query(
        dir.path(),
        "dbstats.json",
        &["--query", QUERY],
        &s,
        &flipped,
    );
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(!dir.path().join("out/dbstats.query.json").exists());
    assert!(stdout(&o).is_empty());
}

#[test]
fn malformed_query_reports_position() {
    let dir = workspace();
    let h = noisegen(dir.path(), "dbstats.json");
    let s = seed(dir.path(), "dbstats.json", true);
    let o = query(
        dir.path(),
        "dbstats.json",
        &["--query", "average of Age with Wealth>>11000"],
        &s,
        &h,
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("position 27"), "{}", stderr(&o));
}

#[test]
fn missing_sigma_exits_3() {
    let dir = workspace();
    let h = "0".repeat(64);
    let s = seed(dir.path(), "dbstats.json", true);
    let o = query(dir.path(), "dbstats.json", &["--query", QUERY], &s, &h);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn verify_rejects_tampering_and_garbage() {
    let dir = workspace();
    let h = noisegen(dir.path(), "dbstats.json");
    let s = seed(dir.path(), "dbstats.json", true);
    assert_eq!(
        code(&query(
            dir.path(),
            "dbstats.json",
            &["--query", QUERY],
            &s,
            &h
        )),
        0
    );
    let proof = dir.path().join("out/dbstats.query.json");
    let id = program_id(dir.path(), "dbstats.json", "query");
    let text = fs::read_to_string(&proof).unwrap();

    // flip one hex digit inside each bound field; the JSON stays well formed
    for field in ["program_id", "trace_digest", "sigma_commitment", "seal"] {
        let key = format!("\"{field}\": \"");
        let at = text.find(&key).unwrap() + key.len();
        let mut bytes = text.clone().into_bytes();
        bytes[at] = if bytes[at] == b'0' { b'1' } else { b'0' };
        let tampered = dir.path().join(format!("{field}.json"));
        fs::write(&tampered, bytes).unwrap();
        assert_eq!(verify(dir.path(), &tampered, &id), 1, "{field}");
    }
    let tampered = dir.path().join("output.json");
    fs::write(&tampered, text.replacen("56.0", "57.0", 1)).unwrap();
    assert_eq!(verify(dir.path(), &tampered, &id), 1);

    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(verify(dir.path(), &truncated, &id), 2);
    assert_eq!(verify(dir.path(), &dir.path().join("absent.json"), &id), 2);
}

fn bench_rows(dir: &Path, args: &[&str]) -> Vec<(usize, u64)> {
    let mut full = vec!["bench"];
    full.extend_from_slice(args);
    let o = run(dir, &full);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep,value,cycles,digest"));
    lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 4);
            assert_eq!(cols[3].len(), 16);
            (cols[1].parse().unwrap(), cols[2].parse().unwrap())
        })
        .collect()
}

fn assert_affine(rows: &[(usize, u64)]) {
    let (x0, y0) = (rows[0].0 as i128, rows[0].1 as i128);
    let (x1, y1) = (rows[1].0 as i128, rows[1].1 as i128);
    for &(x, y) in &rows[2..] {
        assert_eq!(
            (y as i128 - y0) * (x1 - x0),
            (y1 - y0) * (x as i128 - x0),
            "at {x}"
        );
    }
}

#[test]
fn bench_sweeps() {
    let dir = workspace();
    let rows = bench_rows(dir.path(), &["--sweep", "M", "--values", "1..15"]);
    assert_eq!(rows.len(), 15);
    assert_affine(&rows);
    let rows = bench_rows(
        dir.path(),
        &["--sweep", "K", "--values", "2..10", "--m", "2"],
    );
    assert_eq!(rows.len(), 9);
    assert_affine(&rows);
    let rows = bench_rows(
        dir.path(),
        &[
            "--mechanism",
            "dbstats",
            "--sweep",
            "n",
            "--values",
            "100..1000:100",
            "--m",
            "1",
        ],
    );
    assert_eq!(rows.len(), 10);
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));

    let out = dir.path().join("bench.csv");
    let o = run(
        dir.path(),
        &[
            "bench",
            "--sweep",
            "M",
            "--values",
            "1,2",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&out)
        .unwrap()
        .starts_with("sweep,value,cycles,digest\n"));

    assert_eq!(
        code(&run(
            dir.path(),
            &["bench", "--sweep", "Q", "--values", "1..3"]
        )),
        2
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["bench", "--sweep", "M", "--values", "5..1"]
        )),
        2
    );
    let o = run(
        dir.path(),
        &[
            "bench",
            "--mechanism",
            "dbstats",
            "--sweep",
            "K",
            "--values",
            "2",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn game_reports() {
    let dir = workspace();
    let o = run(dir.path(), &["game", "game_identity.json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rate"].as_f64(), Some(1.0));
    assert_eq!(v["trials"].as_u64(), Some(1000));
    assert_eq!(v["wilson_ci95"].as_array().unwrap().len(), 2);

    let o = run(dir.path(), &["game", "game_noisy.json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["rate"].as_f64().unwrap() - 0.1).abs() < 0.02);

    fs::write(
        dir.path().join("g0.json"),
        r#"{"domain":10,"trials":0,"delta":0.1}"#,
    )
    .unwrap();
    assert_eq!(code(&run(dir.path(), &["game", "g0.json"])), 2);
    fs::write(dir.path().join("bad.json"), "{").unwrap();
    assert_eq!(code(&run(dir.path(), &["game", "bad.json"])), 2);
}

/// Σ and private rows must never reach stdout, proofs or bench output.
#[test]
fn no_private_values_in_public_artifacts() {
    let dir = workspace();
    let mut public = String::new();
    let mut secrets: Vec<String> = Vec::new();
    for config in ["kmeans.json", "svm.json", "dbstats.json"] {
        let o = run(dir.path(), &["noisegen", "--config", config]);
        public += &stdout(&o);
        let h = stdout(&o).trim().to_string();
        let s = seed(dir.path(), config, false);
        let extra: &[&str] = if config == "dbstats.json" {
            &["--query", QUERY]
        } else {
            &[]
        };
        let o = query(dir.path(), config, extra, &s, &h);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        public += &stdout(&o);

        let name = config.trim_end_matches(".json");
        for phase in ["noisegen", "query"] {
            public +=
                &fs::read_to_string(dir.path().join(format!("out/{name}.{phase}.json"))).unwrap();
        }
        let bytes = fs::read(dir.path().join(format!("out/{name}.sigma"))).unwrap();
        let sigma = CovarianceMatrix::<f64>::parse(&bytes).unwrap();
        secrets.extend(sigma.diag().iter().map(|v| v.to_string()));
        secrets.extend(sigma.diag().iter().map(|v| format!("{v:?}")));
        secrets.push(bytes.iter().map(|b| format!("{b:02x}")).collect());
    }
    public += &stdout(&run(
        dir.path(),
        &["bench", "--sweep", "M", "--values", "1..3"],
    ));

    for line in fs::read_to_string(dir.path().join("blobs.csv"))
        .unwrap()
        .lines()
        .skip(1)
    {
        for cell in line.split(',').take(2) {
            let v: f64 = cell.parse().unwrap();
            secrets.push(v.to_string());
        }
    }
    secrets.extend(["Marty", "Emmett", "Biff", "Lorraine", "10000", "50000"].map(String::from));

    for secret in &secrets {
        assert!(!public.contains(secret.as_str()), "leaked `{secret}`");
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semistatic")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn block_valid_exits_zero() {
    let out = run(&["block", "--eps", "1/4", "--M", "3", "--a", "2", "--b", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("# block_checks\n"));
    assert!(stdout.contains("# block_bounds\n"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("block: PASS"));
}

#[test]
fn invalid_parameters_exit_two() {
    assert_eq!(code(&["block", "--eps", "3/4"]), 2);
    assert_eq!(code(&["block", "--M", "0"]), 2);
    assert_eq!(code(&["block", "--a", "5/2", "--b", "5/2"]), 2);
    assert_eq!(code(&["block", "--a", "7/2"]), 2);
    assert_eq!(code(&["block", "--eps", "x"]), 2);
    assert_eq!(code(&["block", "--eps", "1/0"]), 2);
    assert_eq!(code(&["paste", "--depth", "0"]), 2);
    assert_eq!(code(&["paste", "--depth", "3", "--m-max", "3"]), 2);
    assert_eq!(code(&["continuous", "--n", "100"]), 2);
    assert_eq!(code(&["continuous", "--n", "10000", "--grid-step", "1/8"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&[]), 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["block", "--help"]), 0);
}

#[test]
fn block_writes_named_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("block");
    assert_eq!(code(&["block", "--out", out_dir.to_str().unwrap()]), 0);
    let bounds = read(&out_dir, "block_bounds.csv");
    let mut lines = bounds.lines();
    assert!(lines.next().unwrap().starts_with("epsilon,M,a,b,cost,m_over_16,m_over_24,max_u_corr"));
    assert_eq!(lines.count(), 1);
    let checks = read(&out_dir, "block_checks.csv");
    assert!(checks.starts_with("block,name,identity,hard,passed,detail"));
    assert!(checks.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn block_json_report_parses() {
    let out = run(&["block", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bounds = doc["block_bounds"].as_array().unwrap();
    assert_eq!(bounds[0]["cost"], "136/117");
    assert!(doc["block_checks"].as_array().unwrap().iter().all(|c| c["identity"].is_string()));
}

#[test]
fn paste_reports_divergence_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("paste");
    assert_eq!(code(&["paste", "--depth", "3", "--p", "1,2", "--out", out_dir.to_str().unwrap()]), 0);
    let divergence = read(&out_dir, "divergence.csv");
    assert_eq!(divergence.lines().count(), 4);
    assert!(divergence.lines().nth(1).unwrap().contains(",1,68/117,68/117,"));
    let convergence = read(&out_dir, "convergence.csv");
    assert_eq!(convergence.lines().count(), 1 + 2 * 3);
}

#[test]
fn paste_divergence_only_skips_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("paste");
    assert_eq!(code(&["paste", "--depth", "2", "--divergence-only", "--out", out_dir.to_str().unwrap()]), 0);
    assert!(out_dir.join("divergence.csv").exists());
    assert!(!out_dir.join("convergence.csv").exists());
}

#[test]
fn continuous_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "continuous".to_owned(),
            "--n".into(),
            "20000".into(),
            "--seed".into(),
            "11".into(),
            "--paths".into(),
            "2000".into(),
            "--out".into(),
            d.to_str().unwrap().to_owned(),
        ]
    };
    let (first, second) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&first, &second] {
        let a = args(d);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(code(&refs), 0);
    }
    for name in ["checks.csv", "counts.csv", "fit.csv", "strategies.csv", "path_agreement.csv"] {
        assert_eq!(read(&first, name), read(&second, name), "{name}");
    }
    let counts = read(&first, "counts.csv");
    let total: u64 = counts.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 20000);
}

#[test]
fn continuous_accepts_decimals_and_explicit_grid() {
    let out = run(&[
        "continuous",
        "--eps",
        "0.25",
        "--M",
        "1.5",
        "--a",
        "2",
        "--b",
        "3",
        "--n",
        "10000",
        "--grid-step",
        "1/4",
        "--paths",
        "1000",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["grid_step"], "1/4");
    assert_eq!(doc["path_agreement"].as_array().unwrap().len(), 4);
}

#[test]
fn dump_model_round_trips_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let block = dir.path().join("block.json");
    let pasted = dir.path().join("pasted.json");
    assert_eq!(code(&["dump-model", "block", "--eps", "1/8", "--out", block.to_str().unwrap()]), 0);
    assert_eq!(code(&["dump-model", "paste", "--depth", "3", "--out", pasted.to_str().unwrap()]), 0);
    assert_eq!(code(&["dump-model", "check", block.to_str().unwrap()]), 0);
    assert_eq!(code(&["dump-model", "check", pasted.to_str().unwrap()]), 0);

    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&block).unwrap()).unwrap();
    doc["f"][0] = serde_json::Value::String("7/1".into());
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(code(&["dump-model", "check", tampered.to_str().unwrap()]), 1);

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{\"depth\": 1}").unwrap();
    assert_eq!(code(&["dump-model", "check", garbage.to_str().unwrap()]), 1);
    assert_eq!(code(&["dump-model", "check", dir.path().join("missing.json").to_str().unwrap()]), 2);
}

#[test]
fn dump_model_is_deterministic() {
    let a = run(&["dump-model", "paste", "--depth", "2"]);
    let b = run(&["dump-model", "paste", "--depth", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

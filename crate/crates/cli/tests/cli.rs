use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nlhawkes"));
    cmd.env_remove("NLHAWKES_SEED").env_remove("NLHAWKES_WORKERS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn assert_valid(schema: &str, file: &Path) {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_dir().join(schema)).unwrap()).unwrap();
    let instance: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{} violates {schema:?}: {errors:?}", file.display());
}

const LINEAR: &str = r#"
[kernel]
family = "exponential"
a = 1.0
b = 2.0

[rate]
family = "linear"
nu = 1.0
"#;

fn small_linear(extra: &str) -> String {
    format!(
        "{LINEAR}\n[run]\nhorizon = 2000.0\nreplications = 8\nseed = 7\n{extra}\n[lil]\nn_max = 20000\ncalibration_trials = 100\n"
    )
}

#[test]
fn unstable_model_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[kernel]\nfamily = \"exponential\"\na = 1.0\nb = 0.5\n[rate]\nfamily = \"linear\"\nnu = 1.0\n",
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability"));
}

#[test]
fn unknown_keys_and_bad_flags_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", &format!("{LINEAR}\n[run]\nhorizn = 5.0\n"));
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let cfg = write_config(dir.path(), "ok.toml", LINEAR);
    let out =
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tiny_verify_budget_is_under_powered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tiny.toml",
        "scenario = \"linear\"\n[run]\nhorizon = 10.0\nreplications = 2\n[fclt]\nreplications = 5\nhorizon = 10.0\n[lil]\nn_max = 50\n[coupling]\nseeds = 5\n",
    );
    let out_dir = dir.path().join("o");
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["under_powered"], Value::Bool(true));
    assert_eq!(report["overall_pass"], Value::Bool(false));
    assert_valid("verify.schema.json", &out_dir.join("verify.json"));
}

#[test]
fn simulate_writes_one_block_per_replication_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &format!("{LINEAR}\n[run]\nhorizon = 50.0\nreplications = 2\n"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o =
            run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let events = std::fs::read(a.join("events.csv")).unwrap();
    assert_eq!(events, std::fs::read(b.join("events.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("compensator.csv")).unwrap(), std::fs::read(b.join("compensator.csv")).unwrap());
    let mut reader = csv::Reader::from_reader(events.as_slice());
    let mut reps = std::collections::BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        reps.insert(rec[0].to_string());
        assert!(rec[1].parse::<f64>().unwrap() <= 50.0);
    }
    assert_eq!(reps.into_iter().collect::<Vec<_>>(), ["0", "1"]);

    // a different seed from the environment changes the output
    let c = dir.path().join("c");
    let o = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap()])
        .env("NLHAWKES_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(events, std::fs::read(c.join("events.csv")).unwrap());
}

#[test]
fn estimate_on_poisson_matches_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.toml",
        "[kernel]\nfamily = \"zero\"\n[rate]\nfamily = \"linear\"\nnu = 2.0\n[run]\nhorizon = 5000.0\nreplications = 4\n",
    );
    let out_dir = dir.path().join("o");
    let o = run(&["estimate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_valid("stats.schema.json", &out_dir.join("stats.json"));
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("stats.json")).unwrap()).unwrap();
    let mu = stats["mu_hat"].as_f64().unwrap();
    assert!((mu - 2.0).abs() < 0.05, "mu_hat {mu}");
    assert_eq!(stats["total_counts"], 20_000);
    assert!(out_dir.join("counts.csv").exists());
}

#[test]
fn estimate_reuses_simulated_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.toml", &small_linear(""));
    let out_dir = dir.path().join("o");
    let args = |cmd: &'static str| {
        [cmd, "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()].map(String::from)
    };
    assert_eq!(bin().args(args("estimate")).output().unwrap().status.code(), Some(0));
    let fresh = std::fs::read(out_dir.join("stats.json")).unwrap();
    assert_eq!(bin().args(args("simulate")).output().unwrap().status.code(), Some(0));
    assert_eq!(bin().args(args("estimate")).output().unwrap().status.code(), Some(0));
    // the round trip through events.csv is exact
    assert_eq!(fresh, std::fs::read(out_dir.join("stats.json")).unwrap());
}

#[test]
fn fclt_and_lil_outputs_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.toml", &small_linear("").replace("replications = 8", "replications = 220"));
    let out_dir = dir.path().join("o");
    let o = run(&["fclt", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    assert_valid("report.schema.json", &out_dir.join("report.json"));
    let reports: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(!reports.as_array().unwrap().is_empty());
    let header = std::fs::read_to_string(out_dir.join("fclt.csv")).unwrap();
    assert!(header.lines().next().unwrap().starts_with("replication,"));

    let o = run(&["lil", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    assert_valid("lil_report.schema.json", &out_dir.join("lil_report.json"));
    assert!(out_dir.join("lil.csv").exists());
}

#[test]
fn empirical_profile_needs_two_replications() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.toml",
        &format!("{LINEAR}\n[run]\nhorizon = 2000.0\nreplications = 1\n[lil]\ns2_mode = \"empirical\"\n"),
    );
    let o = run(&["lil", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["poisson", "linear", "nonlinear-saturating"] {
        let cfg = nlhawkes_cli::config::RunConfig::load(&dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(cfg.scenario.unwrap().name(), name);
        let canned = nlhawkes_cli::config::RunConfig::for_scenario(cfg.scenario.unwrap());
        assert_eq!(cfg.model_spec().unwrap(), canned.model_spec().unwrap());
        assert_eq!(cfg.run, canned.run);
        assert_eq!(cfg.fclt, canned.fclt);
        assert_eq!(cfg.lil, canned.lil);
        assert_eq!(cfg.coupling, canned.coupling);
    }
}

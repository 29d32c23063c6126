use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slir(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slir"))
        .args(args)
        .env("SLIR_OUTPUT_DIR", dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn slir")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = slir(dir, args);
    assert!(
        out.status.success(),
        "slir {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn envelope(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr is empty");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

const SIM: &[&str] = &[
    "simulate",
    "--population",
    "10000",
    "--i0",
    "1",
    "--horizon",
    "40",
];

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    ok(a.path(), SIM);
    ok(b.path(), SIM);
    ok(c.path(), &[SIM, &["--seed", "2"]].concat());
    for name in ["trajectory.csv", "observed.csv", "manifest.json"] {
        assert_eq!(
            read(a.path().join(name)),
            read(b.path().join(name)),
            "{name}"
        );
    }
    assert_eq!(
        read(a.path().join("trajectory.csv")),
        read(c.path().join("trajectory.csv"))
    );
    assert_ne!(
        read(a.path().join("observed.csv")),
        read(c.path().join("observed.csv"))
    );
    let observed = read(a.path().join("observed.csv"));
    assert_eq!(observed.lines().count(), 42);
}

#[test]
fn manifest_hashes_outputs_and_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SIM);
    let m: Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"].as_object().unwrap().len(), 2);
    assert!(m.get("timestamp").is_none());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"seed": 5, "population": 20000, "horizon": 10}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "6",
            "simulate",
        ],
    );
    let m: Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(m["seed"], 6);
    assert_eq!(m["config"]["population"], 20000.0);
    assert_eq!(read(dir.path().join("trajectory.csv")).lines().count(), 12);
}

#[test]
fn r0_reports_both_equilibria() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "r0", "--r0", "4", "--gamma", "0.2", "--a", "0.03", "--b", "0.01",
        ],
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["fully_susceptible"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((report["lockdown_balanced"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(dir.path().join("r0.json").exists());
}

#[test]
fn sensitivity_writes_one_row_per_target() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["sensitivity", "--population", "10000", "--i0", "1"],
    );
    let text = read(dir.path().join("sensitivity.csv"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("1,"));
    assert!(
        rows.iter().all(|r| r.ends_with(',')),
        "a row failed: {text}"
    );
}

#[test]
fn sensitivity_reads_fit_summary_medians() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("in.json");
    let params: Vec<Value> = [
        ("R0", 3.0),
        ("gamma", 0.2),
        ("a", 0.1),
        ("b", 0.05),
        ("phi1", 50.0),
        ("phi2", 5.0),
    ]
    .iter()
    .map(|(n, m)| serde_json::json!({ "name": n, "median": m, "rhat": null }))
    .collect();
    std::fs::write(
        &summary,
        serde_json::json!({ "parameters": params }).to_string(),
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "sensitivity",
            "--summary",
            summary.to_str().unwrap(),
            "--targets",
            "0.5",
            "--population",
            "10000",
            "--i0",
            "1",
        ],
    );
    let m: Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(m["config"]["params"]["R0"], 3.0);
    assert_eq!(m["inputs"].as_object().unwrap().len(), 1);
}

#[test]
fn fit_then_diagnose_gives_the_same_summary() {
    let sim = tempfile::tempdir().unwrap();
    ok(sim.path(), SIM);
    let observed = sim.path().join("observed.csv");
    let fit_dir = tempfile::tempdir().unwrap();
    let out = ok(
        fit_dir.path(),
        &[
            "fit",
            "--observed",
            observed.to_str().unwrap(),
            "--days",
            "25",
            "--chains",
            "2",
            "--iter",
            "40",
            "--warmup",
            "20",
        ],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 chains x 20 draws"));
    let chains = read(fit_dir.path().join("chains.csv"));
    assert_eq!(chains.lines().count(), 41);
    let diag_dir = tempfile::tempdir().unwrap();
    ok(
        diag_dir.path(),
        &[
            "diagnose",
            "--chains",
            fit_dir.path().join("chains.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(
        read(fit_dir.path().join("summary.json")),
        read(diag_dir.path().join("summary.json"))
    );
}

#[test]
fn forecast_writes_band_with_roles() {
    let sim = tempfile::tempdir().unwrap();
    ok(sim.path(), SIM);
    let observed = sim.path().join("observed.csv");
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "forecast",
            "--observed",
            observed.to_str().unwrap(),
            "--train-days",
            "15",
            "--total-days",
            "25",
            "--chains",
            "1",
            "--iter",
            "220",
            "--warmup",
            "100",
            "--paths",
            "1000",
        ],
    );
    let band = read(dir.path().join("band.csv"));
    assert_eq!(band.lines().count(), 1 + 2 * 25);
    assert_eq!(band.lines().filter(|l| l.ends_with(",train")).count(), 30);
    assert_eq!(
        band.lines().filter(|l| l.ends_with(",held_out")).count(),
        20
    );
}

#[test]
fn errors_are_json_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = slir(
        dir.path(),
        &["fit", "--observed", "/nonexistent/observed.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    let e = envelope(&out);
    assert_eq!(e["code"], "io");
    assert_eq!(e["context"]["command"], "fit");
    assert_eq!(e["context"]["path"], "/nonexistent/observed.csv");

    let out = slir(dir.path(), &["fit"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(envelope(&out)["code"], "usage");

    let out = slir(dir.path(), &["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(envelope(&out)["code"], "usage");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"popul": 3}"#).unwrap();
    let out = slir(dir.path(), &["--config", bad.to_str().unwrap(), "r0"]);
    assert_eq!(envelope(&out)["code"], "config");

    let out = slir(dir.path(), &["simulate", "--gamma=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        envelope(&out)["message"]
            .as_str()
            .unwrap()
            .contains("gamma"),
        "{:?}",
        envelope(&out)
    );

    let cases = dir.path().join("cases.csv");
    let mobility = dir.path().join("mobility.csv");
    std::fs::write(&cases, "date,value\n2020-03-01,1\n2020-03-03,4\n").unwrap();
    std::fs::write(
        &mobility,
        "date,value\n2020-03-01,90\n2020-03-02,80\n2020-03-03,70\n",
    )
    .unwrap();
    let out = slir(
        dir.path(),
        &[
            "fit",
            "--cases",
            cases.to_str().unwrap(),
            "--mobility",
            mobility.to_str().unwrap(),
        ],
    );
    let e = envelope(&out);
    assert_eq!(e["code"], "io");
    assert_eq!(e["context"]["line"], 3);
}

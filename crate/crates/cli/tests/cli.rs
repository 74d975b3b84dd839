use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gasfee"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_result(args: &[&str]) -> Value {
    let doc: Value = serde_json::from_str(&ok_stdout(args)).unwrap();
    doc["result"].clone()
}

/// Data rows of a CSV artifact, skipping provenance comments and the header.
fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn noise_free_simulation_is_the_euler_recursion() {
    let text = ok_stdout(&["simulate", "--sigma", "0", "--kappa", "0.3", "--theta", "2", "--x0", "5", "--n-steps", "50", "--dt", "0.1"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 51);
    let mut x: f64 = 5.0;
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i as f64);
        assert!((row[2] - x).abs() < 1e-12, "step {i}: {} vs {x}", row[2]);
        x += 0.3 * (2.0 - x) * 0.1;
    }
}

#[test]
fn estimate_recovers_fixture_parameters() {
    let r = json_result(&[
        "estimate",
        "--input",
        &fixture("synthetic_gas_prices.csv"),
        "--timestamp-col",
        "step",
        "--price-col",
        "value",
    ]);
    let get = |k: &str| r[k].as_f64().unwrap();
    assert!(((get("kappa") - 0.007) / 0.007).abs() <= 0.2, "kappa {}", get("kappa"));
    assert!(((get("mu") - 3.2) / 3.2).abs() <= 0.02, "mu {}", get("mu"));
    assert!(((get("sigma") - 0.0937) / 0.0937).abs() <= 0.05, "sigma {}", get("sigma"));
    assert_eq!(r["n_obs"].as_u64(), Some(200_001));
    for key in ["hurst", "r_squared"] {
        assert!(r[key].is_number(), "{key} missing");
    }
}

#[test]
fn outputs_carry_provenance() {
    let csv = ok_stdout(&["simulate", "--seed", "17", "--n-steps", "4"]);
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# gasfee ") && first.contains("seed=17"), "{first}");
    assert!(csv.lines().nth(1).unwrap().starts_with("# params {"));

    let doc: Value = serde_json::from_str(&ok_stdout(&[
        "price", "--seed", "4", "--strike-k", "3", "--maturity", "2", "--window", "1",
    ]))
    .unwrap();
    let prov = &doc["provenance"];
    assert_eq!(prov["seed"], 4);
    assert_eq!(prov["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(prov["params"]["strike_k"], 3.0);
    assert_eq!(prov["params"]["kappa"], 0.007, "defaults are echoed");
}

#[test]
fn out_file_is_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| -> PathBuf { dir.path().join(n) };
    for name in ["a.csv", "b.csv"] {
        let p = path(name);
        ok_stdout(&["simulate", "--seed", "9", "--n-steps", "300", "--n-paths", "3", "--hurst", "0.3", "--out", p.to_str().unwrap()]);
    }
    let a = std::fs::read(path("a.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(path("b.csv")).unwrap());
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2, "no temp files remain");
}

#[test]
fn seeds_change_paths() {
    let a = ok_stdout(&["simulate", "--seed", "1", "--n-steps", "20"]);
    let b = ok_stdout(&["simulate", "--seed", "2", "--n-steps", "20"]);
    assert_ne!(csv_rows(&a), csv_rows(&b));
}

#[test]
fn config_file_wins_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("run.toml");
    std::fs::write(&toml_path, "seed = 21\nn_steps = 7\nkappa = 0.5\n").unwrap();
    let out = run(&["simulate", "--n-steps", "3", "--seed", "1", "--config", toml_path.to_str().unwrap()]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("overrides"), "expected a warning, got {stderr}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# gasfee") && text.lines().next().unwrap().contains("seed=21"));
    assert_eq!(csv_rows(&text).len(), 8);

    let json_path = dir.path().join("run.json");
    std::fs::write(&json_path, r#"{"kappa": {"breaks": [1.0], "values": [0.5, 0.1]}, "n_steps": 2}"#).unwrap();
    let text = ok_stdout(&["simulate", "--config", json_path.to_str().unwrap()]);
    assert_eq!(csv_rows(&text).len(), 3);
}

#[test]
fn piecewise_flag_matches_config_form() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("run.json");
    std::fs::write(&json_path, r#"{"theta": {"breaks": [5.0], "values": [3.0, 3.5]}}"#).unwrap();
    let a = ok_stdout(&["simulate", "--n-steps", "10", "--theta", "3,5:3.5"]);
    let b = ok_stdout(&["simulate", "--n-steps", "10", "--config", json_path.to_str().unwrap()]);
    assert_eq!(a, b);
}

#[test]
fn exit_codes_separate_usage_from_module_errors() {
    let usage = run(&["price", "--maturity", "2", "--window", "1"]);
    assert_eq!(usage.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&usage.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    assert_eq!(run(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));

    let module = run(&["simulate", "--hurst", "1.5"]);
    assert_eq!(module.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&module.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "module");
    assert!(err["error"]["message"].as_str().unwrap().contains("domain"));

    let closed_form_mismatch = run(&[
        "price", "--method", "closed-form", "--kind", "modified-put", "--strike-k", "3", "--maturity", "2", "--window", "1",
    ]);
    assert_eq!(closed_form_mismatch.status.code(), Some(1));

    let missing = run(&["ingest", "--input", "/nonexistent/prices.csv"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn describe_lists_every_parameter_with_help() {
    let doc: Value = serde_json::from_str(&ok_stdout(&["--describe"])).unwrap();
    let commands = doc["commands"].as_object().unwrap();
    let names: Vec<&str> = commands.keys().map(String::as_str).collect();
    assert_eq!(names, ["estimate", "ingest", "mechanism", "price", "simulate", "surface"]);
    for (name, cmd) in commands {
        for p in cmd["params"].as_array().unwrap() {
            let help = p["help"].as_str().unwrap();
            assert!(!help.is_empty(), "{name} {} has no help", p["name"]);
        }
    }
    let single: Value = serde_json::from_str(&ok_stdout(&["simulate", "--describe"])).unwrap();
    assert_eq!(single["commands"].as_object().unwrap().len(), 1);
}

#[test]
fn describe_matches_accepted_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let doc: Value = serde_json::from_str(&ok_stdout(&["--describe"])).unwrap();
    for (name, cmd) in doc["commands"].as_object().unwrap() {
        for p in cmd["params"].as_array().unwrap() {
            let key = p["name"].as_str().unwrap();
            let path = dir.path().join(format!("{name}-{key}.json"));
            std::fs::write(&path, format!(r#"{{"{key}": "@"}}"#)).unwrap();
            let out = run(&[name, "--config", path.to_str().unwrap()]);
            let stderr = String::from_utf8_lossy(&out.stderr);
            assert!(!stderr.contains("unknown config key"), "{name}: described key {key} rejected");
        }
        let path = dir.path().join(format!("{name}-unknown.json"));
        std::fs::write(&path, r#"{"not_a_parameter": 1}"#).unwrap();
        let out = run(&[name, "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
    }
}

#[test]
fn help_text_states_units() {
    for (cmd, fragments) in [
        ("simulate", &["[time units]", "[1/time]", "Gwei"][..]),
        ("price", &["[Gwei]", "[Gwei x time]", "[1/time]"][..]),
        ("mechanism", &["[Gwei per gas]", "[gas per block]"][..]),
        ("estimate", &["[time units]"][..]),
    ] {
        let help = ok_stdout(&[cmd, "--help"]);
        for f in fragments {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn ingest_resamples_and_summarises() {
    let daily = ok_stdout(&["ingest", "--input", &fixture("hourly_prices.csv"), "--timestamp-col", "time", "--bucket", "day"]);
    let rows = csv_rows(&daily);
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[1][0] - w[0][0] == 86_400.0));

    let r = json_result(&["ingest", "--input", &fixture("hourly_prices.csv"), "--timestamp-col", "time", "--format", "json"]);
    assert_eq!(r["summary"]["count"], 120);
    assert!(r["lognormal"]["aic"].as_f64().unwrap() < r["lognormal"]["bic"].as_f64().unwrap());
}

#[test]
fn surface_has_rows_per_initial_value() {
    let text = ok_stdout(&[
        "surface", "--strike-k", "3.2", "--window", "1", "--x0-grid", "3,3.2,3.4,3.6", "--maturities", "1,2,3",
    ]);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "x0,T=1,T=2,T=3");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    for j in 1..4 {
        assert!(rows.windows(2).all(|w| w[1][j] >= w[0][j]));
    }
}

#[test]
fn monte_carlo_price_reports_standard_error() {
    let r = json_result(&[
        "price", "--geometric", "--kind", "call", "--strike-k", "25", "--maturity", "2", "--window", "1",
        "--kappa", "0.5", "--n-paths", "500",
    ]);
    assert_eq!(r["method"], "monte-carlo");
    assert!(r["std_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn mechanism_trace_and_selection() {
    let trace = ok_stdout(&[
        "mechanism", "--schedule", &fixture("schedule.toml"), "--generator", &fixture("generator.json"), "--n-blocks", "12",
    ]);
    let header = trace.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "block,base_fee,lambda_1,lambda_2,usage_1,usage_2,burned,revenue");
    let rows = csv_rows(&trace);
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert!(r[4] <= 2.0 * 5e6 && r[5] <= 2.0 * 10e6, "hard limits hold");
    }

    let sel = json_result(&["mechanism", "--schedule", &fixture("schedule.toml"), "--mempool", &fixture("mempool.csv"), "--oracle"]);
    let greedy = sel["selection"]["revenue"].as_f64().unwrap();
    let oracle = sel["oracle"]["revenue"].as_f64().unwrap();
    assert!(greedy <= oracle);
    assert!((sel["revenue_ratio"].as_f64().unwrap() - greedy / oracle).abs() < 1e-12);
}

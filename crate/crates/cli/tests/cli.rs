use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aloha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aloha"))
        .args(args)
        .env_remove("ALOHA_THREADS")
        .output()
        .expect("spawn aloha")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn result(out: &Output) -> Value {
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    });
    doc["result"].clone()
}

fn nums(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_topology_preset_writes_override_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.json");
    let out = aloha(&["gen-topology", "--preset", "fig4a", "--out", path_str(&file)]);
    assert_eq!(code(&out), 0);
    let topo: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let rho: Vec<Vec<f64>> = serde_json::from_value(topo["rho_db"].clone()).unwrap();
    assert_eq!(rho, vec![vec![-3.0, 8.8], vec![5.1, -1.3]]);
}

#[test]
fn gen_topology_bipolar_round_trips_through_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("b.json");
    let f = path_str(&file);
    let out = aloha(&["gen-topology", "--ppp-density", "1e-4", "--side", "300", "--bipolar", "25", "--seed", "1", "--out", f]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let topo: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let k = topo["transmitters"].as_array().unwrap().len();
    assert!(k >= 1);
    assert_eq!(topo["receivers"].as_array().unwrap().len(), k);

    let out = aloha(&["steady-state", "--topology", f, "--lambda", "0.01", "--q", "0.1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(nums(&result(&out)["solution"]["p"]).len(), k);
}

#[test]
fn gen_topology_cellular_preset_has_one_base_station() {
    let out = aloha(&["gen-topology", "--preset", "fig5a"]);
    assert_eq!(code(&out), 0);
    let topo: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(topo["receivers"].as_array().unwrap().len(), 1);
    assert_eq!(topo["transmitters"].as_array().unwrap().len(), 25);
    assert!(topo["association"].as_object().unwrap().values().all(|v| v.as_u64() == Some(1)));
}

#[test]
fn single_link_success_probability_is_exponential_in_threshold_over_snr() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("one.json");
    let one = r#"{"version":1,"transmitters":[{"id":1,"x_m":0,"y_m":0,"power_dbm":0}],
        "receivers":[{"id":1,"x_m":1,"y_m":0,"theta_db":3}],"association":{"1":1},
        "noise_dbm":-90,"alpha":4,"rho_db":[[5.0]]}"#;
    std::fs::write(&file, one).unwrap();
    let out = aloha(&["steady-state", "--topology", path_str(&file), "--lambda", "0.1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let p = nums(&result(&out)["solution"]["p"])[0];
    let expect = (-(10f64.powf(0.3)) / 10f64.powf(0.5)).exp();
    assert!((p - expect).abs() < 1e-12, "{p} vs {expect}");
}

#[test]
fn region_unsat_two_pair_boundaries() {
    let out = aloha(&["region-unsat", "--preset", "fig4a", "--lambda", "0.2,0.27", "--front-points", "8"]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    let lower = nums(&r["closed_form"]["region"]["lower"]);
    let upper = nums(&r["closed_form"]["region"]["upper"]);
    for (got, want) in lower.iter().chain(&upper).zip([0.65, 0.63, 0.87, 0.84]) {
        assert!((got - want).abs() <= 0.01, "{got} vs {want}");
    }
    let q2: Vec<Vec<f64>> = serde_json::from_value(r["numeric"]["q2"]["points"].clone()).unwrap();
    assert!(q2.iter().any(|p| (p[0] - 0.65).abs() <= 0.02 && (p[1] - 0.63).abs() <= 0.02), "{q2:?}");
}

#[test]
fn empty_region_exits_one_with_payload() {
    let out = aloha(&["region-unsat", "--preset", "fig4a", "--lambda", "0.5,0.5", "--generations", "20"]);
    assert_eq!(code(&out), 1);
    let r = result(&out);
    assert_eq!(r["numeric"]["empty"], Value::Bool(true));
    assert_eq!(r["closed_form"]["empty"], Value::Bool(true));
}

#[test]
fn stability_check_reports_witness_and_rejects_overload() {
    let out = aloha(&["region-stability", "--preset", "fig4a", "--lambda", "0.2,0.2"]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    assert_eq!(r["check"]["member"], Value::Bool(true));
    assert_eq!(nums(&r["check"]["witness_q"]).len(), 2);

    let out = aloha(&["region-stability", "--preset", "fig4a", "--lambda", "0.4,0.4"]);
    assert_eq!(code(&out), 1);
    assert_eq!(result(&out)["closed_form_member"], Value::Bool(false));
}

#[test]
fn simulate_delivers_unsaturated_rates() {
    let out = aloha(&[
        "simulate", "--preset", "fig4a", "--q", "0.9,0.7", "--lambda", "0.2,0.27", "--slots", "1e6", "--seed", "7",
    ]);
    assert_eq!(code(&out), 0);
    let txs = result(&out)["run"]["transmitters"].as_array().unwrap().clone();
    for (t, want) in txs.iter().zip([0.2, 0.27]) {
        let got = t["throughput"].as_f64().unwrap();
        assert!((got - want).abs() / want < 0.05, "{got} vs {want}");
    }
}

#[test]
fn simulate_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = aloha(&[
        "simulate", "--preset", "fig4a", "--lambda", "0.1", "--q", "0.5", "--slots", "1e4", "--trace", path_str(&trace),
        "--trace-every", "100",
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.lines().count() > 10);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for f in [&a, &b] {
        let out = aloha(&[
            "experiment", "percent-stable", "--samples", "3", "--slots", "2e4", "--sides", "300,400", "--seed", "9",
            "--deterministic", "--out", path_str(f),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    assert!(text.starts_with(b"side,"));

    let out = aloha(&["steady-state", "--preset", "fig4a", "--lambda", "0.1"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("generated_unix"));
    let out = aloha(&["steady-state", "--preset", "fig4a", "--lambda", "0.1", "--deterministic"]);
    assert!(!String::from_utf8_lossy(&out.stdout).contains("generated_unix"));
}

#[test]
fn symmetric_experiment_reports_interval_and_largest_rate() {
    let out = aloha(&["experiment", "symmetric", "--lambda", "0.02,0.03", "--deterministic"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!((rows[0][1] - 0.0337).abs() < 5e-4 && (rows[0][2] - 0.1567).abs() < 5e-4, "{rows:?}");
    assert!(rows[1][1].is_nan());
    assert!((rows[0][3] - 0.026630).abs() < 1e-5);
}

#[test]
fn region_grid_marks_members() {
    let out = aloha(&["region-grid", "--preset", "fig4a", "--lambda", "0.2,0.27", "--grouping", "identity",
        "--axis", "0.5:1:11", "--deterministic"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q1,q2,member,p_1,p_2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().any(|r| r.starts_with("0.75,0.75,1,")));
    assert!(rows.iter().any(|r| r.starts_with("0.5,0.5,0,")));
}

#[test]
fn verify_passes_on_a_preset_and_fails_on_tight_tolerance() {
    let out = aloha(&["verify", "--preset", "fig4c", "--slots", "5e5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(result(&out)["pass"], Value::Bool(true));

    let out = aloha(&["verify", "--preset", "fig4c", "--slots", "1e4", "--p-tol", "1e-6"]);
    assert_eq!(code(&out), 1);
    assert_eq!(result(&out)["pass"], Value::Bool(false));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&aloha(&["steady-state", "--preset", "nope", "--lambda", "0.1"])), 2);
    assert_eq!(code(&aloha(&["simulate", "--preset", "fig4a", "--lambda", "0.1,0.2,0.3"])), 2);
    assert_eq!(code(&aloha(&["simulate", "--preset", "fig4a", "--lambda", "0.1", "--slots", "1.5"])), 2);
    assert_eq!(code(&aloha(&["steady-state", "--topology", "/nonexistent/t.json", "--lambda", "0.1"])), 2);
    assert_eq!(code(&aloha(&["gen-topology", "--ppp-density", "-1", "--bipolar", "25"])), 2);
    assert_eq!(code(&aloha(&["steady-state", "--lambda", "0.1"])), 2);
}

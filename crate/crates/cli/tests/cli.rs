use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use losslab_core::Report;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_losslab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn losslab")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("[scenario]\n{body}")).unwrap();
    p
}

fn synth(config: &Path, scenario: &Path, out: &Path) {
    let o = run(&["synth", "--config", s(config), "--scenario", s(scenario), "--out", s(out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn grid_override(dir: &Path) -> PathBuf {
    // Coarser grid keeps debug-build tests quick.
    let text = fs::read_to_string(configs().join("reference.ini")).unwrap().replace("n_grid = 3600", "n_grid = 720");
    let p = dir.join("reference.ini");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn zero_scenario_on_sealed_config_reports_no_losses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sealed.ini");
    let trace = dir.path().join("zero.csv");
    let sc = write_scenario(dir.path(), "zero.ini", "delta_rc_m = 0\ndelta_vc_m = 0\nn_grid = 720\n");
    synth(&cfg, &sc, &trace);
    let out = dir.path().join("out");
    let o = run(&["analyze", "--config", s(&cfg), "--trace", s(&trace), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = Report::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let m = &r.mass_losses;
    for l in [m.lambda_sh, m.lambda_lk, m.lambda_cv, m.lambda_bf, m.lambda_sc] {
        assert!(l.abs() < 1e-3, "{m:?}");
    }
    let pv = fs::read_to_string(out.join("pv_diagram.csv")).unwrap();
    assert!(pv.starts_with("V_m3,p_Pa,leg\n"));
    assert!(!out.join("chamber_states.csv").exists());
}

#[test]
fn dump_states_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid_override(dir.path());
    let trace = dir.path().join("t.csv");
    synth(&cfg, &configs().join("scenarios/delayed.ini"), &trace);
    let out = dir.path().join("out");
    let o = run(&["analyze", "--config", s(&cfg), "--trace", s(&trace), "--out", s(&out), "--dump-states", "--adiabatic"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let states = fs::read_to_string(out.join("chamber_states.csv")).unwrap();
    assert!(states.starts_with("alpha_deg,T_K,rho_kgm3,m_c_kg,dQ_J\n"));
    assert_eq!(states.lines().count(), 1 + 721);
    let r = Report::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(r.meta.delayed_closing);
    assert!(r.warnings.iter().any(|w| w.contains("delayed closing")));
    assert!(r.warnings.iter().any(|w| w.contains("adiabatic")));
}

#[test]
fn pulsating_closure_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid_override(dir.path());
    let trace = dir.path().join("p.csv");
    synth(&cfg, &configs().join("scenarios/pulsating.ini"), &trace);
    let out = dir.path().join("out");
    let o = run(&["analyze", "--config", s(&cfg), "--trace", s(&trace), "--out", s(&out)]);
    assert!(o.status.success());
    let r = Report::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let m = &r.mass_losses;
    assert!((m.eta_v_pred - m.eta_v_meas).abs() <= 0.05);
    assert!((r.power_losses.p_2 / 5e5 - 1.08).abs() < 1e-3);
    assert!((r.efficiencies.eta_mf - 0.87).abs() < 1e-9);
    assert_eq!(r.meta.run.n_rps, 160.0);
}

#[test]
fn missing_key_exits_one_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("reference.ini")).unwrap().replace("r1 = 0.025\n", "");
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, text).unwrap();
    let o = run(&["analyze", "--config", s(&cfg), "--trace", "nope.csv", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`r1`"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn malformed_trace_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.csv");
    fs::write(&trace, "alpha_deg,p_suction_Pa\n0,1\n").unwrap();
    let o = run(&["analyze", "--config", s(&configs().join("reference.ini")), "--trace", s(&trace), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.csv");
    let o = run(&["analyze", "--config", s(&configs().join("reference.ini")), "--trace", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid_override(dir.path());
    let trace = dir.path().join("t.csv");
    synth(&cfg, &configs().join("scenarios/zero.ini"), &trace);
    // Suction pressure collapses mid-stroke: the density iteration cannot follow.
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let first = lines.iter().position(|l| l.starts_with("alpha_deg")).unwrap() + 1;
    for l in lines[first + 360..].iter_mut() {
        let mut cols: Vec<String> = l.split(',').map(String::from).collect();
        cols[1] = "20000.0".into();
        *l = cols.join(",");
    }
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let strict = dir.path().join("strict.ini");
    let text = fs::read_to_string(&cfg).unwrap().replace("max_iter = 50", "max_iter = 3");
    fs::write(&strict, text).unwrap();
    let o = run(&["analyze", "--config", s(&strict), "--trace", s(&trace), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn negative_amplitude_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "neg.ini", "pulsation_amp = -0.05\n");
    let o = run(&[
        "synth",
        "--config",
        s(&configs().join("reference.ini")),
        "--scenario",
        s(&sc),
        "--out",
        s(&dir.path().join("t.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn sweep_over_six_speeds_with_one_bad_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid_override(dir.path());
    let traces = dir.path().join("traces");
    fs::create_dir(&traces).unwrap();
    for n in [80, 120, 140, 160, 180, 200] {
        let sc = write_scenario(dir.path(), &format!("s{n}.ini"), &format!("pulsation_amp = 0.04\nN_rps = {n}\n"));
        synth(&cfg, &sc, &traces.join(format!("n{n:03}.csv")));
    }
    let out = dir.path().join("out");
    let pattern = format!("{}/*.csv", traces.display());
    let o = run(&["sweep", "--config", s(&cfg), "--traces", &pattern, "--out", s(&out), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sweep_lambdas.csv", "sweep_power.csv", "sweep_rates.csv"] {
        assert_eq!(fs::read_to_string(out.join(f)).unwrap().lines().count(), 7, "{f}");
    }
    let lambdas = fs::read_to_string(out.join("sweep_lambdas.csv")).unwrap();
    assert!(lambdas.starts_with("label,N_rps,lambda_sh,lambda_lk,lambda_cv,lambda_bf,lambda_sc,eta_v_pred,eta_v_meas\n"));

    fs::write(traces.join("n140.csv"), "garbage\n").unwrap();
    let o = run(&["sweep", "--config", s(&cfg), "--traces", &pattern, "--out", s(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("sweep_rates.csv")).unwrap().lines().count(), 6);
    let json = fs::read_to_string(out.join("sweep_report.json")).unwrap();
    assert!(json.contains("\"label\": \"n140\""));

    let o = run(&["sweep", "--config", s(&cfg), "--traces", &format!("{}/*.none", traces.display()), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn table_backend_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("table.ini"))
        .unwrap()
        .replace("../crates/core/tests/data/r32_vapor.csv", s(&configs().join("../crates/core/tests/data/r32_vapor.csv")));
    let cfg = dir.path().join("table.ini");
    fs::write(&cfg, format!("{text}\n[synth]\nn_grid = 360\n")).unwrap();
    let trace = dir.path().join("t.csv");
    synth(&cfg, &configs().join("scenarios/pulsating.ini"), &trace);
    let out = dir.path().join("out");
    let o = run(&["analyze", "--config", s(&cfg), "--trace", s(&trace), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = Report::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(r.meta.gamma > 1.0 && r.meta.gamma < 1.4);
}

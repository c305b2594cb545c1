use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn symvol(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symvol"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_config(dir: &TempDir, name: &str, json: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn harmonic_trajectory_matches_rotation() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "h.json",
        r#"{"system":"harmonic_oscillator","initial_state":[1,0],"t_span":[0,20],"samples":40}"#,
    );
    let out = symvol(dir.path(), &["propagate", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("o/trajectory.csv")).unwrap();
    let table = symvol::io::read_trajectory_csv(&text).unwrap();
    assert_eq!(table.rows.len(), 41);
    for (i, row) in table.rows.iter().enumerate() {
        let (s, c) = row.t.sin_cos();
        let golden = [c, -s, s, c];
        let stm = table.stm(i).matrix;
        for (k, g) in golden.iter().enumerate() {
            let got = stm[(k / 2, k % 2)];
            assert!((got - g).abs() < 1e-9, "t = {}: entry {k} {got} vs {g}", row.t);
        }
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max symplecticity residual"));
}

#[test]
fn pendulum_summary_reports_residual() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "p.json",
        r#"{"system":"pendulum","initial_state":[0.5,1.0],"t_span":[0,10],"samples":10}"#,
    );
    let out = symvol(dir.path(), &["propagate", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max symplecticity residual"));
}

#[test]
fn missing_field_is_a_config_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "bad.json", r#"{"system":"harmonic_oscillator","t_span":[0,1]}"#);
    let out = symvol(dir.path(), &["propagate", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("initial_state"), "{}", stderr(&out));
}

#[test]
fn nested_unknown_key_reports_its_path() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "bad.json",
        r#"{"system":"harmonic_oscillator","initial_state":[1,0],"t_span":[0,1],"integrator":{"rtol":1e-9}}"#,
    );
    let out = symvol(dir.path(), &["propagate", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("integrator") && err.contains("rtol"), "{err}");
}

#[test]
fn unknown_system_and_missing_config_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "u.json", r#"{"system":"kepler","initial_state":[1,0],"t_span":[0,1]}"#);
    assert_eq!(code(&symvol(dir.path(), &["propagate", "--config", &cfg])), 2);
    assert_eq!(code(&symvol(dir.path(), &["propagate"])), 2);
}

#[test]
fn step_budget_exhaustion_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "f.json",
        r#"{"system":"pendulum","initial_state":[0,1],"t_span":[0,10],"integrator":{"max_steps":5}}"#,
    );
    let out = symvol(dir.path(), &["propagate", "--config", &cfg]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn coupled_invariants_pass() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "c.json",
        r#"{"stm":{"kind":"propagate","system":"coupled_oscillators","epsilon":0.25,
            "initial_state":[0.3,1.0,-0.2,0.5],"t_span":[0,10],"samples":20}}"#,
    );
    let out = symvol(dir.path(), &["invariants", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(dir.path().join("o/invariants.json"));
    assert!(report["max_column_sum_deviation"].as_f64().unwrap() <= 1e-8);
    assert!(report["violations"].as_array().unwrap().is_empty());
    let csv = std::fs::read_to_string(dir.path().join("o/invariants.csv")).unwrap();
    let rows = symvol::io::read_invariants_csv(&csv).unwrap();
    assert!(rows.iter().any(|r| r.quantity == "beta"));
}

#[test]
fn corrupted_stm_file_exits_4() {
    let dir = TempDir::new().unwrap();
    let stm = dir.path().join("stm.json");
    std::fs::write(&stm, r#"{"t0":0,"t1":1,"matrix":[[1.0,0.1],[0.0,1.0001]]}"#).unwrap();
    let cfg = with_config(
        &dir,
        "i.json",
        &format!(r#"{{"stm":{{"kind":"file","path":{:?}}}}}"#, stm.to_string_lossy()),
    );
    let out = symvol(dir.path(), &["invariants", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let report = read_json(dir.path().join("o/invariants.json"));
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn squeeze_rotate_split_values() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "s.json",
        r#"{"stm":{"kind":"fixture","name":"squeeze_rotate"},"splits":[[1]]}"#,
    );
    let out = symvol(dir.path(), &["invariants", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(dir.path().join("o/invariants.json"));
    let rec = &report["records"][0];
    let nu = rec["nu_by_split"]["1|2"].as_array().unwrap();
    assert!((nu[0].as_f64().unwrap() - 1.25).abs() < 1e-12);
    assert!((nu[1].as_f64().unwrap() - 1.25).abs() < 1e-12);
    let beta = rec["beta_by_split"]["1|2"].as_f64().unwrap();
    assert!((beta - 0.64f64.asin()).abs() < 1e-12);
    assert!((beta - 0.6949).abs() < 1e-3);
}

#[test]
fn squeeze_skeleton_spectrum() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "k.json", r#"{"stm":{"kind":"fixture","name":"squeeze"}}"#);
    let out = symvol(dir.path(), &["skeleton", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("o/skeleton.json")).unwrap();
    let sk = symvol::io::parse_skeleton_json(&text).unwrap();
    assert!((sk.spectrum[0] - 4.0).abs() < 1e-12);
    assert!((sk.spectrum[1] - 0.25).abs() < 1e-12);
}

#[test]
fn identity_skeleton_is_flat() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "k.json",
        r#"{"stm":{"kind":"fixture","name":"identity","n_pairs":3}}"#,
    );
    let out = symvol(dir.path(), &["skeleton", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sk = symvol::io::parse_skeleton_json(&std::fs::read_to_string(dir.path().join("o/skeleton.json")).unwrap())
        .unwrap();
    assert!(sk.spectrum.iter().all(|l| (l - 1.0).abs() < 1e-12));
}

#[test]
fn pendulum_skeleton_is_reciprocal() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "k.json",
        r#"{"stm":{"kind":"propagate","system":"pendulum","initial_state":[0.5,1.0],"t_span":[0,10],"samples":1}}"#,
    );
    let out = symvol(dir.path(), &["skeleton", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sk = symvol::io::parse_skeleton_json(&std::fs::read_to_string(dir.path().join("o/skeleton.json")).unwrap())
        .unwrap();
    assert!((sk.spectrum[0] * sk.spectrum[1] - 1.0).abs() <= 1e-8);
}

#[test]
fn non_symplectic_skeleton_input_exits_5() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "k.json", r#"{"stm":{"kind":"matrix","matrix":[[2,0],[0,1]]}}"#);
    let out = symvol(dir.path(), &["skeleton", "--config", &cfg]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn surface_writes_loadable_density_maps() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "s.json",
        r#"{"stm":{"kind":"fixture","name":"squeeze_rotate"},"pair":1,"cells":[16,16]}"#,
    );
    let out = symvol(dir.path(), &["surface", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for target in 1..=2 {
        let text = std::fs::read_to_string(dir.path().join(format!("o/density_{target}.csv"))).unwrap();
        let table = symvol::io::read_density_csv(&text).unwrap();
        assert_eq!(table.rows.len(), 256);
        let total: f64 = table.rows.iter().map(|r| r.prob).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
    let report = read_json(dir.path().join("o/surface.json"));
    assert!((report["report"]["mapped_area"].as_f64().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn heisenberg_bloch_summary() {
    let dir = TempDir::new().unwrap();
    let out = symvol(dir.path(), &["example", "heisenberg", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = read_json(dir.path().join("o/heisenberg_summary.json"));
    assert!((s["f_closed"].as_f64().unwrap() - 8.0 / 3.0).abs() <= 1e-6);
    assert!((s["alpha1"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert!(s["mu1"].as_f64().unwrap().abs() <= 1e-9);
    assert!(s["nu1"].as_f64().unwrap().abs() <= 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("o/heisenberg_surface.csv")).unwrap();
    let points = symvol::io::read_snapshots_csv(&csv).unwrap();
    assert_eq!(points.len(), 5 * 21 * 21);
}

#[test]
fn heisenberg_zero_control_cost() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "z.json", r#"{"control":{"family":"zero"}}"#);
    let out = symvol(dir.path(), &["example", "heisenberg", "--config", &cfg, "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = read_json(dir.path().join("o/heisenberg_summary.json"));
    assert!((s["f_closed"].as_f64().unwrap() - 20.0 / 3.0).abs() <= 1e-9);
    assert!((s["f_quadrature"].as_f64().unwrap() - 20.0 / 3.0).abs() <= 1e-6);
}

#[test]
fn disc_compliant_keeps_projection_flat() {
    let dir = TempDir::new().unwrap();
    let out = symvol(dir.path(), &["example", "disc", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = read_json(dir.path().join("o/disc_summary.json"));
    assert!(s["AD_minus_BC_max"].as_f64().unwrap() <= 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("o/disc_trajectory.csv")).unwrap();
    assert!(!symvol::io::read_disc_csv(&csv).unwrap().is_empty());
}

#[test]
fn unknown_example_is_rejected_by_the_parser() {
    let dir = TempDir::new().unwrap();
    let out = symvol(dir.path(), &["example", "kepler"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn fixed_step_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "d.json",
        r#"{"system":"coupled_oscillators","epsilon":0.25,"initial_state":[0.3,1.0,-0.2,0.5],
            "t_span":[0,5],"samples":50,"integrator":{"method":"classical_rk4","fixed_step":0.01}}"#,
    );
    for o in ["a", "b"] {
        let out = symvol(dir.path(), &["propagate", "--config", &cfg, "--out", o]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seeded_random_stm_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "r.json", r#"{"stm":{"kind":"random","n_pairs":3}}"#);
    for o in ["a", "b"] {
        let out = symvol(dir.path(), &["skeleton", "--config", &cfg, "--out", o, "--seed", "7"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(
        std::fs::read(dir.path().join("a/skeleton.json")).unwrap(),
        std::fs::read(dir.path().join("b/skeleton.json")).unwrap()
    );
}

#[test]
fn json_format_switches_bulk_output() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(
        &dir,
        "h.json",
        r#"{"system":"harmonic_oscillator","initial_state":[1,0],"t_span":[0,1],"samples":4}"#,
    );
    let out = symvol(dir.path(), &["propagate", "--config", &cfg, "--out", "o", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let traj: symvol::Trajectory =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/trajectory.json")).unwrap()).unwrap();
    assert_eq!(traj.samples.len(), 5);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hamforge::delta::DeltaRecipe;
use hamforge::lp::CompiledProgram;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamforge")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn profile(n: usize, x: impl Fn(usize) -> f64) -> String {
    let xs: Vec<f64> = (1..n).map(x).collect();
    serde_json::json!({"n": n, "omega_x": xs, "omega_y": vec![0.0; n - 1], "omega_z": vec![0.0; n - 1], "b": 0.0}).to_string()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn filter_eval_prints_values() {
    let dir = TempDir::new().unwrap();
    let l2 = write(dir.path(), "l2.json", r#"{"op":"lambda","k":2}"#);
    let o = run(&["filter", "eval", arg(&l2), "--n", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1: 0.0\n2: -1.0\n3: 0.0\n");

    let l0 = write(dir.path(), "l0.json", r#"{"op":"lambda","k":0}"#);
    let o = run(&["filter", "eval", arg(&l0), "--n", "4", "--csv"]);
    assert_eq!(stdout(&o), "d,f\n1,1.0\n2,1.0\n3,1.0\n");
}

#[test]
fn malformed_expression_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"op\": \"lambda\",\n \"k\": }");
    let o = run(&["filter", "eval", arg(&bad), "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let neg = write(dir.path(), "neg.json", r#"{"op":"sum","terms":[{"w":-1,"e":{"op":"lambda","k":1}}]}"#);
    assert_eq!(run(&["filter", "eval", arg(&neg), "--n", "4"]).status.code(), Some(2));
}

#[test]
fn float_precision_matches_rational() {
    let dir = TempDir::new().unwrap();
    let e = write(dir.path(), "e.json", r#"{"op":"sum","terms":[{"w":"1/3","e":{"op":"lambda","k":3}},{"w":1,"e":{"op":"gamma","k":4}}]}"#);
    let exact = run(&["filter", "eval", arg(&e), "--n", "6"]);
    let float = Command::new(env!("CARGO_BIN_EXE_hamforge"))
        .args(["filter", "eval", arg(&e), "--n", "6"])
        .env("HAMFORGE_PRECISION", "float64")
        .output()
        .unwrap();
    let parse = |s: String| -> Vec<f64> { s.lines().map(|l| l.split(": ").nth(1).unwrap().parse().unwrap()).collect() };
    for (a, b) in parse(stdout(&exact)).iter().zip(parse(stdout(&float))) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn delta_verify_reports_count() {
    let o = run(&["delta", "--d", "1", "--n", "15", "--sign", "-1", "--verify"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("off-target max 0e0"), "{err}");
    assert!(err.contains("concatenations 5 (closed form 5)"), "{err}");
    let r: DeltaRecipe = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.concatenations, 5);
    // Emitted documents round-trip.
    let again: DeltaRecipe = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(again, r);
}

#[test]
fn delta_generic_and_range() {
    let o = run(&["delta", "--d", "5", "--n", "16"]);
    assert!(o.status.success());
    let r: DeltaRecipe = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.target_distance, 5);
    assert!(stdout(&o).contains("\"construction\": \"generic\""));
    assert_eq!(run(&["delta", "--d", "16", "--n", "16"]).status.code(), Some(2));
    assert_eq!(run(&["delta", "--d", "0", "--n", "16"]).status.code(), Some(2));
}

#[test]
fn strength_top_octave() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sq.csv");
    let o = run(&["strength", "--n", "1048576", "--qmin", "524289", "--qmax", "1048575", "--out", arg(&csv), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let full: f64 = out
        .lines()
        .find(|l| l.starts_with("envelope slope (Q in [64"))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((-2.735..=-2.435).contains(&full), "{out}");
    assert!(out.contains("reference -log2(6): -2.5850"));
    let body = fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("Q,sQ_raw,sQ_normalized,guide_Q_pow\n524289,"));
    assert_eq!(body.lines().count(), 524288);
}

#[test]
fn strength_warns_below_half() {
    let o = run(&["strength", "--n", "1000", "--qmin", "100", "--qmax", "999"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn compile_power_law_target() {
    let dir = TempDir::new().unwrap();
    let native = write(dir.path(), "native.json", &profile(8, |d| 1.0 / d as f64));
    let target = write(dir.path(), "target.json", &profile(8, |d| 1.0 / (d * d) as f64));
    let out = dir.path().join("program.json");
    let o = run(&["compile", "--target", arg(&target), "--native", arg(&native), "--power-law", "12", "--out", arg(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p: CompiledProgram = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(p.residual_inf_norm <= 1e-8 && p.exact_residual <= 1e-8);
    assert!(p.terms.len() <= 7);
}

#[test]
fn compile_native_target_is_identity() {
    let dir = TempDir::new().unwrap();
    let native = write(dir.path(), "native.json", &profile(6, |d| 1.0 / d as f64));
    let o = run(&["compile", "--target", arg(&native), "--native", arg(&native)]);
    let p: CompiledProgram = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(p.terms.len(), 1);
    assert_eq!(p.terms[0].expr, hamforge::FilterExpr::Lambda(0));
}

#[test]
fn compile_infeasible_exits_4() {
    let dir = TempDir::new().unwrap();
    let native = write(dir.path(), "native.json", &profile(8, |d| 1.0 / d as f64));
    let target = write(dir.path(), "target.json", &profile(8, |d| 1.0 / (d * d) as f64));
    let o = run(&["compile", "--target", arg(&target), "--native", arg(&native), "--lambda-only", "--depth", "0"]);
    assert_eq!(o.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "infeasible");
    assert!(v["certificate"]["b_dot_y"].as_f64().unwrap() > 0.0);
}

#[test]
fn compile_zero_native_exits_2() {
    let dir = TempDir::new().unwrap();
    let native = write(dir.path(), "native.json", &profile(4, |d| if d == 2 { 0.0 } else { 1.0 }));
    let target = write(dir.path(), "target.json", &profile(4, |_| 0.5));
    let o = run(&["compile", "--target", arg(&target), "--native", arg(&native)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("d = 2"));
}

#[test]
fn schedule_export_csv() {
    let dir = TempDir::new().unwrap();
    let l2 = write(dir.path(), "l2.json", r#"{"op":"lambda","k":2}"#);
    let o = run(&["schedule", "export", arg(&l2), "--n", "3"]);
    assert_eq!(stdout(&o), "time,qubit\n0,1\n0.5,2\n1,1\n1,2\n");
}

#[test]
fn sim_verify_nearest_neighbour() {
    let dir = TempDir::new().unwrap();
    let f = write(
        dir.path(),
        "l2l3.json",
        r#"{"op":"prod","factors":[
            {"op":"sum","terms":[{"w":1,"e":{"op":"lambda","k":2}},{"w":1,"e":{"op":"lambda","k":0}}]},
            {"op":"sum","terms":[{"w":1,"e":{"op":"lambda","k":3}},{"w":1,"e":{"op":"lambda","k":0}}]}]}"#,
    );
    let o = run(&["sim", "verify", "--n", "4", "--filter", arg(&f)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["filter"][1], 0.0);
}

#[test]
fn sim_trotter_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("t.csv");
    let a = run(&["sim", "trotter", "--mode", "both", "--r", "4,8,16,32", "--seed", "3", "--csv", arg(&csv)]);
    assert!(a.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert!((v["slope"].as_f64().unwrap() + 2.0).abs() < 0.1);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("r,measured_error,bound\n4,"));
    let b = run(&["sim", "trotter", "--mode", "both", "--r", "4,8,16,32", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(run(&["sim", "trotter", "--mode", "sideways"]).status.code(), Some(2));
}

#[test]
fn sim_adiabatic_quadratic() {
    let o = run(&["sim", "adiabatic", "--n", "4", "--steps", "2,4,8,16,32"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["slope"].as_f64().unwrap() + 2.0).abs() < 0.2);
}

#[test]
fn sim_powerlaw_and_heisenberg() {
    let o = run(&["sim", "powerlaw", "--n", "6", "--levels", "8"]);
    assert!(o.status.success());
    let o = run(&["sim", "heisenberg"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["slope"].as_f64().unwrap() + 2.0).abs() < 0.1);
    assert_eq!(run(&["sim", "powerlaw", "--n", "40"]).status.code(), Some(2));
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(run(&["delta", "--d", "x", "--n", "4"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mkp_core::exterior::io::FormFile;
use mkp_core::exterior::scalar::rat;
use mkp_core::exterior::{standard_structures, ConstForm, Form, PolyScalar, Rational, TrigScalar};
use mkp_core::mirror_potential::{classify_psh, classify_sl_psh, PshVerdict};
use mkp_core::stable_forms::ConeSampleConfig;
use serde_json::Value;
use tempfile::TempDir;

fn mkp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mkp")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn potential_file(dir: &TempDir, name: &str, p: PolyScalar) -> PathBuf {
    write(dir, name, &FormFile::from_poly(&Form::function(p)).to_json())
}

#[test]
fn verify_reports_every_suite() {
    let o = mkp(&["verify"]);
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.contains("⋆⋆ = id on basis blades: PASS"));
    assert!(text.contains("dd^cφ ∝ ω₀: PASS"));
    assert!(text.contains("dual(ρ₀) = σ₀: PASS"));
    assert!(text.contains("dd^s(φΩ₀) = 3iΩ₀: FAIL (found 6iΩ₀"));
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_only_one_suite() {
    let o = mkp(&["verify", "--only", "star-involution"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[star-involution]"));
    assert!(!text.contains("[d-squared]"));
    assert_eq!(code(&mkp(&["verify", "--only", "nonsense"])), 2);
}

#[test]
fn verify_json_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        mkp(&["verify", "--seed", "11", "--json", s(p)]);
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let v: Value = serde_json::from_slice(&x).unwrap();
    assert_eq!(v["config"]["seed"], 11);
}

#[test]
fn stability_verdicts_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let st = standard_structures();
    let rho = write(&dir, "rho.json", &FormFile::from_const(&st.rho0).to_json());
    let o = mkp(&["stability", s(&rho)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], "stable_negative");
    let dual: FormFile = serde_json::from_value(v["dual"].clone()).unwrap();
    assert_eq!(dual.to_const().unwrap(), st.sigma0);

    let dec = ConstForm::monomial(&[1, 3, 5], rat(1, 1)).unwrap();
    let f = write(&dir, "135.json", &FormFile::from_const(&dec).to_json());
    let o = mkp(&["stability", s(&f)]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["verdict"], "unstable");

    let two = write(&dir, "two.json", r#"{"degree": 2, "terms": [{"blades": [1, 2], "coeff": "1"}]}"#);
    let o = mkp(&["stability", s(&two)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("degree 2"));

    let broken = write(&dir, "broken.json", "{ not json");
    assert_eq!(code(&mkp(&["stability", s(&broken)])), 2);
    assert_eq!(code(&mkp(&["stability", "/nonexistent/file.json"])), 2);
}

#[test]
fn mkp_check_on_flat_potential() {
    let dir = TempDir::new().unwrap();
    let phi = potential_file(&dir, "phi.json", PolyScalar::sum_of_squares().scale(&rat(1, 6)));
    let o = mkp(&["mkp-check", "--phi", s(&phi)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["consistent"], true);
    assert_eq!(v["rho_multiple"], "1");
    assert_eq!(v["sigma_multiple"], "1");
}

#[test]
fn psh_matches_library() {
    let dir = TempDir::new().unwrap();
    let mut h: [[Rational; 6]; 6] = std::array::from_fn(|_| std::array::from_fn(|_| rat(0, 1)));
    for (i, v) in [10, 10, 10, 10, -1, -1].into_iter().enumerate() {
        h[i][i] = rat(v, 1);
    }
    let phi = PolyScalar::quadratic(&h);
    let path = potential_file(&dir, "q.json", phi.clone());
    let o = mkp(&["psh", "--phi", s(&path), "--seed", "5", "--samples", "1000"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let cfg = ConeSampleConfig {
        sample_count: 1000,
        seed: 5,
        ..ConeSampleConfig::default()
    };
    let lib_psh = classify_psh(&phi, &cfg, &[]).unwrap();
    let lib_sl = classify_sl_psh(&phi, &cfg, &[]).unwrap();
    let through_text = |x: &PshVerdict| serde_json::from_str::<Value>(&serde_json::to_string(x).unwrap()).unwrap();
    assert_eq!(v["psh"], through_text(&lib_psh));
    assert_eq!(v["sl_psh"], through_text(&lib_sl));
    assert_eq!(v["psh"]["classification"], "not_psh");
    assert_eq!(v["sl_psh"]["classification"], "strictly_sl_psh");
}

#[test]
fn residual_equations() {
    let dir = TempDir::new().unwrap();
    let zero = potential_file(&dir, "zero.json", PolyScalar::zero());
    let o = mkp(&["residual", "--equation", "11", "--phi", s(&zero)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["densities"][0]["constant"], "1");

    let o = mkp(&["residual", "--equation", "13", "--phi", s(&zero)]);
    let v = stdout_json(&o);
    assert_eq!(v["densities"][0]["reading"], "correction");
    assert_eq!(v["densities"][1]["reading"], "total_potential");
    // eq11 · (ρ₀ ∧ σ₀) = eq13 of the total Hessian
    assert_eq!(v["densities"][1]["constant"], "4");

    let half = potential_file(&dir, "half.json", PolyScalar::sum_of_squares().scale(&rat(1, 2)));
    let o = mkp(&["residual", "--equation", "14", "--phi", s(&half)]);
    assert_eq!(stdout_json(&o)["densities"][0]["constant"], "3");

    let alpha = write(&dir, "a.json", &FormFile::from_poly(&Form::zero(3)).to_json());
    let o = mkp(&["residual", "--equation", "9", "--alpha", s(&alpha), "--beta", s(&alpha)]);
    assert_eq!(stdout_json(&o)["densities"][0]["constant"], "1");

    assert_eq!(code(&mkp(&["residual", "--equation", "12", "--phi", s(&zero)])), 2);
    assert_eq!(code(&mkp(&["residual", "--equation", "9", "--alpha", s(&alpha)])), 2);
}

#[test]
fn trigonometric_potential_through_mkp_check() {
    let dir = TempDir::new().unwrap();
    let t = TrigScalar::cos([1, 0, 1, 0, 0, 0], rat(1, 10));
    let p = write(&dir, "t.json", &FormFile::from_trig(&Form::function(t)).to_json());
    let o = mkp(&["mkp-check", "--phi", s(&p)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["consistent"], true);
    assert!(v["rho_multiple"].is_null());
}

#[test]
fn manufactured_semiflat_writes_convergence_table() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("conv.csv");
    let o = mkp(&["solve-semiflat", "--N", "64", "--manufactured", "eps=0.05", "--stencil", "2", "--csv", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "N,max_err,l2_err,order");
    let order: f64 = lines[3].split(',').nth(3).unwrap().parse().unwrap();
    assert!((order - 2.0).abs() < 0.2, "order {order}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("elapsed"));
}

fn constant_rhs(dir: &TempDir, n: usize, value: f64) -> PathBuf {
    let mut text = format!("axes,N,degree,blade-list\n1;3;5,{n},0,0\n");
    for _ in 0..n * n * n {
        text.push_str(&format!("{value:e}\n"));
    }
    write(dir, "rhs.csv", &text)
}

#[test]
fn incompatible_rhs_exits_with_solver_failure() {
    let dir = TempDir::new().unwrap();
    let rhs = constant_rhs(&dir, 8, 10.0);
    let o = mkp(&["solve-semiflat", "--rhs", s(&rhs)]);
    assert_eq!(code(&o), 4);
    let v = stdout_json(&o);
    assert_eq!(v["status"], "FAILED");
    assert!(v["diagnostic"].is_string());
}

#[test]
fn flat_rhs_converges_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let rhs = constant_rhs(&dir, 8, 3.0);
    let out = dir.path().join("p.csv");
    let plot = dir.path().join("plot.csv");
    let o = mkp(&["solve-semiflat", "--rhs", s(&rhs), "--out", s(&out), "--plot", s(&plot)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["status"], "CONVERGED");
    let p = std::fs::read_to_string(&out).unwrap();
    assert!(p.starts_with("axes,N,degree,blade-list"));
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot.lines().count(), 1 + 512);
}

fn manufactured_target(dir: &TempDir) -> PathBuf {
    let psi = TrigScalar::cos([1, 0, 1, 0, 0, 0], rat(1, 10));
    let psi = FormFile::from_trig(&Form::function(psi)).to_json();
    write(dir, "target.json", &format!(r#"{{"kind": "manufactured", "axes": [1, 3], "N": 8, "psi": {psi}}}"#))
}

#[test]
fn fit_recovers_manufactured_target() {
    let dir = TempDir::new().unwrap();
    let target = manufactured_target(&dir);
    let o = mkp(&["fit", "--t", "1.0", "--target", s(&target)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["residual_l2"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["N"], 8);
}

#[test]
fn fit_json_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let target = write(&dir, "r.json", r#"{"kind": "random_constant"}"#);
    let mut outs = Vec::new();
    for name in ["a.json", "b.json"] {
        let p = dir.path().join(name);
        let o = mkp(&["fit", "--seed", "3", "--target", s(&target), "--json", s(&p)]);
        assert_eq!(code(&o), 0);
        outs.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let v: Value = serde_json::from_slice(&outs[0]).unwrap();
    assert!(v["residual_l2"].as_f64().unwrap() > 0.0);
}

#[test]
fn legendre_quadratic_closed_form() {
    let o = mkp(&["legendre", "--function", "quadratic:2,3,5", "--subset", "1,3,5", "--points", "5"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let expected = 10.0 / 30.0;
    assert!((v["experiment"]["closed_form"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert!(v["involution_defect"].as_f64().unwrap() < 1e-8);
    assert_eq!(code(&mkp(&["legendre", "--subset", "2"])), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"seed": 9, "fit": {"t": 0.5}}"#);
    let o = mkp(&["fit", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["t"], 0.5);
    let o = mkp(&["fit", "--config", s(&cfg), "--t", "0.25"]);
    assert_eq!(stdout_json(&o)["t"], 0.25);

    let bad = write(&dir, "bad.json", r#"{"sede": 9}"#);
    assert_eq!(code(&mkp(&["fit", "--config", s(&bad)])), 2);
    assert_eq!(code(&mkp(&["fit", "--t", "1.5"])), 2);
    assert_eq!(code(&mkp(&["solve-semiflat", "--N", "6"])), 2);
    assert_eq!(code(&mkp(&["fit", "--threads", "0"])), 2);
}

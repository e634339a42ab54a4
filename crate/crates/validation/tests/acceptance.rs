//! One `criterion N: PASS|FAIL` line per acceptance criterion. Tolerances are
//! fixed here and never relaxed to make a line pass.

use std::path::Path;
use std::time::Instant;

use mkp_core::exterior::scalar::int;
use mkp_core::exterior::{GridScalar, GridShape, PolyScalar};
use mkp_core::mirror_potential::{claim_survey, classify_psh, classify_sl_psh, PshClass};
use mkp_core::pde_solvers::*;
use mkp_core::stable_forms::{ConeSampleConfig, DEFAULT_SEED};
use mkp_core::verification::{run_suite, verification_battery, Suite, SuiteReport, VerifyConfig};
use mkp_validation::report;

fn failing_lines(r: &SuiteReport) -> Vec<String> {
    r.lines.iter().filter(|l| !l.pass).map(|l| l.render()).collect()
}

#[test]
fn criterion_1_exact_identity_battery() {
    let cfg = VerifyConfig {
        forms_per_degree: 50,
        ..VerifyConfig::default()
    };
    let suites = [Suite::StarInvolution, Suite::DSquared, Suite::DsSquared, Suite::Anticommutation];
    let start = Instant::now();
    let r = verification_battery(&suites, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<String> = r.suites.iter().flat_map(failing_lines).collect();
    let pass = r.passed && secs < 10.0;
    report(1, pass, &format!("50 forms per degree, {secs:.2} s; failures: {failed:?}"));
    assert!(pass);
}

#[test]
fn criterion_2_flat_example() {
    let r = run_suite(Suite::FlatExample, &VerifyConfig::default()).unwrap();
    let detail = r.lines.iter().map(|l| l.render()).collect::<Vec<_>>().join("; ");
    report(2, r.passed, &detail);
    assert!(r.passed, "{detail}");
}

#[test]
fn criterion_3_hitchin_layer() {
    let cfg = VerifyConfig {
        gl_samples: 20,
        ..VerifyConfig::default()
    };
    let r = run_suite(Suite::Hitchin, &cfg).unwrap();
    let detail = r.lines.iter().map(|l| l.render()).collect::<Vec<_>>().join("; ");
    report(3, r.passed, &detail);
    assert!(r.passed, "{detail}");
}

#[test]
fn criterion_4_expanded_equation_crosscheck() {
    let r = eq13_crosscheck(24, DEFAULT_SEED).unwrap();
    let pass = r.fits.iter().any(|f| f.status == "PASS" && f.held_out >= 20);
    let detail = r
        .fits
        .iter()
        .map(|f| {
            format!(
                "{:?}: {} on {} held out, c1 = {}, c0 = {}",
                f.reading,
                f.status,
                f.held_out,
                f.c1.as_deref().unwrap_or("-"),
                f.c0.as_deref().unwrap_or("-")
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

fn study(stencil: StencilOrder) -> (ManufacturedStudy, f64) {
    let cfg = SolverConfig {
        stencil_order: stencil,
        ..SolverConfig::default()
    };
    let start = Instant::now();
    let s = manufactured_study(&[32, 64], 0.05, &cfg).unwrap();
    (s, start.elapsed().as_secs_f64())
}

#[test]
fn criterion_5_semiflat_manufactured_solution() {
    let (fourth, secs) = study(StencilOrder::Fourth);
    let (second, secs2) = study(StencilOrder::Second);
    let row = &fourth.rows[1];
    let order = row.order.unwrap();
    let converged = fourth.reports.iter().all(|r| r.status == SolverStatus::Converged);
    let pass = converged && row.max_err <= 1e-6 && order >= 1.9 && secs <= 120.0;
    let detail = format!(
        "4th order: N=64 max error {:.3e}, order {order:.3}, {secs:.2} s; \
         2nd order: N=64 max error {:.3e}, order {:.3}, {secs2:.2} s",
        row.max_err,
        second.rows[1].max_err,
        second.rows[1].order.unwrap()
    );
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_legendre_suite() {
    let (a, b, c) = (2.0, 3.0, 5.0);
    let f = QuadraticPeriodic::diagonal(a, b, c);
    let grid = TensorGrid::cube(3, 1.0, 5);
    let full = legendre_transform(&f, &[0, 1, 2], &grid).unwrap();
    let part = legendre_transform(&f, &[0], &grid).unwrap();
    let mut closed_gap = 0.0f64;
    for (i, y) in grid.nodes().iter().enumerate() {
        let full_exact = y[0] * y[0] / (2.0 * a) + y[1] * y[1] / (2.0 * b) + y[2] * y[2] / (2.0 * c);
        let part_exact = y[0] * y[0] / (2.0 * a) - b * y[1] * y[1] / 2.0 - c * y[2] * y[2] / 2.0;
        closed_gap = closed_gap.max((full.values[i] - full_exact).abs());
        closed_gap = closed_gap.max((part.values[i] - part_exact).abs());
    }
    let q = [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]];
    let e = legendre_experiment(&f, &[0, 1, 2], &grid, Some(&q)).unwrap();
    let sigma2 = (a + b + c) / (a * b * c);
    let sigma2_gap = (e.transformed.mean - sigma2).abs().max(e.transformed.spread);

    let mut involution = 0.0f64;
    for seed in [1, 2, 3] {
        let g = SmoothConvex::random(3, seed, BoxDomain::cube(3, 3.0));
        for subset in [&[0, 1, 2][..], &[1][..]] {
            involution = involution.max(involution_defect(&g, subset, &TensorGrid::cube(3, 0.8, 6)).unwrap());
        }
    }
    let m = QuadraticPeriodic::manufactured(0.05);
    involution = involution.max(involution_defect(&m, &[0, 1, 2], &TensorGrid::cube(3, 2.0, 6)).unwrap());

    let new = legendre_experiment(&m, &[0], &TensorGrid::cube(3, 0.5, 7), None).unwrap();
    let pass = closed_gap < 1e-12 && sigma2_gap < 1e-9 && involution <= 1e-8;
    let detail = format!(
        "closed-form gap {closed_gap:.2e}, σ₂ gap {sigma2_gap:.2e}, involution {involution:.2e}; \
         transform of ½|x|² + 0.05 sin x1 sin x3 over x1: σ₂ mean {:.6}, std {:.3e}, spread {:.3e} \
         against original mean {:.6}, spread {:.3e}",
        new.transformed.mean, new.transformed.std_dev, new.transformed.spread, new.original.mean, new.original.spread
    );
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_continuity_fitter() {
    let n = 8;
    let shape = GridShape::new(vec![0, 2], n).unwrap();
    let psi = GridScalar::sample(shape, |x| 0.1 * (x[0] + x[2]).cos() + 0.05 * (2.0 * x[0]).sin());
    let (p1, _) = continuity_fit(&ContinuityTarget::manufactured(1.0, &psi).unwrap(), n, n / 2 - 1).unwrap();
    let (mut worst_residual, mut worst_linear) = (0.0f64, 0.0f64);
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let target = ContinuityTarget::manufactured(t, &psi).unwrap();
        let (p, r) = continuity_fit(&target, n, n / 2 - 1).unwrap();
        worst_residual = worst_residual.max(r.residual_l2);
        let gap = p.data().iter().zip(p1.data()).map(|(a, b)| (a - t * b).abs()).fold(0.0, f64::max);
        worst_linear = worst_linear.max(gap);
    }
    let mut out_of_range = Vec::new();
    let mut stable = true;
    for seed in [1, 2, 3] {
        let target = ContinuityTarget::random_constant(1.0, seed).unwrap();
        let (_, a) = continuity_fit(&target, n, n / 2 - 1).unwrap();
        let (_, b) = continuity_fit(&target, n, n / 2 - 1).unwrap();
        stable &= a == b;
        out_of_range.push(a.residual_l2);
    }
    let pass = worst_residual <= 1e-10 && worst_linear <= 1e-10 && stable && out_of_range.iter().all(|r| *r > 0.0);
    let detail = format!(
        "in-range residual {worst_residual:.2e}, max |p_t − t·p_1| {worst_linear:.2e}, \
         out-of-range residuals [{}], repeatable {stable}",
        out_of_range.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
    );
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_plurisubharmonicity() {
    let squares = PolyScalar::sum_of_squares();
    let affine = PolyScalar::var(0) + PolyScalar::var(3).scale(&int(2)) - PolyScalar::var(5) + PolyScalar::constant(int(1));
    let cases = [
        (squares.clone(), PshClass::StrictlyPsh, PshClass::StrictlySlPsh),
        (affine, PshClass::Pluriharmonic, PshClass::SlPluriharmonic),
        (-squares, PshClass::NotPsh, PshClass::NotSlPsh),
    ];
    let base = ConeSampleConfig::default();
    let mut canonical = true;
    for seed in [DEFAULT_SEED, 1, 2, 3, 4] {
        let cfg = base.with_seed(seed);
        for (phi, psh, sl) in &cases {
            canonical &= classify_psh(phi, &cfg, &[]).unwrap().classification == *psh;
            canonical &= classify_sl_psh(phi, &cfg, &[]).unwrap().classification == *sl;
        }
    }
    let survey = claim_survey(100, &base).unwrap();
    let pass = canonical && survey.counterexamples.is_empty();
    let first = survey
        .counterexamples
        .first()
        .map(|c| format!("; first counterexample H = {:?}", c.hessian))
        .unwrap_or_default();
    let detail = format!(
        "canonical cases over 5 seeds {}; sl-psh ⇒ psh over {} quadratics: {} sl-psh, {} psh, {} counterexamples{first}",
        if canonical { "reproduced" } else { "NOT reproduced" },
        survey.trials,
        survey.sl_psh,
        survey.psh,
        survey.counterexamples.len()
    );
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

fn twice(dir: &Path, stem: &str, args: &[&str]) -> (Vec<u8>, Vec<u8>, u8) {
    let mut outs = Vec::new();
    let mut code = 0;
    for k in 0..2 {
        let path = dir.join(format!("{stem}{k}.json"));
        let mut argv = vec!["mkp"];
        argv.extend_from_slice(args);
        argv.extend(["--json", path.to_str().unwrap()]);
        code = mkp_cli::run_from(argv);
        outs.push(std::fs::read(&path).unwrap_or_default());
    }
    let b = outs.pop().unwrap();
    (outs.pop().unwrap(), b, code)
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::TempDir::new().unwrap();
    let target = dir.path().join("target.json");
    std::fs::write(&target, r#"{"kind": "random_constant"}"#).unwrap();
    let (v0, v1, verify_code) = twice(dir.path(), "verify", &["verify", "--seed", "5"]);
    let (f0, f1, fit_code) = twice(dir.path(), "fit", &["fit", "--seed", "5", "--target", target.to_str().unwrap()]);
    let verify_same = !v0.is_empty() && v0 == v1;
    let fit_same = fit_code == 0 && !f0.is_empty() && f0 == f1;
    let pass = verify_same && fit_same;
    let detail = format!(
        "verify: {} bytes, identical {verify_same}, exit {verify_code}; fit: {} bytes, identical {fit_same}",
        v0.len(),
        f0.len()
    );
    report(9, pass, &detail);
    assert!(pass, "{detail}");
}

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mkp_core::exterior::io::{read_grid_csv, write_grid_csv, CoeffKind, FormFile, Potential};
use mkp_core::exterior::scalar::{format_rational, Coefficient, Rational};
use mkp_core::exterior::{standard_structures, Blade, ConstForm, Form, GridForm, GridShape, PolyScalar, TrigScalar};
use mkp_core::mirror_potential::{
    classify_psh, classify_sl_psh, flat_potential_scale, mkp_forms, proportionality, PshVerdict,
};
use mkp_core::pde_solvers::{
    continuity_fit, eq11_density, eq13_lhs, eq9_density, involution_defect, legendre_experiment, manufactured_study,
    semiflat_newton, semiflat_residual, BoxDomain, ContinuityTarget, HessianField, HessianProvenance,
    LegendreExperiment, PotentialFunction, QuadraticPeriodic, SemiflatProblem, SmoothConvex, SmoothFunction,
    SolverConfig, SolverStatus, StencilOrder, TargetForm, TensorGrid,
};
use mkp_core::stable_forms::{analyze_stable, ConeSampleConfig, StabilityVerdict, DEFAULT_SEED};
use mkp_core::verification::{verification_battery, Suite};
use serde::{Deserialize, Serialize};

use crate::config::{check_range, RunConfig};
use crate::{
    CliError, FitArgs, LegendreArgs, PhiArgs, PshArgs, ResidualArgs, SemiflatArgs, StabilityArgs, VerifyArgs,
    EXIT_NOT_STABLE, EXIT_SOLVER_FAILED, EXIT_VERIFY_FAILED,
};

pub struct Context {
    pub file: RunConfig,
    pub seed: Option<u64>,
    pub json: Option<PathBuf>,
}

impl Context {
    fn seed(&self) -> Option<u64> {
        self.seed.or(self.file.seed)
    }

    /// Pretty JSON to `--json` or stdout.
    fn emit<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        let text = to_json(value)?;
        match &self.json {
            Some(path) => write_text(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn read_form(path: &Path) -> Result<FormFile, CliError> {
    FormFile::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_potential(path: &Path) -> Result<Potential, CliError> {
    Potential::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn verify(ctx: &Context, a: &VerifyArgs) -> Result<u8, CliError> {
    let mut cfg = ctx.file.verify.clone().unwrap_or_default();
    if let Some(s) = ctx.seed() {
        cfg.seed = s;
    }
    if let Some(n) = a.forms_per_degree {
        cfg.forms_per_degree = n;
    }
    if let Some(n) = a.eq13_samples {
        cfg.eq13_samples = n;
    }
    let only = a
        .only
        .iter()
        .map(|s| s.parse::<Suite>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let report = verification_battery(&only, &cfg)?;
    for s in &report.suites {
        println!("[{}]", s.suite);
        for line in &s.lines {
            println!("  {}", line.render());
        }
    }
    println!("verify: {}", if report.passed { "PASS" } else { "FAIL" });
    if let Some(path) = &ctx.json {
        write_text(path, &to_json(&report)?)?;
    }
    Ok(if report.passed { 0 } else { EXIT_VERIFY_FAILED })
}

pub fn stability(ctx: &Context, a: &StabilityArgs) -> Result<u8, CliError> {
    let file = read_form(&a.form)?;
    if file.degree != 3 {
        return Err(CliError::Config(format!(
            "{}: stability needs a 3-form, found degree {}",
            a.form.display(),
            file.degree
        )));
    }
    let rho = file.to_const().map_err(|e| CliError::Config(format!("{}: {e}", a.form.display())))?;
    let analysis = analyze_stable(&rho)?;
    ctx.emit(&analysis.report())?;
    Ok(if analysis.verdict == StabilityVerdict::StableNegative { 0 } else { EXIT_NOT_STABLE })
}

/// Coefficients that can be written back to a form file.
trait Scalar: Coefficient {
    fn form_file(f: &Form<Self>) -> FormFile;
    fn as_rational(&self) -> Option<Rational>;
}

impl Scalar for PolyScalar {
    fn form_file(f: &Form<Self>) -> FormFile {
        FormFile::from_poly(f)
    }
    fn as_rational(&self) -> Option<Rational> {
        self.as_constant()
    }
}

impl Scalar for TrigScalar {
    fn form_file(f: &Form<Self>) -> FormFile {
        FormFile::from_trig(f)
    }
    fn as_rational(&self) -> Option<Rational> {
        (self.bandwidth() == 0).then(|| self.torus_mean())
    }
}

fn constant_form<C: Scalar>(f: &Form<C>) -> Option<ConstForm> {
    let mut out = ConstForm::zero(f.degree());
    for (b, c) in f.terms() {
        out.add_term(*b, c.as_rational()?);
    }
    Some(out)
}

#[derive(Serialize)]
struct MkpReport {
    consistent: bool,
    rho_out: FormFile,
    sigma_out: FormFile,
    /// `c` with `dd^s(φσ₀) = c·ρ₀`, when it exists.
    rho_multiple: Option<String>,
    /// `c` with `−dd^s(φρ₀) = c·σ₀`, when it exists.
    sigma_multiple: Option<String>,
}

fn mkp_report<C: Scalar + PartialEq>(phi: &C) -> MkpReport {
    let s = standard_structures();
    let m = mkp_forms(phi);
    let multiple = |f: &Form<C>, b: &ConstForm| {
        constant_form(f)
            .and_then(|c| proportionality(&c, b))
            .map(|r| format_rational(&r))
    };
    MkpReport {
        consistent: m.is_consistent(),
        rho_multiple: multiple(&m.rho_out, &s.rho0),
        sigma_multiple: multiple(&m.sigma_out, &s.sigma0),
        rho_out: C::form_file(&m.rho_out),
        sigma_out: C::form_file(&m.sigma_out),
    }
}

pub fn mkp_check(ctx: &Context, a: &PhiArgs) -> Result<u8, CliError> {
    let report = match read_potential(&a.phi)? {
        Potential::Poly(p) => mkp_report(&p),
        Potential::Trig(t) => mkp_report(&t),
    };
    ctx.emit(&report)?;
    Ok(0)
}

fn cone_config(ctx: &Context, samples: Option<usize>) -> Result<ConeSampleConfig, CliError> {
    let mut cfg = ctx.file.cone.clone().unwrap_or_default();
    if let Some(s) = ctx.seed() {
        cfg.seed = s;
    }
    if let Some(n) = samples {
        cfg.sample_count = n;
    }
    check_range("samples", cfg.sample_count, 1, 1_000_000)?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct PshReport {
    points: Vec<[f64; 6]>,
    psh: PshVerdict,
    sl_psh: PshVerdict,
}

pub fn psh(ctx: &Context, a: &PshArgs) -> Result<u8, CliError> {
    let cfg = cone_config(ctx, a.samples)?;
    let Potential::Poly(phi) = read_potential(&a.phi)? else {
        return Err(CliError::Config("psh needs a polynomial potential".into()));
    };
    let points: Vec<[f64; 6]> = a
        .point
        .chunks(6)
        .map(|c| std::array::from_fn(|i| c[i]))
        .collect();
    let report = PshReport {
        psh: classify_psh(&phi, &cfg, &points)?,
        sl_psh: classify_sl_psh(&phi, &cfg, &points)?,
        points,
    };
    ctx.emit(&report)?;
    Ok(0)
}

#[derive(Serialize)]
struct Density {
    reading: &'static str,
    density: FormFile,
    constant: Option<String>,
}

#[derive(Serialize)]
struct ResidualReport {
    equation: u8,
    densities: Vec<Density>,
}

fn density<C: Scalar>(reading: &'static str, value: C) -> Density {
    Density {
        reading,
        constant: value.as_rational().map(|r| format_rational(&r)),
        density: C::form_file(&Form::function(value)),
    }
}

fn hessian<C: Scalar>(phi: &C, axes: &[usize], provenance: HessianProvenance) -> mkp_core::Result<HessianField<C>> {
    let entries = axes
        .iter()
        .map(|&i| axes.iter().map(|&j| phi.partial(i).partial(j)).collect())
        .collect();
    HessianField::new(entries, provenance)
}

/// σ₂ of a symmetric 3×3 field.
fn sigma2<C: Coefficient>(h: &HessianField<C>) -> C {
    let g = |i: usize, j: usize| h.get(i, j).clone();
    let minor = |i: usize, j: usize| g(i, i).times(&g(j, j)).minus(&g(i, j).times(&g(i, j)));
    minor(0, 1).plus(&minor(0, 2)).plus(&minor(1, 2))
}

fn scalar_densities<C: Scalar>(
    equation: u8,
    phi: &C,
    provenance: HessianProvenance,
) -> Result<Vec<Density>, CliError> {
    let s = standard_structures();
    Ok(match equation {
        11 => vec![density("potential", eq11_density(phi, &s.rho0, &s.sigma0)?)],
        13 => {
            let all: Vec<usize> = (0..6).collect();
            let mut h = hessian(phi, &all, provenance)?.entries().to_vec();
            let correction = density("correction", eq13_lhs(&HessianField::new(h.clone(), provenance)?)?);
            // the flat part qΣ(xⁱ)² adds 2q to the diagonal
            let shift = phi.constant_like(&(flat_potential_scale() * Rational::from_integer(2.into())));
            for (i, row) in h.iter_mut().enumerate() {
                row[i] = row[i].plus(&shift);
            }
            let total = density("total_potential", eq13_lhs(&HessianField::new(h, provenance)?)?);
            vec![correction, total]
        }
        14 => vec![density("odd_hessian_sigma2", sigma2(&hessian(phi, &[0, 2, 4], provenance)?))],
        _ => unreachable!(),
    })
}

pub fn residual(ctx: &Context, a: &ResidualArgs) -> Result<u8, CliError> {
    let densities = match a.equation {
        9 => {
            let (Some(pa), Some(pb)) = (&a.alpha, &a.beta) else {
                return Err(CliError::Config("equation 9 needs --alpha and --beta".into()));
            };
            let (fa, fb) = (read_form(pa)?, read_form(pb)?);
            let s = standard_structures();
            let bad = |e: mkp_core::CoreError| CliError::Config(e.to_string());
            if fa.kind() == CoeffKind::Trigonometric || fb.kind() == CoeffKind::Trigonometric {
                let (x, y) = (fa.to_trig().map_err(bad)?, fb.to_trig().map_err(bad)?);
                vec![density("alpha_beta", eq9_density(&x, &y, &s.rho0, &s.sigma0, &TrigScalar::zero())?)]
            } else {
                let (x, y) = (fa.to_poly().map_err(bad)?, fb.to_poly().map_err(bad)?);
                vec![density("alpha_beta", eq9_density(&x, &y, &s.rho0, &s.sigma0, &PolyScalar::zero())?)]
            }
        }
        11 | 13 | 14 => {
            let Some(path) = &a.phi else {
                return Err(CliError::Config(format!("equation {} needs --phi", a.equation)));
            };
            match read_potential(path)? {
                Potential::Poly(p) => scalar_densities(a.equation, &p, HessianProvenance::ExactPolynomial)?,
                Potential::Trig(t) => scalar_densities(a.equation, &t, HessianProvenance::Spectral)?,
            }
        }
        other => return Err(CliError::Config(format!("equation {other} is not one of 9, 11, 13, 14"))),
    };
    ctx.emit(&ResidualReport {
        equation: a.equation,
        densities,
    })?;
    Ok(0)
}

fn parse_eps(text: &str) -> Result<f64, CliError> {
    let v = text.strip_prefix("eps=").unwrap_or(text);
    v.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("bad --manufactured value {text:?}; expected eps=<number>")))
}

fn stencil(order: Option<u8>) -> Result<StencilOrder, CliError> {
    match order {
        None | Some(4) => Ok(StencilOrder::Fourth),
        Some(2) => Ok(StencilOrder::Second),
        Some(o) => Err(CliError::Config(format!("stencil order {o} is not 2 or 4"))),
    }
}

pub fn solve_semiflat(ctx: &Context, a: &SemiflatArgs) -> Result<u8, CliError> {
    let sec = &ctx.file.semiflat;
    let mut cfg: SolverConfig = ctx.file.solver.clone().unwrap_or_default();
    if a.stencil.is_some() || sec.stencil.is_some() {
        cfg.stencil_order = stencil(a.stencil.or(sec.stencil))?;
    }
    check_range("max_newton_iters", cfg.max_newton_iters, 1, 1000)?;
    check_range("restart", cfg.restart, 1, 500)?;
    check_range("newton_tol", cfg.newton_tol, 0.0, 1.0)?;
    let rhs_path = a.rhs.clone().or(sec.rhs.clone());
    let start = Instant::now();
    let code = match rhs_path {
        None => {
            let eps = match &a.manufactured {
                Some(s) => parse_eps(s)?,
                None => sec.eps.unwrap_or(0.05),
            };
            check_range("eps", eps, -0.5, 0.5)?;
            let n = check_range("N", a.n.or(sec.n).unwrap_or(64), 16, 256)?;
            if n % 4 != 0 {
                return Err(CliError::Config(format!("N = {n} must be a multiple of 4")));
            }
            let ns: Vec<usize> = [n / 4, n / 2, n].into_iter().filter(|&m| m >= 16).collect();
            let study = manufactured_study(&ns, eps, &cfg)?;
            if let Some(path) = &a.csv {
                study.write_csv(create(path)?)?;
            }
            ctx.emit(&study)?;
            for r in &study.rows {
                eprintln!(
                    "N = {:4}  max_err = {:.3e}  order = {}",
                    r.n,
                    r.max_err,
                    r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into())
                );
            }
            if study.reports.iter().all(|r| r.status == SolverStatus::Converged) {
                0
            } else {
                EXIT_SOLVER_FAILED
            }
        }
        Some(path) => {
            let (shape, form) = read_grid_csv(File::open(&path).map_err(|e| {
                CliError::Config(format!("cannot open {}: {e}", path.display()))
            })?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if form.degree() != 0 {
                return Err(CliError::Config("right-hand side must be a degree-0 grid".into()));
            }
            let rhs = form
                .coeff(Blade::SCALAR)
                .cloned()
                .unwrap_or_else(|| mkp_core::exterior::GridScalar::filled(shape.clone(), 0.0));
            let d = if a.q.is_empty() { sec.q.unwrap_or([1.0; 3]) } else { [a.q[0], a.q[1], a.q[2]] };
            let q = [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]];
            let problem = SemiflatProblem::new(rhs.clone(), q, cfg.clone())?;
            let (sol, report) = semiflat_newton(&problem)?;
            if let Some(out) = &a.out {
                write_grid_csv(&Form::function(sol.periodic.clone()), &shape, create(out)?)?;
            }
            if let Some(plot) = &a.plot {
                let r = semiflat_residual(&q, &sol.periodic, cfg.stencil_order)?;
                write_plot(plot, &shape, r.data(), rhs.data())?;
            }
            ctx.emit(&report)?;
            if report.status == SolverStatus::Converged {
                0
            } else {
                EXIT_SOLVER_FAILED
            }
        }
    };
    eprintln!("elapsed: {:.2} s", start.elapsed().as_secs_f64());
    Ok(code)
}

fn write_plot(path: &Path, shape: &GridShape, value: &[f64], rhs: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    w.write_record(["x1", "x3", "x5", "residual"]).map_err(io)?;
    for i in 0..shape.len() {
        let x = shape.node(i);
        w.write_record([
            format!("{:.12e}", x[0]),
            format!("{:.12e}", x[2]),
            format!("{:.12e}", x[4]),
            format!("{:.12e}", value[i] - rhs[i]),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Serialize)]
struct LegendreReport {
    function: String,
    /// Transformed odd coordinates, as labels 1, 3, 5.
    subset: Vec<usize>,
    points: usize,
    half_width: f64,
    involution_defect: f64,
    experiment: LegendreExperiment,
}

fn run_legendre<F: SmoothFunction>(
    f: &F,
    name: String,
    subset: &[usize],
    grid: &TensorGrid,
    quadratic: Option<&[[f64; 3]; 3]>,
) -> Result<LegendreReport, CliError> {
    let experiment = legendre_experiment(f, subset, grid, quadratic)?;
    Ok(LegendreReport {
        function: name,
        subset: subset.iter().map(|i| 2 * i + 1).collect(),
        points: grid.points,
        half_width: grid.hi[0],
        involution_defect: involution_defect(f, subset, grid)?,
        experiment,
    })
}

pub fn legendre(ctx: &Context, a: &LegendreArgs) -> Result<u8, CliError> {
    let sec = &ctx.file.legendre;
    let labels = if a.subset.is_empty() { sec.subset.clone().unwrap_or_else(|| vec![1]) } else { a.subset.clone() };
    let subset = labels
        .iter()
        .map(|l| match l {
            1 | 3 | 5 => Ok((l - 1) / 2),
            _ => Err(CliError::Config(format!("subset label {l} is not an odd coordinate 1, 3 or 5"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points = check_range("points", a.points.or(sec.points).unwrap_or(9), 3, 41)?;
    let half = check_range("half_width", a.half_width.or(sec.half_width).unwrap_or(0.5), 1e-3, 10.0)?;
    let grid = TensorGrid::cube(3, half, points);
    let report = if let Some(path) = &a.phi {
        let f = PotentialFunction::new(read_potential(path)?, [[0.0; 3]; 3]);
        run_legendre(&f, path.display().to_string(), &subset, &grid, None)?
    } else {
        let function = a.function.clone().or(sec.function.clone()).unwrap_or_else(|| "manufactured:0.05".into());
        let (kind, arg) = function.split_once(':').unwrap_or((function.as_str(), ""));
        let bad = || CliError::Config(format!("bad --function {function:?}"));
        match kind {
            "quadratic" => {
                let v: Vec<f64> = arg.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
                if v.len() != 3 || v.iter().any(|&x| x <= 0.0) {
                    return Err(bad());
                }
                let f = QuadraticPeriodic::diagonal(v[0], v[1], v[2]);
                let q = f.q;
                run_legendre(&f, function.clone(), &subset, &grid, Some(&q))?
            }
            "manufactured" => {
                let eps: f64 = if arg.is_empty() { 0.05 } else { arg.parse().map_err(|_| bad())? };
                check_range("eps", eps, -0.5, 0.5)?;
                run_legendre(&QuadraticPeriodic::manufactured(eps), function.clone(), &subset, &grid, None)?
            }
            "random" => {
                let seed: u64 = if arg.is_empty() { ctx.seed().unwrap_or(DEFAULT_SEED) } else { arg.parse().map_err(|_| bad())? };
                let f = SmoothConvex::random(3, seed, BoxDomain::cube(3, 3.0));
                run_legendre(&f, format!("random:{seed}"), &subset, &grid, None)?
            }
            _ => return Err(bad()),
        }
    };
    ctx.emit(&report)?;
    Ok(0)
}

/// Continuity target file.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetFile {
    Flat,
    /// `(ρ₀ + dd^s(ψσ₀), σ₀ − dd^s(ψρ₀))` on a grid over `axes` (labels 1–6).
    Manufactured {
        axes: Vec<usize>,
        #[serde(rename = "N")]
        n: usize,
        psi: FormFile,
    },
    RandomConstant {
        seed: Option<u64>,
    },
    Constant {
        rho: FormFile,
        sigma: FormFile,
    },
}

pub fn fit(ctx: &Context, a: &FitArgs) -> Result<u8, CliError> {
    let sec = &ctx.file.fit;
    let t = check_range("t", a.t.or(sec.t).unwrap_or(1.0), 0.0, 1.0)?;
    let source = match a.target.clone().or(sec.target.clone()) {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<TargetFile>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => TargetFile::Flat,
    };
    let bad = |e: mkp_core::CoreError| CliError::Config(e.to_string());
    let (target, file_n) = match &source {
        TargetFile::Flat => (ContinuityTarget::flat(t)?, None),
        TargetFile::Manufactured { axes, n, psi } => {
            check_range("N", *n, 4, 64)?;
            let axes = axes
                .iter()
                .map(|&l| check_range("axis", l, 1, 6).map(|l| l - 1))
                .collect::<Result<Vec<_>, _>>()?;
            let shape = GridShape::new(axes, *n).map_err(bad)?;
            let psi = match Potential::from_file(psi).map_err(bad)? {
                Potential::Trig(t) => t.sample(&shape),
                Potential::Poly(p) if p.as_constant().is_some() => {
                    mkp_core::exterior::GridScalar::filled(shape.clone(), 0.0)
                }
                Potential::Poly(_) => return Err(CliError::Config("ψ must be periodic".into())),
            };
            (ContinuityTarget::manufactured(t, &psi)?, Some(*n))
        }
        TargetFile::RandomConstant { seed } => {
            let seed = seed.or(ctx.seed()).unwrap_or(DEFAULT_SEED);
            (ContinuityTarget::random_constant(t, seed)?, None)
        }
        TargetFile::Constant { rho, sigma } => {
            let rho = rho.to_const().map_err(bad)?;
            let sigma = sigma.to_const().map_err(bad)?;
            (ContinuityTarget::new(t, TargetForm::Constant(rho), TargetForm::Constant(sigma))?, None)
        }
    };
    let n = a.n.or(sec.n).or(file_n).unwrap_or(8);
    check_range("N", n, 4, 64)?;
    if file_n.is_some_and(|m| m != n) {
        return Err(CliError::Config(format!("N = {n} differs from the target grid")));
    }
    let cutoff = check_range("cutoff", a.cutoff.or(sec.cutoff).unwrap_or(n / 2 - 1), 0, n / 2)?;
    let start = Instant::now();
    let (p, report) = continuity_fit(&target, n, cutoff)?;
    if let Some(out) = &a.out {
        write_grid_csv(&GridForm::function(p.clone()), p.shape(), create(out)?)?;
    }
    ctx.emit(&report)?;
    eprintln!("elapsed: {:.2} s", start.elapsed().as_secs_f64());
    Ok(0)
}

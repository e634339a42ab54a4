//! Mirror Kähler potentials on the flat model: the forms `dd^s(φσ₀)` and
//! `−dd^s(φρ₀)`, the global deformation `Ω − i·dd^s(φΩ)`, the flat example,
//! and the plurisubharmonicity classifiers.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{dd_c, dd_s, dd_s_potential, OperatorTable};
use crate::error::{CoreError, Result};
use crate::exterior::scalar::{format_rational, int, Coefficient, Rational};
use crate::exterior::{
    standard_structures, Blade, ComplexForm, ConstForm, FloatForm, Form, GridForm, GridScalar, PolyForm,
    PolyScalar, DIM,
};
use crate::stable_forms::{
    analyze_stable, classify_values, sample_cone, ConeSampleConfig, ConeSamples, Positivity,
    StabilityVerdict, Witness,
};

/// Both phrasings of the potential equations for a scalar `φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MkpResult<C> {
    /// `dd^s(φσ)`
    pub rho_out: Form<C>,
    /// `−dd^s(φρ)`
    pub sigma_out: Form<C>,
    /// `−i·dd^s(φ(ρ + iσ))`
    pub omega_complex: ComplexForm<C>,
}

impl<C: Coefficient + PartialEq> MkpResult<C> {
    pub fn is_consistent(&self) -> bool {
        self.omega_complex.re == self.rho_out && self.omega_complex.im == self.sigma_out
    }
}

pub fn mkp_forms<C: Coefficient>(phi: &C) -> MkpResult<C> {
    let s = standard_structures();
    mkp_forms_with(phi, &s.rho0, &s.sigma0)
}

pub fn mkp_forms_with<C: Coefficient>(phi: &C, rho: &ConstForm, sigma: &ConstForm) -> MkpResult<C> {
    let from_rho = dd_s_potential(phi, rho);
    let from_sigma = dd_s_potential(phi, sigma);
    let omega = ComplexForm::new(from_rho.clone(), from_sigma.clone()).expect("equal degrees");
    let omega_complex = omega.times_i().map_parts(|f| f.negated());
    MkpResult {
        rho_out: from_sigma,
        sigma_out: from_rho.negated(),
        omega_complex,
    }
}

/// `Ω − i·dd^s(φΩ)`.
pub fn global_mkp_deform<C: Coefficient>(phi: &C, omega: &ComplexForm<C>) -> Result<ComplexForm<C>> {
    if omega.degree() != 3 {
        return Err(CoreError::DegreeMismatch {
            expected: 3,
            found: omega.degree(),
        });
    }
    let a = dd_s(&omega.re.times_scalar(phi));
    let b = dd_s(&omega.im.times_scalar(phi));
    // −i(a + ib) = b − ia
    ComplexForm::new(omega.re.plus(&b), omega.im.minus(&a))
}

/// `(2π)⁻⁶ ∫ Ω ∧ dx^J` for every constant basis 3-form `dx^J`, as (re, im).
pub fn torus_periods(omega: &ComplexForm<GridScalar>) -> Vec<(Blade, f64, f64)> {
    Blade::of_degree(3)
        .map(|j| {
            let mean = |f: &GridForm| {
                f.coeff(j.complement())
                    .map(|c| {
                        let (sign, _) = j.complement().wedge(j).expect("disjoint");
                        sign as f64 * c.mean()
                    })
                    .unwrap_or(0.0)
            };
            (j, mean(&omega.re), mean(&omega.im))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> CheckLine {
        CheckLine {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn render(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        if self.detail.is_empty() {
            format!("{}: {status}", self.name)
        } else {
            format!("{}: {status} ({})", self.name, self.detail)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatExampleReport {
    /// `c` with `dd^c(Σ(xⁱ)²) = c·ω₀`.
    pub dd_c_constant: Option<String>,
    /// `κ` with `dd^s(Σ(xⁱ)²·Ω₀) = κ·iΩ₀`.
    pub dd_s_constant: Option<String>,
    pub lines: Vec<CheckLine>,
}

impl FlatExampleReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }
}

/// `Some(c)` when `a = c·b` exactly.
pub fn proportionality(a: &ConstForm, b: &ConstForm) -> Option<Rational> {
    let (blade, bc) = b.terms().next()?;
    let c = a.coeff(*blade).cloned().unwrap_or_else(Rational::zero) / bc;
    (b.scaled(&c) == *a).then_some(c)
}

fn constant_part(f: &PolyForm) -> ConstForm {
    f.convert(|p| p.as_constant().unwrap_or_else(Rational::zero))
}

fn coefficient_diff(found: &ConstForm, expected: &ConstForm) -> String {
    let diff = found.minus(expected);
    diff.terms()
        .map(|(b, c)| format!("{b}: {}", format_rational(c)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The flat constant `κ` in `dd^s(Σ(xⁱ)²·Ω₀) = κ·iΩ₀`, if the result is a
/// multiple of `iΩ₀`.
pub fn flat_dd_s_constant() -> Option<Rational> {
    let s = standard_structures();
    let phi = PolyScalar::sum_of_squares();
    let re = constant_part(&dd_s_potential(&phi, &s.rho0));
    let im = constant_part(&dd_s_potential(&phi, &s.sigma0));
    // κ·i(ρ₀ + iσ₀) = −κσ₀ + iκρ₀
    let k = proportionality(&im, &s.rho0)?;
    (re == s.sigma0.scaled(&-k.clone())).then_some(k)
}

/// Potential `q·Σ(xⁱ)²` with `dd^s(qΣ(xⁱ)²·σ₀) = ρ₀`.
pub fn flat_potential_scale() -> Rational {
    Rational::one() / flat_dd_s_constant().expect("flat model is proportional")
}

pub fn flat_example_check() -> FlatExampleReport {
    let s = standard_structures();
    let phi = PolyScalar::sum_of_squares();
    let mut lines = Vec::new();

    let ddc = constant_part(&dd_c(&phi));
    let c = proportionality(&ddc, s.symplectic.omega());
    lines.push(CheckLine::new(
        "dd^cφ ∝ ω₀",
        c.is_some(),
        match &c {
            Some(c) => format!("dd^cφ = {}·ω₀", format_rational(c)),
            None => format!("not proportional; dd^cφ = {ddc}"),
        },
    ));

    let k = flat_dd_s_constant();
    let expected = int(3);
    let re = constant_part(&dd_s_potential(&phi, &s.rho0));
    let im = constant_part(&dd_s_potential(&phi, &s.sigma0));
    let detail = match &k {
        Some(k) if *k == expected => String::new(),
        Some(k) => format!(
            "found {}iΩ₀; coefficient diff of dd^s(φσ₀) − 3ρ₀: {}",
            format_rational(k),
            coefficient_diff(&im, &s.rho0.scaled(&expected))
        ),
        None => format!("not a multiple of iΩ₀: re = {re}, im = {im}"),
    };
    lines.push(CheckLine::new(
        "dd^s(φΩ₀) = 3iΩ₀",
        k.as_ref() == Some(&expected),
        detail,
    ));

    let thirds = phi.scale(&Rational::new(1.into(), 3.into()));
    let m = mkp_forms(&thirds);
    let m_rho = constant_part(&m.rho_out);
    let m_sigma = constant_part(&m.sigma_out);
    let ok = m_rho == s.rho0 && m_sigma == s.sigma0;
    lines.push(CheckLine::new(
        "mkp_forms(φ/3) = (ρ₀, σ₀)",
        ok,
        if ok {
            String::new()
        } else {
            format!(
                "ρ diff {}; σ diff {}",
                coefficient_diff(&m_rho, &s.rho0),
                coefficient_diff(&m_sigma, &s.sigma0)
            )
        },
    ));

    let scaled = phi.scale(&flat_potential_scale());
    let m = mkp_forms(&scaled);
    lines.push(CheckLine::new(
        "mkp_forms(φ/κ) = (ρ₀, σ₀)",
        constant_part(&m.rho_out) == s.rho0 && constant_part(&m.sigma_out) == s.sigma0,
        String::new(),
    ));
    lines.push(CheckLine::new(
        "Definition phrasings agree",
        mkp_forms(&phi).is_consistent(),
        String::new(),
    ));
    FlatExampleReport {
        dd_c_constant: c.as_ref().map(format_rational),
        dd_s_constant: k.as_ref().map(format_rational),
        lines,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PshClass {
    StrictlyPsh,
    Psh,
    Pluriharmonic,
    NotPsh,
    StrictlySlPsh,
    SlPsh,
    SlPluriharmonic,
    NotSlPsh,
}

impl PshClass {
    pub fn is_psh(self) -> bool {
        matches!(self, PshClass::StrictlyPsh | PshClass::Psh | PshClass::Pluriharmonic)
    }

    pub fn is_sl_psh(self) -> bool {
        matches!(
            self,
            PshClass::StrictlySlPsh | PshClass::SlPsh | PshClass::SlPluriharmonic
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PshVerdict {
    pub classification: PshClass,
    pub witness: Witness,
    pub samples_used: usize,
    pub seed: u64,
}

/// Values of the forms on the cone samples at every point, flattened
/// point-major, with the extreme value's location.
struct Sampled {
    positivity: Positivity,
    witness: Witness,
    evaluations: usize,
}

fn sample_forms(
    cone: &ConeSamples,
    forms: &[([f64; DIM], FloatForm)],
    cfg: &ConeSampleConfig,
) -> Sampled {
    let m = cone.samples.len();
    let values: Vec<f64> = forms
        .par_iter()
        .flat_map_iter(|(_, f)| cone.samples.iter().map(move |s| f.eval_on(&s.frame)))
        .collect();
    let (positivity, w) = classify_values(&values, cfg);
    Sampled {
        positivity,
        witness: Witness {
            xi: cone.samples[w % m].frame.clone(),
            value: values[w],
            point: forms[w / m].0,
        },
        evaluations: values.len(),
    }
}

fn poly_at_points(f: &PolyForm, points: &[[f64; DIM]]) -> Vec<([f64; DIM], FloatForm)> {
    let points: &[[f64; DIM]] = if points.is_empty() { &[[0.0; DIM]] } else { points };
    points.iter().map(|x| (*x, f.at(x))).collect()
}

fn grid_at_nodes(f: &GridForm, like: &GridScalar) -> Vec<([f64; DIM], FloatForm)> {
    let shape = like.shape();
    (0..shape.len())
        .map(|i| (shape.node(i), f.convert(|g| g.data()[i])))
        .collect()
}

fn psh_from(sampled: Sampled, cfg: &ConeSampleConfig) -> PshVerdict {
    let classification = match sampled.positivity {
        Positivity::StrictlyPositive => PshClass::StrictlyPsh,
        Positivity::Positive => PshClass::Psh,
        Positivity::ZeroOnCone => PshClass::Pluriharmonic,
        _ => PshClass::NotPsh,
    };
    PshVerdict {
        classification,
        witness: sampled.witness,
        samples_used: sampled.evaluations,
        seed: cfg.seed,
    }
}

/// `(dd^cφ)(ξ) ≥ 0` on sampled unit 2-planes with `ω₀(ξ) > threshold`.
/// An empty point list means the origin.
pub fn classify_psh(phi: &PolyScalar, cfg: &ConeSampleConfig, points: &[[f64; DIM]]) -> Result<PshVerdict> {
    let cone = sample_cone(&standard_structures().symplectic.omega().to_f64(), cfg)?;
    let forms = poly_at_points(&dd_c(phi), points);
    Ok(psh_from(sample_forms(&cone, &forms, cfg), cfg))
}

pub fn classify_psh_grid(phi: &GridScalar, cfg: &ConeSampleConfig) -> Result<PshVerdict> {
    let cone = sample_cone(&standard_structures().symplectic.omega().to_f64(), cfg)?;
    let forms = grid_at_nodes(&dd_c(phi), phi);
    Ok(psh_from(sample_forms(&cone, &forms, cfg), cfg))
}

fn stable_cone(form: &ConstForm, cfg: &ConeSampleConfig) -> Result<ConeSamples> {
    let a = analyze_stable(form)?;
    if a.verdict != StabilityVerdict::StableNegative {
        return Err(CoreError::NotStableNegative {
            lambda: format_rational(&a.lambda),
        });
    }
    sample_cone(&form.to_f64(), cfg)
}

fn sl_from(first: Sampled, second: Sampled, cfg: &ConeSampleConfig) -> PshVerdict {
    let (p, q) = (first.positivity, second.positivity);
    let classification = if p == Positivity::ZeroOnCone && q == Positivity::ZeroOnCone {
        PshClass::SlPluriharmonic
    } else if p == Positivity::StrictlyPositive && q == Positivity::StrictlyNegative {
        PshClass::StrictlySlPsh
    } else if p.is_nonnegative() && q.is_nonpositive() {
        PshClass::SlPsh
    } else {
        PshClass::NotSlPsh
    };
    let witness = if !p.is_nonnegative() || q.is_nonpositive() {
        first.witness
    } else {
        second.witness
    };
    PshVerdict {
        classification,
        witness,
        samples_used: first.evaluations + second.evaluations,
        seed: cfg.seed,
    }
}

/// `dd^s(φσ) ≥ 0 mod ρ` and `dd^s(φρ) ≤ 0 mod σ` on the flat background.
pub fn classify_sl_psh(phi: &PolyScalar, cfg: &ConeSampleConfig, points: &[[f64; DIM]]) -> Result<PshVerdict> {
    let s = standard_structures();
    classify_sl_psh_with(phi, &s.rho0, &s.sigma0, cfg, points)
}

pub fn classify_sl_psh_with(
    phi: &PolyScalar,
    rho: &ConstForm,
    sigma: &ConstForm,
    cfg: &ConeSampleConfig,
    points: &[[f64; DIM]],
) -> Result<PshVerdict> {
    let rho_cone = stable_cone(rho, cfg)?;
    let sigma_cone = stable_cone(sigma, cfg)?;
    let t = OperatorTable::standard();
    let first = poly_at_points(&t.dd_s_potential(phi, sigma), points);
    let second = poly_at_points(&t.dd_s_potential(phi, rho), points);
    Ok(sl_from(
        sample_forms(&rho_cone, &first, cfg),
        sample_forms(&sigma_cone, &second, cfg),
        cfg,
    ))
}

pub fn classify_sl_psh_grid(phi: &GridScalar, cfg: &ConeSampleConfig) -> Result<PshVerdict> {
    let s = standard_structures();
    let rho_cone = stable_cone(&s.rho0, cfg)?;
    let sigma_cone = stable_cone(&s.sigma0, cfg)?;
    let t = OperatorTable::standard();
    let first = grid_at_nodes(&t.potential_symbol(&s.sigma0).apply_grid(phi), phi);
    let second = grid_at_nodes(&t.potential_symbol(&s.rho0).apply_grid(phi), phi);
    Ok(sl_from(
        sample_forms(&rho_cone, &first, cfg),
        sample_forms(&sigma_cone, &second, cfg),
        cfg,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimCase {
    pub hessian: Vec<Vec<String>>,
    pub sl: PshClass,
    pub psh: PshClass,
    pub witness: Witness,
}

/// Sampled check of "special Lagrangian plurisubharmonic implies
/// plurisubharmonic" over quadratics `½xᵀHx` with random positive-definite
/// `H = I + εG`, `G` symmetric with entries in eighths of a standard normal
/// draw and `ε` uniform on `{0, 0.05, …, 0.5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimSurvey {
    pub seed: u64,
    pub trials: usize,
    pub sl_psh: usize,
    pub psh: usize,
    pub counterexamples: Vec<ClaimCase>,
}

pub fn random_pd_hessian(seed: u64, index: u64) -> [[Rational; DIM]; DIM] {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = crate::stable_forms::sample_rng(seed, index);
    loop {
        let eps = crate::exterior::scalar::rat(rng.random_range(0..=10), 20);
        let mut h: [[Rational; DIM]; DIM] = std::array::from_fn(|_| std::array::from_fn(|_| Rational::zero()));
        for i in 0..DIM {
            for j in i..DIM {
                let g: f64 = StandardNormal.sample(&mut rng);
                let v = crate::exterior::scalar::rat((g * 8.0).round() as i64, 8) * &eps
                    + if i == j { Rational::one() } else { Rational::zero() };
                h[i][j] = v.clone();
                h[j][i] = v;
            }
        }
        let f: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(crate::exterior::scalar::to_f64).collect()).collect();
        if crate::linalg::is_positive_definite(&f) {
            return h;
        }
    }
}

pub fn claim_survey(trials: usize, cfg: &ConeSampleConfig) -> Result<ClaimSurvey> {
    let mut survey = ClaimSurvey {
        seed: cfg.seed,
        trials,
        sl_psh: 0,
        psh: 0,
        counterexamples: Vec::new(),
    };
    for index in 0..trials as u64 {
        let h = random_pd_hessian(cfg.seed, index);
        let phi = PolyScalar::quadratic(&h);
        let sl = classify_sl_psh(&phi, cfg, &[])?;
        let psh = classify_psh(&phi, cfg, &[])?;
        survey.sl_psh += usize::from(sl.classification.is_sl_psh());
        survey.psh += usize::from(psh.classification.is_psh());
        if sl.classification.is_sl_psh() && !psh.classification.is_psh() {
            survey.counterexamples.push(ClaimCase {
                hessian: h.iter().map(|r| r.iter().map(format_rational).collect()).collect(),
                sl: sl.classification,
                psh: psh.classification,
                witness: psh.witness,
            });
        }
    }
    Ok(survey)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::scalar::rat;
    use crate::exterior::{GridShape, TrigScalar};

    #[test]
    fn flat_constants_are_recorded() {
        let r = flat_example_check();
        assert_eq!(r.dd_c_constant.as_deref(), Some("2"));
        assert_eq!(r.dd_s_constant.as_deref(), Some("6"));
        assert!(r.lines.iter().find(|l| l.name == "dd^cφ ∝ ω₀").unwrap().pass);
        assert!(r.lines.iter().find(|l| l.name == "Definition phrasings agree").unwrap().pass);
        assert!(r.lines.iter().find(|l| l.name == "mkp_forms(φ/κ) = (ρ₀, σ₀)").unwrap().pass);
    }

    #[test]
    fn affine_potential_is_invisible() {
        let mut phi = PolyScalar::var(0).scale(&int(3));
        phi.add_term([0; DIM], rat(-1, 2));
        let m = mkp_forms(&phi);
        assert!(m.rho_out.is_zero() && m.sigma_out.is_zero());
        assert!(m.is_consistent());
    }

    #[test]
    fn deform_by_zero_and_by_flat_potential() {
        let s = standard_structures();
        let omega = ComplexForm::new(PolyForm::from_const(&s.rho0), PolyForm::from_const(&s.sigma0)).unwrap();
        assert_eq!(global_mkp_deform(&PolyScalar::zero(), &omega).unwrap(), omega);
        let out = global_mkp_deform(&PolyScalar::sum_of_squares(), &omega).unwrap();
        // Ω₀ − i·(κiΩ₀) = (1 + κ)Ω₀
        let k = flat_dd_s_constant().unwrap() + int(1);
        assert_eq!(out, omega.scaled(&k));
    }

    #[test]
    fn grid_mkp_matches_exact_trig() {
        let shape = GridShape::new(vec![0, 2], 8).unwrap();
        let t = TrigScalar::cos([1, 0, 1, 0, 0, 0], int(1));
        let exact = mkp_forms(&t);
        let grid = mkp_forms(&t.sample(&shape));
        assert!(grid.rho_out.max_abs_diff(&exact.rho_out.sample(&shape)) < 1e-10);
        assert!(grid.sigma_out.max_abs_diff(&exact.sigma_out.sample(&shape)) < 1e-10);
        assert!(grid.is_consistent());
    }

    #[test]
    fn psh_canonical_cases() {
        let cfg = ConeSampleConfig::default();
        let phi = PolyScalar::sum_of_squares();
        assert_eq!(classify_psh(&phi, &cfg, &[]).unwrap().classification, PshClass::StrictlyPsh);
        let neg = classify_psh(&-phi.clone(), &cfg, &[]).unwrap();
        assert_eq!(neg.classification, PshClass::NotPsh);
        assert!(neg.witness.value < 0.0);
        let affine = PolyScalar::var(4);
        assert_eq!(classify_psh(&affine, &cfg, &[]).unwrap().classification, PshClass::Pluriharmonic);
    }

    #[test]
    fn sl_psh_canonical_cases() {
        let cfg = ConeSampleConfig::default();
        let phi = PolyScalar::sum_of_squares();
        assert_eq!(classify_sl_psh(&phi, &cfg, &[]).unwrap().classification, PshClass::StrictlySlPsh);
        let affine = PolyScalar::var(1) + PolyScalar::constant(int(4));
        assert_eq!(
            classify_sl_psh(&affine, &cfg, &[]).unwrap().classification,
            PshClass::SlPluriharmonic
        );
        assert_eq!(classify_sl_psh(&-phi, &cfg, &[]).unwrap().classification, PshClass::NotSlPsh);
    }
}

//! Pointwise residuals of the potential equations: the wedge density of the
//! deformed pair, its complex phrasing, the general two-form-potential
//! phrasing, and the expanded second-order expression in Hessian entries.

use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{dd_s, dd_s_potential};
use crate::error::{CoreError, Result};
use crate::exterior::scalar::{format_rational, int, Coefficient, Rational};
use crate::exterior::{standard_structures, ComplexForm, ConstForm, Form, GridScalar, PolyScalar, DIM};
use crate::mirror_potential::flat_potential_scale;
use crate::stable_forms::sample_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianProvenance {
    ExactPolynomial,
    FiniteDifference(u8),
    Spectral,
}

/// Symmetric matrix of second derivatives `φ_ij`, one scalar field per entry.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianField<C> {
    entries: Vec<Vec<C>>,
    provenance: HessianProvenance,
}

impl<C: Coefficient> HessianField<C> {
    pub fn new(entries: Vec<Vec<C>>, provenance: HessianProvenance) -> Result<HessianField<C>> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) || !(n == 3 || n == 6) {
            return Err(CoreError::InvalidParameter {
                name: "hessian",
                reason: format!("need a 3×3 or 6×6 array, got {n} rows"),
            });
        }
        Ok(HessianField { entries, provenance })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &C {
        &self.entries[i][j]
    }

    pub fn entries(&self) -> &[Vec<C>] {
        &self.entries
    }

    pub fn provenance(&self) -> HessianProvenance {
        self.provenance
    }
}

impl HessianField<PolyScalar> {
    pub fn of_polynomial(phi: &PolyScalar) -> HessianField<PolyScalar> {
        let h = phi.hessian();
        HessianField {
            entries: h.iter().map(|r| r.to_vec()).collect(),
            provenance: HessianProvenance::ExactPolynomial,
        }
    }
}

impl HessianField<Rational> {
    pub fn constant(h: &[[Rational; DIM]; DIM]) -> HessianField<Rational> {
        HessianField {
            entries: h.iter().map(|r| r.to_vec()).collect(),
            provenance: HessianProvenance::ExactPolynomial,
        }
    }
}

/// The expanded left side of the local equation, with 1-based index pairs as
/// printed.
pub fn eq13_lhs<C: Coefficient>(h: &HessianField<C>) -> Result<C> {
    if h.dim() != 6 {
        return Err(CoreError::InvalidParameter {
            name: "hessian",
            reason: "need a 6×6 Hessian".into(),
        });
    }
    let p = |i: usize, j: usize| h.get(i - 1, j - 1).clone();
    let sum3 = |a: usize, b: usize, c: usize| p(a, a).plus(&p(b, b)).plus(&p(c, c));
    let sq = |x: C| x.times(&x);
    let mut acc = sum3(2, 3, 5).times(&sum3(1, 4, 6));
    acc = acc.plus(&sum3(1, 4, 5).times(&sum3(2, 3, 6)));
    acc = acc.plus(&sum3(1, 3, 6).times(&sum3(2, 4, 5)));
    acc = acc.plus(&sum3(2, 4, 6).times(&sum3(1, 3, 5)));
    let (a, b, c) = (p(1, 2), p(3, 4), p(5, 6));
    acc = acc.minus(&sq(a.plus(&b).plus(&c)));
    acc = acc.minus(&sq(a.negated().minus(&b).plus(&c)));
    acc = acc.minus(&sq(a.minus(&b).minus(&c)));
    acc = acc.minus(&sq(a.negated().plus(&b).minus(&c)));
    let pairs = [
        p(1, 3).minus(&p(2, 4)),
        p(3, 6).plus(&p(4, 5)),
        p(1, 5).minus(&p(2, 6)),
        p(1, 6).plus(&p(2, 5)),
        p(3, 5).minus(&p(4, 6)),
        p(1, 4).plus(&p(2, 3)),
    ];
    let mut bracket = sq(pairs[0].clone());
    for x in &pairs[1..] {
        bracket = bracket.plus(&sq(x.clone()));
    }
    Ok(acc.minus(&bracket.scaled(&int(2))))
}

fn volume_coefficient(rho: &ConstForm, sigma: &ConstForm) -> Result<Rational> {
    let top = rho.wedge(sigma)?;
    let v = top.top().cloned().unwrap_or_else(Rational::zero);
    if v.is_zero() {
        return Err(CoreError::DegenerateVolume { node: Vec::new() });
    }
    Ok(v)
}

fn top_or_zero<C: Coefficient>(f: &Form<C>, like: &C) -> C {
    f.top().cloned().unwrap_or_else(|| like.constant_like(&Rational::zero()))
}

/// `[(ρ + dd^s(φσ)) ∧ (σ − dd^s(φρ))] / (ρ ∧ σ)`.
pub fn eq11_density<C: Coefficient>(phi: &C, rho: &ConstForm, sigma: &ConstForm) -> Result<C> {
    let v = volume_coefficient(rho, sigma)?;
    let p = Form::embed_const(rho, phi).plus(&dd_s_potential(phi, sigma));
    let q = Form::embed_const(sigma, phi).minus(&dd_s_potential(phi, rho));
    Ok(top_or_zero(&p.wedge(&q)?, phi).scaled(&(Rational::from_integer(1.into()) / v)))
}

/// Complex phrasing `(Ω − i dd^sφΩ) ∧ (Ω̄ + i dd^sφΩ̄) / (Ω ∧ Ω̄)`, returned as
/// (re, im) of the ratio.
pub fn eq12_density<C: Coefficient>(phi: &C, rho: &ConstForm, sigma: &ConstForm) -> Result<(C, C)> {
    let omega = ComplexForm::new(Form::embed_const(rho, phi), Form::embed_const(sigma, phi))?;
    let dd = ComplexForm::new(dd_s_potential(phi, rho), dd_s_potential(phi, sigma))?;
    let left = omega.minus(&dd.times_i());
    let right = omega.conj().plus(&dd.conj().times_i());
    let num = left.wedge(&right)?;
    let den = ComplexForm::new(rho.clone(), sigma.clone())?
        .wedge(&ComplexForm::new(rho.clone(), sigma.negated())?)?;
    // den is purely imaginary for odd degree: Ω∧Ω̄ = −2iρ∧σ
    let d_im = den.im.top().cloned().unwrap_or_else(Rational::zero);
    if d_im.is_zero() || den.re.top().is_some() {
        return Err(CoreError::DegenerateVolume { node: Vec::new() });
    }
    let inv = Rational::from_integer(1.into()) / d_im;
    // (a + ib)/(i d) = b/d − i a/d
    let a = top_or_zero(&num.re, phi);
    let b = top_or_zero(&num.im, phi);
    Ok((b.scaled(&inv), a.scaled(&inv).negated()))
}

/// `[(ρ + dd^sα) ∧ (σ + dd^sβ)] / (ρ ∧ σ)`; `like` supplies the coefficient
/// shape when both potentials vanish.
pub fn eq9_density<C: Coefficient>(
    alpha: &Form<C>,
    beta: &Form<C>,
    rho: &ConstForm,
    sigma: &ConstForm,
    like: &C,
) -> Result<C> {
    check_three(alpha)?;
    check_three(beta)?;
    let v = volume_coefficient(rho, sigma)?;
    let p = Form::embed_const(rho, like).plus(&dd_s(alpha));
    let q = Form::embed_const(sigma, like).plus(&dd_s(beta));
    Ok(top_or_zero(&p.wedge(&q)?, like).scaled(&(Rational::from_integer(1.into()) / v)))
}

/// Complex phrasing with `ψ = α + iβ`: `(Ω + dd^sψ) ∧ (Ω̄ + dd^sψ̄) / (Ω ∧ Ω̄)`.
pub fn eq10_density<C: Coefficient>(
    alpha: &Form<C>,
    beta: &Form<C>,
    rho: &ConstForm,
    sigma: &ConstForm,
    like: &C,
) -> Result<(C, C)> {
    check_three(alpha)?;
    check_three(beta)?;
    let omega = ComplexForm::new(Form::embed_const(rho, like), Form::embed_const(sigma, like))?;
    let psi = ComplexForm::new(dd_s(alpha), dd_s(beta))?;
    let left = omega.plus(&psi);
    let right = omega.conj().plus(&psi.conj());
    let num = left.wedge(&right)?;
    let d = volume_coefficient(rho, sigma)? * int(-2);
    let inv = Rational::from_integer(1.into()) / d;
    let a = top_or_zero(&num.re, like);
    let b = top_or_zero(&num.im, like);
    Ok((b.scaled(&inv), a.scaled(&inv).negated()))
}

fn check_three<C: Coefficient>(f: &Form<C>) -> Result<()> {
    if f.degree() != 3 {
        return Err(CoreError::DegreeMismatch {
            expected: 3,
            found: f.degree(),
        });
    }
    Ok(())
}

/// Which Hessian the expanded expression is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eq13Reading {
    /// Hessian of the periodic correction `φ` alone.
    Correction,
    /// Hessian of the total potential `qΣ(xⁱ)² + φ` whose flat part produces
    /// `(ρ₀, σ₀)`.
    TotalPotential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq13Row {
    pub hessian: Vec<Vec<String>>,
    pub eq11: String,
    pub eq13: String,
    pub predicted: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq13Fit {
    pub reading: Eq13Reading,
    pub status: String,
    pub c1: Option<String>,
    pub c0: Option<String>,
    pub held_out: usize,
    pub mismatches: Vec<Eq13Row>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq13Report {
    pub status: String,
    pub seed: u64,
    pub training: usize,
    pub fits: Vec<Eq13Fit>,
}

type Hess = [[Rational; DIM]; DIM];

fn random_hessian(seed: u64, index: u64) -> Hess {
    let mut rng = sample_rng(seed, index);
    let mut h: Hess = std::array::from_fn(|_| std::array::from_fn(|_| Rational::zero()));
    for i in 0..DIM {
        for j in i..DIM {
            let v = int(rng.random_range(-3..=3));
            h[i][j] = v.clone();
            h[j][i] = v;
        }
    }
    h
}

/// `eq11_density · (ρ₀∧σ₀)` for the quadratic with constant Hessian `h`.
pub fn eq11_top_constant(h: &Hess) -> Result<Rational> {
    let s = standard_structures();
    let phi = PolyScalar::quadratic(h);
    let d = eq11_density(&phi, &s.rho0, &s.sigma0)?;
    let v = volume_coefficient(&s.rho0, &s.sigma0)?;
    Ok(d.as_constant().expect("constant Hessian gives constant density") * v)
}

fn eq13_on(h: &Hess, reading: Eq13Reading) -> Result<Rational> {
    let mut m = h.clone();
    if reading == Eq13Reading::TotalPotential {
        let shift = flat_potential_scale() * int(2);
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += &shift;
        }
    }
    eq13_lhs(&HessianField::constant(&m))
}

fn row(h: &Hess, eq11: &Rational, eq13: &Rational, predicted: &Rational) -> Eq13Row {
    Eq13Row {
        hessian: h.iter().map(|r| r.iter().map(format_rational).collect()).collect(),
        eq11: format_rational(eq11),
        eq13: format_rational(eq13),
        predicted: format_rational(predicted),
    }
}

fn fit_reading(reading: Eq13Reading, train: &[Hess], held: &[Hess]) -> Result<Eq13Fit> {
    let pts: Vec<(Rational, Rational)> = train
        .iter()
        .map(|h| Ok((eq13_on(h, reading)?, eq11_top_constant(h)?)))
        .collect::<Result<_>>()?;
    let (x0, y0) = pts[0].clone();
    let Some((x1, y1)) = pts.iter().find(|(x, _)| *x != x0).cloned() else {
        return Ok(Eq13Fit {
            reading,
            status: "FAILED".into(),
            c1: None,
            c0: None,
            held_out: held.len(),
            mismatches: Vec::new(),
        });
    };
    let c1 = (&y1 - &y0) / (&x1 - &x0);
    let c0 = &y0 - &c1 * &x0;
    let mut mismatches = Vec::new();
    for h in train.iter().chain(held) {
        let e13 = eq13_on(h, reading)?;
        let e11 = eq11_top_constant(h)?;
        let pred = &c1 * &e13 + &c0;
        if pred != e11 {
            mismatches.push(row(h, &e11, &e13, &pred));
        }
    }
    Ok(Eq13Fit {
        reading,
        status: if mismatches.is_empty() { "PASS" } else { "FAILED" }.into(),
        c1: Some(format_rational(&c1)),
        c0: Some(format_rational(&c0)),
        held_out: held.len(),
        mismatches: mismatches.into_iter().take(10).collect(),
    })
}

/// Fits `eq11·(ρ₀∧σ₀) = c₁·eq13 + c₀` on random integer Hessians and checks
/// it on a held-out set of the same size, for both readings of which
/// Hessian enters the expanded expression.
pub fn eq13_crosscheck(sample_count: usize, seed: u64) -> Result<Eq13Report> {
    if sample_count < 2 {
        return Err(CoreError::InvalidParameter {
            name: "sample_count",
            reason: "need at least 2 training Hessians".into(),
        });
    }
    let mut train: Vec<Hess> = (0..sample_count as u64).map(|i| random_hessian(seed, i)).collect();
    train.push(std::array::from_fn(|_| std::array::from_fn(|_| Rational::zero())));
    let mut held: Vec<Hess> = (0..sample_count as u64)
        .map(|i| random_hessian(seed, i + sample_count as u64))
        .collect();
    held.push(std::array::from_fn(|i| std::array::from_fn(|j| if i == j { int(2) } else { int(0) })));
    let fits = vec![
        fit_reading(Eq13Reading::TotalPotential, &train, &held)?,
        fit_reading(Eq13Reading::Correction, &train, &held)?,
    ];
    let status = if fits.iter().any(|f| f.status == "PASS") { "PASS" } else { "FAILED" };
    Ok(Eq13Report {
        status: status.into(),
        seed,
        training: train.len(),
        fits,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq9Check {
    /// `|mean(e^F) − 1|`: the torus quadrature of `e^F ρ∧σ` against `∫ρ∧σ`.
    pub normalization_defect: f64,
    /// Largest gap between the real and complex phrasings, including the
    /// imaginary part of the complex one.
    pub complex_gap: f64,
}

/// Density of periodic potentials together with the normalization and
/// complex-phrasing checks.
pub fn eq9_residual(
    alpha: &Form<GridScalar>,
    beta: &Form<GridScalar>,
    rho: &ConstForm,
    sigma: &ConstForm,
) -> Result<(GridScalar, Eq9Check)> {
    let like = alpha
        .terms()
        .chain(beta.terms())
        .next()
        .map(|(_, c)| c.constant_like(&Rational::zero()))
        .ok_or_else(|| CoreError::InvalidParameter {
            name: "potentials",
            reason: "need at least one grid coefficient to fix the grid".into(),
        })?;
    let density = eq9_density(alpha, beta, rho, sigma, &like)?;
    let (re, im) = eq10_density(alpha, beta, rho, sigma, &like)?;
    let complex_gap = density.max_abs_diff(&re).max(im.max_abs());
    let normalization_defect = (density.mean() - 1.0).abs();
    Ok((
        density,
        Eq9Check {
            normalization_defect,
            complex_gap,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::scalar::rat;
    use crate::exterior::{Blade, GridForm, GridShape, TrigScalar};
    use crate::stable_forms::hitchin_lambda;

    fn diag(v: i64) -> Hess {
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { int(v) } else { int(0) }))
    }

    #[test]
    fn eq13_examples() {
        assert_eq!(eq13_lhs(&HessianField::constant(&diag(2))).unwrap(), int(144));
        assert_eq!(eq13_lhs(&HessianField::constant(&diag(0))).unwrap(), int(0));
        let mut h = diag(0);
        h[0][1] = int(1);
        h[1][0] = int(1);
        assert_eq!(eq13_lhs(&HessianField::constant(&h)).unwrap(), int(-4));
        let poly = PolyScalar::sum_of_squares();
        let field = HessianField::of_polynomial(&poly);
        assert_eq!(eq13_lhs(&field).unwrap().as_constant(), Some(int(144)));
        assert_eq!(field.provenance(), HessianProvenance::ExactPolynomial);
    }

    #[test]
    fn eq13_block_permutation_symmetry() {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for s in 0..20 {
            let h = random_hessian(77, s);
            let base = eq13_lhs(&HessianField::constant(&h)).unwrap();
            for p in perms {
                let map = |i: usize| 2 * p[i / 2] + i % 2;
                let mut g = diag(0);
                for i in 0..DIM {
                    for j in 0..DIM {
                        g[map(i)][map(j)] = h[i][j].clone();
                    }
                }
                assert_eq!(eq13_lhs(&HessianField::constant(&g)).unwrap(), base, "perm {p:?}");
            }
        }
    }

    #[test]
    fn eq11_zero_potential_is_one_for_stable_pairs() {
        let s = standard_structures();
        let g: [[Rational; DIM]; DIM] =
            std::array::from_fn(|i| std::array::from_fn(|j| if i == j { int(2) } else if j == i + 1 { rat(1, 3) } else { int(0) }));
        for (rho, sigma) in [(s.rho0.clone(), s.sigma0.clone()), (s.rho0.pullback(&g), s.sigma0.pullback(&g))] {
            assert!(hitchin_lambda(&rho).unwrap() < int(0));
            assert_eq!(eq11_density(&Rational::zero(), &rho, &sigma).unwrap(), int(1));
        }
    }

    #[test]
    fn eq11_flat_quadratic_density() {
        let s = standard_structures();
        for c in [rat(1, 2), int(-1), rat(2, 7)] {
            let phi = PolyScalar::sum_of_squares().scale(&c);
            let d = eq11_density(&phi, &s.rho0, &s.sigma0).unwrap().as_constant().unwrap();
            let one_plus = int(1) + int(6) * &c;
            assert_eq!(d, &one_plus * &one_plus);
        }
    }

    #[test]
    fn eq11_degenerate_volume() {
        let s = standard_structures();
        let r = eq11_density(&Rational::zero(), &s.rho0, &s.rho0);
        assert!(matches!(r, Err(CoreError::DegenerateVolume { .. })));
    }

    fn trig_phi() -> TrigScalar {
        let mut t = TrigScalar::cos([1, 0, 1, 0, 0, 0], rat(1, 10));
        t = t.plus(&TrigScalar::sin([0, 1, 0, 0, 1, 0], rat(-1, 20)));
        t.plus(&TrigScalar::cos([0, 0, 0, 1, 0, 1], rat(1, 30)))
    }

    #[test]
    fn eq12_matches_eq11_exactly() {
        let s = standard_structures();
        let phi = trig_phi().plus(&TrigScalar::constant(int(0)));
        let real = eq11_density(&phi, &s.rho0, &s.sigma0).unwrap();
        let (re, im) = eq12_density(&phi, &s.rho0, &s.sigma0).unwrap();
        assert_eq!(real, re);
        assert!(im.vanishes());
    }

    #[test]
    fn eq11_exact_and_grid_engines_agree() {
        let s = standard_structures();
        let phi = trig_phi();
        let exact = eq11_density(&phi, &s.rho0, &s.sigma0).unwrap();
        let shape = GridShape::new((0..DIM).collect(), 4).unwrap();
        let grid = eq11_density(&phi.sample(&shape), &s.rho0, &s.sigma0).unwrap();
        assert!(grid.max_abs_diff(&exact.sample(&shape)) <= 1e-8);
    }

    #[test]
    fn eq9_reduces_to_eq11() {
        let s = standard_structures();
        let phi = PolyScalar::var(0).times(&PolyScalar::var(3)).plus(&PolyScalar::sum_of_squares().scale(&rat(1, 5)));
        let alpha = Form::embed_const(&s.sigma0, &phi).convert(|c| c.times(&phi));
        let beta = Form::embed_const(&s.rho0, &phi).convert(|c| c.times(&phi)).negated();
        let d9 = eq9_density(&alpha, &beta, &s.rho0, &s.sigma0, &phi).unwrap();
        assert_eq!(d9, eq11_density(&phi, &s.rho0, &s.sigma0).unwrap());
        let zero = Form::<PolyScalar>::zero(3);
        let one = eq9_density(&zero, &zero, &s.rho0, &s.sigma0, &PolyScalar::zero()).unwrap();
        assert_eq!(one.as_constant(), Some(int(1)));
    }

    #[test]
    fn eq9_periodic_normalization() {
        let s = standard_structures();
        let shape = GridShape::new(vec![0, 1, 2, 3], 6).unwrap();
        let mut rng = sample_rng(11, 0);
        let mut random_form = || {
            let mut f = GridForm::zero(3);
            for b in Blade::of_degree(3) {
                let (k1, k2): (f64, f64) = (rng.random_range(-1..=1) as f64, rng.random_range(-1..=1) as f64);
                let (k3, a): (f64, f64) = (rng.random_range(-1..=1) as f64, rng.random_range(-0.1..0.1));
                f.add_term(b, GridScalar::sample(shape.clone(), move |x| a * (k1 * x[0] + k2 * x[1] + k3 * x[3] + 0.3).cos()));
            }
            f
        };
        let (alpha, beta) = (random_form(), random_form());
        let (density, check) = eq9_residual(&alpha, &beta, &s.rho0, &s.sigma0).unwrap();
        assert!(density.max_abs_diff(&GridScalar::filled(shape, 1.0)) > 1e-4);
        assert!(check.normalization_defect <= 1e-8, "{}", check.normalization_defect);
        assert!(check.complex_gap <= 1e-12);
    }

    #[test]
    fn crosscheck_total_potential_reading_fits() {
        let r = eq13_crosscheck(12, 3).unwrap();
        assert_eq!(r.status, "PASS");
        let total = &r.fits[0];
        assert_eq!(total.reading, Eq13Reading::TotalPotential);
        assert_eq!((total.c1.as_deref(), total.c0.as_deref()), (Some("1"), Some("0")));
        assert_eq!(r.fits[1].status, "FAILED");
        assert!(!r.fits[1].mismatches.is_empty());
    }

    #[test]
    fn crosscheck_on_diagonal_sample() {
        let hs: Vec<Hess> = (1..5).map(diag).collect();
        let held = vec![diag(2), diag(0)];
        let fit = fit_reading(Eq13Reading::TotalPotential, &hs, &held).unwrap();
        assert_eq!(fit.status, "PASS");
    }
}

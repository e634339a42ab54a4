//! Stability of constant real 3-forms on R⁶: the endomorphism `K_ρ`, the
//! quartic invariant `λ`, the induced complex structure, the dual form, and
//! positivity of a 3-form on the calibrated cone of a stable form.

use std::sync::LazyLock;

use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::exterior::scalar::{exact_sqrt, format_rational, int, to_f64, Coefficient, Rational};
use crate::exterior::{standard_structures, Blade, ConstForm, FloatForm, Form, DIM};
use crate::linalg::{self, RatMatrix};

/// `ρ(e_{i}, e_{j}, …)` on coordinate basis vectors, for any coefficient ring.
pub fn eval_basis<C: Coefficient>(rho: &Form<C>, axes: &[usize]) -> Option<C> {
    let mut blade = Blade::SCALAR;
    let mut sign = 1;
    for &a in axes {
        let (s, nb) = blade.wedge(Blade::axis(a))?;
        sign *= s;
        blade = nb;
    }
    let c = rho.coeff(blade)?;
    Some(if sign < 0 { c.negated() } else { c.clone() })
}

/// `K_ρ(v) = A(ι_vρ ∧ ρ)`, where `A: Λ⁵ → V` is `ι_u dx^{123456} = β ↦ u`.
/// Column `a` is `K_ρ(∂_a)`.
pub fn k_endomorphism(rho: &ConstForm) -> Result<RatMatrix> {
    check_degree(rho)?;
    let mut k = vec![vec![Rational::zero(); DIM]; DIM];
    for a in 0..DIM {
        let five = rho.contract_axis(a).wedge(rho)?;
        for (b, c) in five.terms() {
            let i = b.complement().axes().next().expect("5-form blade");
            // ι_{∂_i} dx^{123456} = (-1)^i dx^{comp i}
            k[i][a] = if i % 2 == 0 { c.clone() } else { -c.clone() };
        }
    }
    Ok(k)
}

/// `λ(ρ) = tr(K_ρ²)/6`, the coefficient of `(dx^{123456})²`.
pub fn hitchin_lambda(rho: &ConstForm) -> Result<Rational> {
    let k = k_endomorphism(rho)?;
    Ok(linalg::trace(&linalg::mat_mul(&k, &k)) / int(6))
}

fn check_degree(rho: &ConstForm) -> Result<()> {
    if rho.degree() != 3 {
        return Err(CoreError::DegreeMismatch {
            expected: 3,
            found: rho.degree(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    StableNegative,
    StablePositive,
    Unstable,
}

#[derive(Clone, Debug)]
pub struct StableAnalysis {
    pub lambda: Rational,
    pub k: RatMatrix,
    /// Always present for `StableNegative`.
    pub j: Option<Vec<Vec<f64>>>,
    /// Present when `√−λ` is rational.
    pub j_exact: Option<RatMatrix>,
    pub dual: Option<FloatForm>,
    pub dual_exact: Option<ConstForm>,
    pub verdict: StabilityVerdict,
}

/// Sign `s` in `ρ̂(X,Y,Z) = s·ρ(JX,Y,Z)`, fixed so that the dual of `ρ₀` is `σ₀`.
static DUAL_SIGN: LazyLock<i64> = LazyLock::new(|| {
    let s = standard_structures();
    let k = k_endomorphism(&s.rho0).expect("degree 3");
    let lambda = linalg::trace(&linalg::mat_mul(&k, &k)) / int(6);
    let root = exact_sqrt(&-lambda).expect("λ(ρ₀) is minus a square");
    let j: RatMatrix = k.iter().map(|r| r.iter().map(|c| c / &root).collect()).collect();
    let candidate = dual_exact(&s.rho0, &j, 1);
    if candidate == s.sigma0 {
        1
    } else if candidate == s.sigma0.negated() {
        -1
    } else {
        panic!("ρ(J·,·,·) is not ±σ₀ on the flat model")
    }
});

pub fn dual_sign() -> i64 {
    *DUAL_SIGN
}

fn dual_exact(rho: &ConstForm, j: &RatMatrix, s: i64) -> ConstForm {
    let mut out = ConstForm::zero(3);
    for blade in Blade::of_degree(3) {
        let ax: Vec<usize> = blade.axes().collect();
        let mut acc = Rational::zero();
        for (m, row) in j.iter().enumerate() {
            if row[ax[0]].is_zero() {
                continue;
            }
            if let Some(v) = eval_basis(rho, &[m, ax[1], ax[2]]) {
                acc += &row[ax[0]] * v;
            }
        }
        out.add_term(blade, acc * int(s));
    }
    out
}

fn dual_float(rho: &FloatForm, j: &[Vec<f64>], s: f64) -> FloatForm {
    let mut out = FloatForm::zero(3);
    for blade in Blade::of_degree(3) {
        let ax: Vec<usize> = blade.axes().collect();
        let acc: f64 = (0..DIM)
            .filter_map(|m| eval_basis(rho, &[m, ax[1], ax[2]]).map(|v| j[m][ax[0]] * v))
            .sum();
        if acc != 0.0 {
            out.add_term(blade, acc * s);
        }
    }
    out
}

pub fn analyze_stable(rho: &ConstForm) -> Result<StableAnalysis> {
    let k = k_endomorphism(rho)?;
    let lambda = linalg::trace(&linalg::mat_mul(&k, &k)) / int(6);
    let verdict = if lambda.is_negative() {
        StabilityVerdict::StableNegative
    } else if lambda.is_positive() {
        StabilityVerdict::StablePositive
    } else {
        StabilityVerdict::Unstable
    };
    let mut out = StableAnalysis {
        lambda: lambda.clone(),
        k: k.clone(),
        j: None,
        j_exact: None,
        dual: None,
        dual_exact: None,
        verdict,
    };
    if verdict != StabilityVerdict::StableNegative {
        return Ok(out);
    }
    let s = dual_sign();
    if let Some(root) = exact_sqrt(&-lambda.clone()) {
        let j: RatMatrix = k.iter().map(|r| r.iter().map(|c| c / &root).collect()).collect();
        let dual = dual_exact(rho, &j, s);
        out.j = Some(linalg::to_f64_matrix(&j));
        out.dual = Some(dual.to_f64());
        out.dual_exact = Some(dual);
        out.j_exact = Some(j);
    } else {
        let root = (-to_f64(&lambda)).sqrt();
        let j: Vec<Vec<f64>> = k.iter().map(|r| r.iter().map(|c| to_f64(c) / root).collect()).collect();
        out.dual = Some(dual_float(&rho.to_f64(), &j, s as f64));
        out.j = Some(j);
    }
    Ok(out)
}

impl StableAnalysis {
    /// Entrywise `max |J² + I|`.
    pub fn j_squared_defect(&self) -> Option<f64> {
        let j = self.j.as_ref()?;
        let j2 = linalg::mat_mul_f64(j, j);
        Some(
            (0..DIM)
                .flat_map(|r| (0..DIM).map(move |c| (r, c)))
                .map(|(r, c)| (j2[r][c] + if r == c { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max),
        )
    }

    /// How far `ρ + iρ̂` is from being annihilated by the (1,0)-forms of one
    /// of `±J`: the smaller of the two largest wedge coefficients of
    /// `(α ∓ i α∘J) ∧ (ρ + iρ̂)` over `α = dx¹, …, dx⁶`.
    pub fn decomposability_defect(&self, rho: &ConstForm) -> Option<f64> {
        let j = self.j.as_ref()?;
        let dual = self.dual.as_ref()?;
        let re = rho.to_f64();
        let mut best = f64::INFINITY;
        for orientation in [1.0, -1.0] {
            let mut worst: f64 = 0.0;
            for a in 0..DIM {
                // α∘J has coefficients J[a][m] on dx^m
                let alpha_re: FloatForm = Form::term(Blade::axis(a), 1.0);
                let mut alpha_im = FloatForm::zero(1);
                for m in 0..DIM {
                    if j[a][m] != 0.0 {
                        alpha_im.add_term(Blade::axis(m), -orientation * j[a][m]);
                    }
                }
                // (p + iq) ∧ (r + is) = (p∧r − q∧s) + i(p∧s + q∧r)
                let real = alpha_re
                    .wedge(&re)
                    .ok()?
                    .minus(&alpha_im.wedge(dual).ok()?);
                let imag = alpha_re.wedge(dual).ok()?.plus(&alpha_im.wedge(&re).ok()?);
                for f in [real, imag] {
                    worst = f.terms().fold(worst, |m, (_, c)| m.max(c.abs()));
                }
            }
            best = best.min(worst);
        }
        Some(best)
    }

    pub fn report(&self) -> AnalysisReport {
        AnalysisReport {
            lambda: format_rational(&self.lambda),
            verdict: self.verdict,
            j: self.j.clone(),
            dual: self.dual_exact.as_ref().map(|d| {
                crate::exterior::io::FormFile::from_const(d)
            }).or_else(|| self.dual.as_ref().map(crate::exterior::io::FormFile::from_float)),
        }
    }
}

/// Serialized view of [`StableAnalysis`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnalysisReport {
    pub lambda: String,
    pub verdict: StabilityVerdict,
    #[serde(rename = "J")]
    pub j: Option<Vec<Vec<f64>>>,
    pub dual: Option<crate::exterior::io::FormFile>,
}

/// Sampling parameters for a calibrated cone `C(ρ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeSampleConfig {
    pub sample_count: usize,
    pub seed: u64,
    pub strict_threshold: f64,
    pub zero_tolerance: f64,
    /// Also classify on convex combinations of accepted samples.
    pub hull: bool,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl Default for ConeSampleConfig {
    fn default() -> Self {
        ConeSampleConfig {
            sample_count: 4000,
            seed: DEFAULT_SEED,
            strict_threshold: 0.25,
            zero_tolerance: 1e-9,
            hull: false,
        }
    }
}

impl ConeSampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(CoreError::InvalidParameter {
                name: "sample_count",
                reason: "must be positive".into(),
            });
        }
        if !(self.strict_threshold > 0.0 && self.strict_threshold < 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "strict_threshold",
                reason: format!("{} not in (0, 1)", self.strict_threshold),
            });
        }
        if !(self.zero_tolerance >= 0.0 && self.zero_tolerance.is_finite()) {
            return Err(CoreError::InvalidParameter {
                name: "zero_tolerance",
                reason: format!("{} must be a non-negative number", self.zero_tolerance),
            });
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ConeSampleConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Random number stream for sample `index`, independent of thread scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// An accepted orthonormal frame `v₁, …, v_k` with `ρ(v₁∧…∧v_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSample {
    pub frame: Vec<[f64; DIM]>,
    pub calibration: f64,
}

#[derive(Clone, Debug)]
pub struct ConeSamples {
    pub samples: Vec<ConeSample>,
    pub drawn: usize,
}

fn orthonormal_frame(rng: &mut ChaCha8Rng, k: usize) -> Option<Vec<[f64; DIM]>> {
    let mut frame: Vec<[f64; DIM]> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = [0.0; DIM];
        for x in v.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        for u in &frame {
            let dot: f64 = (0..DIM).map(|i| v[i] * u[i]).sum();
            for i in 0..DIM {
                v[i] -= dot * u[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        frame.push(v);
    }
    Some(frame)
}

/// Draws unit decomposable k-vectors with Haar-distributed frames and keeps
/// those with `ρ(ξ) > strict_threshold`, where `k = deg ρ`.
pub fn sample_cone(calibrating: &FloatForm, cfg: &ConeSampleConfig) -> Result<ConeSamples> {
    cfg.validate()?;
    let k = calibrating.degree();
    let samples: Vec<ConeSample> = (0..cfg.sample_count)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = sample_rng(cfg.seed, i as u64);
            let frame = orthonormal_frame(&mut rng, k)?;
            let calibration = calibrating.eval_on(&frame);
            (calibration > cfg.strict_threshold).then_some(ConeSample { frame, calibration })
        })
        .collect();
    if samples.len() * 10 < cfg.sample_count {
        return Err(CoreError::ConeStarvation {
            accepted: samples.len(),
            drawn: cfg.sample_count,
        });
    }
    Ok(ConeSamples {
        samples,
        drawn: cfg.sample_count,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    StrictlyPositive,
    Positive,
    StrictlyNegative,
    Negative,
    ZeroOnCone,
    Indefinite,
}

impl Positivity {
    pub fn is_nonnegative(self) -> bool {
        matches!(self, Positivity::StrictlyPositive | Positivity::Positive | Positivity::ZeroOnCone)
    }

    pub fn is_nonpositive(self) -> bool {
        matches!(self, Positivity::StrictlyNegative | Positivity::Negative | Positivity::ZeroOnCone)
    }
}

/// Classifies sampled values: index of the witness is the minimizer, except
/// for negative patterns where it is the maximizer.
pub fn classify_values(values: &[f64], cfg: &ConeSampleConfig) -> (Positivity, usize) {
    let (mut imin, mut imax) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    let (min, max) = (values[imin], values[imax]);
    let tol = cfg.zero_tolerance;
    let thr = cfg.strict_threshold;
    if min.abs() <= tol && max.abs() <= tol {
        (Positivity::ZeroOnCone, imax)
    } else if min > thr {
        (Positivity::StrictlyPositive, imin)
    } else if max < -thr {
        (Positivity::StrictlyNegative, imax)
    } else if min >= -tol {
        (Positivity::Positive, imin)
    } else if max <= tol {
        (Positivity::Negative, imax)
    } else {
        (Positivity::Indefinite, imin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub xi: Vec<[f64; DIM]>,
    pub value: f64,
    pub point: [f64; DIM],
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub classification: Positivity,
    pub min: f64,
    pub max: f64,
    pub witness: Witness,
    pub samples_used: usize,
    pub drawn: usize,
    /// Classification on the convex hull of the samples, when requested.
    pub hull_classification: Option<Positivity>,
}

impl PositivityReport {
    pub fn hull_agrees(&self) -> bool {
        self.hull_classification.is_none_or(|h| h == self.classification)
    }
}

/// Values of `τ` on random convex combinations of three accepted samples,
/// followed by the samples themselves.
fn hull_values(values: &[f64], cfg: &ConeSampleConfig) -> Vec<f64> {
    let n = values.len();
    let mut out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, i as u64);
            let mut w = [0.0f64; 3];
            let mut idx = [0usize; 3];
            for s in 0..3 {
                let u: f64 = rand::Rng::random(&mut rng);
                w[s] = -u.max(f64::MIN_POSITIVE).ln();
                idx[s] = rand::Rng::random_range(&mut rng, 0..n);
            }
            let total: f64 = w.iter().sum();
            (0..3).map(|s| w[s] / total * values[idx[s]]).sum()
        })
        .collect();
    out.extend_from_slice(values);
    out
}

/// Definition of `τ ≥ 0 mod ρ` realized on sampled unit decomposables of `C(ρ)`.
pub fn positivity_mod(
    tau: &ConstForm,
    rho: &ConstForm,
    cfg: &ConeSampleConfig,
) -> Result<PositivityReport> {
    check_degree(tau)?;
    let analysis = analyze_stable(rho)?;
    if analysis.verdict != StabilityVerdict::StableNegative {
        return Err(CoreError::NotStableNegative {
            lambda: format_rational(&analysis.lambda),
        });
    }
    let cone = sample_cone(&rho.to_f64(), cfg)?;
    let t = tau.to_f64();
    let values: Vec<f64> = cone.samples.iter().map(|s| t.eval_on(&s.frame)).collect();
    Ok(report_from_values(&cone, &values, [0.0; DIM], cfg))
}

pub(crate) fn report_from_values(
    cone: &ConeSamples,
    values: &[f64],
    point: [f64; DIM],
    cfg: &ConeSampleConfig,
) -> PositivityReport {
    let (classification, w) = classify_values(values, cfg);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hull_classification = cfg.hull.then(|| classify_values(&hull_values(values, cfg), cfg).0);
    PositivityReport {
        classification,
        min,
        max,
        witness: Witness {
            xi: cone.samples[w].frame.clone(),
            value: values[w],
            point,
        },
        samples_used: values.len(),
        drawn: cone.drawn,
        hull_classification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(ix: &[usize], v: i64) -> ConstForm {
        ConstForm::monomial(ix, int(v)).unwrap()
    }

    #[test]
    fn k_of_flat_form_squares_to_scalar() {
        let s = standard_structures();
        let k = k_endomorphism(&s.rho0).unwrap();
        assert_eq!(linalg::trace(&k), int(0));
        let k2 = linalg::mat_mul(&k, &k);
        let lambda = hitchin_lambda(&s.rho0).unwrap();
        assert!(lambda.is_negative());
        for (r, row) in k2.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                assert_eq!(*v, if r == col { lambda.clone() } else { int(0) });
            }
        }
    }

    #[test]
    fn decomposable_is_null() {
        let rho = c(&[1, 3, 5], 1);
        let k = k_endomorphism(&rho).unwrap();
        assert!(linalg::mat_mul(&k, &k).iter().flatten().all(|v| v.is_zero()));
        assert_eq!(hitchin_lambda(&rho).unwrap(), int(0));
        assert!(k_endomorphism(&ConstForm::zero(3)).unwrap().iter().flatten().all(|v| v.is_zero()));
    }

    #[test]
    fn lambda_signs_and_homogeneity() {
        let s = standard_structures();
        let l0 = hitchin_lambda(&s.rho0).unwrap();
        assert_eq!(hitchin_lambda(&s.rho0.scaled(&int(2))).unwrap(), &l0 * int(16));
        let split = c(&[1, 2, 3], 1).plus(&c(&[4, 5, 6], 1));
        assert!(hitchin_lambda(&split).unwrap().is_positive());
        assert!(hitchin_lambda(&c(&[1, 2], 1)).is_err());
    }

    #[test]
    fn flat_dual_pairs() {
        let s = standard_structures();
        let a = analyze_stable(&s.rho0).unwrap();
        assert_eq!(a.dual_exact.as_ref(), Some(&s.sigma0));
        assert_eq!(a.j_squared_defect(), Some(0.0));
        let b = analyze_stable(&s.sigma0).unwrap();
        assert_eq!(b.dual_exact, Some(s.rho0.negated()));
        let doubled = analyze_stable(&s.rho0.scaled(&int(2))).unwrap();
        assert_eq!(doubled.dual_exact, Some(s.sigma0.scaled(&int(2))));
        assert_eq!(doubled.j_exact, a.j_exact);
        assert!(a.decomposability_defect(&s.rho0).unwrap() < 1e-15);
    }

    #[test]
    fn split_form_has_no_dual() {
        let split = c(&[1, 2, 3], 1).plus(&c(&[4, 5, 6], 1));
        let a = analyze_stable(&split).unwrap();
        assert_eq!(a.verdict, StabilityVerdict::StablePositive);
        assert!(a.dual.is_none() && a.j.is_none());
        let u = analyze_stable(&c(&[1, 3, 5], 1)).unwrap();
        assert_eq!(u.verdict, StabilityVerdict::Unstable);
    }

    #[test]
    fn frames_are_reproducible() {
        let a = orthonormal_frame(&mut sample_rng(7, 11), 3).unwrap();
        let b = orthonormal_frame(&mut sample_rng(7, 11), 3).unwrap();
        assert_eq!(a, b);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..DIM).map(|m| a[i][m] * a[j][m]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_cone_classifications() {
        let s = standard_structures();
        let cfg = ConeSampleConfig::default();
        let pos = positivity_mod(&s.rho0, &s.rho0, &cfg).unwrap();
        assert_eq!(pos.classification, Positivity::StrictlyPositive);
        let neg = positivity_mod(&s.rho0.negated(), &s.rho0, &cfg).unwrap();
        assert_eq!(neg.classification, Positivity::StrictlyNegative);
        let ind = positivity_mod(&s.sigma0, &s.rho0, &cfg).unwrap();
        assert_eq!(ind.classification, Positivity::Indefinite);
        let zero = positivity_mod(&ConstForm::zero(3), &s.rho0, &cfg).unwrap();
        assert_eq!(zero.classification, Positivity::ZeroOnCone);
    }

    #[test]
    fn unstable_background_rejected() {
        let cfg = ConeSampleConfig::default();
        let e = positivity_mod(&c(&[1, 3, 5], 1), &c(&[1, 3, 5], 1), &cfg);
        assert!(matches!(e, Err(CoreError::NotStableNegative { .. })));
    }
}

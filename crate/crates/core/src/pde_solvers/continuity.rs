//! Frequency-space least-squares fit of the linear continuity family
//! `dd^s(φ_t ρ₀) = −(1−t)σ₀ − tσ`, `dd^s(φ_t σ₀) = (1−t)ρ₀ + tρ`.
//!
//! With `φ_t = qΣ(xⁱ)² + p_t`, where `q` is the flat potential scale, the
//! quadratic produces `(ρ₀, σ₀)` exactly and the periodic part must satisfy
//! `dd^s(p_t σ₀) = t(ρ − ρ₀)`, `dd^s(p_t ρ₀) = −t(σ − σ₀)`. Each Fourier mode
//! is an overdetermined system with one complex unknown.

use std::collections::BTreeMap;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{OperatorTable, PotentialSymbol};
use crate::error::{CoreError, Result};
use crate::exterior::scalar::{format_rational, int, rat, to_f64, Rational};
use crate::exterior::{standard_structures, Blade, ConstForm, GridForm, GridScalar, GridShape, DIM};
use crate::mirror_potential::flat_potential_scale;
use crate::spectral;
use crate::stable_forms::sample_rng;

/// A degree-3 target, constant or sampled on a torus grid.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetForm {
    Constant(ConstForm),
    Grid(GridForm),
}

impl TargetForm {
    pub fn degree(&self) -> usize {
        match self {
            TargetForm::Constant(c) => c.degree(),
            TargetForm::Grid(g) => g.degree(),
        }
    }

    fn shape(&self) -> Option<GridShape> {
        match self {
            TargetForm::Constant(_) => None,
            TargetForm::Grid(g) => g.terms().next().map(|(_, c)| c.shape().clone()),
        }
    }

    /// Normalized Fourier coefficients per blade on `shape`.
    fn spectrum(&self, shape: &GridShape) -> BTreeMap<Blade, Vec<Complex64>> {
        let len = shape.len();
        let mut out = BTreeMap::new();
        match self {
            TargetForm::Constant(c) => {
                for (b, v) in c.terms() {
                    let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
                    coeffs[0] = Complex64::new(to_f64(v), 0.0);
                    out.insert(*b, coeffs);
                }
            }
            TargetForm::Grid(g) => {
                for (b, v) in g.terms() {
                    out.insert(*b, v.to_frequency());
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityTarget {
    pub t: f64,
    pub rho: TargetForm,
    pub sigma: TargetForm,
}

impl ContinuityTarget {
    pub fn new(t: f64, rho: TargetForm, sigma: TargetForm) -> Result<ContinuityTarget> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CoreError::InvalidParameter {
                name: "t",
                reason: format!("{t} outside [0, 1]"),
            });
        }
        for f in [&rho, &sigma] {
            if f.degree() != 3 {
                return Err(CoreError::DegreeMismatch {
                    expected: 3,
                    found: f.degree(),
                });
            }
        }
        if let (Some(a), Some(b)) = (rho.shape(), sigma.shape()) {
            if a != b {
                return Err(CoreError::InvalidParameter {
                    name: "target",
                    reason: "ρ and σ must share a grid shape".into(),
                });
            }
        }
        Ok(ContinuityTarget { t, rho, sigma })
    }

    pub fn flat(t: f64) -> Result<ContinuityTarget> {
        let s = standard_structures();
        Self::new(t, TargetForm::Constant(s.rho0.clone()), TargetForm::Constant(s.sigma0.clone()))
    }

    /// `(ρ₀ + dd^s(ψσ₀), σ₀ − dd^s(ψρ₀))`, which the fit reaches with `p_t = tψ`.
    pub fn manufactured(t: f64, psi: &GridScalar) -> Result<ContinuityTarget> {
        let s = standard_structures();
        let table = OperatorTable::standard();
        let shape = psi.shape().clone();
        let rho = GridForm::from_const_on(&s.rho0, &shape).plus(&table.potential_symbol(&s.sigma0).apply_grid(psi));
        let sigma =
            GridForm::from_const_on(&s.sigma0, &shape).minus(&table.potential_symbol(&s.rho0).apply_grid(psi));
        Self::new(t, TargetForm::Grid(rho), TargetForm::Grid(sigma))
    }

    /// The pair `(g*ρ₀, g*σ₀)` for a random integer-perturbed linear map `g`:
    /// stable and constant, but different from the flat pair.
    pub fn random_constant(t: f64, seed: u64) -> Result<ContinuityTarget> {
        let s = standard_structures();
        let mut rng = sample_rng(seed, 0);
        loop {
            let g: [[Rational; DIM]; DIM] = std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let base = if i == j { int(1) } else { int(0) };
                    base + rat(rng.random_range(-2..=2), 4)
                })
            });
            let rho = s.rho0.pullback(&g);
            let sigma = s.sigma0.pullback(&g);
            let vol = rho.wedge(&sigma)?.top().cloned().unwrap_or_else(|| int(0));
            if vol != int(0) && (rho != s.rho0 || sigma != s.sigma0) {
                return Self::new(t, TargetForm::Constant(rho), TargetForm::Constant(sigma));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    /// Wavenumbers along the grid axes.
    pub k: Vec<i64>,
    pub residual: f64,
    pub fitted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub axes: Vec<usize>,
    pub cutoff: usize,
    /// Coefficient `q` of `Σ(xⁱ)²` in the ansatz.
    pub quadratic_scale: String,
    pub modes_fitted: usize,
    /// Root-mean-square over the torus of both equation residuals.
    pub residual_l2: f64,
    /// Residual carried by the zero mode, which no periodic correction reaches.
    pub zero_mode_residual: f64,
    /// Largest mode residuals, in decreasing order.
    pub worst_modes: Vec<ModeResidual>,
}

const REPORTED_MODES: usize = 10;

/// Least-squares periodic correction `p_t` (mean zero) using every mode with
/// `max |k| ≤ cutoff`.
pub fn continuity_fit(target: &ContinuityTarget, n: usize, cutoff: usize) -> Result<(GridScalar, ContinuityReport)> {
    let shape = match target.rho.shape().or(target.sigma.shape()) {
        Some(sh) if sh.n() != n => {
            return Err(CoreError::InvalidParameter {
                name: "N",
                reason: format!("target grid has {} nodes per axis, requested {n}", sh.n()),
            })
        }
        Some(sh) => sh,
        None => GridShape::new((0..DIM).collect(), n)?,
    };
    let s = standard_structures();
    let table = OperatorTable::standard();
    let sym_sigma = table.potential_symbol(&s.sigma0);
    let sym_rho = table.potential_symbol(&s.rho0);
    let t = target.t;
    // right-hand sides t(ρ − ρ₀) and −t(σ − σ₀)
    let mut a = target.rho.spectrum(&shape);
    let mut b = target.sigma.spectrum(&shape);
    subtract_constant(&mut a, &s.rho0, shape.len());
    subtract_constant(&mut b, &s.sigma0, shape.len());
    let scale_all = |m: &mut BTreeMap<Blade, Vec<Complex64>>, c: f64| {
        m.values_mut().flat_map(|v| v.iter_mut()).for_each(|z| *z *= c)
    };
    scale_all(&mut a, t);
    scale_all(&mut b, -t);

    let dims = shape.dims();
    let mut p_hat = vec![Complex64::new(0.0, 0.0); shape.len()];
    let mut modes = Vec::with_capacity(shape.len());
    let mut total = 0.0;
    let mut zero_mode = 0.0;
    let mut fitted = 0;
    for idx in 0..shape.len() {
        let multi = spectral::unflatten(idx, n, dims);
        let ks: Vec<i64> = multi.iter().map(|&m| spectral::wavenumber(m, n)).collect();
        let mut k = [0.0; DIM];
        for (pos, &axis) in shape.axes().iter().enumerate() {
            k[axis] = spectral::odd_wavenumber(multi[pos], n);
        }
        let in_band = idx != 0 && ks.iter().all(|v| v.unsigned_abs() as usize <= cutoff);
        let (ss, sr) = (symbol_map(&sym_sigma, &k), symbol_map(&sym_rho, &k));
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        if in_band {
            for (blade, w) in &ss {
                num += a.get(blade).map_or(Complex64::new(0.0, 0.0), |v| v[idx]) * w;
                den += w * w;
            }
            for (blade, w) in &sr {
                num += b.get(blade).map_or(Complex64::new(0.0, 0.0), |v| v[idx]) * w;
                den += w * w;
            }
        }
        let p = if den > 0.0 { num / den } else { Complex64::new(0.0, 0.0) };
        if den > 0.0 {
            fitted += 1;
        }
        p_hat[idx] = p;
        let r = mode_residual(&a, &ss, idx, p) + mode_residual(&b, &sr, idx, p);
        total += r;
        if idx == 0 {
            zero_mode = r.sqrt();
        }
        modes.push(ModeResidual {
            k: ks,
            residual: r.sqrt(),
            fitted: den > 0.0,
        });
    }
    modes.retain(|m| m.residual > 0.0);
    modes.sort_by(|x, y| y.residual.total_cmp(&x.residual).then_with(|| x.k.cmp(&y.k)));
    modes.truncate(REPORTED_MODES);
    let p = GridScalar::from_frequency(shape.clone(), &p_hat);
    let report = ContinuityReport {
        t,
        n,
        axes: shape.axes().to_vec(),
        cutoff,
        quadratic_scale: format_rational(&flat_potential_scale()),
        modes_fitted: fitted,
        residual_l2: total.sqrt(),
        zero_mode_residual: zero_mode,
        worst_modes: modes,
    };
    Ok((p, report))
}

fn subtract_constant(m: &mut BTreeMap<Blade, Vec<Complex64>>, c: &ConstForm, len: usize) {
    for (blade, v) in c.terms() {
        m.entry(*blade).or_insert_with(|| vec![Complex64::new(0.0, 0.0); len])[0] -= to_f64(v);
    }
}

fn symbol_map(sym: &PotentialSymbol, k: &[f64; DIM]) -> BTreeMap<Blade, f64> {
    sym.at_frequency(k).into_iter().filter(|(_, w)| *w != 0.0).collect()
}

/// `Σ_blades |rhs − S p|²` at one mode, summed over every blade present in
/// either the right-hand side or the symbol.
fn mode_residual(rhs: &BTreeMap<Blade, Vec<Complex64>>, sym: &BTreeMap<Blade, f64>, idx: usize, p: Complex64) -> f64 {
    let mut acc = 0.0;
    for (blade, v) in rhs {
        let s = sym.get(blade).copied().unwrap_or(0.0);
        acc += (v[idx] - p * s).norm_sqr();
    }
    for (blade, s) in sym {
        if !rhs.contains_key(blade) {
            acc += (p * s).norm_sqr();
        }
    }
    acc
}

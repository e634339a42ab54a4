//! Differential operators `d`, `d^s`, `dd^s`, `d^c` and the commutator oracle
//! `[Λ, d]` on every coefficient backend.
//!
//! `d^s` on a k-form is `(-1)^{k+1} ⋆ d ⋆`. Because `⋆` has constant
//! coefficients, `d^s a = Σ_J Σ_j ∂_j(a_J) · S_j(J)` for fixed blade maps
//! `S_j`; [`OperatorTable`] caches those maps along with `Λ`.

use std::sync::LazyLock;

use num_traits::{One, Zero};
use rustfft::num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::exterior::scalar::{int, rat, to_f64, Coefficient, Rational};
use crate::exterior::{
    standard_structures, Blade, ConstForm, Form, GridForm, GridScalar, PolyScalar,
    SymplecticStructure, DIM,
};
use crate::spectral;

/// Exterior derivative. On a 6-form the result is the zero 6-form (there is no
/// degree 7).
pub fn d<C: Coefficient>(a: &Form<C>) -> Form<C> {
    if a.degree() == DIM {
        return Form::zero(DIM);
    }
    let mut out = Form::zero(a.degree() + 1);
    for (b, c) in a.terms() {
        for axis in 0..DIM {
            if let Some((sign, nb)) = Blade::axis(axis).wedge(*b) {
                let dc = c.partial(axis);
                if dc.vanishes() {
                    continue;
                }
                out.add_term(nb, if sign < 0 { dc.negated() } else { dc });
            }
        }
    }
    out
}

type BladeMap = Vec<(Blade, Rational)>;

/// Cached blade-to-blade stencils for `d^s` and the `Π`-contraction `Λ`.
#[derive(Clone, Debug)]
pub struct OperatorTable {
    symplectic: SymplecticStructure,
    /// `ds[J][j]`: image of `x^j-derivative` of the `dx^J` coefficient.
    ds: Vec<[BladeMap; DIM]>,
    /// `Λ dx^J`.
    lambda: Vec<BladeMap>,
}

static STANDARD_TABLE: LazyLock<OperatorTable> =
    LazyLock::new(|| OperatorTable::new(standard_structures().symplectic.clone()));

impl OperatorTable {
    pub fn standard() -> &'static OperatorTable {
        &STANDARD_TABLE
    }

    pub fn new(symplectic: SymplecticStructure) -> OperatorTable {
        let ds = Blade::all()
            .map(|j| {
                std::array::from_fn(|axis| {
                    if j.degree() == 0 {
                        return Vec::new();
                    }
                    let k = j.degree();
                    let starred = symplectic.star(&Form::term(j, int(1)));
                    // d acting on a coefficient with derivative only in `axis`
                    let mut dstar = ConstForm::zero(DIM - k + 1);
                    for (b, c) in starred.terms() {
                        if let Some((sign, nb)) = Blade::axis(axis).wedge(*b) {
                            dstar.add_term(nb, c * int(sign as i64));
                        }
                    }
                    let sign = if (k + 1) % 2 == 0 { int(1) } else { int(-1) };
                    symplectic
                        .star(&dstar)
                        .terms()
                        .map(|(b, c)| (*b, c * &sign))
                        .collect()
                })
            })
            .collect();
        let lambda = Blade::all().map(|j| lambda_blade(&symplectic, j)).collect();
        OperatorTable {
            symplectic,
            ds,
            lambda,
        }
    }

    pub fn symplectic(&self) -> &SymplecticStructure {
        &self.symplectic
    }

    pub fn star<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        self.symplectic.star(a)
    }

    /// Table-driven `d^s`. A function maps to the zero function.
    pub fn d_s<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        if a.degree() == 0 {
            return Form::zero(0);
        }
        let mut out = Form::zero(a.degree() - 1);
        for (b, c) in a.terms() {
            for axis in 0..DIM {
                let stencil = &self.ds[b.bits() as usize][axis];
                if stencil.is_empty() {
                    continue;
                }
                let dc = c.partial(axis);
                if dc.vanishes() {
                    continue;
                }
                for (nb, w) in stencil {
                    out.add_term(*nb, dc.scaled(w));
                }
            }
        }
        out
    }

    /// `d^s` straight from its definition `(-1)^{k+1} ⋆ d ⋆`, using the
    /// uncached star.
    pub fn d_s_direct<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        let k = a.degree();
        if k == 0 {
            return Form::zero(0);
        }
        let inner = d(&self.symplectic.star_direct(a));
        let out = self.symplectic.star_direct(&inner);
        if (k + 1) % 2 == 0 {
            out
        } else {
            out.negated()
        }
    }

    pub fn dd_s<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        if a.degree() == 0 {
            return Form::zero(1);
        }
        d(&self.d_s(a))
    }

    /// `dd^s(φ·τ)` for a scalar field `φ` and constant-coefficient form `τ`.
    pub fn dd_s_potential<C: Coefficient>(&self, phi: &C, tau: &ConstForm) -> Form<C> {
        let embedded = Form::embed_const(tau, phi);
        let product = embedded.times_scalar(phi);
        if tau.degree() == 0 {
            return Form::zero(1);
        }
        d(&self.d_s(&product))
    }

    /// Contraction with the Poisson bivector `Π = Σ_{i<j} Π_ij ∂_i ∧ ∂_j`.
    pub fn lambda<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        if a.degree() < 2 {
            return Form::zero(0);
        }
        let mut out = Form::zero(a.degree() - 2);
        for (b, c) in a.terms() {
            for (nb, w) in &self.lambda[b.bits() as usize] {
                out.add_term(*nb, c.scaled(w));
            }
        }
        out
    }

    /// Independent `d^Λ` route: the commutator `Λ d − d Λ`.
    pub fn d_lambda_oracle<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        if a.degree() == 0 {
            return Form::zero(0);
        }
        let first = if a.degree() == DIM {
            Form::zero(DIM - 1)
        } else {
            self.lambda(&d(a))
        };
        let second = if a.degree() >= 2 {
            d(&self.lambda(a))
        } else {
            Form::zero(first.degree())
        };
        first.minus(&second)
    }

    /// Determines the per-degree sign `ε_k` with `d^s = ε_k · (Λd − dΛ)` from
    /// the basis forms `x^i dx^J`, and checks that it is a single sign on all
    /// of them.
    pub fn calibrate_oracle(&self) -> Result<OracleSigns> {
        let mut signs = [0i8; DIM + 1];
        for (k, slot) in signs.iter_mut().enumerate().skip(1) {
            let mut found: Option<i8> = None;
            for j in Blade::of_degree(k) {
                for axis in 0..DIM {
                    let a = Form::term(j, PolyScalar::var(axis));
                    let lhs = self.d_s(&a);
                    let rhs = self.d_lambda_oracle(&a);
                    let candidate = if lhs == rhs {
                        1
                    } else if lhs == rhs.negated() {
                        -1
                    } else {
                        return Err(CoreError::Inconsistent(format!(
                            "d^s and the commutator oracle are not proportional on x{} {j}",
                            axis + 1
                        )));
                    };
                    if lhs.is_zero() {
                        continue;
                    }
                    match found {
                        None => found = Some(candidate),
                        Some(s) if s != candidate => {
                            return Err(CoreError::Inconsistent(format!(
                                "oracle sign flips within degree {k}"
                            )))
                        }
                        _ => {}
                    }
                }
            }
            *slot = found.unwrap_or(1);
        }
        Ok(OracleSigns(signs))
    }

    /// `dd^s(φ τ) = Σ_{a≤b} ∂_a∂_b φ · C_ab(τ)` for constant `τ`.
    pub fn potential_symbol(&self, tau: &ConstForm) -> PotentialSymbol {
        let mut blocks = Vec::new();
        for a in 0..DIM {
            for b in a..DIM {
                let mut e = [0u8; DIM];
                e[a] += 1;
                e[b] += 1;
                // x_a x_b has ∂_a∂_b = 1; x_a²/2 has ∂_a² = 1
                let scale = if a == b { rat(1, 2) } else { Rational::one() };
                let phi = PolyScalar::monomial(e, scale);
                let form = self.dd_s_potential(&phi, tau).convert(|p| {
                    p.as_constant().expect("constant Hessian gives a constant form")
                });
                if !form.is_zero() {
                    blocks.push(((a, b), form));
                }
            }
        }
        PotentialSymbol {
            degree: tau.degree(),
            blocks,
        }
    }
}

fn lambda_blade(s: &SymplecticStructure, j: Blade) -> BladeMap {
    let mut out = ConstForm::zero(j.degree().saturating_sub(2));
    if j.degree() < 2 {
        return Vec::new();
    }
    let base: ConstForm = Form::term(j, int(1));
    for a in 0..DIM {
        for b in a + 1..DIM {
            let w = &s.pi()[a][b];
            if w.is_zero() {
                continue;
            }
            let c = base.contract_axis(a).contract_axis(b);
            out = out.plus(&c.scaled(w));
        }
    }
    out.terms().map(|(b, c)| (*b, c.clone())).collect()
}

/// Calibrated signs relating `d^s` to the commutator oracle, per degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleSigns(pub [i8; DIM + 1]);

impl OracleSigns {
    pub fn sign(&self, degree: usize) -> i8 {
        self.0[degree]
    }

    /// `ε_k · (Λd − dΛ) a`.
    pub fn apply<C: Coefficient>(&self, table: &OperatorTable, a: &Form<C>) -> Form<C> {
        let o = table.d_lambda_oracle(a);
        if self.sign(a.degree()) < 0 {
            o.negated()
        } else {
            o
        }
    }
}

/// Constant 3-forms `C_ab` of the second-order operator `φ ↦ dd^s(φ τ)`.
#[derive(Clone, Debug)]
pub struct PotentialSymbol {
    degree: usize,
    blocks: Vec<((usize, usize), ConstForm)>,
}

impl PotentialSymbol {
    pub fn blocks(&self) -> &[((usize, usize), ConstForm)] {
        &self.blocks
    }

    /// Symbol at frequency `k`: the constant form `-Σ_{a≤b} k_a k_b C_ab`, i.e.
    /// `dd^s(e^{ik·x} τ) = e^{ik·x} · symbol(k)`.
    pub fn at_frequency(&self, k: &[f64; DIM]) -> Vec<(Blade, f64)> {
        let mut acc: std::collections::BTreeMap<Blade, f64> = Default::default();
        for ((a, b), form) in &self.blocks {
            let w = -k[*a] * k[*b];
            if w == 0.0 {
                continue;
            }
            for (blade, c) in form.terms() {
                *acc.entry(*blade).or_insert(0.0) += w * to_f64(c);
            }
        }
        acc.into_iter().collect()
    }

    /// Value on a constant Hessian.
    pub fn at_hessian(&self, h: &[[Rational; DIM]; DIM]) -> ConstForm {
        let mut out = ConstForm::zero(self.degree);
        for ((a, b), form) in &self.blocks {
            if !h[*a][*b].is_zero() {
                out = out.plus(&form.scaled(&h[*a][*b]));
            }
        }
        out
    }

    /// `dd^s(φ τ)` for a grid scalar, evaluated mode by mode.
    pub fn apply_grid(&self, phi: &GridScalar) -> GridForm {
        let shape = phi.shape().clone();
        let n = shape.n();
        let dims = shape.dims();
        let freq = phi.to_frequency();
        let mut out: std::collections::BTreeMap<Blade, Vec<Complex64>> = Default::default();
        for (idx, c) in freq.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let multi = spectral::unflatten(idx, n, dims);
            let mut k = [0.0; DIM];
            for (pos, &axis) in shape.axes().iter().enumerate() {
                k[axis] = spectral::odd_wavenumber(multi[pos], n);
            }
            for (blade, s) in self.at_frequency(&k) {
                out.entry(blade)
                    .or_insert_with(|| vec![Complex64::new(0.0, 0.0); freq.len()])[idx] += c * s;
            }
        }
        let mut form = GridForm::zero(self.degree);
        for (blade, coeffs) in out {
            form.add_term(blade, GridScalar::from_frequency(shape.clone(), &coeffs));
        }
        form
    }
}

/// The flat complex structure on vectors: `J₀∂₁ = ∂₂`, `J₀∂₂ = −∂₁`, and the
/// same on the (3,4) and (5,6) pairs. Returned as `(target axis, sign)`.
pub fn j0_vector(axis: usize) -> (usize, i64) {
    if axis % 2 == 0 {
        (axis + 1, 1)
    } else {
        (axis - 1, -1)
    }
}

/// `d^c φ = (i/2)(∂̄ − ∂)φ = −½ dφ∘J₀`, normalized so that `dd^c = i∂∂̄`.
pub fn d_c<C: Coefficient>(phi: &C) -> Form<C> {
    let half = rat(-1, 2);
    let mut out = Form::zero(1);
    for axis in 0..DIM {
        // (d^cφ)(∂_axis) = -½ dφ(J₀ ∂_axis)
        let (target, sign) = j0_vector(axis);
        let v = phi.partial(target).scaled(&(&half * int(sign)));
        out.add_term(Blade::axis(axis), v);
    }
    out
}

pub fn dd_c<C: Coefficient>(phi: &C) -> Form<C> {
    d(&d_c(phi))
}

/// Free-function forms of the operators on the standard Darboux structure.
pub fn d_s<C: Coefficient>(a: &Form<C>) -> Form<C> {
    OperatorTable::standard().d_s(a)
}

pub fn dd_s<C: Coefficient>(a: &Form<C>) -> Form<C> {
    OperatorTable::standard().dd_s(a)
}

pub fn dd_s_potential<C: Coefficient>(phi: &C, tau: &ConstForm) -> Form<C> {
    OperatorTable::standard().dd_s_potential(phi, tau)
}

pub fn d_lambda_oracle<C: Coefficient>(a: &Form<C>) -> Form<C> {
    OperatorTable::standard().d_lambda_oracle(a)
}

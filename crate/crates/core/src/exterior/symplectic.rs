//! Darboux symplectic structure, the induced pairing on forms and the
//! symplectic Hodge star.
//!
//! The star is defined by `α ∧ ⋆β = (ω⁻¹)^k(α, β) · ω³/3!` for all k-forms α,
//! where the pairing extends the bivector `Π = ω⁻¹` to `Λ^k` by determinants:
//! `(ω⁻¹)^k(dx^I, dx^J) = det Π[I, J]`. The degree-0 pairing is multiplication.

use std::sync::LazyLock;

use num_traits::Zero;

use super::blade::{Blade, DIM};
use super::form::{ComplexForm, ConstForm, Form};
use super::scalar::{int, Coefficient, Rational};
use crate::error::{CoreError, Result};
use crate::linalg::{self, RatMatrix};

#[derive(Clone, Debug)]
pub struct SymplecticStructure {
    omega: ConstForm,
    /// `Π = −ω_matrix⁻¹`, where `ω = ½ Σ ω_ij dx^i ∧ dx^j`. With this sign the
    /// flat potential `Σ(xⁱ)²` gives `dd^s(φΩ₀)` a positive multiple of `iΩ₀`.
    pi: RatMatrix,
    vol: ConstForm,
    /// `⋆ dx^J` for every blade, indexed by bitmask.
    star_table: Vec<Vec<(Blade, Rational)>>,
}

impl SymplecticStructure {
    pub fn from_omega(omega: ConstForm) -> Result<SymplecticStructure> {
        if omega.degree() != 2 {
            return Err(CoreError::DegreeMismatch {
                expected: 2,
                found: omega.degree(),
            });
        }
        let mut w: RatMatrix = vec![vec![Rational::zero(); DIM]; DIM];
        for (b, c) in omega.terms() {
            let ax: Vec<usize> = b.axes().collect();
            w[ax[0]][ax[1]] = c.clone();
            w[ax[1]][ax[0]] = -c.clone();
        }
        let pi: RatMatrix = linalg::inverse(&w)
            .ok_or(CoreError::DegenerateSymplectic)?
            .into_iter()
            .map(|row| row.into_iter().map(|c| -c).collect())
            .collect();
        let cube = omega.wedge(&omega)?.wedge(&omega)?;
        let vol = cube.scaled(&Rational::new(1.into(), 6.into()));
        let mut s = SymplecticStructure {
            omega,
            pi,
            vol,
            star_table: Vec::new(),
        };
        s.star_table = Blade::all().map(|b| s.star_blade_direct(b)).collect();
        Ok(s)
    }

    pub fn omega(&self) -> &ConstForm {
        &self.omega
    }

    pub fn pi(&self) -> &RatMatrix {
        &self.pi
    }

    pub fn vol(&self) -> &ConstForm {
        &self.vol
    }

    fn vol_coeff(&self) -> Rational {
        self.vol.top().cloned().unwrap_or_else(Rational::zero)
    }

    /// `(ω⁻¹)^k(dx^I, dx^J) = det Π[I, J]`.
    pub fn blade_pairing(&self, a: Blade, b: Blade) -> Rational {
        if a.degree() != b.degree() {
            return Rational::zero();
        }
        let rows: Vec<usize> = a.axes().collect();
        let cols: Vec<usize> = b.axes().collect();
        let sub: RatMatrix = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| self.pi[r][c].clone()).collect())
            .collect();
        linalg::det(&sub)
    }

    /// Pairing of two k-forms, bilinear over the coefficient ring.
    /// `None` means the pairing vanishes identically.
    pub fn pairing<C: Coefficient>(&self, a: &Form<C>, b: &Form<C>) -> Result<Option<C>> {
        if a.degree() != b.degree() {
            return Err(CoreError::DegreeMismatch {
                expected: a.degree(),
                found: b.degree(),
            });
        }
        let mut acc: Option<C> = None;
        for (ba, ca) in a.terms() {
            for (bb, cb) in b.terms() {
                let p = self.blade_pairing(*ba, *bb);
                if p.is_zero() {
                    continue;
                }
                let term = ca.times(cb).scaled(&p);
                acc = Some(match acc {
                    Some(x) => x.plus(&term),
                    None => term,
                });
            }
        }
        Ok(acc.filter(|c| !c.vanishes()))
    }

    /// Solves the defining identity for `⋆ dx^J` by testing against every
    /// basis k-form: `dx^I ∧ ⋆dx^J = det Π[I,J] · vol`.
    fn star_blade_direct(&self, j: Blade) -> Vec<(Blade, Rational)> {
        let vol = self.vol_coeff();
        let mut out = Vec::new();
        for i in Blade::of_degree(j.degree()) {
            let p = self.blade_pairing(i, j);
            if p.is_zero() {
                continue;
            }
            let k = i.complement();
            let (sign, _) = i.wedge(k).expect("complement is disjoint");
            // c_K · sign · dx^{top} = p · vol · dx^{top}
            out.push((k, p * &vol * int(sign as i64)));
        }
        out
    }

    /// Table-driven symplectic star.
    pub fn star<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        let mut out = Form::zero(DIM - a.degree());
        for (b, c) in a.terms() {
            for (k, w) in &self.star_table[b.bits() as usize] {
                out.add_term(*k, c.scaled(w));
            }
        }
        out
    }

    /// Same operator computed from the defining identity on every call.
    pub fn star_direct<C: Coefficient>(&self, a: &Form<C>) -> Form<C> {
        let mut out = Form::zero(DIM - a.degree());
        for (b, c) in a.terms() {
            for (k, w) in self.star_blade_direct(*b) {
                out.add_term(k, c.scaled(&w));
            }
        }
        out
    }
}

/// Darboux structure `ω₀ = dx^{12} + dx^{34} + dx^{56}` with the flat stable
/// pair `(ρ₀, σ₀)` and `Ω₀ = (dx¹ + i dx²) ∧ (dx³ + i dx⁴) ∧ (dx⁵ + i dx⁶)`.
#[derive(Clone, Debug)]
pub struct StandardStructures {
    pub symplectic: SymplecticStructure,
    pub rho0: ConstForm,
    pub sigma0: ConstForm,
    pub omega0: ComplexForm<Rational>,
}

fn term(indices: &[usize], c: i64) -> ConstForm {
    ConstForm::monomial(indices, int(c)).expect("valid blade")
}

fn build_standard() -> StandardStructures {
    let omega = term(&[1, 2], 1).plus(&term(&[3, 4], 1)).plus(&term(&[5, 6], 1));
    let symplectic = SymplecticStructure::from_omega(omega).expect("ω₀ is non-degenerate");
    let rho0 = term(&[1, 3, 5], 1)
        .plus(&term(&[2, 4, 5], -1))
        .plus(&term(&[1, 4, 6], -1))
        .plus(&term(&[2, 3, 6], -1));
    let sigma0 = term(&[2, 3, 5], 1)
        .plus(&term(&[1, 4, 5], 1))
        .plus(&term(&[1, 3, 6], 1))
        .plus(&term(&[2, 4, 6], -1));
    let omega0 = ComplexForm::new(rho0.clone(), sigma0.clone()).expect("equal degrees");
    StandardStructures {
        symplectic,
        rho0,
        sigma0,
        omega0,
    }
}

static STANDARD: LazyLock<StandardStructures> = LazyLock::new(build_standard);

pub fn standard_structures() -> &'static StandardStructures {
    &STANDARD
}

/// `Ω₀` recomputed by expanding the product of the three complex coordinate
/// differentials.
pub fn expand_omega0() -> ComplexForm<Rational> {
    let dz = |a: usize, b: usize| {
        ComplexForm::new(term(&[a], 1), term(&[b], 1)).expect("degree 1")
    };
    dz(1, 2)
        .wedge(&dz(3, 4))
        .and_then(|p| p.wedge(&dz(5, 6)))
        .expect("degree 3")
}

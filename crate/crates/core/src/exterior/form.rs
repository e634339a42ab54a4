//! Homogeneous differential forms over any [`Coefficient`] backend.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use super::blade::{Blade, DIM};
use super::grid::{GridScalar, GridShape};
use super::poly::PolyScalar;
use super::scalar::{int, to_f64, Coefficient, Rational};
use super::trig::TrigScalar;
use crate::error::{CoreError, Result};

/// A degree-`k` form `Σ_I c_I dx^I`. Absent blades have zero coefficient.
#[derive(Clone, PartialEq)]
pub struct Form<C> {
    degree: usize,
    terms: BTreeMap<Blade, C>,
}

pub type ConstForm = Form<Rational>;
pub type PolyForm = Form<PolyScalar>;
pub type TrigForm = Form<TrigScalar>;
pub type GridForm = Form<GridScalar>;
pub type FloatForm = Form<f64>;

impl<C: Coefficient> Form<C> {
    pub fn zero(degree: usize) -> Self {
        assert!(degree <= DIM, "form degree {degree} exceeds 6");
        Form {
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn term(blade: Blade, c: C) -> Self {
        let mut f = Self::zero(blade.degree());
        f.add_term(blade, c);
        f
    }

    /// Degree-0 form holding a function.
    pub fn function(f: C) -> Self {
        Self::term(Blade::SCALAR, f)
    }

    pub fn from_terms(degree: usize, terms: impl IntoIterator<Item = (Blade, C)>) -> Result<Self> {
        if degree > DIM {
            return Err(CoreError::DegreeOverflow { left: degree, right: 0 });
        }
        let mut f = Self::zero(degree);
        for (b, c) in terms {
            if b.degree() != degree {
                return Err(CoreError::DegreeMismatch {
                    expected: degree,
                    found: b.degree(),
                });
            }
            f.add_term(b, c);
        }
        Ok(f)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Blade, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, blade: Blade) -> Option<&C> {
        self.terms.get(&blade)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Accumulates `c · dx^blade`, dropping coefficients that cancel.
    pub fn add_term(&mut self, blade: Blade, c: C) {
        assert_eq!(blade.degree(), self.degree, "blade degree mismatch");
        if c.vanishes() {
            return;
        }
        let sum = match self.terms.remove(&blade) {
            Some(old) => old.plus(&c),
            None => c,
        };
        if !sum.vanishes() {
            self.terms.insert(blade, sum);
        }
    }

    pub fn plus(&self, rhs: &Self) -> Self {
        assert_eq!(self.degree, rhs.degree, "cannot add forms of different degree");
        let mut out = self.clone();
        for (b, c) in &rhs.terms {
            out.add_term(*b, c.clone());
        }
        out
    }

    pub fn minus(&self, rhs: &Self) -> Self {
        self.plus(&rhs.negated())
    }

    pub fn negated(&self) -> Self {
        self.map_coeffs(|c| c.negated())
    }

    pub fn scaled(&self, r: &Rational) -> Self {
        self.map_coeffs(|c| c.scaled(r))
    }

    /// Multiplies every coefficient by the scalar field `f`.
    pub fn times_scalar(&self, f: &C) -> Self {
        self.map_coeffs(|c| f.times(c))
    }

    pub fn map_coeffs(&self, f: impl Fn(&C) -> C) -> Self {
        let mut out = Self::zero(self.degree);
        for (b, c) in &self.terms {
            out.add_term(*b, f(c));
        }
        out
    }

    /// Converts coefficients into another backend.
    pub fn convert<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> Form<D> {
        let mut out = Form::<D>::zero(self.degree);
        for (b, c) in &self.terms {
            out.add_term(*b, f(c));
        }
        out
    }

    pub fn wedge(&self, rhs: &Self) -> Result<Self> {
        let degree = self.degree + rhs.degree;
        if degree > DIM {
            return Err(CoreError::DegreeOverflow {
                left: self.degree,
                right: rhs.degree,
            });
        }
        let mut out = Self::zero(degree);
        for (ba, ca) in &self.terms {
            for (bb, cb) in &rhs.terms {
                if let Some((sign, b)) = ba.wedge(*bb) {
                    let prod = ca.times(cb);
                    out.add_term(b, if sign < 0 { prod.negated() } else { prod });
                }
            }
        }
        Ok(out)
    }

    /// `ι_{∂_{axis}}` applied to the form.
    pub fn contract_axis(&self, axis: usize) -> Self {
        if self.degree == 0 {
            return Self::zero(0);
        }
        let mut out = Self::zero(self.degree - 1);
        for (b, c) in &self.terms {
            if let Some((sign, rest)) = b.contract(axis) {
                out.add_term(rest, if sign < 0 { c.negated() } else { c.clone() });
            }
        }
        out
    }

    /// Contraction with a constant vector `Σ v_i ∂_i`.
    pub fn contract_vector(&self, v: &[Rational; DIM]) -> Self {
        let mut out = Self::zero(self.degree.saturating_sub(1));
        for (i, vi) in v.iter().enumerate() {
            if !vi.is_zero() {
                out = out.plus(&self.contract_axis(i).scaled(vi));
            }
        }
        out
    }

    /// Contraction with a multivector: on a decomposable `ξ = v₁∧…∧v_j`
    /// this is `a(v₁, …, v_j, ·)`.
    pub fn contract(&self, xi: &Multivector) -> Result<Self> {
        if xi.degree > self.degree {
            return Err(CoreError::DegreeMismatch {
                expected: self.degree,
                found: xi.degree,
            });
        }
        let mut out = Self::zero(self.degree - xi.degree);
        for (blade, w) in &xi.terms {
            let mut part = self.clone();
            for axis in blade.axes() {
                part = part.contract_axis(axis);
            }
            out = out.plus(&part.scaled(w));
        }
        Ok(out)
    }

    /// Pullback by the constant linear map `dx^i ↦ Σ_j g[i][j] dx^j`.
    pub fn pullback(&self, g: &[[Rational; DIM]; DIM]) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let images: Vec<Form<C>> = (0..DIM)
            .map(|i| {
                let mut f = Form::<C>::zero(1);
                for (j, gij) in g[i].iter().enumerate() {
                    if !gij.is_zero() {
                        f.terms.insert(Blade::axis(j), self.unit_like().scaled(gij));
                    }
                }
                f
            })
            .collect();
        let mut out = Self::zero(self.degree);
        for (b, c) in &self.terms {
            let mut acc = Form::function(c.clone());
            for axis in b.axes() {
                acc = acc.wedge(&images[axis]).expect("degree within bounds");
            }
            out = out.plus(&acc);
        }
        out
    }

    fn unit_like(&self) -> C {
        let sample = self
            .terms
            .values()
            .next()
            .expect("pullback of a nonzero form");
        sample.constant_like(&Rational::one())
    }

    /// Coefficient of the top blade `dx^{123456}` for a 6-form.
    pub fn top(&self) -> Option<&C> {
        self.terms.get(&Blade::TOP)
    }

    /// Embeds a constant form alongside `like` (needed for grids, which carry a shape).
    pub fn embed_const(c: &ConstForm, like: &C) -> Self {
        c.convert(|r| like.constant_like(r))
    }
}

impl<C: Coefficient + From<Rational>> Form<C> {
    pub fn from_const(c: &ConstForm) -> Self {
        c.convert(|r| C::from(r.clone()))
    }
}

impl ConstForm {
    pub fn to_f64(&self) -> FloatForm {
        self.convert(to_f64)
    }

    pub fn monomial(indices: &[usize], c: Rational) -> Result<ConstForm> {
        let b = Blade::from_indices(indices)?;
        Ok(Form::term(b, c))
    }
}

impl GridForm {
    pub fn from_const_on(c: &ConstForm, shape: &GridShape) -> GridForm {
        c.convert(|r| GridScalar::filled(shape.clone(), to_f64(r)))
    }

    pub fn max_abs_diff(&self, rhs: &GridForm) -> f64 {
        let mut worst: f64 = 0.0;
        for b in Blade::of_degree(self.degree) {
            match (self.coeff(b), rhs.coeff(b)) {
                (Some(a), Some(c)) => worst = worst.max(a.max_abs_diff(c)),
                (Some(a), None) | (None, Some(a)) => worst = worst.max(a.max_abs()),
                (None, None) => {}
            }
        }
        worst
    }
}

impl FloatForm {
    /// `a(v₁, …, v_k)` for vectors given in coordinates: `Σ_I c_I det(v[I])`.
    pub fn eval_on(&self, vectors: &[[f64; DIM]]) -> f64 {
        assert_eq!(vectors.len(), self.degree, "need one vector per slot");
        self.terms
            .iter()
            .map(|(b, c)| {
                let idx: Vec<usize> = b.axes().collect();
                c * minor(vectors, &idx)
            })
            .sum()
    }

    pub fn max_abs_diff(&self, rhs: &FloatForm) -> f64 {
        Blade::of_degree(self.degree)
            .map(|b| {
                let a = self.coeff(b).copied().unwrap_or(0.0);
                let c = rhs.coeff(b).copied().unwrap_or(0.0);
                (a - c).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Dense coefficient vector over the blades of this degree (bitmask order).
    pub fn dense(&self) -> Vec<f64> {
        Blade::of_degree(self.degree)
            .map(|b| self.coeff(b).copied().unwrap_or(0.0))
            .collect()
    }
}

impl PolyForm {
    /// Evaluates every coefficient at a point.
    pub fn at(&self, x: &[f64; DIM]) -> FloatForm {
        self.convert(|p| p.eval_f64(x))
    }
}

impl TrigForm {
    pub fn sample(&self, shape: &GridShape) -> GridForm {
        self.convert(|t| t.sample(shape))
    }
}

/// Determinant of the `k × k` matrix `vectors[a][idx[b]]`.
fn minor(vectors: &[[f64; DIM]], idx: &[usize]) -> f64 {
    let k = idx.len();
    let mut m: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| idx.iter().map(|&i| v[i]).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..k {
            let factor = m[row][col] / m[col][col];
            for c in col..k {
                m[row][c] -= factor * m[col][c];
            }
        }
    }
    det
}

impl<C: Coefficient + fmt::Display> fmt::Display for Form<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(b, c)| format!("({c}) {b}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl<C: fmt::Debug> fmt::Debug for Form<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Form")
            .field("degree", &self.degree)
            .field("terms", &self.terms)
            .finish()
    }
}

/// Constant multivector `Σ ξ_I ∂_I` (contravariant counterpart of a blade map).
#[derive(Clone, Debug, PartialEq)]
pub struct Multivector {
    degree: usize,
    terms: BTreeMap<Blade, Rational>,
}

impl Multivector {
    pub fn basis(indices: &[usize]) -> Result<Multivector> {
        let b = Blade::from_indices(indices)?;
        Ok(Multivector {
            degree: b.degree(),
            terms: BTreeMap::from([(b, Rational::one())]),
        })
    }

    /// `v₁ ∧ … ∧ v_j` for exact vectors.
    pub fn decomposable(vectors: &[[Rational; DIM]]) -> Multivector {
        let mut terms: BTreeMap<Blade, Rational> = BTreeMap::from([(Blade::SCALAR, Rational::one())]);
        for v in vectors {
            let mut next = BTreeMap::new();
            for (b, w) in &terms {
                for (i, vi) in v.iter().enumerate() {
                    if vi.is_zero() {
                        continue;
                    }
                    if let Some((sign, nb)) = b.wedge(Blade::axis(i)) {
                        let e: &mut Rational = next.entry(nb).or_insert_with(Rational::zero);
                        *e += w * vi * int(sign as i64);
                    }
                }
            }
            next.retain(|_, w: &mut Rational| !w.is_zero());
            terms = next;
        }
        Multivector {
            degree: vectors.len(),
            terms,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

/// `re + i·im` with both parts of the same degree.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexForm<C> {
    pub re: Form<C>,
    pub im: Form<C>,
}

impl<C: Coefficient> ComplexForm<C> {
    pub fn new(re: Form<C>, im: Form<C>) -> Result<Self> {
        if re.degree() != im.degree() {
            return Err(CoreError::DegreeMismatch {
                expected: re.degree(),
                found: im.degree(),
            });
        }
        Ok(ComplexForm { re, im })
    }

    pub fn real(re: Form<C>) -> Self {
        let im = Form::zero(re.degree());
        ComplexForm { re, im }
    }

    pub fn degree(&self) -> usize {
        self.re.degree()
    }

    pub fn conj(&self) -> Self {
        ComplexForm {
            re: self.re.clone(),
            im: self.im.negated(),
        }
    }

    /// Multiplication by `i`.
    pub fn times_i(&self) -> Self {
        ComplexForm {
            re: self.im.negated(),
            im: self.re.clone(),
        }
    }

    pub fn plus(&self, rhs: &Self) -> Self {
        ComplexForm {
            re: self.re.plus(&rhs.re),
            im: self.im.plus(&rhs.im),
        }
    }

    pub fn minus(&self, rhs: &Self) -> Self {
        ComplexForm {
            re: self.re.minus(&rhs.re),
            im: self.im.minus(&rhs.im),
        }
    }

    pub fn scaled(&self, r: &Rational) -> Self {
        ComplexForm {
            re: self.re.scaled(r),
            im: self.im.scaled(r),
        }
    }

    pub fn times_scalar(&self, f: &C) -> Self {
        ComplexForm {
            re: self.re.times_scalar(f),
            im: self.im.times_scalar(f),
        }
    }

    pub fn map_parts(&self, f: impl Fn(&Form<C>) -> Form<C>) -> Self {
        ComplexForm {
            re: f(&self.re),
            im: f(&self.im),
        }
    }

    pub fn wedge(&self, rhs: &Self) -> Result<Self> {
        let rr = self.re.wedge(&rhs.re)?;
        let ii = self.im.wedge(&rhs.im)?;
        let ri = self.re.wedge(&rhs.im)?;
        let ir = self.im.wedge(&rhs.re)?;
        Ok(ComplexForm {
            re: rr.minus(&ii),
            im: ri.plus(&ir),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::scalar::rat;

    fn c(indices: &[usize], v: i64) -> ConstForm {
        ConstForm::monomial(indices, int(v)).unwrap()
    }

    #[test]
    fn dx1_wedge_dx2() {
        assert_eq!(c(&[1], 1).wedge(&c(&[2], 1)).unwrap(), c(&[1, 2], 1));
        assert_eq!(c(&[2], 1).wedge(&c(&[1], 1)).unwrap(), c(&[1, 2], -1));
    }

    #[test]
    fn wedge_overflow_is_an_error() {
        let a = c(&[1, 2, 3, 4], 1);
        let b = c(&[1, 5, 6], 1);
        assert!(matches!(a.wedge(&b), Err(CoreError::DegreeOverflow { .. })));
    }

    #[test]
    fn interior_of_dx12() {
        let f = c(&[1, 2], 1);
        let xi = Multivector::basis(&[1]).unwrap();
        assert_eq!(f.contract(&xi).unwrap(), c(&[2], 1));
        let too_big = Multivector::basis(&[1, 2, 3]).unwrap();
        assert!(f.contract(&too_big).is_err());
    }

    #[test]
    fn decomposable_multivector_matches_basis() {
        let e = |i: usize| -> [Rational; DIM] {
            std::array::from_fn(|j| if j == i { int(1) } else { int(0) })
        };
        let xi = Multivector::decomposable(&[e(0), e(2), e(4)]);
        assert_eq!(xi, Multivector::basis(&[1, 3, 5]).unwrap());
        // swapping two vectors flips the orientation
        let swapped = Multivector::decomposable(&[e(2), e(0), e(4)]);
        let f = c(&[1, 3, 5], 1);
        assert_eq!(f.contract(&swapped).unwrap(), Form::function(int(-1)));
    }

    #[test]
    fn float_evaluation_uses_minors() {
        let f = c(&[1, 2], 3).to_f64();
        let v = [[1.0, 2.0, 0.0, 0.0, 0.0, 0.0], [0.5, -1.0, 7.0, 0.0, 0.0, 0.0]];
        assert!((f.eval_on(&v) - 3.0 * (1.0 * -1.0 - 2.0 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn pullback_of_dx12_by_shear() {
        // dx^1 -> dx^1 + dx^2, others fixed: dx^12 unchanged
        let mut g: [[Rational; DIM]; DIM] =
            std::array::from_fn(|i| std::array::from_fn(|j| if i == j { int(1) } else { int(0) }));
        g[0][1] = int(1);
        assert_eq!(c(&[1, 2], 1).pullback(&g), c(&[1, 2], 1));
        g[0][1] = int(0);
        g[0][0] = rat(1, 2);
        assert_eq!(c(&[1, 3], 1).pullback(&g), c(&[1, 3], 1).scaled(&rat(1, 2)));
    }
}

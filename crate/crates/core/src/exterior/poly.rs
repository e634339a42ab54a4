//! Sparse multivariate polynomials in `x^1..x^6` with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::blade::DIM;
use super::scalar::{format_rational, int, to_f64, Coefficient, Rational};

/// Exponent vector `[e1, .., e6]` of the monomial `Π (x^i)^{e_i}`.
pub type Exponents = [u8; DIM];

/// Canonical sparse polynomial: the map is ordered and never stores zeros,
/// so derived equality is structural equality.
#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct PolyScalar {
    terms: BTreeMap<Exponents, Rational>,
}

impl PolyScalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial([0; DIM], c)
    }

    pub fn monomial(exponents: Exponents, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(exponents, c);
        p
    }

    /// The coordinate function `x^{axis+1}`.
    pub fn var(axis: usize) -> Self {
        let mut e = [0; DIM];
        e[axis] = 1;
        Self::monomial(e, Rational::one())
    }

    /// `Σ_i (x^i)^2`.
    pub fn sum_of_squares() -> Self {
        (0..DIM).fold(Self::zero(), |acc, i| acc + Self::var(i) * Self::var(i))
    }

    /// `½ xᵀ H x` for a symmetric rational matrix `H`.
    pub fn quadratic(h: &[[Rational; DIM]; DIM]) -> Self {
        let half = Rational::new(1.into(), 2.into());
        let mut p = Self::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                let mut e = [0u8; DIM];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, &h[i][j] * &half);
            }
        }
        p
    }

    pub fn add_term(&mut self, exponents: Exponents, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exponents).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&exponents);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().map(|&x| x as u32).sum()).max()
    }

    /// Constant coefficient.
    pub fn constant_term(&self) -> Rational {
        self.terms.get(&[0; DIM]).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&[0; DIM]).cloned(),
            _ => None,
        }
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut e2 = *e;
            e2[axis] -= 1;
            out.add_term(e2, c * int(e[axis] as i64));
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    pub fn eval(&self, x: &[Rational; DIM]) -> Rational {
        let mut total = Rational::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for i in 0..DIM {
                for _ in 0..e[i] {
                    m *= &x[i];
                }
            }
            total += m;
        }
        total
    }

    pub fn eval_f64(&self, x: &[f64; DIM]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mono: f64 = (0..DIM).map(|i| x[i].powi(e[i] as i32)).product();
                to_f64(c) * mono
            })
            .sum()
    }

    /// Matrix of second partials `∂²/∂x^i∂x^j`.
    pub fn hessian(&self) -> [[PolyScalar; DIM]; DIM] {
        let first: Vec<PolyScalar> = (0..DIM).map(|i| self.derivative(i)).collect();
        std::array::from_fn(|i| std::array::from_fn(|j| first[i].derivative(j)))
    }

    /// Degree at most one.
    pub fn is_affine(&self) -> bool {
        self.total_degree().is_none_or(|d| d <= 1)
    }
}

impl fmt::Debug for PolyScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PolyScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", format_rational(c))?;
            for (i, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "·x{}", i + 1)?,
                    _ => write!(f, "·x{}^{}", i + 1, p)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for PolyScalar {
    type Output = PolyScalar;
    fn add(mut self, rhs: PolyScalar) -> PolyScalar {
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl Sub for PolyScalar {
    type Output = PolyScalar;
    fn sub(self, rhs: PolyScalar) -> PolyScalar {
        self + (-rhs)
    }
}

impl Neg for PolyScalar {
    type Output = PolyScalar;
    fn neg(self) -> PolyScalar {
        PolyScalar {
            terms: self.terms.into_iter().map(|(e, c)| (e, -c)).collect(),
        }
    }
}

impl Mul for PolyScalar {
    type Output = PolyScalar;
    fn mul(self, rhs: PolyScalar) -> PolyScalar {
        &self * &rhs
    }
}

impl Mul<&PolyScalar> for &PolyScalar {
    type Output = PolyScalar;
    fn mul(self, rhs: &PolyScalar) -> PolyScalar {
        let mut out = PolyScalar::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Exponents = std::array::from_fn(|i| ea[i] + eb[i]);
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl From<Rational> for PolyScalar {
    fn from(c: Rational) -> Self {
        PolyScalar::constant(c)
    }
}

impl Coefficient for PolyScalar {
    fn vanishes(&self) -> bool {
        self.terms.is_empty()
    }
    fn plus(&self, rhs: &Self) -> Self {
        self.clone() + rhs.clone()
    }
    fn negated(&self) -> Self {
        -self.clone()
    }
    fn scaled(&self, c: &Rational) -> Self {
        self.scale(c)
    }
    fn times(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn partial(&self, axis: usize) -> Self {
        self.derivative(axis)
    }
    fn constant_like(&self, c: &Rational) -> Self {
        PolyScalar::constant(c.clone())
    }
}

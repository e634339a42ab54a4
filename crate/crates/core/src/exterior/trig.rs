//! Exact trigonometric polynomials `Σ_k c_k e^{i k·x}` with complex rational
//! coefficients, so periodic inputs have an exact counterpart to the grid engine.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::blade::DIM;
use super::grid::{GridScalar, GridShape};
use super::scalar::{int, rat, to_f64, Coefficient, Rational};

pub type Frequency = [i32; DIM];

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TrigScalar {
    /// frequency -> (re, im) of the coefficient of `e^{i k·x}`
    terms: BTreeMap<Frequency, (Rational, Rational)>,
}

fn neg_freq(k: &Frequency) -> Frequency {
    std::array::from_fn(|i| -k[i])
}

impl TrigScalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut t = Self::zero();
        t.add_term([0; DIM], c, Rational::zero());
        t
    }

    /// `a · cos(k·x)`.
    pub fn cos(k: Frequency, a: Rational) -> Self {
        Self::cos_sin(k, a, Rational::zero())
    }

    /// `b · sin(k·x)`.
    pub fn sin(k: Frequency, b: Rational) -> Self {
        Self::cos_sin(k, Rational::zero(), b)
    }

    /// `a cos(k·x) + b sin(k·x)`.
    pub fn cos_sin(k: Frequency, a: Rational, b: Rational) -> Self {
        let mut t = Self::zero();
        if k == [0; DIM] {
            t.add_term(k, a, Rational::zero());
            return t;
        }
        let half = rat(1, 2);
        // a cos = a/2 (e^{ikx} + e^{-ikx}),  b sin = -ib/2 e^{ikx} + ib/2 e^{-ikx}
        t.add_term(k, &a * &half, -(&b * &half));
        t.add_term(neg_freq(&k), &a * &half, &b * &half);
        t
    }

    pub fn add_term(&mut self, k: Frequency, re: Rational, im: Rational) {
        if re.is_zero() && im.is_zero() {
            return;
        }
        let e = self
            .terms
            .entry(k)
            .or_insert_with(|| (Rational::zero(), Rational::zero()));
        e.0 += re;
        e.1 += im;
        if e.0.is_zero() && e.1.is_zero() {
            self.terms.remove(&k);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Frequency, &(Rational, Rational))> {
        self.terms.iter()
    }

    /// Real-valued iff `c_{-k} = conj(c_k)` for every stored frequency.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(k, (re, im))| {
            match self.terms.get(&neg_freq(k)) {
                Some((re2, im2)) => re == re2 && *im == -im2.clone(),
                None => false,
            }
        })
    }

    /// Largest `|k_i|` over all terms.
    pub fn bandwidth(&self) -> i32 {
        self.terms
            .keys()
            .flat_map(|k| k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Real part of the series at `x`.
    pub fn eval_f64(&self, x: &[f64; DIM]) -> f64 {
        self.terms
            .iter()
            .map(|(k, (re, im))| {
                let phase: f64 = (0..DIM).map(|i| k[i] as f64 * x[i]).sum();
                to_f64(re) * phase.cos() - to_f64(im) * phase.sin()
            })
            .sum()
    }

    /// Samples the real part on the nodes of `shape`; coordinates outside the
    /// grid axes are held at zero.
    pub fn sample(&self, shape: &GridShape) -> GridScalar {
        GridScalar::sample(shape.clone(), |x| self.eval_f64(x))
    }

    /// Mean over the torus `[0, 2π)^6` (the zero-frequency coefficient).
    pub fn torus_mean(&self) -> Rational {
        self.terms
            .get(&[0; DIM])
            .map(|c| c.0.clone())
            .unwrap_or_else(Rational::zero)
    }
}

impl From<Rational> for TrigScalar {
    fn from(c: Rational) -> Self {
        TrigScalar::constant(c)
    }
}

impl Coefficient for TrigScalar {
    fn vanishes(&self) -> bool {
        self.terms.is_empty()
    }
    fn plus(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (k, (re, im)) in &rhs.terms {
            out.add_term(*k, re.clone(), im.clone());
        }
        out
    }
    fn negated(&self) -> Self {
        TrigScalar {
            terms: self
                .terms
                .iter()
                .map(|(k, (re, im))| (*k, (-re.clone(), -im.clone())))
                .collect(),
        }
    }
    fn scaled(&self, c: &Rational) -> Self {
        let mut out = TrigScalar::zero();
        for (k, (re, im)) in &self.terms {
            out.add_term(*k, re * c, im * c);
        }
        out
    }
    fn times(&self, rhs: &Self) -> Self {
        let mut out = TrigScalar::zero();
        for (ka, (ra, ia)) in &self.terms {
            for (kb, (rb, ib)) in &rhs.terms {
                let k: Frequency = std::array::from_fn(|i| ka[i] + kb[i]);
                out.add_term(k, ra * rb - ia * ib, ra * ib + ia * rb);
            }
        }
        out
    }
    fn partial(&self, axis: usize) -> Self {
        // (re + i im) · i k = -im k + i re k
        let mut out = TrigScalar::zero();
        for (k, (re, im)) in &self.terms {
            let kk = int(k[axis] as i64);
            out.add_term(*k, -(im * &kk), re * &kk);
        }
        out
    }
    fn constant_like(&self, c: &Rational) -> Self {
        TrigScalar::constant(c.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k13() -> Frequency {
        [1, 0, 1, 0, 0, 0]
    }

    #[test]
    fn cos_derivative_is_minus_sin() {
        let c = TrigScalar::cos(k13(), int(1));
        assert_eq!(c.partial(0), TrigScalar::sin(k13(), int(-1)));
        assert!(c.is_real());
        assert!(c.partial(0).is_real());
    }

    #[test]
    fn product_to_sum_identity() {
        // sin(x1) sin(x3) = (cos(x1 - x3) - cos(x1 + x3)) / 2
        let s1 = TrigScalar::sin([1, 0, 0, 0, 0, 0], int(1));
        let s3 = TrigScalar::sin([0, 0, 1, 0, 0, 0], int(1));
        let lhs = s1.times(&s3);
        let rhs = TrigScalar::cos([1, 0, -1, 0, 0, 0], rat(1, 2))
            .plus(&TrigScalar::cos(k13(), rat(-1, 2)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn eval_matches_closed_form() {
        let t = TrigScalar::cos_sin(k13(), rat(1, 3), rat(-2, 5));
        let x = [0.3, 1.1, -0.7, 0.0, 2.0, 0.4];
        let phase: f64 = x[0] + x[2];
        let expect = phase.cos() / 3.0 - 0.4 * phase.sin();
        assert!((t.eval_f64(&x) - expect).abs() < 1e-14);
    }
}

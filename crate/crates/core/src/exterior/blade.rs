//! Basis monomials `dx^I` for strictly increasing index sets `I ⊆ {1..6}`.

use std::fmt;

use crate::error::{CoreError, Result};

pub const DIM: usize = 6;

/// A strictly increasing subset of `{1..6}`, stored as a bitmask (bit `i` is `x^{i+1}`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Blade(u8);

impl Blade {
    pub const SCALAR: Blade = Blade(0);
    pub const TOP: Blade = Blade(0b11_1111);

    pub fn from_bits(bits: u8) -> Blade {
        Blade(bits & 0b11_1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Builds a blade from 1-based indices, which must be strictly increasing.
    pub fn from_indices(indices: &[usize]) -> Result<Blade> {
        let mut bits = 0u8;
        let mut last = 0usize;
        for &i in indices {
            if !(1..=DIM).contains(&i) {
                return Err(CoreError::BadIndex(i));
            }
            if i <= last {
                return Err(CoreError::BadBlade(indices.to_vec()));
            }
            last = i;
            bits |= 1 << (i - 1);
        }
        Ok(Blade(bits))
    }

    /// Single differential `dx^{axis+1}`.
    pub fn axis(axis: usize) -> Blade {
        debug_assert!(axis < DIM);
        Blade(1 << axis)
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    /// 0-based axes in increasing order.
    pub fn axes(self) -> impl Iterator<Item = usize> {
        (0..DIM).filter(move |&i| self.0 & (1 << i) != 0)
    }

    /// 1-based indices, as they appear in `dx^{135}`.
    pub fn indices(self) -> Vec<usize> {
        self.axes().map(|i| i + 1).collect()
    }

    pub fn complement(self) -> Blade {
        Blade(!self.0 & 0b11_1111)
    }

    /// `dx^I ∧ dx^J = sign · dx^{I∪J}`, or `None` when the sets overlap.
    pub fn wedge(self, other: Blade) -> Option<(i32, Blade)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        // each pair (i in self, j in other) with i > j costs one transposition
        let mut swaps = 0u32;
        for j in other.axes() {
            swaps += (self.0 >> (j + 1)).count_ones();
        }
        let sign = if swaps % 2 == 0 { 1 } else { -1 };
        Some((sign, Blade(self.0 | other.0)))
    }

    /// `ι_{∂_{axis}} dx^I = sign · dx^{I \ axis}`, or `None` when `axis ∉ I`.
    pub fn contract(self, axis: usize) -> Option<(i32, Blade)> {
        if !self.contains(axis) {
            return None;
        }
        let before = (self.0 & ((1u8 << axis) - 1)).count_ones();
        let sign = if before % 2 == 0 { 1 } else { -1 };
        Some((sign, Blade(self.0 & !(1 << axis))))
    }

    /// All blades of a given degree, in increasing bitmask order.
    pub fn of_degree(degree: usize) -> impl Iterator<Item = Blade> {
        (0u8..64).map(Blade).filter(move |b| b.degree() == degree)
    }

    pub fn all() -> impl Iterator<Item = Blade> {
        (0u8..64).map(Blade)
    }
}

impl fmt::Debug for Blade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Blade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return write!(f, "1");
        }
        write!(f, "dx^")?;
        for i in self.indices() {
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_per_degree() {
        let mut total = 0;
        for k in 0..=DIM {
            let n = Blade::of_degree(k).count();
            assert_eq!(n, binomial(6, k));
            total += n;
        }
        assert_eq!(total, 64);
    }

    #[test]
    fn wedge_signs() {
        let d1 = Blade::axis(0);
        let d2 = Blade::axis(1);
        assert_eq!(d1.wedge(d2), Some((1, Blade::from_indices(&[1, 2]).unwrap())));
        assert_eq!(d2.wedge(d1), Some((-1, Blade::from_indices(&[1, 2]).unwrap())));
        assert_eq!(d1.wedge(d1), None);
        let b245 = Blade::from_indices(&[2, 4, 5]).unwrap();
        let b136 = Blade::from_indices(&[1, 3, 6]).unwrap();
        // 245|136 -> 123456 needs 1 past {2,4,5} (3), 3 past {4,5} (2), 6 past none
        assert_eq!(b245.wedge(b136), Some((-1, Blade::TOP)));
    }

    #[test]
    fn contraction_signs() {
        let b12 = Blade::from_indices(&[1, 2]).unwrap();
        assert_eq!(b12.contract(0), Some((1, Blade::axis(1))));
        assert_eq!(b12.contract(1), Some((-1, Blade::axis(0))));
        assert_eq!(b12.contract(2), None);
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(Blade::from_indices(&[0]).is_err());
        assert!(Blade::from_indices(&[7]).is_err());
        assert!(Blade::from_indices(&[3, 2]).is_err());
        assert!(Blade::from_indices(&[2, 2]).is_err());
    }

    #[test]
    fn display() {
        assert_eq!(Blade::from_indices(&[1, 3, 5]).unwrap().to_string(), "dx^135");
        assert_eq!(Blade::SCALAR.to_string(), "1");
    }
}

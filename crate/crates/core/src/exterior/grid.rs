//! Periodic sampled coefficients on uniform torus grids.
//!
//! A grid covers a subset of the six coordinate axes, each with the same
//! number of nodes `N` at `x_m = 2πm/N`. Coordinates outside the grid axes are
//! treated as irrelevant: derivatives along them vanish. Mixing grids of
//! different shapes is a programming error and panics, as with array shapes.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::blade::DIM;
use super::scalar::{to_f64, Coefficient, Rational};
use crate::error::{CoreError, Result};
use crate::spectral;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    axes: Vec<usize>,
    n: usize,
}

impl GridShape {
    /// `axes` are 0-based coordinate indices.
    pub fn new(mut axes: Vec<usize>, n: usize) -> Result<GridShape> {
        axes.sort_unstable();
        axes.dedup();
        if axes.iter().any(|&a| a >= DIM) {
            return Err(CoreError::InvalidParameter {
                name: "axes",
                reason: format!("{axes:?} outside 0..6"),
            });
        }
        if n < 2 {
            return Err(CoreError::InvalidParameter {
                name: "N",
                reason: format!("need at least 2 nodes per axis, got {n}"),
            });
        }
        Ok(GridShape { axes, n })
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.axes.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Position of coordinate axis `axis` inside the grid, if covered.
    pub fn position(&self, axis: usize) -> Option<usize> {
        self.axes.iter().position(|&a| a == axis)
    }

    /// Multi-index (one entry per grid axis) of flat node `idx`.
    pub fn node_index(&self, idx: usize) -> Vec<usize> {
        spectral::unflatten(idx, self.n, self.dims())
    }

    /// Physical coordinates of flat node `idx` (zero on uncovered axes).
    pub fn node(&self, idx: usize) -> [f64; DIM] {
        let multi = self.node_index(idx);
        let mut x = [0.0; DIM];
        for (pos, &axis) in self.axes.iter().enumerate() {
            x[axis] = multi[pos] as f64 * self.spacing();
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridScalar {
    shape: GridShape,
    data: Vec<f64>,
}

impl GridScalar {
    pub fn new(shape: GridShape, data: Vec<f64>) -> Result<GridScalar> {
        if data.len() != shape.len() {
            return Err(CoreError::InvalidParameter {
                name: "data",
                reason: format!("expected {} samples, got {}", shape.len(), data.len()),
            });
        }
        Ok(GridScalar { shape, data })
    }

    pub fn filled(shape: GridShape, value: f64) -> GridScalar {
        let len = shape.len();
        GridScalar {
            shape,
            data: vec![value; len],
        }
    }

    pub fn sample(shape: GridShape, f: impl Fn(&[f64; DIM]) -> f64) -> GridScalar {
        let data = (0..shape.len()).map(|i| f(&shape.node(i))).collect();
        GridScalar { shape, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridScalar {
        GridScalar {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, rhs: &GridScalar, f: impl Fn(f64, f64) -> f64) -> GridScalar {
        assert_eq!(self.shape, rhs.shape, "grid shape mismatch");
        GridScalar {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Nodal -> normalized Fourier coefficients (bin 0 is the mean).
    pub fn to_frequency(&self) -> Vec<Complex64> {
        spectral::forward(&self.data, self.shape.n, self.shape.dims())
    }

    pub fn from_frequency(shape: GridShape, freq: &[Complex64]) -> GridScalar {
        let data = spectral::inverse(freq, shape.n, shape.dims());
        GridScalar { shape, data }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, rhs: &GridScalar) -> f64 {
        self.zip_with(rhs, |a, b| a - b).max_abs()
    }

    /// Spectral derivative along coordinate `axis`.
    pub fn spectral_derivative(&self, axis: usize) -> GridScalar {
        let Some(pos) = self.shape.position(axis) else {
            return GridScalar::filled(self.shape.clone(), 0.0);
        };
        let n = self.shape.n;
        let dims = self.shape.dims();
        let mut buf: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectral::fft_axis(&mut buf, n, dims, pos, false);
        let stride = n.pow((dims - 1 - pos) as u32);
        for (i, c) in buf.iter_mut().enumerate() {
            let m = (i / stride) % n;
            let k = spectral::odd_wavenumber(m, n);
            *c *= Complex64::new(0.0, k / n as f64);
        }
        spectral::fft_axis(&mut buf, n, dims, pos, true);
        GridScalar {
            shape: self.shape.clone(),
            data: buf.iter().map(|c| c.re).collect(),
        }
    }
}

impl Coefficient for GridScalar {
    fn vanishes(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
    fn plus(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
    fn negated(&self) -> Self {
        self.map(|v| -v)
    }
    fn scaled(&self, c: &Rational) -> Self {
        let c = to_f64(c);
        self.map(|v| v * c)
    }
    fn times(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a * b)
    }
    fn partial(&self, axis: usize) -> Self {
        self.spectral_derivative(axis)
    }
    fn constant_like(&self, c: &Rational) -> Self {
        GridScalar::filled(self.shape.clone(), to_f64(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivative_of_trig_is_exact() {
        let shape = GridShape::new(vec![0, 2], 16).unwrap();
        let f = GridScalar::sample(shape.clone(), |x| (x[0] + 2.0 * x[2]).sin());
        let df = f.spectral_derivative(2);
        let exact = GridScalar::sample(shape, |x| 2.0 * (x[0] + 2.0 * x[2]).cos());
        assert!(df.max_abs_diff(&exact) < 1e-12);
        assert!(f.spectral_derivative(1).vanishes());
    }

    #[test]
    fn nodes_are_uniform() {
        let shape = GridShape::new(vec![4, 1], 4).unwrap();
        assert_eq!(shape.axes(), &[1, 4]);
        let x = shape.node(5); // multi-index (1, 1)
        assert!((x[1] - PI / 2.0).abs() < 1e-15);
        assert!((x[4] - PI / 2.0).abs() < 1e-15);
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn frequency_round_trip() {
        let shape = GridShape::new(vec![0, 1, 3], 8).unwrap();
        let f = GridScalar::sample(shape.clone(), |x| (x[0] * x[1]).sin() + x[3].cos().exp());
        let back = GridScalar::from_frequency(shape, &f.to_frequency());
        let rel = f.max_abs_diff(&back) / f.max_abs();
        assert!(rel <= 1e-12, "relative round-trip error {rel}");
    }

    #[test]
    #[should_panic(expected = "grid shape mismatch")]
    fn mismatched_shapes_panic() {
        let a = GridScalar::filled(GridShape::new(vec![0], 4).unwrap(), 1.0);
        let b = GridScalar::filled(GridShape::new(vec![1], 4).unwrap(), 1.0);
        let _ = a.plus(&b);
    }
}

//! Convex conjugates and partial Legendre transforms by per-node concave
//! maximization with damped Newton steps.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::semiflat::{sigma2, Mat3, ODD_AXES};
use crate::error::{CoreError, Result};
use crate::exterior::io::Potential;
use crate::exterior::{Coefficient, PolyScalar, TrigScalar, DIM};
use crate::linalg::{inverse_f64, is_positive_definite, solve_f64};
use crate::stable_forms::sample_rng;

/// A twice-differentiable function of `dim()` real variables.
pub trait SmoothFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>>;
    /// Points at which convexity is checked before transforming.
    fn convexity_nodes(&self) -> Vec<Vec<f64>>;
    /// Box the function is restricted to, if any.
    fn domain(&self) -> Option<&BoxDomain> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn cube(dim: usize, half_width: f64) -> BoxDomain {
        BoxDomain {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    fn clamp(&self, x: &mut [f64], vars: &[usize]) -> bool {
        let mut hit = false;
        for (slot, &v) in x.iter_mut().zip(vars) {
            if *slot <= self.lo[v] {
                *slot = self.lo[v];
                hit = true;
            } else if *slot >= self.hi[v] {
                *slot = self.hi[v];
                hit = true;
            }
        }
        hit
    }
}

/// Uniform tensor grid on a box with `points` nodes per axis, endpoints
/// included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: usize,
}

impl TensorGrid {
    pub fn cube(dim: usize, half_width: f64, points: usize) -> TensorGrid {
        TensorGrid {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
            points,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points - 1) as f64
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            m[a] = idx % self.points;
            idx /= self.points;
        }
        m
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &m)| self.lo[a] + m as f64 * self.spacing(a))
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    fn is_interior(&self, idx: usize) -> bool {
        self.multi_index(idx).iter().all(|&m| m > 0 && m + 1 < self.points)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim || self.hi.len() != dim || self.points < 3 {
            return Err(CoreError::InvalidParameter {
                name: "grid",
                reason: format!("need a {dim}-dimensional grid with at least 3 points per axis"),
            });
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| l >= h) {
            return Err(CoreError::InvalidParameter {
                name: "grid",
                reason: "lower corner must be below upper corner".into(),
            });
        }
        Ok(())
    }
}

fn cell_nodes(points: usize) -> Vec<Vec<f64>> {
    let grid = TensorGrid {
        lo: vec![0.0; 3],
        hi: vec![2.0 * std::f64::consts::PI; 3],
        points: points + 1,
    };
    grid.nodes()
        .into_iter()
        .zip(0..)
        .filter(|(_, i)| grid.multi_index(*i).iter().all(|&m| m < points))
        .map(|(x, _)| x)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMode {
    pub k: [i32; 3],
    pub cos: f64,
    pub sin: f64,
}

/// `½xᵀQx + Σ (a cos k·x + b sin k·x)` in the three odd coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPeriodic {
    pub q: Mat3,
    pub modes: Vec<PeriodicMode>,
}

impl QuadraticPeriodic {
    pub fn diagonal(a: f64, b: f64, c: f64) -> QuadraticPeriodic {
        QuadraticPeriodic {
            q: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]],
            modes: Vec::new(),
        }
    }

    /// `½|x|² + ε sin x¹ sin x³`.
    pub fn manufactured(eps: f64) -> QuadraticPeriodic {
        QuadraticPeriodic {
            q: super::semiflat::IDENTITY3,
            modes: vec![
                PeriodicMode {
                    k: [1, -1, 0],
                    cos: eps / 2.0,
                    sin: 0.0,
                },
                PeriodicMode {
                    k: [1, 1, 0],
                    cos: -eps / 2.0,
                    sin: 0.0,
                },
            ],
        }
    }

    fn phase(k: &[i32; 3], x: &[f64]) -> f64 {
        (0..3).map(|i| k[i] as f64 * x[i]).sum()
    }
}

impl SmoothFunction for QuadraticPeriodic {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> f64 {
        let quad: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| 0.5 * self.q[i][j] * x[i] * x[j]).sum();
        quad + self
            .modes
            .iter()
            .map(|m| {
                let t = Self::phase(&m.k, x);
                m.cos * t.cos() + m.sin * t.sin()
            })
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..3).map(|i| (0..3).map(|j| self.q[i][j] * x[j]).sum()).collect();
        for m in &self.modes {
            let t = Self::phase(&m.k, x);
            let w = -m.cos * t.sin() + m.sin * t.cos();
            for i in 0..3 {
                g[i] += w * m.k[i] as f64;
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut h: Vec<Vec<f64>> = self.q.iter().map(|r| r.to_vec()).collect();
        for m in &self.modes {
            let t = Self::phase(&m.k, x);
            let w = -(m.cos * t.cos() + m.sin * t.sin());
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += w * (m.k[i] * m.k[j]) as f64;
                }
            }
        }
        h
    }

    fn convexity_nodes(&self) -> Vec<Vec<f64>> {
        if self.modes.is_empty() {
            vec![vec![0.0; 3]]
        } else {
            cell_nodes(16)
        }
    }
}

/// `½xᵀAx + Σ_j w_j log cosh(a_j·x + b_j)` restricted to a box; strictly
/// convex since `A` is positive-definite and every `w_j > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothConvex {
    pub a: Vec<Vec<f64>>,
    pub ridges: Vec<(f64, Vec<f64>, f64)>,
    pub domain: BoxDomain,
}

impl SmoothConvex {
    pub fn random(dim: usize, seed: u64, domain: BoxDomain) -> SmoothConvex {
        let mut rng = sample_rng(seed, 0);
        let m: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| 0.4 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect::<Vec<f64>>())
            .collect();
        let a = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| (0..dim).map(|k| m[i][k] * m[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let ridges = (0..4)
            .map(|_| {
                let w = rng.random_range(0.2..1.0);
                let dir = (0..dim).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
                (w, dir, rng.random_range(-0.5..0.5))
            })
            .collect();
        SmoothConvex { a, ridges, domain }
    }
}

impl SmoothFunction for SmoothConvex {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| 0.5 * self.a[i][j] * x[i] * x[j]).sum::<f64>()).sum();
        quad + self
            .ridges
            .iter()
            .map(|(w, d, b)| {
                let t: f64 = d.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + b;
                w * (t.abs() + (-2.0 * t.abs()).exp().ln_1p() - std::f64::consts::LN_2)
            })
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.a[i][j] * x[j]).sum()).collect();
        for (w, d, b) in &self.ridges {
            let t: f64 = d.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + b;
            let s = w * t.tanh();
            for i in 0..n {
                g[i] += s * d[i];
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut h = self.a.clone();
        for (w, d, b) in &self.ridges {
            let t: f64 = d.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + b;
            let s = w / t.cosh().powi(2);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += s * d[i] * d[j];
                }
            }
        }
        h
    }

    fn convexity_nodes(&self) -> Vec<Vec<f64>> {
        TensorGrid {
            lo: self.domain.lo.clone(),
            hi: self.domain.hi.clone(),
            points: 6,
        }
        .nodes()
    }

    fn domain(&self) -> Option<&BoxDomain> {
        Some(&self.domain)
    }
}

/// A potential read from file, as a function of `(x¹, x³, x⁵)` with the even
/// coordinates held at zero, plus a quadratic background.
#[derive(Clone, Debug)]
pub struct PotentialFunction {
    background: Mat3,
    value: Scalar,
    gradient: Vec<Scalar>,
    hessian: Vec<Vec<Scalar>>,
}

#[derive(Clone, Debug)]
enum Scalar {
    Poly(PolyScalar),
    Trig(TrigScalar),
}

impl Scalar {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut full = [0.0; DIM];
        for (slot, &a) in ODD_AXES.iter().enumerate() {
            full[a] = x[slot];
        }
        match self {
            Scalar::Poly(p) => p.eval_f64(&full),
            Scalar::Trig(t) => t.eval_f64(&full),
        }
    }

    fn partial(&self, axis: usize) -> Scalar {
        match self {
            Scalar::Poly(p) => Scalar::Poly(p.partial(axis)),
            Scalar::Trig(t) => Scalar::Trig(t.partial(axis)),
        }
    }
}

impl PotentialFunction {
    pub fn new(potential: Potential, background: Mat3) -> PotentialFunction {
        let value = match potential {
            Potential::Poly(p) => Scalar::Poly(p),
            Potential::Trig(t) => Scalar::Trig(t),
        };
        let gradient: Vec<Scalar> = ODD_AXES.iter().map(|&a| value.partial(a)).collect();
        let hessian = gradient
            .iter()
            .map(|g| ODD_AXES.iter().map(|&a| g.partial(a)).collect())
            .collect();
        PotentialFunction {
            background,
            value,
            gradient,
            hessian,
        }
    }
}

impl SmoothFunction for PotentialFunction {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> f64 {
        let q = &self.background;
        let quad: f64 = (0..3).map(|i| (0..3).map(|j| 0.5 * q[i][j] * x[i] * x[j]).sum::<f64>()).sum();
        quad + self.value.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..3)
            .map(|i| (0..3).map(|j| self.background[i][j] * x[j]).sum::<f64>() + self.gradient[i].eval(x))
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..3)
            .map(|i| (0..3).map(|j| self.background[i][j] + self.hessian[i][j].eval(x)).collect())
            .collect()
    }

    fn convexity_nodes(&self) -> Vec<Vec<f64>> {
        match self.value {
            Scalar::Trig(_) => cell_nodes(16),
            Scalar::Poly(_) => TensorGrid::cube(3, 2.0, 9).nodes(),
        }
    }
}

/// Result of one concave maximization.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugatePoint {
    pub value: f64,
    /// Maximizing values of the transformed variables.
    pub argmax: Vec<f64>,
    /// The maximizer sits on the domain boundary: `y` lies outside the
    /// gradient image.
    pub boundary: bool,
}

const NEWTON_TOL: f64 = 1e-14;

/// The partial conjugate `φ*(y_S, x_R) = sup_{x_S} (⟨x_S, y_S⟩ − φ(x_S, x_R))`
/// over the variable subset `S`, itself a smooth function of the same number
/// of variables.
pub struct Conjugate<'a, F: SmoothFunction> {
    f: &'a F,
    subset: Vec<usize>,
    rest: Vec<usize>,
    nodes: Vec<Vec<f64>>,
}

impl<'a, F: SmoothFunction> Conjugate<'a, F> {
    pub fn new(f: &'a F, subset: &[usize]) -> Result<Conjugate<'a, F>> {
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        if subset.is_empty() || subset.iter().any(|&s| s >= f.dim()) {
            return Err(CoreError::InvalidParameter {
                name: "subset",
                reason: format!("variables {subset:?} not within 0..{}", f.dim()),
            });
        }
        let rest = (0..f.dim()).filter(|v| !subset.contains(v)).collect();
        check_convex(f, &subset)?;
        Ok(Conjugate {
            f,
            subset,
            rest,
            nodes: Vec::new(),
        })
    }

    /// Nodes used when this conjugate is itself transformed.
    pub fn with_convexity_nodes(mut self, nodes: Vec<Vec<f64>>) -> Self {
        self.nodes = nodes;
        self
    }

    fn assemble(&self, xs: &[f64], y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.f.dim()];
        for (k, &v) in self.subset.iter().enumerate() {
            x[v] = xs[k];
        }
        for &v in &self.rest {
            x[v] = y[v];
        }
        x
    }

    fn block(&self, h: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&i| cols.iter().map(|&j| h[i][j]).collect()).collect()
    }

    pub fn solve(&self, y: &[f64]) -> ConjugatePoint {
        let ys: Vec<f64> = self.subset.iter().map(|&v| y[v]).collect();
        let objective = |xs: &[f64]| -> f64 {
            let x = self.assemble(xs, y);
            xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() - self.f.value(&x)
        };
        let mut xs: Vec<f64> = match self.f.domain() {
            Some(d) => self.subset.iter().map(|&v| 0.5 * (d.lo[v] + d.hi[v])).collect(),
            None => vec![0.0; self.subset.len()],
        };
        let mut g_val = objective(&xs);
        let mut clamped = false;
        for _ in 0..200 {
            let x = self.assemble(&xs, y);
            let grad = self.f.gradient(&x);
            let resid: Vec<f64> = self.subset.iter().enumerate().map(|(k, &v)| ys[k] - grad[v]).collect();
            let scale = 1.0 + ys.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if resid.iter().all(|r| r.abs() <= NEWTON_TOL * scale) {
                clamped = false;
                break;
            }
            let a = self.block(&self.f.hessian(&x), &self.subset, &self.subset);
            let Some(dir) = solve_f64(&a, &resid) else { break };
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let mut trial: Vec<f64> = xs.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let hit = self.f.domain().is_some_and(|d| d.clamp(&mut trial, &self.subset));
                let v = objective(&trial);
                if v >= g_val - 1e-15 * g_val.abs().max(1.0) {
                    moved = trial != xs;
                    xs = trial;
                    g_val = v;
                    clamped = hit;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        ConjugatePoint {
            value: g_val,
            argmax: xs,
            boundary: clamped,
        }
    }
}

/// Hessian block `φ_SS` must be positive-definite at every convexity node.
fn check_convex<F: SmoothFunction>(f: &F, subset: &[usize]) -> Result<()> {
    for x in f.convexity_nodes() {
        let h = f.hessian(&x);
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| subset.iter().map(|&j| h[i][j]).collect()).collect();
        if !is_positive_definite(&a) {
            return Err(CoreError::NotConvex { point: x });
        }
    }
    Ok(())
}

/// Hessian of the partial conjugate in terms of the blocks of `D²φ` at the
/// maximizer: `[[A⁻¹, −A⁻¹B], [−BᵀA⁻¹, BᵀA⁻¹B − C]]` in `(S, R)` order.
pub fn partial_hessian(h: &[Vec<f64>], subset: &[usize]) -> Option<Vec<Vec<f64>>> {
    let n = h.len();
    let rest: Vec<usize> = (0..n).filter(|v| !subset.contains(v)).collect();
    let pick = |rows: &[usize], cols: &[usize]| -> Vec<Vec<f64>> {
        rows.iter().map(|&i| cols.iter().map(|&j| h[i][j]).collect()).collect()
    };
    let ainv = inverse_f64(&pick(subset, subset))?;
    let b = pick(subset, &rest);
    let c = pick(&rest, &rest);
    let ainv_b: Vec<Vec<f64>> = (0..subset.len())
        .map(|i| (0..rest.len()).map(|j| (0..subset.len()).map(|k| ainv[i][k] * b[k][j]).sum()).collect())
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for (i, &si) in subset.iter().enumerate() {
        for (j, &sj) in subset.iter().enumerate() {
            out[si][sj] = ainv[i][j];
        }
        for (j, &rj) in rest.iter().enumerate() {
            out[si][rj] = -ainv_b[i][j];
            out[rj][si] = -ainv_b[i][j];
        }
    }
    for (i, &ri) in rest.iter().enumerate() {
        for (j, &rj) in rest.iter().enumerate() {
            let btab: f64 = (0..subset.len()).map(|k| b[k][i] * ainv_b[k][j]).sum();
            out[ri][rj] = btab - c[i][j];
        }
    }
    Some(out)
}

impl<F: SmoothFunction> SmoothFunction for Conjugate<'_, F> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.solve(y).value
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let p = self.solve(y);
        let x = self.assemble(&p.argmax, y);
        let g = self.f.gradient(&x);
        let mut out = vec![0.0; self.dim()];
        for (k, &v) in self.subset.iter().enumerate() {
            out[v] = p.argmax[k];
        }
        for &v in &self.rest {
            out[v] = -g[v];
        }
        out
    }

    fn hessian(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let p = self.solve(y);
        let x = self.assemble(&p.argmax, y);
        partial_hessian(&self.f.hessian(&x), &self.subset)
            .unwrap_or_else(|| vec![vec![f64::NAN; self.dim()]; self.dim()])
    }

    fn convexity_nodes(&self) -> Vec<Vec<f64>> {
        self.nodes.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreGrid {
    pub grid: TensorGrid,
    pub subset: Vec<usize>,
    pub values: Vec<f64>,
    pub boundary: Vec<bool>,
}

/// Evaluates the partial conjugate over `subset` on every node of `grid`.
pub fn legendre_transform<F: SmoothFunction>(f: &F, subset: &[usize], grid: &TensorGrid) -> Result<LegendreGrid> {
    grid.validate(f.dim())?;
    let conj = Conjugate::new(f, subset)?;
    let points: Vec<ConjugatePoint> = (0..grid.len()).into_par_iter().map(|i| conj.solve(&grid.node(i))).collect();
    Ok(LegendreGrid {
        grid: grid.clone(),
        subset: conj.subset.clone(),
        values: points.iter().map(|p| p.value).collect(),
        boundary: points.iter().map(|p| p.boundary).collect(),
    })
}

/// Max deviation of `(φ*)*` from `φ` over the interior nodes of `grid`.
pub fn involution_defect<F: SmoothFunction>(f: &F, subset: &[usize], grid: &TensorGrid) -> Result<f64> {
    grid.validate(f.dim())?;
    let once = Conjugate::new(f, subset)?;
    let y_nodes: Vec<Vec<f64>> = grid.nodes().iter().map(|x| once.gradient(x)).collect();
    let once = once.with_convexity_nodes(y_nodes);
    let twice = Conjugate::new(&once, subset)?;
    let worst = (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.is_interior(i))
        .map(|i| {
            let x = grid.node(i);
            (twice.value(&x) - f.value(&x)).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// `max − min`: zero exactly when the residual is constant.
    pub spread: f64,
}

impl ResidualStats {
    pub fn of(values: &[f64]) -> ResidualStats {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ResidualStats {
            min,
            max,
            mean,
            std_dev: var.sqrt(),
            spread: max - min,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreExperiment {
    pub subset: Vec<usize>,
    pub interior_nodes: usize,
    pub boundary_nodes: usize,
    /// σ₂ of the transform's Hessian on the interior nodes.
    pub transformed: ResidualStats,
    /// σ₂ of the original Hessian at the corresponding maximizers.
    pub original: ResidualStats,
    /// Largest gap between the analytic Hessian and central differences of
    /// the sampled transform.
    pub fd_hessian_gap: f64,
    /// Exact σ₂ of the transform when `φ` is a pure quadratic.
    pub closed_form: Option<f64>,
}

fn to_mat3(h: &[Vec<f64>]) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| h[i][j]))
}

/// Transforms a convex function of the three odd variables over `subset` and
/// measures the σ₂ residual of the result on the interior of `grid`.
pub fn legendre_experiment<F: SmoothFunction>(
    f: &F,
    subset: &[usize],
    grid: &TensorGrid,
    quadratic: Option<&Mat3>,
) -> Result<LegendreExperiment> {
    if f.dim() != 3 {
        return Err(CoreError::InvalidParameter {
            name: "function",
            reason: "the σ₂ residual needs a function of three variables".into(),
        });
    }
    let sampled = legendre_transform(f, subset, grid)?;
    let conj = Conjugate::new(f, subset)?;
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
    let rows: Vec<(f64, f64, f64, bool)> = interior
        .par_iter()
        .map(|&i| {
            let y = grid.node(i);
            let p = conj.solve(&y);
            let x = conj.assemble(&p.argmax, &y);
            let hf = f.hessian(&x);
            let ht = partial_hessian(&hf, &conj.subset).unwrap_or_else(|| vec![vec![f64::NAN; 3]; 3]);
            let fd = fd_hessian(&sampled, i);
            let gap = (0..3)
                .flat_map(|a| (0..3).map(move |b| (a, b)))
                .map(|(a, b)| (fd[a][b] - ht[a][b]).abs())
                .fold(0.0, f64::max);
            (sigma2(&to_mat3(&ht)), sigma2(&to_mat3(&hf)), gap, p.boundary)
        })
        .collect();
    let kept: Vec<&(f64, f64, f64, bool)> = rows.iter().filter(|r| !r.3).collect();
    let closed_form = quadratic.and_then(|q| {
        let h: Vec<Vec<f64>> = q.iter().map(|r| r.to_vec()).collect();
        partial_hessian(&h, &conj.subset).map(|ht| sigma2(&to_mat3(&ht)))
    });
    Ok(LegendreExperiment {
        subset: conj.subset.clone(),
        interior_nodes: kept.len(),
        boundary_nodes: sampled.boundary.iter().filter(|&&b| b).count(),
        transformed: ResidualStats::of(&kept.iter().map(|r| r.0).collect::<Vec<_>>()),
        original: ResidualStats::of(&kept.iter().map(|r| r.1).collect::<Vec<_>>()),
        fd_hessian_gap: kept.iter().map(|r| r.2).fold(0.0, f64::max),
        closed_form,
    })
}

fn fd_hessian(s: &LegendreGrid, idx: usize) -> Vec<Vec<f64>> {
    let g = &s.grid;
    let m = g.multi_index(idx);
    let at = |off: &[(usize, isize)]| {
        let mut mm = m.clone();
        for &(a, o) in off {
            mm[a] = (mm[a] as isize + o) as usize;
        }
        s.values[mm.iter().fold(0, |acc, &v| acc * g.points + v)]
    };
    let mut h = vec![vec![0.0; 3]; 3];
    for a in 0..3 {
        let ha = g.spacing(a);
        h[a][a] = (at(&[(a, 1)]) - 2.0 * at(&[]) + at(&[(a, -1)])) / (ha * ha);
        for b in a + 1..3 {
            let hb = g.spacing(b);
            let v = (at(&[(a, 1), (b, 1)]) - at(&[(a, 1), (b, -1)]) - at(&[(a, -1), (b, 1)])
                + at(&[(a, -1), (b, -1)]))
                / (4.0 * ha * hb);
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_conjugate_closed_form() {
        let f = QuadraticPeriodic::diagonal(2.0, 3.0, 5.0);
        let grid = TensorGrid::cube(3, 1.5, 5);
        let t = legendre_transform(&f, &[0, 1, 2], &grid).unwrap();
        for (i, v) in t.values.iter().enumerate() {
            let y = grid.node(i);
            let exact = y[0] * y[0] / 4.0 + y[1] * y[1] / 6.0 + y[2] * y[2] / 10.0;
            assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
        }
        assert!(t.boundary.iter().all(|b| !b));
    }

    #[test]
    fn half_square_is_self_dual() {
        let f = QuadraticPeriodic::diagonal(1.0, 1.0, 1.0);
        let c = Conjugate::new(&f, &[0, 1, 2]).unwrap();
        let y = [0.3, -1.2, 2.0];
        assert!((c.value(&y) - f.value(&y)).abs() < 1e-14);
    }

    #[test]
    fn full_transform_residual_matches_closed_form() {
        let (a, b, c) = (2.0, 3.0, 5.0);
        let f = QuadraticPeriodic::diagonal(a, b, c);
        let q = f.q;
        let e = legendre_experiment(&f, &[0, 1, 2], &TensorGrid::cube(3, 1.0, 5), Some(&q)).unwrap();
        let expect = (a + b + c) / (a * b * c);
        assert!((e.closed_form.unwrap() - expect).abs() < 1e-14);
        assert!((e.transformed.mean - expect).abs() < 1e-12);
        assert!(e.transformed.spread < 1e-12);
        assert!((e.original.mean - (a * b + a * c + b * c)).abs() < 1e-12);
    }

    #[test]
    fn partial_transform_of_quadratic() {
        let (a, b, c) = (2.0, 3.0, 5.0);
        let f = QuadraticPeriodic::diagonal(a, b, c);
        let q = f.q;
        let e = legendre_experiment(&f, &[0], &TensorGrid::cube(3, 1.0, 5), Some(&q)).unwrap();
        let expect = -b / a - c / a + b * c;
        assert!((e.closed_form.unwrap() - expect).abs() < 1e-14);
        assert!((e.transformed.mean - expect).abs() < 1e-12);
        assert!(e.fd_hessian_gap < 1e-6, "{}", e.fd_hessian_gap);
    }

    #[test]
    fn partial_hessian_matches_generic_coupling() {
        let h = vec![vec![2.0, 0.5, 0.1], vec![0.5, 3.0, -0.4], vec![0.1, -0.4, 1.5]];
        let f = QuadraticPeriodic {
            q: to_mat3(&h),
            modes: Vec::new(),
        };
        let grid = TensorGrid::cube(3, 1.0, 7);
        let t = legendre_transform(&f, &[0, 2], &grid).unwrap();
        let ht = partial_hessian(&h, &[0, 2]).unwrap();
        let s = LegendreGrid { ..t };
        let fd = fd_hessian(&s, grid.len() / 2);
        for a in 0..3 {
            for b in 0..3 {
                assert!((fd[a][b] - ht[a][b]).abs() < 1e-8, "{a}{b}: {} vs {}", fd[a][b], ht[a][b]);
            }
        }
    }

    #[test]
    fn involution_on_random_convex() {
        for seed in [1, 2, 3] {
            let f = SmoothConvex::random(3, seed, BoxDomain::cube(3, 3.0));
            let d = involution_defect(&f, &[0, 1, 2], &TensorGrid::cube(3, 0.8, 6)).unwrap();
            assert!(d < 1e-8, "seed {seed}: {d}");
            let d = involution_defect(&f, &[1], &TensorGrid::cube(3, 0.8, 6)).unwrap();
            assert!(d < 1e-8, "seed {seed} partial: {d}");
        }
    }

    #[test]
    fn involution_on_manufactured() {
        let f = QuadraticPeriodic::manufactured(0.05);
        let d = involution_defect(&f, &[0, 1, 2], &TensorGrid::cube(3, 2.0, 6)).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn rejects_nonconvex() {
        let f = QuadraticPeriodic::diagonal(1.0, -1.0, 1.0);
        assert!(matches!(Conjugate::new(&f, &[0, 1, 2]), Err(CoreError::NotConvex { .. })));
        assert!(Conjugate::new(&f, &[0, 2]).is_ok());
    }

    #[test]
    fn flags_points_outside_gradient_image() {
        let f = SmoothConvex::random(3, 7, BoxDomain::cube(3, 0.5));
        let c = Conjugate::new(&f, &[0, 1, 2]).unwrap();
        assert!(c.solve(&[50.0, 0.0, 0.0]).boundary);
        let inside = f.gradient(&[0.1, -0.2, 0.05]);
        assert!(!c.solve(&inside).boundary);
    }
}

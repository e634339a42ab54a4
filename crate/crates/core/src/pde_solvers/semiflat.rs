//! The σ₂ Hessian equation on the torus of odd coordinates `(x¹, x³, x⁵)`.
//!
//! Unknowns are `φ = ½xᵀQx + p(x)` with `p` periodic of mean zero, sampled on
//! an `N³` grid. Derivatives of `p` use central differences of order 2 or 4;
//! the Newton linearization is the exact derivative of the discrete residual.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::exterior::{GridScalar, GridShape};
use crate::linalg::is_positive_definite;
use crate::spectral;

pub const ODD_AXES: [usize; 3] = [0, 2, 4];

pub type Mat3 = [[f64; 3]; 3];

pub fn odd_shape(n: usize) -> Result<GridShape> {
    GridShape::new(ODD_AXES.to_vec(), n)
}

pub fn sigma1(h: &Mat3) -> f64 {
    h[0][0] + h[1][1] + h[2][2]
}

pub fn sigma2(h: &Mat3) -> f64 {
    h[0][0] * h[1][1] + h[0][0] * h[2][2] + h[1][1] * h[2][2]
        - h[0][1] * h[0][1]
        - h[0][2] * h[0][2]
        - h[1][2] * h[1][2]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl TryFrom<u8> for StencilOrder {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(StencilOrder::Second),
            4 => Ok(StencilOrder::Fourth),
            _ => Err(format!("stencil order must be 2 or 4, got {v}")),
        }
    }
}

impl From<StencilOrder> for u8 {
    fn from(s: StencilOrder) -> u8 {
        match s {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }
}

impl StencilOrder {
    fn first(self) -> &'static [(isize, f64)] {
        match self {
            StencilOrder::Second => &[(-1, -0.5), (1, 0.5)],
            StencilOrder::Fourth => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        }
    }

    fn second(self) -> &'static [(isize, f64)] {
        match self {
            StencilOrder::Second => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
            StencilOrder::Fourth => &[
                (-2, -1.0 / 12.0),
                (-1, 16.0 / 12.0),
                (0, -30.0 / 12.0),
                (1, 16.0 / 12.0),
                (2, -1.0 / 12.0),
            ],
        }
    }

    /// Symbols `(s, μ)` with `D e^{ikx} = i s e^{ikx}`, `D² e^{ikx} = −μ e^{ikx}`.
    fn symbols(self, k: f64, h: f64) -> (f64, f64) {
        let t = k * h;
        match self {
            StencilOrder::Second => (t.sin() / h, (2.0 - 2.0 * t.cos()) / (h * h)),
            StencilOrder::Fourth => (
                (8.0 * t.sin() - (2.0 * t).sin()) / (6.0 * h),
                (30.0 - 32.0 * t.cos() + 2.0 * (2.0 * t).cos()) / (12.0 * h * h),
            ),
        }
    }
}

fn apply_stencil(data: &[f64], n: usize, axis: usize, stencil: &[(isize, f64)], scale: f64) -> Vec<f64> {
    let stride = n.pow((2 - axis) as u32);
    (0..data.len())
        .into_par_iter()
        .map(|idx| {
            let m = (idx / stride) % n;
            let base = idx - m * stride;
            stencil
                .iter()
                .map(|&(o, w)| {
                    let mm = (m as isize + o).rem_euclid(n as isize) as usize;
                    w * data[base + mm * stride]
                })
                .sum::<f64>()
                * scale
        })
        .collect()
}

/// Discrete second derivatives of a periodic field, in the order
/// `(11, 33, 55, 13, 15, 35)`.
pub fn periodic_hessian(p: &[f64], n: usize, order: StencilOrder) -> [Vec<f64>; 6] {
    let h = 2.0 * PI / n as f64;
    let d2 = |a: usize| apply_stencil(p, n, a, order.second(), 1.0 / (h * h));
    let d1: Vec<Vec<f64>> = (0..3).map(|a| apply_stencil(p, n, a, order.first(), 1.0 / h)).collect();
    let mixed = |a: usize, b: usize| apply_stencil(&d1[b], n, a, order.first(), 1.0 / h);
    [d2(0), d2(1), d2(2), mixed(0, 1), mixed(0, 2), mixed(1, 2)]
}

fn node_matrix(q: &Mat3, hs: &[Vec<f64>; 6], idx: usize) -> Mat3 {
    let mut m = *q;
    m[0][0] += hs[0][idx];
    m[1][1] += hs[1][idx];
    m[2][2] += hs[2][idx];
    m[0][1] += hs[3][idx];
    m[1][0] += hs[3][idx];
    m[0][2] += hs[4][idx];
    m[2][0] += hs[4][idx];
    m[1][2] += hs[5][idx];
    m[2][1] += hs[5][idx];
    m
}

/// σ₂ of `Q + D²p` at every node.
pub fn semiflat_residual(q: &Mat3, p: &GridScalar, order: StencilOrder) -> Result<GridScalar> {
    let n = check_field(p)?;
    let hs = periodic_hessian(p.data(), n, order);
    let data = (0..p.data().len())
        .into_par_iter()
        .map(|i| sigma2(&node_matrix(q, &hs, i)))
        .collect();
    GridScalar::new(p.shape().clone(), data)
}

fn check_field(p: &GridScalar) -> Result<usize> {
    if p.shape().axes() != ODD_AXES {
        return Err(CoreError::InvalidParameter {
            name: "grid",
            reason: format!("semi-flat fields live on axes [1, 3, 5], got {:?}", p.shape().axes()),
        });
    }
    Ok(p.shape().n())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_newton_iters: usize,
    pub newton_tol: f64,
    pub damping: bool,
    pub linear_solver_tol: f64,
    pub max_linear_iters: usize,
    pub restart: usize,
    /// Largest tolerated mean of the residual, which the mean-zero periodic
    /// correction cannot remove.
    pub mass_tol: f64,
    pub stencil_order: StencilOrder,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_newton_iters: 30,
            newton_tol: 1e-10,
            damping: true,
            linear_solver_tol: 1e-12,
            max_linear_iters: 300,
            restart: 30,
            mass_tol: 1e-4,
            stencil_order: StencilOrder::Fourth,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiflatProblem {
    pub rhs: GridScalar,
    pub q: Mat3,
    pub config: SolverConfig,
}

impl SemiflatProblem {
    pub fn new(rhs: GridScalar, q: Mat3, config: SolverConfig) -> Result<SemiflatProblem> {
        check_field(&rhs)?;
        let sym = (0..3).all(|i| (0..3).all(|j| q[i][j] == q[j][i]));
        let rows: Vec<Vec<f64>> = q.iter().map(|r| r.to_vec()).collect();
        if !sym || !is_positive_definite(&rows) {
            return Err(CoreError::InvalidParameter {
                name: "Q",
                reason: format!("background matrix must be symmetric positive-definite, got {q:?}"),
            });
        }
        if config.newton_tol <= 0.0 || config.linear_solver_tol <= 0.0 || config.restart == 0 {
            return Err(CoreError::InvalidParameter {
                name: "config",
                reason: "tolerances must be positive and restart nonzero".into(),
            });
        }
        Ok(SemiflatProblem { rhs, q, config })
    }

    pub fn n(&self) -> usize {
        self.rhs.shape().n()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolverStatus {
    Converged,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_residual: f64,
    pub l2_residual: f64,
    pub step_length: f64,
    pub linear_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub gamma2: bool,
    pub min_sigma1: f64,
    pub min_sigma2: f64,
    pub worst_node: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub n: usize,
    pub stencil_order: StencilOrder,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Max and L² norms of the mean-free part of the residual.
    pub final_residual_max: f64,
    pub final_residual_l2: f64,
    /// Mean of the residual; the periodic correction cannot change it.
    pub projected_mass: f64,
    pub admissibility: Admissibility,
    pub diagnostic: Option<String>,
}

fn admissibility(q: &Mat3, hs: &[Vec<f64>; 6], shape: &GridShape) -> Admissibility {
    let (mut s1, mut s2, mut worst) = (f64::INFINITY, f64::INFINITY, 0);
    for i in 0..hs[0].len() {
        let m = node_matrix(q, hs, i);
        let (a, b) = (sigma1(&m), sigma2(&m));
        if a.min(b) < s1.min(s2) {
            worst = i;
        }
        s1 = s1.min(a);
        s2 = s2.min(b);
    }
    let x = shape.node(worst);
    Admissibility {
        gamma2: s1 > 0.0 && s2 > 0.0,
        min_sigma1: s1,
        min_sigma2: s2,
        worst_node: ODD_AXES.iter().map(|&a| x[a]).collect(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn norms(v: &[f64]) -> (f64, f64) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let l2 = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    (max, l2)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

struct Linearization<'a> {
    n: usize,
    order: StencilOrder,
    /// `S = σ₁(H)I − H` per node, entries `(11, 33, 55, 13, 15, 35)`.
    s: [Vec<f64>; 6],
    precond: Vec<f64>,
    _q: &'a Mat3,
}

impl<'a> Linearization<'a> {
    fn new(q: &'a Mat3, hs: &[Vec<f64>; 6], n: usize, order: StencilOrder) -> Self {
        let len = hs[0].len();
        let mut s: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; len]);
        for i in 0..len {
            let m = node_matrix(q, hs, i);
            let tr = sigma1(&m);
            s[0][i] = tr - m[0][0];
            s[1][i] = tr - m[1][1];
            s[2][i] = tr - m[2][2];
            s[3][i] = -m[0][1];
            s[4][i] = -m[0][2];
            s[5][i] = -m[1][2];
        }
        let tr = sigma1(q);
        let s0 = [
            tr - q[0][0],
            tr - q[1][1],
            tr - q[2][2],
            -q[0][1],
            -q[0][2],
            -q[1][2],
        ];
        let h = 2.0 * PI / n as f64;
        let precond = (0..len)
            .map(|idx| {
                let m = spectral::unflatten(idx, n, 3);
                let sym: Vec<(f64, f64)> = m
                    .iter()
                    .map(|&mi| order.symbols(spectral::wavenumber(mi, n) as f64, h))
                    .collect();
                let l = s0[0] * sym[0].1
                    + s0[1] * sym[1].1
                    + s0[2] * sym[2].1
                    + 2.0 * (s0[3] * sym[0].0 * sym[1].0 + s0[4] * sym[0].0 * sym[2].0 + s0[5] * sym[1].0 * sym[2].0);
                if idx == 0 || l.abs() < 1e-300 {
                    0.0
                } else {
                    -1.0 / l
                }
            })
            .collect();
        Linearization {
            n,
            order,
            s,
            precond,
            _q: q,
        }
    }

    /// `Σ S^{ij} D_ij v`, projected to mean zero.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = periodic_hessian(v, self.n, self.order);
        let s = &self.s;
        let mut out: Vec<f64> = (0..v.len())
            .into_par_iter()
            .map(|i| {
                s[0][i] * d[0][i]
                    + s[1][i] * d[1][i]
                    + s[2][i] * d[2][i]
                    + 2.0 * (s[3][i] * d[3][i] + s[4][i] * d[4][i] + s[5][i] * d[5][i])
            })
            .collect();
        let m = mean(&out);
        out.par_iter_mut().for_each(|x| *x -= m);
        out
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let mut f = spectral::forward(r, self.n, 3);
        f.par_iter_mut().zip(&self.precond).for_each(|(c, &w)| *c *= w);
        spectral::inverse(&f, self.n, 3)
    }
}

/// Right-preconditioned restarted GMRES for `A x = b`; returns the iterate and
/// the number of inner iterations.
fn gmres(lin: &Linearization, b: &[f64], tol: f64, max_iters: usize, restart: usize) -> (Vec<f64>, usize) {
    let len = b.len();
    let mut x = vec![0.0; len];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (x, 0);
    }
    let mut total = 0;
    loop {
        let ax = lin.apply(&lin.precondition(&x));
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = dot(&r, &r).sqrt();
        if beta <= tol * bnorm || total >= max_iters {
            return (lin.precondition(&x), total);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && total < max_iters {
            let mut w = lin.apply(&lin.precondition(&basis[k]));
            let mut col = vec![0.0; k + 2];
            for (j, vj) in basis.iter().enumerate() {
                col[j] = dot(&w, vj);
                axpy(&mut w, -col[j], vj);
            }
            col[k + 1] = dot(&w, &w).sqrt();
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let rr = (col[k] * col[k] + col[k + 1] * col[k + 1]).sqrt();
            let (c, s) = if rr == 0.0 { (1.0, 0.0) } else { (col[k] / rr, col[k + 1] / rr) };
            let wnorm = col[k + 1];
            col[k] = rr;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[k]);
            g[k] *= c;
            hess.push(col);
            total += 1;
            k += 1;
            if g[k].abs() <= tol * bnorm || wnorm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[j][i] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(&mut x, *yi, &basis[i]);
        }
        if g[k].abs() <= tol * bnorm {
            return (lin.precondition(&x), total);
        }
    }
}

struct Evaluation {
    hs: [Vec<f64>; 6],
    residual: Vec<f64>,
    mass: f64,
    max: f64,
    l2: f64,
}

fn evaluate(problem: &SemiflatProblem, p: &[f64]) -> Evaluation {
    let n = problem.n();
    let hs = periodic_hessian(p, n, problem.config.stencil_order);
    let f = problem.rhs.data();
    let mut residual: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map(|i| sigma2(&node_matrix(&problem.q, &hs, i)) - f[i])
        .collect();
    let mass = mean(&residual);
    residual.par_iter_mut().for_each(|x| *x -= mass);
    let (max, l2) = norms(&residual);
    Evaluation {
        hs,
        residual,
        mass,
        max,
        l2,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiflatSolution {
    pub q: Mat3,
    /// Mean-zero periodic part on the odd-coordinate grid.
    pub periodic: GridScalar,
}

impl SemiflatSolution {
    /// Spectral interpolation of the periodic part onto a grid with `m ≥ N`
    /// nodes per axis.
    pub fn interpolate(&self, m: usize) -> Result<SemiflatSolution> {
        Ok(SemiflatSolution {
            q: self.q,
            periodic: interpolate_periodic(&self.periodic, m)?,
        })
    }
}

/// Zero-padding Fourier interpolation of an odd-coordinate field.
pub fn interpolate_periodic(p: &GridScalar, m: usize) -> Result<GridScalar> {
    let n = check_field(p)?;
    if m < n {
        return Err(CoreError::InvalidParameter {
            name: "N",
            reason: format!("cannot interpolate from {n} down to {m} nodes"),
        });
    }
    let freq = p.to_frequency();
    let mut out = vec![Complex64::new(0.0, 0.0); m * m * m];
    for (idx, c) in freq.iter().enumerate() {
        let multi = spectral::unflatten(idx, n, 3);
        let ks: Vec<i64> = multi.iter().map(|&k| spectral::wavenumber(k, n)).collect();
        // split the Nyquist bin symmetrically so the interpolant stays real
        let nyq: Vec<bool> = ks.iter().map(|&k| n % 2 == 0 && k.unsigned_abs() as usize * 2 == n).collect();
        let weight = nyq.iter().filter(|&&b| b).count();
        let share = *c / (1u32 << weight) as f64;
        for mask in 0..(1usize << 3) {
            if (0..3).any(|a| mask & (1 << a) != 0 && !nyq[a]) {
                continue;
            }
            let target: Vec<usize> = (0..3)
                .map(|a| {
                    let k = if mask & (1 << a) != 0 { -ks[a] } else { ks[a] };
                    k.rem_euclid(m as i64) as usize
                })
                .collect();
            out[spectral::flatten(&target, m)] += share;
        }
    }
    Ok(GridScalar::from_frequency(odd_shape(m)?, &out))
}

/// Newton's method for `σ₂(Q + D²p) = f` over mean-zero periodic `p`.
pub fn semiflat_newton(problem: &SemiflatProblem) -> Result<(SemiflatSolution, SolverReport)> {
    let cfg = &problem.config;
    let n = problem.n();
    let shape = problem.rhs.shape().clone();
    let mut p = vec![0.0; shape.len()];
    let mut eval = evaluate(problem, &p);
    let mut history = vec![IterationRecord {
        iteration: 0,
        max_residual: eval.max,
        l2_residual: eval.l2,
        step_length: 0.0,
        linear_iterations: 0,
    }];
    let mut diagnostic = None;
    let mut iterations = 0;
    while eval.max > cfg.newton_tol {
        if iterations >= cfg.max_newton_iters {
            diagnostic = Some(format!(
                "no convergence in {} Newton iterations (max residual {:e})",
                cfg.max_newton_iters, eval.max
            ));
            break;
        }
        iterations += 1;
        let lin = Linearization::new(&problem.q, &eval.hs, n, cfg.stencil_order);
        let rhs: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
        let (mut step, lin_iters) = gmres(&lin, &rhs, cfg.linear_solver_tol, cfg.max_linear_iters, cfg.restart);
        let sm = mean(&step);
        step.iter_mut().for_each(|x| *x -= sm);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            let e = evaluate(problem, &trial);
            let adm = admissibility(&problem.q, &e.hs, &shape);
            if adm.gamma2 && (e.max < eval.max || !cfg.damping) {
                accepted = Some((trial, e));
                break;
            }
            if !cfg.damping {
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            let adm = admissibility(&problem.q, &eval.hs, &shape);
            diagnostic = Some(format!(
                "line search failed at iteration {iterations}: no admissible step decreases the residual \
                 (min σ₁ {:e}, min σ₂ {:e} near node {:?})",
                adm.min_sigma1, adm.min_sigma2, adm.worst_node
            ));
            break;
        };
        p = trial;
        eval = e;
        history.push(IterationRecord {
            iteration: iterations,
            max_residual: eval.max,
            l2_residual: eval.l2,
            step_length: alpha,
            linear_iterations: lin_iters,
        });
    }
    let adm = admissibility(&problem.q, &eval.hs, &shape);
    if diagnostic.is_none() && eval.mass.abs() > cfg.mass_tol {
        diagnostic = Some(format!(
            "incompatible right-hand side: residual mean {:e} cannot be removed by a periodic correction",
            eval.mass
        ));
    }
    if diagnostic.is_none() && !adm.gamma2 {
        diagnostic = Some(format!("final iterate leaves the Γ₂ cone near node {:?}", adm.worst_node));
    }
    let report = SolverReport {
        status: if diagnostic.is_none() {
            SolverStatus::Converged
        } else {
            SolverStatus::Failed
        },
        n,
        stencil_order: cfg.stencil_order,
        iterations,
        history,
        final_residual_max: eval.max,
        final_residual_l2: eval.l2,
        projected_mass: eval.mass,
        admissibility: adm,
        diagnostic,
    };
    Ok((
        SemiflatSolution {
            q: problem.q,
            periodic: GridScalar::new(shape, p)?,
        },
        report,
    ))
}

/// Periodic part `ε sin x¹ sin x³` of the manufactured solution.
pub fn manufactured_periodic(n: usize, eps: f64) -> Result<GridScalar> {
    Ok(GridScalar::sample(odd_shape(n)?, |x| eps * x[0].sin() * x[2].sin()))
}

/// Exact σ₂ of `½|x|² + ε sin x¹ sin x³`.
pub fn manufactured_rhs(n: usize, eps: f64) -> Result<GridScalar> {
    Ok(GridScalar::sample(odd_shape(n)?, |x| {
        let ss = x[0].sin() * x[2].sin();
        let cc = x[0].cos() * x[2].cos();
        let d = 1.0 - eps * ss;
        d * d + 2.0 * d - eps * eps * cc * cc
    }))
}

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub max_err: f64,
    pub l2_err: f64,
    /// Observed order against the previous row; absent for the first.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedStudy {
    pub eps: f64,
    pub rows: Vec<ConvergenceRow>,
    pub reports: Vec<SolverReport>,
}

impl ManufacturedStudy {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["N", "max_err", "l2_err", "order"])?;
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                format!("{:e}", r.max_err),
                format!("{:e}", r.l2_err),
                r.order.map(|o| format!("{o:.6}")).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Solves the manufactured problem on each grid and measures the error
/// against the exact periodic part.
pub fn manufactured_study(ns: &[usize], eps: f64, config: &SolverConfig) -> Result<ManufacturedStudy> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut reports = Vec::new();
    for &n in ns {
        let problem = SemiflatProblem::new(manufactured_rhs(n, eps)?, IDENTITY3, config.clone())?;
        let (sol, report) = semiflat_newton(&problem)?;
        let exact = manufactured_periodic(n, eps)?;
        let diff = sol.periodic.zip_with(&exact, |a, b| a - b);
        let (max_err, l2_err) = norms(diff.data());
        let order = rows
            .last()
            .map(|prev| (prev.max_err / max_err).ln() / (n as f64 / prev.n as f64).ln());
        rows.push(ConvergenceRow {
            n,
            max_err,
            l2_err,
            order,
        });
        reports.push(report);
    }
    Ok(ManufacturedStudy { eps, rows, reports })
}

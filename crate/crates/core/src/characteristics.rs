//! Characteristic curves through a frozen time-stack of fields, the linear
//! representation formula `Γ` and its Picard fixed point.
//!
//! This is a small-scale oracle for the splitting solver: grids are coarse
//! and every node is traced independently.

use rayon::prelude::*;

use crate::error::{KineticError, Result};
use crate::phasegrid::{moments, DistributionField, PhaseGrid};

/// RK4 steps per stack interval when tracing a curve.
const SUBSTEPS_PER_SLICE: usize = 4;

/// Phase point reached by tracing from time `t` back to time `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharState {
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub t: f64,
    pub s: f64,
}

/// Time-indexed stack of fields on `[0, T_loc]` with cached moments.
#[derive(Debug, Clone)]
pub struct IterateField {
    pub grid: PhaseGrid,
    pub gamma: f64,
    pub times: Vec<f64>,
    pub slices: Vec<DistributionField>,
    /// Picard iteration index of this stack.
    pub iteration: usize,
    rho: Vec<Vec<f64>>,
    mom: Vec<Vec<f64>>,
}

impl IterateField {
    /// Stack of `slices` fields at `times`; the times must increase from 0.
    pub fn new(gamma: f64, times: Vec<f64>, slices: Vec<DistributionField>, iteration: usize) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(KineticError::Validation("empty field stack".into()));
        };
        let grid = first.grid;
        if times.len() != slices.len() {
            return Err(KineticError::Validation(format!(
                "{} times for {} slices",
                times.len(),
                slices.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KineticError::Validation("stack times must increase from 0".into()));
        }
        if slices.iter().any(|f| !f.grid.same_as(&grid)) {
            return Err(KineticError::GridMismatch("stack slices use different grids".into()));
        }
        let (rho, mom) = slices
            .iter()
            .map(|f| {
                let m = moments(f);
                (m.rho, m.mom)
            })
            .unzip();
        Ok(Self {
            grid,
            gamma,
            times,
            slices,
            iteration,
            rho,
            mom,
        })
    }

    /// The stack `f(t) = f0` for every `t` on a uniform time grid.
    pub fn constant(f0: &DistributionField, gamma: f64, t_loc: f64, intervals: usize) -> Result<Self> {
        let times = uniform_times(t_loc, intervals);
        let slices = times
            .iter()
            .map(|&t| {
                let mut f = f0.clone();
                f.time = t;
                f
            })
            .collect();
        Self::new(gamma, times, slices, 0)
    }

    pub fn t_loc(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last(&self) -> &DistributionField {
        self.slices.last().unwrap()
    }

    /// Bracketing slice and weight of the later one.
    fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= 0.0 {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, w)
    }

    /// `(ρ, m)` at time `t` and position `x`, or `None` outside the x-grid.
    pub fn moments_at(&self, t: f64, x: &[f64]) -> Option<(f64, [f64; 2])> {
        let d = self.grid.d();
        let stencil = x_stencil(&self.grid, x)?;
        let (k, w) = self.bracket(t);
        let k1 = (k + 1).min(self.times.len() - 1);
        let mut rho = 0.0;
        let mut m = [0.0; 2];
        for &(xc, wx) in stencil.iter().take(1 << d) {
            for (slice, wt) in [(k, 1.0 - w), (k1, w)] {
                let c = wx * wt;
                if c == 0.0 {
                    continue;
                }
                rho += c * self.rho[slice][xc];
                for a in 0..d {
                    m[a] += c * self.mom[slice][xc * d + a];
                }
            }
        }
        Some((rho, m))
    }

    /// `E[f] = ρ v − m`, or `None` outside the x-grid.
    pub fn alignment_at(&self, t: f64, x: &[f64], v: &[f64]) -> Option<[f64; 2]> {
        let (rho, m) = self.moments_at(t, x)?;
        let mut e = [0.0; 2];
        for a in 0..self.grid.d() {
            e[a] = rho * v[a] - m[a];
        }
        Some(e)
    }
}

pub fn uniform_times(t_loc: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| t_loc * k as f64 / intervals as f64)
        .collect()
}

/// Linear interpolation weights between cell centers along one axis,
/// clamped to the edge centers inside the domain. `None` outside it.
fn axis_weights(lo: f64, h: f64, n: usize, x: f64) -> Option<[(usize, f64); 2]> {
    let s = (x - lo) / h;
    if !(0.0..=n as f64).contains(&s) {
        return None;
    }
    let p = s - 0.5;
    if p <= 0.0 {
        return Some([(0, 1.0), (0, 0.0)]);
    }
    if p >= (n - 1) as f64 {
        return Some([(n - 1, 1.0), (n - 1, 0.0)]);
    }
    let i = p.floor() as usize;
    let w = p - i as f64;
    Some([(i, 1.0 - w), (i + 1, w)])
}

/// Up to four `(x-cell, weight)` pairs for multilinear interpolation in x.
fn x_stencil(grid: &PhaseGrid, x: &[f64]) -> Option<[(usize, f64); 4]> {
    let (lo, h, n) = (grid.x0(), grid.dx(), grid.nx());
    let a = axis_weights(lo, h, n, x[0])?;
    if grid.d() == 1 {
        return Some([a[0], a[1], (0, 0.0), (0, 0.0)]);
    }
    let b = axis_weights(lo, h, n, x[1])?;
    let mut out = [(0, 0.0); 4];
    for (k, (i, wi)) in a.iter().enumerate() {
        for (l, (j, wj)) in b.iter().enumerate() {
            out[2 * k + l] = (i * n + j, wi * wj);
        }
    }
    Some(out)
}

/// Weights toward zero ghost cells: a value decays linearly to 0 half a
/// cell beyond the last center.
fn ghost_weights(lo: f64, h: f64, n: usize, x: f64) -> [(Option<usize>, f64); 2] {
    let p = (x - lo) / h - 0.5;
    let i = p.floor();
    let w = p - i;
    let at = |k: f64| (k >= 0.0 && k < n as f64).then_some(k as usize);
    [(at(i), 1.0 - w), (at(i + 1.0), w)]
}

/// Multilinear interpolation of `f` at `(x, v)` with zero outside the grid.
pub fn interpolate(f: &DistributionField, x: &[f64], v: &[f64]) -> f64 {
    let g = f.grid;
    let d = g.d();
    let mut axes: Vec<[(Option<usize>, f64); 2]> = Vec::with_capacity(2 * d);
    for a in 0..d {
        axes.push(ghost_weights(g.x0(), g.dx(), g.nx(), x[a]));
    }
    for a in 0..d {
        axes.push(ghost_weights(g.v_edge(0), g.dv(), g.nv(), v[a]));
    }
    let mut total = 0.0;
    for corner in 0..(1usize << (2 * d)) {
        let mut w = 1.0;
        let mut idx = [0usize; 4];
        let mut inside = true;
        for (a, ax) in axes.iter().enumerate() {
            let (i, wa) = ax[(corner >> a) & 1];
            match i {
                Some(i) if wa != 0.0 => {
                    idx[a] = i;
                    w *= wa;
                }
                _ => {
                    inside = false;
                    break;
                }
            }
        }
        if !inside {
            continue;
        }
        let (xc, vc) = if d == 1 {
            (idx[0], idx[1])
        } else {
            (idx[0] * g.nx() + idx[1], idx[2] * g.nv() + idx[3])
        };
        total += w * f.values[g.index(xc, vc)];
    }
    total
}

/// Curve endpoint together with `∫ₛᵗ ρ(τ, X(τ)) dτ` by the trapezoid rule
/// on the RK4 step endpoints.
fn trace(stack: &IterateField, x: [f64; 2], v: [f64; 2], t: f64, s: f64) -> Result<([f64; 2], [f64; 2], f64)> {
    let d = stack.grid.d();
    let gamma = stack.gamma;
    if t == s {
        return Ok((x, v, 0.0));
    }
    let spacing = stack.t_loc() / (stack.times.len() - 1).max(1) as f64;
    let n = (((t - s).abs() / spacing) * SUBSTEPS_PER_SLICE as f64).ceil().max(1.0) as usize;
    let h = (s - t) / n as f64;
    let exit = |tau: f64| KineticError::DomainExit { s: tau };
    let rhs = |tau: f64, x: &[f64; 2], v: &[f64; 2]| -> Result<([f64; 2], [f64; 2])> {
        let e = stack.alignment_at(tau, &x[..d], &v[..d]).ok_or_else(|| exit(tau))?;
        let mut dv = [0.0; 2];
        for a in 0..d {
            dv[a] = -gamma * e[a];
        }
        Ok((*v, dv))
    };
    let axpy = |z: &[f64; 2], k: &[f64; 2], c: f64| [z[0] + c * k[0], z[1] + c * k[1]];
    let rho_at = |tau: f64, x: &[f64; 2]| -> Result<f64> {
        stack.moments_at(tau, &x[..d]).map(|m| m.0).ok_or_else(|| exit(tau))
    };
    let (mut x, mut v) = (x, v);
    let mut tau = t;
    let mut integral = 0.0;
    let mut rho_prev = rho_at(tau, &x)?;
    for _ in 0..n {
        let (k1x, k1v) = rhs(tau, &x, &v)?;
        let (k2x, k2v) = rhs(tau + 0.5 * h, &axpy(&x, &k1x, 0.5 * h), &axpy(&v, &k1v, 0.5 * h))?;
        let (k3x, k3v) = rhs(tau + 0.5 * h, &axpy(&x, &k2x, 0.5 * h), &axpy(&v, &k2v, 0.5 * h))?;
        let (k4x, k4v) = rhs(tau + h, &axpy(&x, &k3x, h), &axpy(&v, &k3v, h))?;
        for a in 0..d {
            x[a] += h / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
            v[a] += h / 6.0 * (k1v[a] + 2.0 * k2v[a] + 2.0 * k3v[a] + k4v[a]);
        }
        tau += h;
        let rho = rho_at(tau, &x)?;
        integral += 0.5 * h.abs() * (rho_prev + rho);
        rho_prev = rho;
    }
    Ok((x, v, integral))
}

/// `Z_f(s, t; z)`: the curve through `(x, v)` at time `t`, evaluated at `s`.
///
/// Works in either direction; `s < t` traces backward.
pub fn solve_characteristic(stack: &IterateField, x: &[f64], v: &[f64], t: f64, s: f64) -> Result<CharState> {
    let mut x0 = [0.0; 2];
    let mut v0 = [0.0; 2];
    x0[..x.len()].copy_from_slice(x);
    v0[..v.len()].copy_from_slice(v);
    let (x, v, _) = trace(stack, x0, v0, t, s)?;
    Ok(CharState { x, v, t, s })
}

/// One application of `Γ`: the linear solution driven by the stack, at the
/// stack's own slice times.
pub fn picard_apply(stack: &IterateField, f0: &DistributionField) -> Result<IterateField> {
    let grid = stack.grid;
    if !f0.grid.same_as(&grid) {
        return Err(KineticError::GridMismatch("f0 grid differs from the stack grid".into()));
    }
    let d = grid.d() as f64;
    let gamma = stack.gamma;
    let nvc = grid.v_cells();
    let slices = stack
        .times
        .iter()
        .map(|&t| {
            let mut out = DistributionField::zeros(grid);
            out.time = t;
            out.values
                .par_chunks_mut(nvc)
                .enumerate()
                .for_each(|(xc, slice)| {
                    let x = grid.x_coords(xc);
                    for (vc, h) in slice.iter_mut().enumerate() {
                        let v = grid.v_coords(vc);
                        *h = match trace(stack, x, v, t, 0.0) {
                            Ok((xs, vs, integral)) => {
                                let base = interpolate(f0, &xs[..grid.d()], &vs[..grid.d()]);
                                if base == 0.0 {
                                    0.0
                                } else {
                                    base * (gamma * d * integral).exp()
                                }
                            }
                            Err(_) => 0.0,
                        };
                    }
                });
            out
        })
        .collect();
    IterateField::new(gamma, stack.times.clone(), slices, stack.iteration + 1)
}

/// Largest pointwise difference over every slice.
pub fn sup_distance(a: &IterateField, b: &IterateField) -> f64 {
    a.slices
        .iter()
        .zip(&b.slices)
        .flat_map(|(p, q)| p.values.iter().zip(&q.values).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Converged stack and the sup-norm increment of every iteration.
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub stack: IterateField,
    pub increments: Vec<f64>,
}

impl PicardResult {
    /// `increment[n+1] / increment[n]` for every consecutive pair.
    pub fn ratios(&self) -> Vec<f64> {
        self.increments
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }
}

/// Iterates `f⁽ⁿ⁺¹⁾ = Γ f⁽ⁿ⁾` from the constant stack until the sup-norm
/// increment falls below `tol`.
pub fn picard_fixed_point(
    f0: &DistributionField,
    gamma: f64,
    t_loc: f64,
    intervals: usize,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    if !(t_loc > 0.0) || intervals == 0 {
        return Err(KineticError::Validation(format!(
            "need T_loc > 0 and at least one interval, got {t_loc} and {intervals}"
        )));
    }
    let mut stack = IterateField::constant(f0, gamma, t_loc, intervals)?;
    let mut increments = Vec::new();
    for _ in 0..max_iter {
        let next = picard_apply(&stack, f0)?;
        let inc = sup_distance(&next, &stack);
        increments.push(inc);
        stack = next;
        if inc < tol {
            return Ok(PicardResult { stack, increments });
        }
    }
    Err(KineticError::NoConvergence {
        iterations: max_iter,
        last_increment: increments.last().copied().unwrap_or(f64::NAN),
        increments,
    })
}

/// [`picard_fixed_point`] that halves `T_loc` after each failure, up to
/// `halvings` times. Returns the horizon that converged.
pub fn picard_adaptive(
    f0: &DistributionField,
    gamma: f64,
    t_loc: f64,
    intervals: usize,
    tol: f64,
    max_iter: usize,
    halvings: usize,
) -> Result<(f64, PicardResult)> {
    let mut horizon = t_loc;
    let mut attempt = 0;
    loop {
        match picard_fixed_point(f0, gamma, horizon, intervals, tol, max_iter) {
            Ok(r) => return Ok((horizon, r)),
            Err(e @ KineticError::NoConvergence { .. }) if attempt >= halvings => return Err(e),
            Err(KineticError::NoConvergence { .. }) => {
                horizon *= 0.5;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// `n,increment` rows.
pub fn increments_csv(increments: &[f64]) -> String {
    let mut s = String::from("n,increment\n");
    for (n, inc) in increments.iter().enumerate() {
        s.push_str(&format!("{},{:e}\n", n + 1, inc));
    }
    s
}

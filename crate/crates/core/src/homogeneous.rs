//! Spatially homogeneous dynamics `∂t f = γ ∇v·((m v − p) f)`.
//!
//! The flow is explicit: velocities contract about the mean `v̄ = p/m` at
//! rate `γ m` while the density grows at rate `γ m d`. The same flow, frozen
//! per spatial cell with `(m, v̄) ↦ (ρ(x), u(x))`, is the exact alignment
//! substep of the splitting solver.

use crate::error::{KineticError, Result};
use crate::phasegrid::{DistributionField, PhaseGrid};
use crate::remap::{remap_line, restore_first_moment, Limiter};

/// Homogeneous initial state: coupling, dimension, mass, momentum and profile.
#[derive(Clone)]
pub struct HomogeneousState<F> {
    pub gamma: f64,
    pub d: usize,
    pub mass: f64,
    pub momentum: [f64; 2],
    pub vbar: [f64; 2],
    pub f0: F,
}

impl<F: Fn([f64; 2]) -> f64> HomogeneousState<F> {
    pub fn new(gamma: f64, d: usize, mass: f64, momentum: &[f64], f0: F) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(KineticError::Validation(format!("dimension must be 1 or 2, got {d}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(KineticError::Validation(format!("mass must be positive, got {mass}")));
        }
        if momentum.len() != d {
            return Err(KineticError::Validation("momentum length must equal d".into()));
        }
        let mut p = [0.0; 2];
        let mut vbar = [0.0; 2];
        for a in 0..d {
            p[a] = momentum[a];
            vbar[a] = momentum[a] / mass;
        }
        Ok(Self {
            gamma,
            d,
            mass,
            momentum: p,
            vbar,
            f0,
        })
    }

    /// Contraction rate `γ m` of velocities about `v̄`.
    pub fn rate(&self) -> f64 {
        self.gamma * self.mass
    }

    /// `f(t, v) = e^{γ m d t} f0(v̄ + e^{γ m t}(v − v̄))`.
    pub fn exact_solution(&self, t: f64, v: [f64; 2]) -> f64 {
        let k = self.rate();
        let stretch = (k * t).exp();
        let mut w = [0.0; 2];
        for a in 0..self.d {
            w[a] = self.vbar[a] + stretch * (v[a] - self.vbar[a]);
        }
        (k * self.d as f64 * t).exp() * (self.f0)(w)
    }

    /// Samples the solution at time `t` on every cell of `grid` (constant in x).
    pub fn sample(&self, grid: PhaseGrid, t: f64) -> DistributionField
    where
        F: Sync,
    {
        DistributionField::from_fn(grid, t, |_, v| self.exact_solution(t, v))
    }
}

/// `f0(v)` sampled as a free function; see [`HomogeneousState::exact_solution`].
pub fn exact_solution<F: Fn([f64; 2]) -> f64>(state: &HomogeneousState<F>, t: f64, v: [f64; 2]) -> f64 {
    state.exact_solution(t, v)
}

/// Integrals of `f0` that seed the closed-form observable laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileStats {
    pub linf: f64,
    /// Support radius about `v̄`.
    pub r0: f64,
    /// `∫ |v − v̄|² f0`.
    pub central_energy: f64,
    /// `∫ f0 log f0`.
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactObservables {
    pub linf: f64,
    pub r: f64,
    pub energy: f64,
    pub entropy: f64,
}

/// Closed-form `‖f‖∞`, support radius, energy and entropy at time `t`.
pub fn exact_observables<F>(state: &HomogeneousState<F>, stats: &ProfileStats, t: f64) -> ExactObservables {
    let k = state.gamma * state.mass;
    let d = state.d as f64;
    let vbar2: f64 = state.vbar[..state.d].iter().map(|c| c * c).sum();
    ExactObservables {
        linf: (k * d * t).exp() * stats.linf,
        r: (-k * t).exp() * stats.r0,
        energy: state.mass * vbar2 + (-2.0 * k * t).exp() * stats.central_energy,
        entropy: stats.entropy + k * state.mass * d * t,
    }
}

/// Index window `[lo, hi)` per velocity axis that contains the nonzero part of a slice.
pub type VelocityWindow = [(usize, usize); 2];

/// Full velocity window of `grid`.
pub fn full_window(grid: &PhaseGrid) -> VelocityWindow {
    let n = grid.nv();
    if grid.d() == 1 {
        [(0, n), (0, 1)]
    } else {
        [(0, n), (0, n)]
    }
}

/// Exact homogeneous evolution of one velocity slice over `dt`.
///
/// See [`alignment_substep_in`]; this variant scans the whole slice.
pub fn alignment_substep(
    grid: &PhaseGrid,
    slice: &mut [f64],
    rho: f64,
    u: &[f64],
    gamma: f64,
    dt: f64,
    limiter: Limiter,
) -> usize {
    alignment_substep_in(grid, slice, full_window(grid), rho, u, gamma, dt, limiter)
}

/// Exact homogeneous evolution of one velocity slice over `dt`, restricted to
/// a window outside of which the slice vanishes.
///
/// Velocities contract about `u` by `λ = e^{−γ ρ dt}`. Each axis is swept
/// with the conservative remap of cell masses under the affine map, then the
/// first moment of every swept line is set to its exact image
/// `u M + λ (P − u M)`, so mass and momentum are kept to round-off. The
/// density gain `λ^{−d}` follows from the contraction itself. Sweeps are
/// subcycled when an edge would move by more than one cell; this is exact
/// because the flow leaves `ρ` and `u` invariant. Returns the subcycle count.
#[allow(clippy::too_many_arguments)]
pub fn alignment_substep_in(
    grid: &PhaseGrid,
    slice: &mut [f64],
    window: VelocityWindow,
    rho: f64,
    u: &[f64],
    gamma: f64,
    dt: f64,
    limiter: Limiter,
) -> usize {
    let k = gamma * rho * dt;
    if !(k > 0.0) || !k.is_finite() {
        return 0;
    }
    let nv = grid.nv();
    let dv = grid.dv();
    let mut buf = LineBuffers::default();
    match grid.d() {
        1 => {
            let (lo, hi) = window[0];
            contract_line(&mut slice[lo..hi], &mut buf, grid.v_center(lo), dv, u[0], k, limiter)
        }
        _ => {
            let (a0, a1) = window[0];
            let (b0, b1) = window[1];
            let mut subs = 0;
            for j1 in a0..a1 {
                let row = &mut slice[j1 * nv + b0..j1 * nv + b1];
                subs = subs.max(contract_line(row, &mut buf, grid.v_center(b0), dv, u[1], k, limiter));
            }
            let mut col = vec![0.0; a1 - a0];
            for j2 in b0..b1 {
                for (c, j1) in col.iter_mut().zip(a0..a1) {
                    *c = slice[j1 * nv + j2];
                }
                subs = subs.max(contract_line(&mut col, &mut buf, grid.v_center(a0), dv, u[0], k, limiter));
                for (c, j1) in col.iter().zip(a0..a1) {
                    slice[j1 * nv + j2] = *c;
                }
            }
            subs
        }
    }
}

#[derive(Default)]
struct LineBuffers {
    out: Vec<f64>,
}

/// Contracts one line about `center` by `e^{−k}`; `first` is the velocity of its first cell.
fn contract_line(
    line: &mut [f64],
    buf: &mut LineBuffers,
    first: f64,
    dv: f64,
    center: f64,
    k: f64,
    limiter: Limiter,
) -> usize {
    let n = line.len();
    if n == 0 {
        return 0;
    }
    let (Some(p0), Some(p1)) = (
        line.iter().position(|&v| v != 0.0),
        line.iter().rposition(|&v| v != 0.0),
    ) else {
        return 0;
    };
    // keep the contraction center inside the worked range so no mass leaves it
    let cg = ((center - first) / dv).round();
    let cg = cg.clamp(0.0, (n - 1) as f64) as usize;
    let (p0, p1) = (p0.min(cg), p1.max(cg));
    let line = &mut line[p0..=p1];
    let n = line.len();
    let first = first + p0 as f64 * dv;
    // center in index units; lower edge of local cell e sits at e − ½
    let c = (center - first) / dv;
    let reach = (c + 0.5).abs().max((n as f64 - 0.5 - c).abs());
    let total = k.exp() - 1.0;
    let subs = ((reach * total) / 0.95).ceil().max(1.0) as usize;
    let ks = k / subs as f64;
    let lambda = (-ks).exp();
    let grow = ks.exp() - 1.0;
    buf.out.resize(n, 0.0);
    for _ in 0..subs {
        let (mut mass, mut first_moment) = (0.0, 0.0);
        for (e, &v) in line.iter().enumerate() {
            mass += v;
            first_moment += e as f64 * v;
        }
        let target = c * mass + lambda * (first_moment - c * mass);
        let out = &mut buf.out[..n];
        // preimage of edge y is c + (y − c)/λ; swept width (y − preimage)
        remap_line(line, out, limiter, |e| -(e as f64 - 0.5 - c) * grow);
        line.copy_from_slice(out);
        restore_first_moment(line, target);
    }
    subs
}

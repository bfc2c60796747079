//! Rescaled Cucker–Smale particles under the moderate-interaction scaling
//! `N ε^d = 1`, and their binned empirical measures.

use std::collections::HashMap;
use std::str::FromStr;

use rand::Rng;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KineticError, Result};
use crate::phasegrid::{DistributionField, PhaseGrid};
use crate::solver::PatchSpec;

/// Radial weight profile `ψ(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// `1_{r < R}`
    #[default]
    Indicator,
    /// `(1 − r / R)₊`
    Triangular,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "indicator" => Ok(Shape::Indicator),
            "triangular" => Ok(Shape::Triangular),
            other => Err(format!("unknown weight shape `{other}` (expected indicator or triangular)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Psi {
    pub shape: Shape,
    pub radius: f64,
}

impl Default for Psi {
    fn default() -> Self {
        Self {
            shape: Shape::Indicator,
            radius: 1.0,
        }
    }
}

impl Psi {
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match self.shape {
            Shape::Indicator => {
                if r < self.radius {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Triangular => (1.0 - r / self.radius).max(0.0),
        }
    }

    /// `∫_{ℝ^d} ψ(|z|) dz` in closed form.
    pub fn integral(&self, d: usize) -> f64 {
        let r = self.radius;
        match (self.shape, d) {
            (Shape::Indicator, 1) => 2.0 * r,
            (Shape::Indicator, _) => std::f64::consts::PI * r * r,
            (Shape::Triangular, 1) => r,
            (Shape::Triangular, _) => std::f64::consts::PI * r * r / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingCalibration {
    pub gamma_target: f64,
    pub kappa: f64,
    pub psi_integral: f64,
}

/// `κ = γ / ∫ψ`, so that the mean-field coupling equals `γ`.
pub fn calibrate_kappa(gamma_target: f64, psi: Psi, d: usize) -> Result<CouplingCalibration> {
    let psi_integral = psi.integral(d);
    if !(psi_integral > 0.0) {
        return Err(KineticError::ZeroWeight);
    }
    Ok(CouplingCalibration {
        gamma_target,
        kappa: gamma_target / psi_integral,
        psi_integral,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub d: usize,
    pub x: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub eps: f64,
    pub kappa: f64,
    pub psi: Psi,
    pub time: f64,
}

impl ParticleEnsemble {
    /// Ensemble with `ε = N^{-1/d}` and `κ` calibrated to `gamma`.
    pub fn new(d: usize, x: Vec<[f64; 2]>, v: Vec<[f64; 2]>, gamma: f64, psi: Psi) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(KineticError::Validation(format!("dimension must be 1 or 2, got {d}")));
        }
        if x.len() != v.len() {
            return Err(KineticError::Validation(format!(
                "{} positions for {} velocities",
                x.len(),
                v.len()
            )));
        }
        if !(psi.radius > 0.0) {
            return Err(KineticError::ZeroWeight);
        }
        let n = x.len().max(1) as f64;
        let eps = n.powf(-1.0 / d as f64);
        let kappa = calibrate_kappa(gamma, psi, d)?.kappa;
        Ok(Self {
            d,
            x,
            v,
            eps,
            kappa,
            psi,
            time: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn momentum(&self) -> [f64; 2] {
        self.v.iter().fold([0.0; 2], |a, v| [a[0] + v[0], a[1] + v[1]])
    }

    /// `max_i |v_i − v̄|`.
    pub fn velocity_diameter(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let m = self.momentum();
        let n = self.len() as f64;
        let mean = [m[0] / n, m[1] / n];
        self.v
            .iter()
            .map(|v| ((v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    /// Time step `min(10⁻³, ε / (4 max|v|))`.
    pub fn default_dt(&self) -> f64 {
        let s = self.max_speed();
        if s > 0.0 {
            (self.eps / (4.0 * s)).min(1e-3)
        } else {
            1e-3
        }
    }

    fn range(&self) -> f64 {
        self.eps * self.psi.radius
    }
}

#[inline]
fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform cell list with cells of side `h`.
struct CellList {
    h: f64,
    cells: HashMap<[i64; 2], Vec<usize>>,
}

impl CellList {
    fn new(x: &[[f64; 2]], h: f64) -> Self {
        let mut cells: HashMap<[i64; 2], Vec<usize>> = HashMap::new();
        for (i, p) in x.iter().enumerate() {
            cells.entry(Self::key(p, h)).or_default().push(i);
        }
        Self { h, cells }
    }

    fn key(p: &[f64; 2], h: f64) -> [i64; 2] {
        [(p[0] / h).floor() as i64, (p[1] / h).floor() as i64]
    }

    /// Candidates within one cell of `p`, in increasing index order.
    fn neighbours(&self, p: &[f64; 2], d: usize, out: &mut Vec<usize>) {
        out.clear();
        let k = Self::key(p, self.h);
        let span1 = if d == 2 { -1..=1 } else { 0..=0 };
        for a in -1..=1 {
            for b in span1.clone() {
                if let Some(list) = self.cells.get(&[k[0] + a, k[1] + b]) {
                    out.extend_from_slice(list);
                }
            }
        }
        out.sort_unstable();
    }
}

fn pair_term(ens: &ParticleEnsemble, i: usize, j: usize) -> Option<[f64; 2]> {
    if i == j {
        return None;
    }
    let w = ens.psi.value(dist(&ens.x[i], &ens.x[j]) / ens.eps);
    if w == 0.0 {
        return None;
    }
    Some([w * (ens.v[j][0] - ens.v[i][0]), w * (ens.v[j][1] - ens.v[i][1])])
}

/// `a_i = κ Σ_j ψ(|x_j − x_i| / ε)(v_j − v_i)` by direct summation.
pub fn rcs_rhs_brute(ens: &ParticleEnsemble) -> Vec<[f64; 2]> {
    (0..ens.len())
        .into_par_iter()
        .map(|i| {
            let mut a = [0.0; 2];
            for j in 0..ens.len() {
                if let Some(t) = pair_term(ens, i, j) {
                    a[0] += t[0];
                    a[1] += t[1];
                }
            }
            [ens.kappa * a[0], ens.kappa * a[1]]
        })
        .collect()
}

/// Same sums as [`rcs_rhs_brute`] in the same order, found through a cell
/// list, so the two agree bit for bit.
pub fn rcs_rhs(ens: &ParticleEnsemble) -> Vec<[f64; 2]> {
    let cells = CellList::new(&ens.x, ens.range());
    (0..ens.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            cells.neighbours(&ens.x[i], ens.d, buf);
            let mut a = [0.0; 2];
            for &j in buf.iter() {
                if let Some(t) = pair_term(ens, i, j) {
                    a[0] += t[0];
                    a[1] += t[1];
                }
            }
            [ens.kappa * a[0], ens.kappa * a[1]]
        })
        .collect()
}

/// One classical RK4 step of `ẋ = v`, `v̇ = a(x, v)`.
pub fn step_rk4(ens: &mut ParticleEnsemble, dt: f64) {
    let n = ens.len();
    let x0 = ens.x.clone();
    let v0 = ens.v.clone();
    let mut stage = ens.clone();
    let mut kx: Vec<[[f64; 2]; 4]> = vec![[[0.0; 2]; 4]; n];
    let mut kv: Vec<[[f64; 2]; 4]> = vec![[[0.0; 2]; 4]; n];
    let coeff = [0.0, 0.5, 0.5, 1.0];
    for s in 0..4 {
        if s > 0 {
            let c = coeff[s] * dt;
            for i in 0..n {
                for a in 0..2 {
                    stage.x[i][a] = x0[i][a] + c * kx[i][s - 1][a];
                    stage.v[i][a] = v0[i][a] + c * kv[i][s - 1][a];
                }
            }
        }
        let acc = rcs_rhs(&stage);
        for i in 0..n {
            kx[i][s] = stage.v[i];
            kv[i][s] = acc[i];
        }
    }
    for i in 0..n {
        for a in 0..2 {
            ens.x[i][a] = x0[i][a] + dt / 6.0 * (kx[i][0][a] + 2.0 * kx[i][1][a] + 2.0 * kx[i][2][a] + kx[i][3][a]);
            ens.v[i][a] = v0[i][a] + dt / 6.0 * (kv[i][0][a] + 2.0 * kv[i][1][a] + 2.0 * kv[i][2][a] + kv[i][3][a]);
        }
    }
    ens.time += dt;
}

/// `∫₀^dt ψ(|Δx + Δv s| / ε) ds` for a pair in straight-line flight.
fn exposure(psi: Psi, eps: f64, dx: [f64; 2], dv: [f64; 2], dt: f64) -> f64 {
    let r = psi.radius * eps;
    let a = dv[0] * dv[0] + dv[1] * dv[1];
    let b = dx[0] * dv[0] + dx[1] * dv[1];
    let c = dx[0] * dx[0] + dx[1] * dx[1] - r * r;
    // times where |Δx + Δv s| < r
    let (lo, hi) = if a == 0.0 {
        if c < 0.0 {
            (0.0, dt)
        } else {
            return 0.0;
        }
    } else {
        let disc = b * b - a * c;
        if disc <= 0.0 {
            return 0.0;
        }
        let root = disc.sqrt();
        ((-b - root) / a, (-b + root) / a)
    };
    let (lo, hi) = (lo.max(0.0), hi.min(dt));
    if hi <= lo {
        return 0.0;
    }
    match psi.shape {
        Shape::Indicator => hi - lo,
        Shape::Triangular => {
            // ψ along the path is 1 − |q(s)| / r with q affine; Simpson on
            // each side of the closest approach
            let closest = if a > 0.0 { (-b / a).clamp(lo, hi) } else { lo };
            let f = |s: f64| psi.value(((dx[0] + dv[0] * s).hypot(dx[1] + dv[1] * s)) / eps);
            let simpson = |p: f64, q: f64| {
                let m = 16;
                let h = (q - p) / m as f64;
                let mut acc = f(p) + f(q);
                for k in 1..m {
                    acc += f(p + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc * h / 3.0
            };
            simpson(lo, closest) + simpson(closest, hi)
        }
    }
}

/// One step in which every pair exchanges velocity in proportion to its
/// exact straight-line exposure `∫ψ ds` within the step, then all particles
/// fly freely. Contacts shorter than `dt` are never skipped, and each pair
/// update is antisymmetric, so `Σ v_i` is kept.
pub fn step_contact(ens: &mut ParticleEnsemble, dt: f64) {
    let n = ens.len();
    if n == 0 {
        return;
    }
    let range = ens.range();
    let spread = 2.0 * ens.velocity_diameter();
    let reach = range + spread * dt;
    let (psi, eps, kappa) = (ens.psi, ens.eps, ens.kappa);
    let mut delta = vec![[0.0; 2]; n];
    {
        let (x, v) = (&ens.x, &ens.v);
        let mut visit = |i: usize, j: usize| {
            let dx = [x[j][0] - x[i][0], x[j][1] - x[i][1]];
            let dv = [v[j][0] - v[i][0], v[j][1] - v[i][1]];
            // cannot close the gap within the step
            if dx[0].hypot(dx[1]) - range > dv[0].hypot(dv[1]) * dt {
                return;
            }
            let w = kappa * exposure(psi, eps, dx, dv, dt);
            if w > 0.0 {
                for a in 0..2 {
                    delta[i][a] += w * dv[a];
                    delta[j][a] -= w * dv[a];
                }
            }
        };
        if ens.d == 1 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by(|&a, &b| x[a][0].total_cmp(&x[b][0]));
            for (k, &i) in order.iter().enumerate() {
                for &j in &order[k + 1..] {
                    if x[j][0] - x[i][0] > reach {
                        break;
                    }
                    visit(i, j);
                }
            }
        } else {
            let cells = CellList::new(x, reach.max(f64::MIN_POSITIVE));
            let mut buf = Vec::new();
            for i in 0..n {
                cells.neighbours(&x[i], 2, &mut buf);
                for &j in buf.iter().filter(|&&j| j > i) {
                    visit(i, j);
                }
            }
        }
    }
    for i in 0..n {
        for a in 0..2 {
            ens.x[i][a] += ens.v[i][a] * dt;
            ens.v[i][a] += delta[i][a];
        }
    }
    ens.time += dt;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Contact,
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rk4" => Ok(Integrator::Rk4),
            "contact" => Ok(Integrator::Contact),
            other => Err(format!("unknown integrator `{other}` (expected rk4 or contact)")),
        }
    }
}

pub fn step(ens: &mut ParticleEnsemble, dt: f64, integrator: Integrator) {
    match integrator {
        Integrator::Rk4 => step_rk4(ens, dt),
        Integrator::Contact => step_contact(ens, dt),
    }
}

/// `n` i.i.d. points uniform on the patch, from a seeded SplitMix64 stream.
pub fn sample_patch(spec: &PatchSpec, d: usize, n: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let half = 0.5 * spec.side;
    let mut x = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = [0.0; 2];
        let mut q = [0.0; 2];
        for a in 0..d {
            p[a] = spec.center_x[a] + half * (2.0 * rng.gen::<f64>() - 1.0);
        }
        for a in 0..d {
            q[a] = spec.center_v[a] + half * (2.0 * rng.gen::<f64>() - 1.0);
        }
        x.push(p);
        v.push(q);
    }
    (x, v)
}

/// Cloud-in-cell weights along one axis; weight falling past the outer
/// centers is folded onto the edge cell. `None` outside the axis range.
fn cic(lo: f64, h: f64, n: usize, p: f64) -> Option<[(usize, f64); 2]> {
    let s = (p - lo) / h;
    if !(0.0..n as f64).contains(&s) {
        return None;
    }
    let q = s - 0.5;
    if q <= 0.0 {
        return Some([(0, 1.0), (0, 0.0)]);
    }
    if q >= (n - 1) as f64 {
        return Some([(n - 1, 1.0), (n - 1, 0.0)]);
    }
    let i = q.floor() as usize;
    let w = q - i as f64;
    Some([(i, 1.0 - w), (i + 1, w)])
}

/// Binned empirical density and the number of particles outside the grid.
pub fn bin_empirical(ens: &ParticleEnsemble, grid: PhaseGrid) -> Result<(DistributionField, usize)> {
    if grid.d() != ens.d {
        return Err(KineticError::GridMismatch(format!(
            "grid dimension {} differs from ensemble dimension {}",
            grid.d(),
            ens.d
        )));
    }
    let d = grid.d();
    let mut f = DistributionField::zeros(grid);
    f.time = ens.time;
    if ens.is_empty() {
        return Ok((f, 0));
    }
    let w0 = 1.0 / (ens.len() as f64 * grid.cell_volume());
    let mut outside = 0;
    for (x, v) in ens.x.iter().zip(&ens.v) {
        let mut axes = Vec::with_capacity(2 * d);
        let mut inside = true;
        for a in 0..d {
            match cic(grid.x0(), grid.dx(), grid.nx(), x[a]) {
                Some(w) => axes.push(w),
                None => inside = false,
            }
        }
        for a in 0..d {
            match cic(grid.v0(), grid.dv(), grid.nv(), v[a]) {
                Some(w) => axes.push(w),
                None => inside = false,
            }
        }
        if !inside {
            outside += 1;
            continue;
        }
        for corner in 0..(1usize << (2 * d)) {
            let mut w = w0;
            let mut idx = [0usize; 4];
            for (a, ax) in axes.iter().enumerate() {
                let (i, wa) = ax[(corner >> a) & 1];
                idx[a] = i;
                w *= wa;
            }
            if w == 0.0 {
                continue;
            }
            let (xc, vc) = if d == 1 {
                (idx[0], idx[1])
            } else {
                (idx[0] * grid.nx() + idx[1], idx[2] * grid.nv() + idx[3])
            };
            f.values[grid.index(xc, vc)] += w;
        }
    }
    Ok((f, outside))
}

/// L¹ distance between each binned field and the kinetic field at the same time.
pub fn compare_to_kinetic(binned: &[DistributionField], kinetic: &[DistributionField]) -> Result<Vec<f64>> {
    if binned.len() != kinetic.len() {
        return Err(KineticError::GridMismatch(format!(
            "{} empirical fields for {} kinetic fields",
            binned.len(),
            kinetic.len()
        )));
    }
    binned
        .iter()
        .zip(kinetic)
        .map(|(a, b)| {
            if (a.time - b.time).abs() > 1e-9 * a.time.abs().max(1.0) {
                return Err(KineticError::GridMismatch(format!(
                    "times differ: {} vs {}",
                    a.time, b.time
                )));
            }
            a.l1_distance(b)
        })
        .collect()
}

/// One `particles_obs.csv` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleRow {
    pub t: f64,
    pub momentum: [f64; 2],
    pub vel_diameter: f64,
}

impl ParticleRow {
    pub fn of(ens: &ParticleEnsemble) -> Self {
        Self {
            t: ens.time,
            momentum: ens.momentum(),
            vel_diameter: ens.velocity_diameter(),
        }
    }
}

pub fn particles_csv(d: usize, rows: &[ParticleRow]) -> String {
    let mut s = String::from(if d == 1 { "t,mom_1,vel_diameter\n" } else { "t,mom_1,mom_2,vel_diameter\n" });
    for r in rows {
        if d == 1 {
            s.push_str(&format!("{:e},{:e},{:e}\n", r.t, r.momentum[0], r.vel_diameter));
        } else {
            s.push_str(&format!("{:e},{:e},{:e},{:e}\n", r.t, r.momentum[0], r.momentum[1], r.vel_diameter));
        }
    }
    s
}

/// One `convergence.csv` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub l1_distance: f64,
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("N,t,l1_distance\n");
    for r in rows {
        s.push_str(&format!("{},{:e},{:e}\n", r.n, r.t, r.l1_distance));
    }
    s
}

/// Integrates to `t_final` with `dt`, recording a row every `sample_every` steps.
pub fn simulate(
    ens: &mut ParticleEnsemble,
    dt: f64,
    t_final: f64,
    integrator: Integrator,
    sample_every: usize,
) -> Vec<ParticleRow> {
    let steps = (t_final / dt).round() as usize;
    let t0 = ens.time;
    let mut rows = vec![ParticleRow::of(ens)];
    for k in 1..=steps {
        step(ens, dt, integrator);
        ens.time = t0 + k as f64 * dt;
        if k % sample_every.max(1) == 0 || k == steps {
            rows.push(ParticleRow::of(ens));
        }
    }
    rows
}

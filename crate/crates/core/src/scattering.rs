//! Free-transport pullbacks `U₀(−t) f(t)`, their L¹ Cauchy residuals and
//! the Duhamel tail that bounds the distance to the scattering state.

use crate::error::{KineticError, Result};
use crate::phasegrid::{moments, DistributionField, MomentField};
use crate::remap::{remap_line, Limiter};
use crate::solver::{lattice_offset, TransportScheme};

/// Clipped mass above this fraction of the field mass is an error.
pub const CLIP_TOL_REL: f64 = 1e-10;

/// A field expressed in pullback coordinates, `g(x, v) = f(t, x + v t, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackField {
    pub field: DistributionField,
    pub t: f64,
}

/// How a one-shot free-transport shift is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRule {
    /// Integer cell move plus one fractional limited remap.
    Remap(Limiter),
    /// Whole-cell move by `round(v t / dx)`, the inverse of lattice transport.
    Lattice,
}

impl From<Limiter> for ShiftRule {
    fn from(l: Limiter) -> Self {
        ShiftRule::Remap(l)
    }
}

impl ShiftRule {
    /// The rule that exactly matches a solver's transport scheme.
    pub fn matching(scheme: TransportScheme, limiter: Limiter) -> Self {
        match scheme {
            TransportScheme::Remap => ShiftRule::Remap(limiter),
            TransportScheme::Lattice => ShiftRule::Lattice,
        }
    }
}

/// Shifts every row along each spatial axis by `sign · v t`, returning the
/// mass that left the grid.
fn shift(f: &mut DistributionField, t: f64, sign: f64, rule: ShiftRule) -> f64 {
    let g = f.grid;
    let d = g.d();
    let nx = g.nx();
    let nvc = g.v_cells();
    let dx = g.dx();
    let mut clipped = 0.0;
    let mut row = vec![0.0; nx];
    let mut tmp = vec![0.0; nx];
    let mut out = vec![0.0; nx];
    for axis in 0..d {
        // stride of this spatial axis in units of x-cells
        let xs = if d == 2 && axis == 0 { nx } else { 1 };
        let others = g.x_cells() / nx;
        for other in 0..others {
            let base_x = if d == 1 {
                0
            } else if axis == 0 {
                other
            } else {
                other * nx
            };
            for vc in 0..nvc {
                let v = g.v_coords(vc)[axis];
                let (whole, frac) = match rule {
                    ShiftRule::Remap(_) => {
                        let disp = sign * v * t / dx;
                        (disp.floor() as i64, disp - disp.floor())
                    }
                    ShiftRule::Lattice => (sign as i64 * lattice_offset(v, t, dx), 0.0),
                };
                for i in 0..nx {
                    row[i] = f.values[g.index(base_x + i * xs, vc)];
                }
                if row.iter().all(|&x| x == 0.0) {
                    continue;
                }
                tmp.iter_mut().for_each(|x| *x = 0.0);
                for i in 0..nx {
                    let j = i as i64 + whole;
                    if j >= 0 && (j as usize) < nx {
                        tmp[j as usize] = row[i];
                    } else {
                        clipped += row[i];
                    }
                }
                let shifted = match rule {
                    ShiftRule::Remap(limiter) if frac != 0.0 => {
                        clipped += remap_line(&tmp, &mut out, limiter, |_| frac).total();
                        &out
                    }
                    _ => &tmp,
                };
                for i in 0..nx {
                    f.values[g.index(base_x + i * xs, vc)] = shifted[i].max(0.0);
                }
            }
        }
    }
    clipped * g.cell_volume()
}

/// `U₀(t) f`: exact-displacement free transport in one shot.
pub fn free_transport(f: &DistributionField, t: f64, rule: impl Into<ShiftRule>) -> Result<DistributionField> {
    let mut out = f.clone();
    let mass = f.mass();
    let clipped = shift(&mut out, t, 1.0, rule.into());
    if clipped > CLIP_TOL_REL * mass.max(f64::MIN_POSITIVE) {
        return Err(KineticError::SupportClipped { clipped_mass: clipped });
    }
    out.time = f.time + t;
    Ok(out)
}

/// `U₀(−t) f(t)`.
pub fn pullback(f: &DistributionField, t: f64, rule: impl Into<ShiftRule>) -> Result<PullbackField> {
    let mut out = f.clone();
    let mass = f.mass();
    let clipped = shift(&mut out, t, -1.0, rule.into());
    if clipped > CLIP_TOL_REL * mass.max(f64::MIN_POSITIVE) {
        return Err(KineticError::SupportClipped { clipped_mass: clipped });
    }
    out.time = 0.0;
    Ok(PullbackField { field: out, t })
}

/// `‖g₁ − g₂‖_{L¹}`.
pub fn cauchy_residual(g1: &PullbackField, g2: &PullbackField) -> Result<f64> {
    g1.field.l1_distance(&g2.field)
}

/// One-shot round-trip error `‖U₀(−t) U₀(t) f − f‖₁` of the shift itself.
pub fn roundtrip_error(f: &DistributionField, t: f64, rule: impl Into<ShiftRule>) -> Result<f64> {
    let rule = rule.into();
    let there = free_transport(f, t, rule)?;
    let back = pullback(&there, t, rule)?;
    let mut f0 = f.clone();
    f0.time = 0.0;
    back.field.l1_distance(&f0)
}

/// `‖d ρ f + E·∇v f‖_{L¹}` with centered velocity differences, i.e. the
/// L¹ norm of `∇v·(E f)` (without the factor `γ`).
pub fn nonlinear_l1(f: &DistributionField, m: &MomentField) -> f64 {
    let g = f.grid;
    let d = g.d();
    let nv = g.nv();
    let inv2dv = 0.5 / g.dv();
    let mut total = 0.0;
    for xc in 0..g.x_cells() {
        let rho = m.rho[xc];
        if rho == 0.0 {
            continue;
        }
        let mom = m.mom_at(xc);
        let s = f.slice(xc);
        let at = |j: [isize; 2]| -> f64 {
            if j[0] < 0 || j[0] >= nv as isize || j[1] < 0 || j[1] >= nv as isize {
                0.0
            } else if d == 1 {
                s[j[0] as usize]
            } else {
                s[j[0] as usize * nv + j[1] as usize]
            }
        };
        for vc in 0..g.v_cells() {
            let vm = g.v_multi(vc);
            let v = g.v_coords(vc);
            let j = [vm[0] as isize, vm[1] as isize];
            let fv = s[vc];
            let mut term = d as f64 * rho * fv;
            for a in 0..d {
                let (mut lo, mut hi) = (j, j);
                lo[a] -= 1;
                hi[a] += 1;
                let grad = (at(hi) - at(lo)) * inv2dv;
                term += (rho * v[a] - mom[a]) * grad;
            }
            total += term.abs();
        }
    }
    total * g.cell_volume()
}

/// `‖∇v·(E f)‖₁` of a field.
pub fn nonlinear_l1_of(f: &DistributionField) -> f64 {
    nonlinear_l1(f, &moments(f))
}

/// Velocity-section diameter envelope `h(τ) = min{2R₀, 2R₀/τ}`.
fn h(r0: f64, tau: f64) -> f64 {
    crate::phasegrid::diameter_bound(r0, tau)
}

/// Samples `(τ, ‖∇v·(E f)(τ)‖₁)` of one run and the tail built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelSeries {
    pub gamma: f64,
    pub d: usize,
    pub r0: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Tail estimate at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    /// `∫_t^{T_end} γ N(τ) dτ` by the trapezoid rule.
    pub measured: f64,
    /// `∫_{T_end}^∞` of the fitted envelope; infinite when `d = 1`.
    pub extrapolated: f64,
}

impl TailEstimate {
    pub fn total(&self) -> f64 {
        self.measured + self.extrapolated
    }
}

impl DuhamelSeries {
    pub fn new(gamma: f64, d: usize, r0: f64, samples: Vec<(f64, f64)>) -> Self {
        Self {
            gamma,
            d,
            r0,
            samples,
        }
    }

    /// The envelope integral is finite only for `d ≥ 2`.
    pub fn theory_applies(&self) -> bool {
        self.d >= 2
    }

    fn value_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].0 {
            return s[0].1;
        }
        for w in s.windows(2) {
            if t <= w[1].0 {
                let r = (t - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + r * (w[1].1 - w[0].1);
            }
        }
        s[s.len() - 1].1
    }

    /// `∫_{t1}^{t2} γ N(τ) dτ` by the trapezoid rule on the samples.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        if self.samples.len() < 2 || t2 <= t1 || self.gamma == 0.0 {
            return 0.0;
        }
        let mut pts: Vec<(f64, f64)> = vec![(t1, self.value_at(t1))];
        pts.extend(self.samples.iter().copied().filter(|&(t, _)| t > t1 && t < t2));
        pts.push((t2, self.value_at(t2)));
        let s: f64 = pts
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        self.gamma * s
    }

    /// `C h^d(τ) + C (1 + τ) h^{d+1}(τ)` with unit `C`.
    pub fn envelope(&self, tau: f64) -> f64 {
        let hh = h(self.r0, tau);
        hh.powi(self.d as i32) + (1.0 + tau) * hh.powi(self.d as i32 + 1)
    }

    /// `∫_T^∞` of the unit envelope (closed form for `T ≥ 1`).
    fn envelope_tail(&self, t_end: f64) -> f64 {
        if self.d < 2 {
            return f64::INFINITY;
        }
        let a = 2.0 * self.r0;
        let t = t_end.max(1.0);
        // before τ = 1 the envelope is constant in h
        let early = if t_end < 1.0 {
            (1.0 - t_end) * (a * a + a.powi(3)) + a.powi(3) * 0.5 * (1.0 - t_end * t_end)
        } else {
            0.0
        };
        early + a * a / t + a.powi(3) * (1.0 / t + 0.5 / (t * t))
    }

    /// Tail bound from `t` to infinity.
    pub fn tail(&self, t: f64) -> TailEstimate {
        if self.gamma == 0.0 || self.samples.is_empty() {
            return TailEstimate {
                measured: 0.0,
                extrapolated: 0.0,
            };
        }
        let (t_end, n_end) = self.samples[self.samples.len() - 1];
        let c = self.gamma * n_end / self.envelope(t_end);
        let extrapolated = if c == 0.0 { 0.0 } else { c * self.envelope_tail(t_end) };
        TailEstimate {
            measured: self.integral(t.min(t_end), t_end),
            extrapolated,
        }
    }

    /// Least-squares log–log slope of `N(τ)` over samples with `τ ≥ from`.
    pub fn decay_exponent(&self, from: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|&&(t, n)| t >= from && t > 0.0 && n > 0.0)
            .map(|&(t, n)| (t.ln(), n.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// `‖U₀(−t) f(t)‖`-style tail of a recorded series; see [`DuhamelSeries::tail`].
pub fn duhamel_tail(series: &DuhamelSeries, t: f64) -> TailEstimate {
    series.tail(t)
}

/// One line of `scattering.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringRow {
    pub t1: f64,
    pub t2: f64,
    pub residual: f64,
    pub tail_t1: f64,
}

/// Residuals for every requested pair of snapshot times, with the tail at `t1`.
pub fn scattering_table(
    pullbacks: &[PullbackField],
    pairs: &[(usize, usize)],
    series: &DuhamelSeries,
) -> Result<Vec<ScatteringRow>> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (&pullbacks[i], &pullbacks[j]);
            Ok(ScatteringRow {
                t1: a.t,
                t2: b.t,
                residual: cauchy_residual(a, b)?,
                tail_t1: series.tail(a.t).total(),
            })
        })
        .collect()
}

pub fn scattering_csv(rows: &[ScatteringRow]) -> String {
    let mut s = String::from("t1,t2,residual,tail_t1\n");
    for r in rows {
        s.push_str(&format!("{:e},{:e},{:e},{:e}\n", r.t1, r.t2, r.residual, r.tail_t1));
    }
    s
}

//! Mono-kinetic reduction in one dimension.
//!
//! For `f = ρ(t, x) ⊗ δ(v − u(t, x))` the velocity solves inviscid Burgers,
//! `∂t u + u ∂x u = 0`, and `ρ` the continuity equation. Both are carried on
//! Lagrangian markers: `u` is constant along each straight characteristic
//! and `ρ` follows from the Jacobian of the label-to-position map. Evolution
//! stops at the first marker crossing.

use serde::Serialize;

use crate::error::{KineticError, Result};
use crate::phasegrid::{DistributionField, PhaseGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Marker {
    /// Label: the position at `t = 0`.
    pub x0: f64,
    pub x: f64,
    pub u: f64,
    pub rho0: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonokineticState {
    /// Ordered by label.
    pub markers: Vec<Marker>,
    pub t: f64,
    pub crossed: bool,
}

/// Per-step diagnostics, one row of `mono_series.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonoSample {
    pub t: f64,
    /// Smallest signed gap between label-adjacent markers; nonpositive once
    /// two characteristics have met.
    pub min_gap: f64,
    pub max_dxu: f64,
    pub peak_rho: f64,
    pub crossed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupEstimate {
    pub time: f64,
    /// `(t, max |∂x u|)` up to the crossing step.
    pub growth: Vec<(f64, f64)>,
}

impl MonokineticState {
    /// `n` markers at the midpoints of equal label cells on `[a, b]`.
    pub fn from_profile(a: f64, b: f64, n: usize, u0: impl Fn(f64) -> f64, rho0: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(KineticError::Validation(format!(
                "need at least two markers on a nonempty interval, got n = {n} on [{a}, {b}]"
            )));
        }
        let h = (b - a) / n as f64;
        let markers = (0..n)
            .map(|i| {
                let x0 = a + (i as f64 + 0.5) * h;
                let r = rho0(x0);
                Marker {
                    x0,
                    x: x0,
                    u: u0(x0),
                    rho0: r,
                    rho: r,
                }
            })
            .collect();
        Ok(Self {
            markers,
            t: 0.0,
            crossed: false,
        })
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// Neighbour span `x_{i+1} − x_{i−1}` (one-sided at the ends) in current
    /// and label coordinates.
    fn spans(&self, i: usize) -> (f64, f64) {
        let m = &self.markers;
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(m.len() - 1);
        (m[hi].x - m[lo].x, m[hi].x0 - m[lo].x0)
    }

    /// Mass `Σ ρ_i · (local spacing)`, with the spacing half the neighbour span
    /// in the interior and the full gap at the two ends.
    pub fn mass(&self) -> f64 {
        let n = self.markers.len();
        (0..n)
            .map(|i| {
                let (span, _) = self.spans(i);
                let w = if i == 0 || i + 1 == n { span } else { 0.5 * span };
                self.markers[i].rho * w
            })
            .sum()
    }

    pub fn min_gap(&self) -> f64 {
        self.markers
            .windows(2)
            .map(|w| w[1].x - w[0].x)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|∂x u|` by neighbour differencing.
    pub fn max_dxu(&self) -> f64 {
        (0..self.markers.len())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(self.markers.len() - 1);
                let du = self.markers[hi].u - self.markers[lo].u;
                let dx = self.markers[hi].x - self.markers[lo].x;
                (du / dx).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn peak_rho(&self) -> f64 {
        self.markers.iter().map(|m| m.rho).fold(0.0, f64::max)
    }

    pub fn sample(&self) -> MonoSample {
        MonoSample {
            t: self.t,
            min_gap: self.min_gap(),
            max_dxu: self.max_dxu(),
            peak_rho: self.peak_rho(),
            crossed: self.crossed,
        }
    }

    /// Velocity at a marker position, the value carried by the nearest marker.
    pub fn velocity_at(&self, x: f64) -> Option<f64> {
        self.markers
            .iter()
            .min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
            .map(|m| m.u)
    }
}

/// Advances every marker by `dt` along its straight characteristic.
///
/// Positions are recomputed as `x0 + u t` so that round-off does not
/// accumulate over many steps. If label-adjacent markers meet or swap, the
/// state is still advanced (so the crossing layout can be inspected), marked
/// `crossed`, and `BlowUp` is returned with the bracketing interval.
pub fn evolve(state: &mut MonokineticState, dt: f64) -> Result<()> {
    if state.crossed {
        return Err(KineticError::Validation("cannot evolve a state past blow-up".into()));
    }
    let t0 = state.t;
    let t1 = t0 + dt;
    for m in &mut state.markers {
        m.x = m.x0 + m.u * t1;
    }
    state.t = t1;
    if state.min_gap() <= 0.0 {
        state.crossed = true;
        return Err(KineticError::BlowUp { t0, t1 });
    }
    let rho: Vec<f64> = (0..state.len())
        .map(|i| {
            let (span, span0) = state.spans(i);
            state.markers[i].rho0 * span0 / span
        })
        .collect();
    for (m, r) in state.markers.iter_mut().zip(rho) {
        m.rho = r;
    }
    Ok(())
}

/// Steps with `dt` to `t_final` or to the first crossing, sampling every step.
/// The sample of the crossing step is included.
pub fn simulate(state: &mut MonokineticState, dt: f64, t_final: f64) -> Vec<MonoSample> {
    let n = (t_final / dt).round() as usize;
    let mut series = vec![state.sample()];
    for k in 1..=n {
        let res = evolve(state, dt);
        state.t = k as f64 * dt;
        series.push(state.sample());
        if res.is_err() {
            break;
        }
    }
    series
}

/// Blow-up time by linear interpolation of the minimal gap to zero between
/// the last regular sample and the crossing sample.
pub fn blowup_estimate(series: &[MonoSample]) -> Result<BlowupEstimate> {
    let k = series.iter().position(|s| s.crossed).ok_or(KineticError::NotBlownUp)?;
    let growth = series[..k].iter().map(|s| (s.t, s.max_dxu)).collect();
    if k == 0 {
        return Ok(BlowupEstimate {
            time: series[0].t,
            growth,
        });
    }
    let (a, b) = (series[k - 1], series[k]);
    let time = if a.min_gap > b.min_gap {
        a.t + a.min_gap * (b.t - a.t) / (a.min_gap - b.min_gap)
    } else {
        b.t
    };
    Ok(BlowupEstimate { time, growth })
}

pub fn mono_csv(series: &[MonoSample]) -> String {
    let mut s = String::from("t,min_gap,max_dxu,peak_rho\n");
    for r in series {
        s.push_str(&format!("{},{},{},{}\n", r.t, r.min_gap, r.max_dxu, r.peak_rho));
    }
    s
}

/// Deposits `ρ ⊗ N(u, width²)` on a one-dimensional grid.
///
/// Each marker carries its share of the mass into the x-cell containing it;
/// the velocity Gaussian is integrated exactly over every v-cell, so only
/// the tails beyond the velocity window are lost.
pub fn deposit_to_grid(state: &MonokineticState, grid: PhaseGrid, width: f64) -> Result<DistributionField> {
    if grid.d() != 1 {
        return Err(KineticError::InvalidGrid("mono-kinetic deposit needs d = 1".into()));
    }
    if !(width > 0.0) {
        return Err(KineticError::Validation(format!("deposit width must be positive, got {width}")));
    }
    let mut f = DistributionField::zeros(grid);
    f.time = state.t;
    let n = state.len();
    let scale = 1.0 / (std::f64::consts::SQRT_2 * width);
    let inv_cell = 1.0 / grid.cell_volume();
    for i in 0..n {
        let m = state.markers[i];
        let (span, _) = state.spans(i);
        let w = if i == 0 || i + 1 == n { span } else { 0.5 * span };
        let Some(xc) = grid.locate_x(m.x) else { continue };
        let mass = m.rho * w;
        let column = f.slice_mut(xc);
        let mut lower = libm::erf((grid.v_edge(0) - m.u) * scale);
        for (k, cell) in column.iter_mut().enumerate() {
            let upper = libm::erf((grid.v_edge(k + 1) - m.u) * scale);
            *cell += 0.5 * (upper - lower) * mass * inv_cell;
            lower = upper;
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn golden(n: usize) -> MonokineticState {
        MonokineticState::from_profile(-0.5, 0.5, n, |x| -x, |_| 1.0).unwrap()
    }

    #[test]
    fn constant_velocity_translates() {
        let mut s = MonokineticState::from_profile(0.0, 1.0, 50, |_| 0.7, |x| 1.0 + x).unwrap();
        let before = s.clone();
        for _ in 0..100 {
            evolve(&mut s, 0.01).unwrap();
        }
        for (a, b) in s.markers.iter().zip(&before.markers) {
            assert_relative_eq!(a.x, b.x + 0.7, epsilon = 1e-12);
            assert_relative_eq!(a.rho, b.rho, epsilon = 1e-12);
        }
        let series = simulate(&mut s, 0.01, 2.0);
        assert!(matches!(blowup_estimate(&series), Err(KineticError::NotBlownUp)));
    }

    #[test]
    fn golden_half_time() {
        let mut s = golden(200);
        for _ in 0..50 {
            evolve(&mut s, 0.01).unwrap();
        }
        for m in &s.markers {
            assert_relative_eq!(m.u, -2.0 * m.x, epsilon = 1e-12);
            assert_relative_eq!(m.rho, 2.0, epsilon = 1e-9);
            assert!(m.x.abs() <= 0.25);
        }
    }

    #[test]
    fn golden_blows_up_at_one() {
        let dt = 0.003;
        let mut s = golden(100);
        let series = simulate(&mut s, dt, 2.0);
        let last = series.last().unwrap();
        assert!(last.crossed);
        assert!(last.t >= 1.0 - 1e-12 && last.t - dt < 1.0, "crossing at {}", last.t);
        let est = blowup_estimate(&series).unwrap();
        assert!((est.time - 1.0).abs() <= 2.0 * dt, "estimate {}", est.time);
        assert!(est.growth.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn rarefaction_spreads() {
        let mut s = MonokineticState::from_profile(-0.5, 0.5, 100, |x| x, |_| 1.0).unwrap();
        let series = simulate(&mut s, 0.01, 3.0);
        assert!(matches!(blowup_estimate(&series), Err(KineticError::NotBlownUp)));
        for r in &series {
            assert_relative_eq!(r.max_dxu, 1.0 / (1.0 + r.t), epsilon = 1e-9);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let mut s = MonokineticState::from_profile(0.0, 2.0, 300, |x| (3.0 * x).sin(), |x| 1.0 + 0.5 * x).unwrap();
        let m0 = s.mass();
        for _ in 0..20 {
            evolve(&mut s, 0.01).unwrap();
            assert_relative_eq!(s.mass(), m0, max_relative = 1e-8);
        }
    }

    #[test]
    fn evolve_refuses_after_crossing() {
        let mut s = golden(10);
        assert!(matches!(evolve(&mut s, 1.5), Err(KineticError::BlowUp { .. })));
        assert!(evolve(&mut s, 0.1).is_err());
    }

    #[test]
    fn deposit_preserves_mass() {
        let g = PhaseGrid::with_origin(1, 4.0, 2.0, 80, 100, -2.0, -1.0).unwrap();
        let s = MonokineticState::from_profile(-1.0, 1.0, 400, |x| 0.3 * x, |_| 1.0).unwrap();
        let f = deposit_to_grid(&s, g, 3.0 * g.dv()).unwrap();
        assert_relative_eq!(f.mass(), s.mass(), max_relative = 1e-6);
    }

    #[test]
    fn deposit_at_rest_sits_on_zero_rows() {
        let g = PhaseGrid::with_origin(1, 4.0, 2.0, 40, 101, -2.0, -1.01).unwrap();
        let s = MonokineticState::from_profile(-0.5, 0.5, 50, |_| 0.0, |_| 1.0).unwrap();
        let f = deposit_to_grid(&s, g, g.dv()).unwrap();
        let zero = g.locate_v(0.0).unwrap();
        for xc in 0..g.x_cells() {
            let col = f.slice(xc);
            let total: f64 = col.iter().sum();
            if total == 0.0 {
                continue;
            }
            let near: f64 = col[zero - 2..=zero + 2].iter().sum();
            assert!(near >= 0.95 * total);
        }
    }
}

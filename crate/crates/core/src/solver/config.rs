use std::str::FromStr;

use serde::Serialize;

use crate::error::{KineticError, Result};
use crate::phasegrid::{DistributionField, PhaseGrid};
use crate::remap::Limiter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    Lie,
    #[default]
    Strang,
}

impl FromStr for Splitting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lie" => Ok(Splitting::Lie),
            "strang" => Ok(Splitting::Strang),
            other => Err(format!("unknown splitting `{other}` (expected lie or strang)")),
        }
    }
}

/// How free transport in `x` is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportScheme {
    /// Conservative limited remap by the fractional displacement `v dt / dx`.
    Remap,
    /// Whole-cell shifts tracking `round(v t / dx)`; no numerical diffusion.
    #[default]
    Lattice,
}

impl FromStr for TransportScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "remap" => Ok(TransportScheme::Remap),
            "lattice" => Ok(TransportScheme::Lattice),
            other => Err(format!("unknown transport `{other}` (expected remap or lattice)")),
        }
    }
}

/// Uniform hyper-cube patch in phase space, optionally smoothed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchSpec {
    pub center_x: [f64; 2],
    pub center_v: [f64; 2],
    pub side: f64,
    /// Density on the patch; `None` means unit mass, `1 / side^{2d}`.
    pub height: Option<f64>,
    /// Conservative Jacobi smoothing passes applied after projection.
    pub smoothing: usize,
}

impl PatchSpec {
    pub fn height_for(&self, d: usize) -> f64 {
        self.height.unwrap_or_else(|| self.side.powi(-2 * d as i32))
    }

    /// Radius of the ball containing the patch, about its center.
    pub fn radius(&self, d: usize) -> f64 {
        0.5 * self.side * (d as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Patch(PatchSpec),
    Field(DistributionField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: PhaseGrid,
    pub gamma: f64,
    pub dt: f64,
    pub t_final: f64,
    pub splitting: Splitting,
    pub limiter: Limiter,
    pub transport: TransportScheme,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    /// Steps between observable rows.
    pub sample_stride: usize,
    pub initial: InitialCondition,
    pub p_list: Vec<f64>,
    /// Record `‖d ρ f + E·∇v f‖₁` at every observable row.
    pub record_nonlinear: bool,
}

impl SolverConfig {
    /// Reference setup: `L_x = 20`, `L_v = 6`, `T = 3`, `dt = 1e-4`,
    /// `dx = 0.05`, `dv = 0.01`, side-2 patch at `(11, −0.3)`, `γ = 1`.
    pub fn reference() -> Self {
        let grid = PhaseGrid::from_spacing(1, 20.0, 6.0, 0.05, 0.01).expect("valid default grid");
        Self {
            grid,
            gamma: 1.0,
            dt: 1e-4,
            t_final: 3.0,
            splitting: Splitting::Strang,
            limiter: Limiter::default(),
            transport: TransportScheme::default(),
            snapshot_stride: 3000,
            sample_stride: 100,
            initial: InitialCondition::Patch(PatchSpec {
                center_x: [11.0, 11.0],
                center_v: [-0.3, -0.3],
                side: 2.0,
                height: None,
                smoothing: 0,
            }),
            p_list: vec![2.0],
            record_nonlinear: true,
        }
    }

    /// Number of steps `T / dt`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KineticError::Validation(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        let disp = self.dt * self.grid.max_speed();
        if disp > self.grid.dx() * (1.0 + 1e-12) {
            return bad(format!(
                "CFL violated: dt * max|v| = {disp} exceeds dx = {}",
                self.grid.dx()
            ));
        }
        let n = self.t_final / self.dt;
        if n.round() < 1.0 || (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return bad(format!("T / dt = {n} is not a positive integer"));
        }
        if self.snapshot_stride == 0 || self.sample_stride == 0 {
            return bad("snapshot_stride and sample_stride must be positive".into());
        }
        if self.p_list.iter().any(|&p| !(p >= 1.0)) {
            return bad("every p must be at least 1".into());
        }
        match &self.initial {
            InitialCondition::Patch(p) => {
                if !(p.side > 0.0) {
                    return bad(format!("patch side must be positive, got {}", p.side));
                }
                if let Some(h) = p.height {
                    if !(h > 0.0 && h.is_finite()) {
                        return bad(format!("patch height must be positive, got {h}"));
                    }
                }
            }
            InitialCondition::Field(f) => {
                if !f.grid.same_as(&self.grid) {
                    return Err(KineticError::GridMismatch(
                        "initial field grid differs from the configured grid".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Support-set center and radius when the initial condition is a patch.
    pub fn patch_geometry(&self) -> Option<([f64; 2], [f64; 2], f64)> {
        match &self.initial {
            InitialCondition::Patch(p) => Some((p.center_x, p.center_v, p.radius(self.grid.d()))),
            InitialCondition::Field(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_setup_is_valid() {
        let c = SolverConfig::reference();
        c.validate().unwrap();
        assert_eq!(c.steps(), 30000);
        assert_eq!(c.grid.nx(), 400);
        assert_eq!(c.grid.nv(), 600);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let mut c = SolverConfig::reference();
        c.dt = 1.0;
        c.t_final = 3.0;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("CFL"), "{err}");
    }

    #[test]
    fn non_integer_step_count_is_rejected() {
        let mut c = SolverConfig::reference();
        c.t_final = 3.00005;
        assert!(c.validate().is_err());
    }
}

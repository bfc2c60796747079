//! Splitting solver: free transport in x, exact local alignment in v.
//!
//! Alignment uses the conservative limited remap of [`crate::remap`];
//! transport uses either the same remap or whole-cell lattice shifts.
//! The stepper tracks an [`ActiveBox`] around the nonzero cells so that
//! work scales with the support of `f` rather than with the whole grid.

mod active;
mod config;
mod initial;
mod transport;

use rayon::prelude::*;

pub use active::ActiveBox;
pub use config::{InitialCondition, PatchSpec, SolverConfig, Splitting, TransportScheme};
pub use initial::{jacobi_smooth, patch_field};
pub use transport::{lattice_offset, TransportScratch, FLUSH_BELOW, NEG_TOL};

use crate::error::{KineticError, Result};
use crate::homogeneous::{alignment_substep_in, VelocityWindow};
use crate::phasegrid::{
    h_profile, moments, observables_with, DistributionField, ObservableOptions, ObservableSeries,
    SupportSet, RHO_FLOOR_REL,
};
use crate::remap::Limiter;
use crate::scattering::nonlinear_l1;

/// Outflow mass above this fraction of the initial mass counts as a warning.
pub const OUTFLOW_WARN_REL: f64 = 1e-8;

/// Steps between full rescans of the active box.
const RESCAN_EVERY: usize = 64;

/// Stateful integrator holding the field, its active box and counters.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub field: DistributionField,
    pub gamma: f64,
    pub dt: f64,
    pub splitting: Splitting,
    pub limiter: Limiter,
    pub scheme: TransportScheme,
    bbox: ActiveBox,
    /// Elapsed transport time, which fixes the lattice offsets.
    clock: f64,
    scratch: TransportScratch,
    steps_taken: usize,
    /// Mass lost through the x-boundary so far.
    pub outflow: f64,
    /// Substeps whose outflow exceeded the warning threshold.
    pub out_of_domain_warnings: usize,
    warn_mass: f64,
    rho_floor: f64,
    t0: f64,
}

impl Stepper {
    pub fn new(field: DistributionField, gamma: f64, dt: f64, splitting: Splitting, limiter: Limiter) -> Self {
        let bbox = ActiveBox::scan(&field);
        let mass = field.mass();
        let rho_floor = RHO_FLOOR_REL * mass / field.grid.x_volume();
        let t0 = field.time;
        Self {
            field,
            gamma,
            dt,
            splitting,
            limiter,
            scheme: TransportScheme::Remap,
            bbox,
            clock: 0.0,
            scratch: TransportScratch::default(),
            steps_taken: 0,
            outflow: 0.0,
            out_of_domain_warnings: 0,
            warn_mass: OUTFLOW_WARN_REL * mass,
            rho_floor,
            t0,
        }
    }

    pub fn with_scheme(mut self, scheme: TransportScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn active_box(&self) -> ActiveBox {
        self.bbox
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Free transport over `dt` along every spatial axis.
    pub fn transport(&mut self, dt: f64) -> Result<f64> {
        let to = self.clock + dt;
        self.transport_to(to, dt)
    }

    /// Moves the transport clock to `to`; the remap scheme uses `dt` directly
    /// so that results do not depend on how the clock was rounded.
    fn transport_to(&mut self, to: f64, dt: f64) -> Result<f64> {
        let from = self.clock;
        let mut lost = 0.0;
        for axis in 0..self.field.grid.d() {
            lost += match self.scheme {
                TransportScheme::Remap => transport::transport_axis(
                    &mut self.field,
                    &mut self.bbox,
                    axis,
                    dt,
                    self.limiter,
                    &mut self.scratch,
                )?,
                TransportScheme::Lattice => {
                    transport::lattice_axis(&mut self.field, &mut self.bbox, axis, from, to, &mut self.scratch)
                }
            };
        }
        self.clock = to;
        self.outflow += lost;
        if lost > self.warn_mass {
            self.out_of_domain_warnings += 1;
        }
        Ok(lost)
    }

    /// Exact homogeneous alignment over `dt` in every spatial cell.
    pub fn align(&mut self, dt: f64) -> Result<()> {
        if self.gamma == 0.0 || dt == 0.0 || self.bbox.is_empty() {
            return Ok(());
        }
        let grid = self.field.grid;
        let d = grid.d();
        let nvc = grid.v_cells();
        let nx = grid.nx();
        let b = self.bbox;
        let window: VelocityWindow = if d == 1 {
            [(b.lo[1], b.hi[1]), (0, 1)]
        } else {
            [(b.lo[2], b.hi[2]), (b.lo[3], b.hi[3])]
        };
        let (gamma, limiter, floor) = (self.gamma, self.limiter, self.rho_floor);
        let dvv = grid.dv_vol();
        let (xlo, xhi) = if d == 1 {
            (b.lo[0], b.hi[0])
        } else {
            (b.lo[0] * nx, b.hi[0] * nx)
        };
        let worst = self.field.values[xlo * nvc..xhi * nvc]
            .par_chunks_mut(nvc)
            .enumerate()
            .map(|(off, slice)| {
                let xc = xlo + off;
                if d == 2 {
                    let x2 = xc % nx;
                    if x2 < b.lo[1] || x2 >= b.hi[1] {
                        return 0.0;
                    }
                }
                let (rho, mom) = window_moments(&grid, slice, window);
                let rho = rho * dvv;
                if !(rho > floor) {
                    return 0.0;
                }
                let u = [mom[0] * dvv / rho, mom[1] * dvv / rho];
                alignment_substep_in(&grid, slice, window, rho, &u[..d], gamma, dt, limiter);
                let mut worst = 0.0f64;
                for_window(&grid, slice, window, |v| {
                    if *v < FLUSH_BELOW {
                        worst = worst.min(*v);
                        *v = 0.0;
                    }
                });
                worst
            })
            .reduce(|| 0.0, f64::min);
        if worst < -NEG_TOL {
            return Err(KineticError::NumericalAbort {
                time: self.field.time,
                message: format!("alignment produced a negative value {worst:e}"),
            });
        }
        Ok(())
    }

    /// One Lie or Strang step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let n = self.steps_taken as f64;
        match self.splitting {
            Splitting::Lie => {
                self.transport_to((n + 1.0) * dt, dt)?;
                self.align(dt)?;
            }
            Splitting::Strang => {
                self.transport_to((n + 0.5) * dt, 0.5 * dt)?;
                self.align(dt)?;
                self.transport_to((n + 1.0) * dt, 0.5 * dt)?;
            }
        }
        self.steps_taken += 1;
        self.field.time = self.t0 + self.steps_taken as f64 * dt;
        if self.steps_taken % RESCAN_EVERY == 0 {
            self.bbox = self.bbox.shrink(&self.field);
        }
        Ok(())
    }
}

fn window_moments(grid: &crate::phasegrid::PhaseGrid, slice: &[f64], w: VelocityWindow) -> (f64, [f64; 2]) {
    let (mut rho, mut m) = (0.0, [0.0; 2]);
    if grid.d() == 1 {
        for j in w[0].0..w[0].1 {
            let f = slice[j];
            rho += f;
            m[0] += grid.v_center(j) * f;
        }
    } else {
        let nv = grid.nv();
        for j1 in w[0].0..w[0].1 {
            let v1 = grid.v_center(j1);
            let (mut r, mut m2) = (0.0, 0.0);
            for j2 in w[1].0..w[1].1 {
                let f = slice[j1 * nv + j2];
                r += f;
                m2 += grid.v_center(j2) * f;
            }
            rho += r;
            m[0] += v1 * r;
            m[1] += m2;
        }
    }
    (rho, m)
}

fn for_window(grid: &crate::phasegrid::PhaseGrid, slice: &mut [f64], w: VelocityWindow, mut g: impl FnMut(&mut f64)) {
    if grid.d() == 1 {
        slice[w[0].0..w[0].1].iter_mut().for_each(g);
    } else {
        let nv = grid.nv();
        for j1 in w[0].0..w[0].1 {
            slice[j1 * nv + w[1].0..j1 * nv + w[1].1].iter_mut().for_each(&mut g);
        }
    }
}

/// Free transport `f(x − v dt, v)` of a whole field; returns the outflow mass.
pub fn transport_substep(f: &mut DistributionField, dt: f64, limiter: Limiter) -> Result<f64> {
    let mut s = Stepper::new(f.clone(), 0.0, dt, Splitting::Lie, limiter);
    let lost = s.transport(dt)?;
    f.values = s.field.values;
    Ok(lost)
}

/// Exact local alignment of a whole field over `dt`.
pub fn align_substep(f: &mut DistributionField, gamma: f64, dt: f64, limiter: Limiter) -> Result<()> {
    let mut s = Stepper::new(f.clone(), gamma, dt, Splitting::Lie, limiter);
    s.align(dt)?;
    f.values = s.field.values;
    Ok(())
}

/// One splitting step of a whole field; advances `f.time` by `dt`.
pub fn step(f: &mut DistributionField, gamma: f64, dt: f64, splitting: Splitting, limiter: Limiter) -> Result<()> {
    let t = f.time;
    let mut s = Stepper::new(f.clone(), gamma, dt, splitting, limiter);
    s.step()?;
    f.values = s.field.values;
    f.time = t + dt;
    Ok(())
}

/// Builds the initial field of a configuration.
pub fn initial_field(config: &SolverConfig) -> DistributionField {
    match &config.initial {
        InitialCondition::Patch(p) => patch_field(config.grid, p),
        InitialCondition::Field(f) => {
            let mut f = f.clone();
            f.time = 0.0;
            f
        }
    }
}

/// One stored snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub step: usize,
    pub time: f64,
    pub h_profile: Vec<f64>,
    pub field: Option<DistributionField>,
}

/// Everything a run produces besides files.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: ObservableSeries,
    pub snapshots: Vec<Snapshot>,
    /// `(t, mass outside Q(t))` at every observable row; empty without a patch.
    pub outside_q: Vec<(f64, f64)>,
    /// `(t, ‖d ρ f + E·∇v f‖₁)` at every observable row.
    pub nonlinear: Vec<(f64, f64)>,
    pub outflow: f64,
    pub out_of_domain_warnings: usize,
    pub final_field: DistributionField,
}

/// Integrates to `T`, keeping every snapshot field in memory.
pub fn run(config: &SolverConfig) -> Result<RunOutput> {
    run_with(config, true, |_, _| Ok(()))
}

/// Integrates to `T`, handing each snapshot to `on_snapshot` as it is taken.
pub fn run_with(
    config: &SolverConfig,
    keep_fields: bool,
    mut on_snapshot: impl FnMut(&Snapshot, &DistributionField) -> Result<()>,
) -> Result<RunOutput> {
    config.validate()?;
    let f0 = initial_field(config);
    let grid = config.grid;
    let d = grid.d();
    let mut opts = ObservableOptions::new(config.p_list.clone(), f0.max_value());
    let support = config.patch_geometry().map(|(xc, vc, r0)| {
        opts = opts.clone().centered(xc, vc);
        let registration = match config.transport {
            TransportScheme::Remap => 0.0,
            TransportScheme::Lattice => 0.5,
        };
        SupportSet::new(d, r0, 0.0).centered(xc, vc).with_registration(registration)
    });
    let mut stepper =
        Stepper::new(f0, config.gamma, config.dt, config.splitting, config.limiter).with_scheme(config.transport);
    let mut out = RunOutput {
        series: ObservableSeries::new(d, config.p_list.clone()),
        snapshots: Vec::new(),
        outside_q: Vec::new(),
        nonlinear: Vec::new(),
        outflow: 0.0,
        out_of_domain_warnings: 0,
        final_field: DistributionField::zeros(grid),
    };
    let n = config.steps();
    for k in 0..=n {
        if k > 0 {
            stepper.step()?;
            stepper.field.time = k as f64 * config.dt;
        }
        let f = &stepper.field;
        if k % config.sample_stride == 0 || k == n {
            let m = moments(f);
            let row = observables_with(f, &m, config.gamma, &opts);
            if let Some(q) = support {
                out.outside_q.push((f.time, q.at(f.time).mass_outside(f)));
            }
            if config.record_nonlinear {
                out.nonlinear.push((f.time, nonlinear_l1(f, &m)));
            }
            out.series.push(row)?;
        }
        if k % config.snapshot_stride == 0 || k == n {
            let snap = Snapshot {
                index: out.snapshots.len(),
                step: k,
                time: f.time,
                h_profile: h_profile(f),
                field: keep_fields.then(|| f.clone()),
            };
            on_snapshot(&snap, f)?;
            out.snapshots.push(snap);
        }
    }
    out.outflow = stepper.outflow;
    out.out_of_domain_warnings = stepper.out_of_domain_warnings;
    out.final_field = stepper.field;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasegrid::PhaseGrid;

    fn grid() -> PhaseGrid {
        PhaseGrid::new(1, 4.0, 2.0, 40, 20).unwrap()
    }

    fn blob(g: PhaseGrid) -> DistributionField {
        patch_field(
            g,
            &PatchSpec {
                center_x: [2.0, 0.0],
                center_v: [0.1, 0.0],
                side: 0.8,
                height: None,
                smoothing: 1,
            },
        )
    }

    #[test]
    fn zero_dt_is_identity() {
        let f0 = blob(grid());
        let mut f = f0.clone();
        transport_substep(&mut f, 0.0, Limiter::default()).unwrap();
        assert_eq!(f.values, f0.values);
        step(&mut f, 1.0, 0.0, Splitting::Strang, Limiter::default()).unwrap();
        assert_eq!(f.values, f0.values);
    }

    #[test]
    fn half_cell_transport_splits_a_cell() {
        // v = 0.5 at row 15 of a 20-cell axis on [-1, 1]... use a custom grid
        let g = PhaseGrid::with_origin(1, 1.0, 1.0, 10, 2, 0.0, -1.0).unwrap();
        // v centers: -0.75, -0.25; displacement −0.25·dt must be −dx/2 = −0.05
        let mut f = DistributionField::zeros(g);
        f.values[g.index(4, 1)] = 1.0;
        transport_substep(&mut f, 0.2, Limiter::default()).unwrap();
        assert!((f.values[g.index(4, 1)] - 0.5).abs() < 1e-15);
        assert!((f.values[g.index(3, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_speed_row_is_unchanged() {
        let g = PhaseGrid::new(1, 1.0, 1.0, 10, 3).unwrap();
        let mut f = DistributionField::from_fn(g, 0.0, |x, _| x[0]);
        let before: Vec<f64> = (0..10).map(|i| f.values[g.index(i, 1)]).collect();
        transport_substep(&mut f, 0.05, Limiter::default()).unwrap();
        let after: Vec<f64> = (0..10).map(|i| f.values[g.index(i, 1)]).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn outflow_is_metered() {
        let g = PhaseGrid::new(1, 1.0, 2.0, 10, 2).unwrap();
        let mut f = DistributionField::zeros(g);
        f.values[g.index(9, 1)] = 1.0; // v = 0.5
        let m0 = f.mass();
        let lost = transport_substep(&mut f, 0.1, Limiter::default()).unwrap();
        assert!((f.mass() + lost - m0).abs() < 1e-15);
        assert!(lost > 0.0);
    }

    #[test]
    fn gamma_zero_alignment_is_identity() {
        let f0 = blob(grid());
        let mut f = f0.clone();
        align_substep(&mut f, 0.0, 0.1, Limiter::default()).unwrap();
        assert_eq!(f.values, f0.values);
    }

    #[test]
    fn vacuum_cells_are_untouched_and_moments_preserved() {
        let g = grid();
        let f0 = blob(g);
        let mut f = f0.clone();
        align_substep(&mut f, 1.0, 0.05, Limiter::default()).unwrap();
        let (m0, m1) = (moments(&f0), moments(&f));
        for xc in 0..g.x_cells() {
            if m0.rho[xc] == 0.0 {
                assert!(f.slice(xc).iter().all(|&v| v == 0.0));
            }
            assert!((m0.rho[xc] - m1.rho[xc]).abs() < 1e-13);
            assert!((m0.mom[xc] - m1.mom[xc]).abs() < 1e-13);
        }
    }

    #[test]
    fn strang_step_is_the_composition_of_substeps() {
        let g = grid();
        let f0 = blob(g);
        let (gamma, dt, lim) = (1.0, 0.01, Limiter::default());
        let mut a = f0.clone();
        step(&mut a, gamma, dt, Splitting::Strang, lim).unwrap();
        let mut b = f0.clone();
        transport_substep(&mut b, 0.5 * dt, lim).unwrap();
        align_substep(&mut b, gamma, dt, lim).unwrap();
        transport_substep(&mut b, 0.5 * dt, lim).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn gamma_zero_step_is_free_transport() {
        let g = grid();
        let f0 = blob(g);
        let mut a = f0.clone();
        step(&mut a, 0.0, 0.02, Splitting::Lie, Limiter::default()).unwrap();
        let mut b = f0.clone();
        transport_substep(&mut b, 0.02, Limiter::default()).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn stepper_matches_free_functions_over_many_steps() {
        let g = grid();
        let f0 = blob(g);
        let mut s = Stepper::new(f0.clone(), 1.0, 0.01, Splitting::Strang, Limiter::default());
        let mut f = f0.clone();
        for _ in 0..100 {
            s.step().unwrap();
            step(&mut f, 1.0, 0.01, Splitting::Strang, Limiter::default()).unwrap();
        }
        assert_eq!(s.field.values, f.values);
    }

    #[test]
    fn two_dimensional_step_conserves() {
        let g = PhaseGrid::new(2, 4.0, 2.0, 16, 12).unwrap();
        let spec = PatchSpec {
            center_x: [2.0, 2.0],
            center_v: [0.2, -0.1],
            side: 1.0,
            height: None,
            smoothing: 1,
        };
        let f = patch_field(g, &spec);
        let o0 = crate::phasegrid::observables(&f, 1.0, &ObservableOptions::new(vec![], 1.0));
        let mut s = Stepper::new(f, 1.0, 0.02, Splitting::Strang, Limiter::default());
        for _ in 0..20 {
            s.step().unwrap();
        }
        let o1 = crate::phasegrid::observables(&s.field, 1.0, &ObservableOptions::new(vec![], 1.0));
        // tails reach the x-boundary; what leaves is metered
        assert!((o1.mass + s.outflow - o0.mass).abs() < 1e-13);
        for a in 0..2 {
            assert!((o1.momentum[a] - o0.momentum[a]).abs() < 1e-11);
        }
        assert!(o1.energy < o0.energy);
        assert!(o1.entropy > o0.entropy);
    }

    #[test]
    fn run_samples_and_snapshots() {
        let mut c = SolverConfig::reference();
        c.grid = grid();
        c.dt = 0.01;
        c.t_final = 0.2;
        c.sample_stride = 5;
        c.snapshot_stride = 10;
        c.initial = InitialCondition::Patch(PatchSpec {
            center_x: [2.0, 0.0],
            center_v: [0.1, 0.0],
            side: 0.8,
            height: None,
            smoothing: 0,
        });
        let out = run(&c).unwrap();
        assert_eq!(out.series.len(), 5);
        assert_eq!(out.snapshots.len(), 3);
        assert_eq!(out.outside_q.len(), 5);
        assert!((out.snapshots[2].time - 0.2).abs() < 1e-12);
    }
}

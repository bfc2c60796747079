//! One function per subcommand: run the numerics, write the artifacts,
//! then the manifest.

use std::path::Path;

use super::config::Config;
use super::files::{read_field, read_text, Outputs, RunManifest};
use crate::characteristics::{increments_csv, picard_adaptive};
use crate::error::{KineticError, Result};
use crate::homogeneous::{exact_observables, HomogeneousState, ProfileStats};
use crate::monokinetic::{blowup_estimate, deposit_to_grid, evolve, mono_csv, simulate as mono_simulate, MonokineticState};
use crate::particles::{
    bin_empirical, convergence_csv, particles_csv, sample_patch, simulate as particle_simulate, ConvergenceRow,
    ParticleEnsemble,
};
use crate::phasegrid::DistributionField;
use crate::scattering::{pullback, scattering_csv, scattering_table, DuhamelSeries, PullbackField, ShiftRule};
use crate::solver::{initial_field, run_with, InitialCondition, SolverConfig, TransportScheme};

fn manifest(sub: &str, cfg: &Config) -> Result<RunManifest> {
    Ok(RunManifest::new(sub, cfg.snapshot(), cfg.seed()?))
}

/// `v,h` rows (`v_1,v_2,h` in two dimensions).
fn hprofile_csv(f: &DistributionField, h: &[f64]) -> String {
    let g = f.grid;
    let mut s = String::from(if g.d() == 1 { "v,h\n" } else { "v_1,v_2,h\n" });
    for (k, hv) in h.iter().enumerate() {
        let v = g.v_coords(k);
        if g.d() == 1 {
            s.push_str(&format!("{:e},{:e}\n", v[0], hv));
        } else {
            s.push_str(&format!("{:e},{:e},{:e}\n", v[0], v[1], hv));
        }
    }
    s
}

fn pairs_csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in rows {
        s.push_str(&format!("{a:e},{b:e}\n"));
    }
    s
}

/// `kinetic run`: observables, h-profiles and snapshots of the splitting solver.
pub fn run(cfg: &Config, dir: &Path) -> Result<RunManifest> {
    let sc = cfg.solver()?;
    let mut out = Outputs::create(dir, manifest("run", cfg)?)?;
    let res = run_with(&sc, false, |snap, f| {
        out.field(&format!("snapshot_{}.f64", snap.index), f)?;
        out.csv(&format!("hprofile_{}.csv", snap.index), &hprofile_csv(f, &snap.h_profile))
    })?;
    out.csv("observables.csv", &res.series.to_csv())?;
    out.csv("nonlinear.csv", &pairs_csv("t,nonlinear_l1", &res.nonlinear))?;
    if !res.outside_q.is_empty() {
        out.csv("support.csv", &pairs_csv("t,mass_outside_q", &res.outside_q))?;
    }
    let rows = &res.series.rows;
    let (m0, m1) = (rows[0].mass, rows[rows.len() - 1].mass);
    out.manifest.note("mass_drift_rel", (m1 - m0).abs() / m0);
    out.manifest.note("outflow", res.outflow);
    out.manifest.note("snapshots", res.snapshots.len());
    out.finish()
}

/// `kinetic picard`: fixed point of the characteristics map on the initial
/// datum, and its distance to the splitting solver at the converged horizon.
pub fn picard(cfg: &Config, dir: &Path) -> Result<RunManifest> {
    let sc = cfg.solver()?;
    let ps = cfg.picard()?;
    let f0 = initial_field(&sc);
    let (horizon, res) = picard_adaptive(&f0, sc.gamma, ps.t_loc, ps.intervals, ps.tol, ps.max_iter, ps.halvings)?;
    let mut out = Outputs::create(dir, manifest("picard", cfg)?)?;
    out.csv("picard_increments.csv", &increments_csv(&res.increments))?;
    let fixed = res.stack.last();
    out.field("picard_final.f64", fixed)?;

    let steps = (horizon / sc.dt).ceil().max(1.0);
    let split = SolverConfig {
        dt: horizon / steps,
        t_final: horizon,
        transport: TransportScheme::Remap,
        snapshot_stride: usize::MAX,
        sample_stride: usize::MAX,
        record_nonlinear: false,
        ..sc
    };
    let reference = run_with(&split, false, |_, _| Ok(()))?.final_field;
    let rel = fixed.l1_distance(&reference)? / reference.mass();
    out.manifest.note("horizon", horizon);
    out.manifest.note("iterations", res.increments.len());
    out.manifest.note("max_ratio", res.ratios().into_iter().fold(0.0, f64::max));
    out.manifest.note("splitting_rel_l1", rel);
    out.finish()
}

/// `kinetic particles`: empirical measures for every `N` against the kinetic
/// solution at `t_final`, binned on the coarsened solver grid.
pub fn particles(cfg: &Config, dir: &Path) -> Result<RunManifest> {
    let sc = cfg.solver()?;
    let pset = cfg.particles()?;
    let patch = cfg.patch()?;
    let seed = cfg.seed()?;
    let d = sc.grid.d();
    let kinetic = run_with(
        &SolverConfig {
            snapshot_stride: usize::MAX,
            record_nonlinear: false,
            ..sc.clone()
        },
        false,
        |_, _| Ok(()),
    )?
    .final_field
    .coarsen(pset.bin, pset.bin)?;
    let mut out = Outputs::create(dir, manifest("particles", cfg)?)?;
    out.field("kinetic_reference.f64", &kinetic)?;
    let sample_every = ((sc.sample_stride as f64 * sc.dt / pset.dt).round() as usize).max(1);
    let mut conv = Vec::new();
    for (k, &n) in pset.counts.iter().enumerate() {
        let (x, v) = sample_patch(&patch, d, n, seed);
        let mut ens = ParticleEnsemble::new(d, x, v, sc.gamma, pset.psi)?;
        let rows = particle_simulate(&mut ens, pset.dt, sc.t_final, pset.integrator, sample_every);
        let (binned, outside) = bin_empirical(&ens, kinetic.grid)?;
        out.field(&format!("empirical_{k}.f64"), &binned)?;
        if k + 1 == pset.counts.len() {
            out.csv("particles_obs.csv", &particles_csv(d, &rows))?;
        }
        out.manifest.note(&format!("outside_{n}"), outside);
        conv.push(ConvergenceRow {
            n,
            t: ens.time,
            l1_distance: binned.l1_distance(&kinetic)?,
        });
    }
    out.csv("convergence.csv", &convergence_csv(&conv))?;
    out.finish()
}

/// `kinetic monokinetic`: markers for `u0 = offset + slope x`, unit density.
pub fn monokinetic(cfg: &Config, dir: &Path) -> Result<RunManifest> {
    let m = cfg.mono()?;
    let u0 = |x: f64| m.offset + m.slope * x;
    let fresh = || MonokineticState::from_profile(m.x_min, m.x_max, m.markers, u0, |_| 1.0);
    let mut state = fresh()?;
    let series = mono_simulate(&mut state, m.dt, m.t_final);
    let mut out = Outputs::create(dir, manifest("monokinetic", cfg)?)?;
    out.csv("mono_series.csv", &mono_csv(&series))?;
    match blowup_estimate(&series) {
        Ok(est) => out.manifest.note("blowup_time", est.time),
        Err(KineticError::NotBlownUp) => out.manifest.note("blowup_time", serde_json::Value::Null),
        Err(e) => return Err(e),
    }
    if m.width > 0.0 {
        // deposit the last layout before any crossing
        let t_last = series.iter().take_while(|s| !s.crossed).last().map_or(0.0, |s| s.t);
        let mut regular = fresh()?;
        if t_last > 0.0 {
            evolve(&mut regular, t_last)?;
        }
        let f = deposit_to_grid(&regular, cfg.grid()?, m.width)?;
        out.field("mono_field.f64", &f)?;
    }
    out.finish()
}

/// `kinetic scatter`: pullbacks of every snapshot of a finished run, the
/// residual of every pair and the Duhamel tail.
pub fn scatter(run_dir: &Path, dir: &Path) -> Result<RunManifest> {
    let run = RunManifest::load(run_dir)?;
    let mut cfg = Config::default();
    for (k, v) in &run.config {
        cfg.set(k, v.clone())?;
    }
    let sc = cfg.solver()?;
    let rule = ShiftRule::matching(sc.transport, sc.limiter);
    let snaps: Vec<&String> = run
        .artifacts
        .iter()
        .filter(|a| a.starts_with("snapshot_") && a.ends_with(".f64"))
        .collect();
    if snaps.is_empty() {
        return Err(KineticError::MissingFile(run_dir.join("snapshot_0.f64")));
    }
    let mut pulls: Vec<PullbackField> = Vec::new();
    for s in snaps {
        let f = read_field(&run_dir.join(s))?;
        pulls.push(pullback(&f, f.time, rule)?);
    }
    pulls.sort_by(|a, b| a.t.total_cmp(&b.t));
    let samples = parse_pairs(&run_dir.join("nonlinear.csv"))?;
    let r0 = match &sc.initial {
        InitialCondition::Patch(p) => p.radius(sc.grid.d()),
        InitialCondition::Field(_) => unreachable!("configs always describe a patch"),
    };
    let series = DuhamelSeries::new(sc.gamma, sc.grid.d(), r0, samples);
    let pairs: Vec<(usize, usize)> = (0..pulls.len())
        .flat_map(|i| (i + 1..pulls.len()).map(move |j| (i, j)))
        .filter(|&(i, _)| pulls[i].t > 0.0)
        .collect();
    let rows = scattering_table(&pulls, &pairs, &series)?;
    let mut out = Outputs::create(dir, manifest("scatter", &cfg)?)?;
    out.csv("scattering.csv", &scattering_csv(&rows))?;
    out.manifest.note("theory_applies", series.theory_applies());
    if let Some(p) = series.decay_exponent(1.0) {
        out.manifest.note("tail_exponent", p);
    }
    out.finish()
}

fn parse_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = read_text(path)?;
    let bad = |line: usize| KineticError::Format {
        path: path.to_path_buf(),
        message: format!("line {line} is not two numbers"),
    };
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (a, b) = l.split_once(',').ok_or_else(|| bad(i + 1))?;
            Ok((a.trim().parse().map_err(|_| bad(i + 1))?, b.trim().parse().map_err(|_| bad(i + 1))?))
        })
        .collect()
}

/// `kinetic compare`: L¹ distance between snapshots with the same index.
pub fn compare(a: &Path, b: &Path, dir: &Path) -> Result<RunManifest> {
    let (ma, mb) = (RunManifest::load(a)?, RunManifest::load(b)?);
    let mut rows = Vec::new();
    for s in ma.artifacts.iter().filter(|s| s.starts_with("snapshot_") && s.ends_with(".f64")) {
        if !mb.artifacts.contains(s) {
            continue;
        }
        let (fa, fb) = (read_field(&a.join(s))?, read_field(&b.join(s))?);
        if (fa.time - fb.time).abs() > 1e-9 * fa.time.abs().max(1.0) {
            continue;
        }
        rows.push((fa.time, fa.l1_distance(&fb)?));
    }
    rows.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut out = Outputs::create(dir, RunManifest::new("compare", ma.config.clone(), ma.seed))?;
    out.csv("compare.csv", &pairs_csv("t,l1_distance", &rows))?;
    out.manifest.note("matched", rows.len());
    out.finish()
}

/// `kinetic homogeneous`: closed-form observables of a uniform velocity
/// profile of the configured patch, sampled every `sample_stride · dt`.
pub fn homogeneous(cfg: &Config, dir: &Path) -> Result<RunManifest> {
    let sc = cfg.solver()?;
    let patch = cfg.patch()?;
    let d = sc.grid.d();
    let side = patch.side;
    let height = patch.height.unwrap_or(side.powi(-(d as i32)));
    let mass = height * side.powi(d as i32);
    let vc = patch.center_v;
    let state = HomogeneousState::new(sc.gamma, d, mass, &vc[..d].iter().map(|c| c * mass).collect::<Vec<_>>(), |v: [f64; 2]| {
        let inside = (0..d).all(|a| (v[a] - vc[a]).abs() <= 0.5 * side);
        if inside {
            height
        } else {
            0.0
        }
    })?;
    let stats = ProfileStats {
        linf: height,
        r0: 0.5 * side * (d as f64).sqrt(),
        central_energy: mass * d as f64 * side * side / 12.0,
        entropy: mass * height.ln(),
    };
    let every = sc.sample_stride as f64 * sc.dt;
    let n = (sc.t_final / every).round() as usize;
    let mut s = String::from("t,linf,R,energy,entropy\n");
    for k in 0..=n {
        let t = k as f64 * every;
        let e = exact_observables(&state, &stats, t);
        s.push_str(&format!("{t:e},{:e},{:e},{:e},{:e}\n", e.linf, e.r, e.energy, e.entropy));
    }
    let mut out = Outputs::create(dir, manifest("homogeneous", cfg)?)?;
    out.csv("homogeneous.csv", &s)?;
    out.finish()
}

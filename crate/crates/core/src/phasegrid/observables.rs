use std::fmt::Write as _;

use super::field::{moments, DistributionField, MomentField};
use crate::error::{KineticError, Result};

/// `log` is evaluated on `max(f, ENTROPY_FLOOR)`; `0 · log 0` is taken as 0.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// A cell is in the numerical support iff its value exceeds this fraction of
/// the reference (initial) maximum.
pub const SUPPORT_THRESHOLD_REL: f64 = 1e-12;

/// Settings shared by every observable evaluation of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableOptions {
    pub p_list: Vec<f64>,
    /// Absolute value threshold defining the numerical support.
    pub support_threshold: f64,
    /// Origin used for `R = sup |v - v_c|` and `S = sup |x - v t - x_c|`.
    pub x_center: [f64; 2],
    pub v_center: [f64; 2],
}

impl ObservableOptions {
    pub fn new(p_list: Vec<f64>, reference_max: f64) -> Self {
        Self {
            p_list,
            support_threshold: SUPPORT_THRESHOLD_REL * reference_max,
            x_center: [0.0; 2],
            v_center: [0.0; 2],
        }
    }

    pub fn centered(mut self, x_center: [f64; 2], v_center: [f64; 2]) -> Self {
        self.x_center = x_center;
        self.v_center = v_center;
        self
    }
}

/// Analytic production rates of the conserved/dissipated functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionRates {
    /// `dE/dt = −γ ∫∫∫ |v − v*|² f f*`
    pub energy_rate: f64,
    /// `dH/dt = γ d ∫ ρ²`
    pub entropy_rate: f64,
    /// `d/dt ∫ f^p = γ d (p − 1) ∫ f^p ρ`, one per `p`.
    pub lp_rates: Vec<f64>,
}

/// One instant of an [`ObservableSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRow {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
    pub entropy: f64,
    pub lp_norms: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub energy_rate: f64,
    pub entropy_rate: f64,
    pub lp_rates: Vec<f64>,
}

/// Energy, entropy and Lᵖ production rates from precomputed moments.
pub fn production_rates_with(
    f: &DistributionField,
    m: &MomentField,
    gamma: f64,
    p_list: &[f64],
) -> ProductionRates {
    let grid = f.grid;
    let d = grid.d();
    let dxv = grid.dx_vol();
    let mut energy = 0.0;
    let mut entropy = 0.0;
    for xc in 0..grid.x_cells() {
        let rho = m.rho[xc];
        if rho == 0.0 {
            continue;
        }
        let mom2: f64 = m.mom_at(xc).iter().map(|c| c * c).sum();
        // 2ρq − 2|m|² ≥ 0 by Cauchy–Schwarz; clamp round-off
        energy += (2.0 * rho * m.q[xc] - 2.0 * mom2).max(0.0);
        entropy += rho * rho;
    }
    let mut lp_rates = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let mut acc = 0.0;
        for xc in 0..grid.x_cells() {
            let rho = m.rho[xc];
            if rho == 0.0 {
                continue;
            }
            let s: f64 = f.slice(xc).iter().filter(|&&v| v > 0.0).map(|&v| v.powf(p)).sum();
            acc += s * rho;
        }
        lp_rates.push(gamma * d as f64 * (p - 1.0) * acc * grid.cell_volume());
    }
    ProductionRates {
        energy_rate: -gamma * energy * dxv,
        entropy_rate: gamma * d as f64 * entropy * dxv,
        lp_rates,
    }
}

pub fn production_rates(f: &DistributionField, gamma: f64, p_list: &[f64]) -> ProductionRates {
    production_rates_with(f, &moments(f), gamma, p_list)
}

/// Mass, momentum, energy, entropy, Lᵖ integrals, support radii and production rates.
pub fn observables(f: &DistributionField, gamma: f64, opts: &ObservableOptions) -> ObservableRow {
    let m = moments(f);
    observables_with(f, &m, gamma, opts)
}

pub fn observables_with(
    f: &DistributionField,
    m: &MomentField,
    gamma: f64,
    opts: &ObservableOptions,
) -> ObservableRow {
    let grid = f.grid;
    let d = grid.d();
    let dxv = grid.dx_vol();
    let vol = grid.cell_volume();
    let t = f.time;

    let mass: f64 = m.rho.iter().sum::<f64>() * dxv;
    let mut momentum = vec![0.0; d];
    for xc in 0..grid.x_cells() {
        for (a, mc) in m.mom_at(xc).iter().enumerate() {
            momentum[a] += mc;
        }
    }
    momentum.iter_mut().for_each(|c| *c *= dxv);
    let energy: f64 = m.q.iter().sum::<f64>() * dxv;

    let mut entropy = 0.0;
    let mut lp = vec![0.0; opts.p_list.len()];
    let mut r2: f64 = 0.0;
    let mut s2: f64 = 0.0;
    for xc in 0..grid.x_cells() {
        if m.rho[xc] == 0.0 {
            continue;
        }
        let x = grid.x_coords(xc);
        for (vc, &fv) in f.slice(xc).iter().enumerate() {
            if fv <= 0.0 {
                continue;
            }
            entropy += fv * fv.max(ENTROPY_FLOOR).ln();
            for (acc, &p) in lp.iter_mut().zip(&opts.p_list) {
                *acc += fv.powf(p);
            }
            if fv > opts.support_threshold {
                let v = grid.v_coords(vc);
                let (mut vr, mut sr) = (0.0, 0.0);
                for a in 0..d {
                    let dvc = v[a] - opts.v_center[a];
                    let dxc = x[a] - v[a] * t - opts.x_center[a];
                    vr += dvc * dvc;
                    sr += dxc * dxc;
                }
                r2 = r2.max(vr);
                s2 = s2.max(sr);
            }
        }
    }
    let rates = production_rates_with(f, m, gamma, &opts.p_list);
    ObservableRow {
        t,
        mass,
        momentum,
        energy,
        entropy: entropy * vol,
        lp_norms: lp.into_iter().map(|s| s * vol).collect(),
        r: r2.sqrt(),
        s: s2.sqrt(),
        energy_rate: rates.energy_rate,
        entropy_rate: rates.entropy_rate,
        lp_rates: rates.lp_rates,
    }
}

/// Time series of [`ObservableRow`]s with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub d: usize,
    pub p_list: Vec<f64>,
    pub rows: Vec<ObservableRow>,
}

impl ObservableSeries {
    pub fn new(d: usize, p_list: Vec<f64>) -> Self {
        Self {
            d,
            p_list,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ObservableRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(KineticError::Validation(format!(
                    "observable rows must be strictly increasing in time ({} after {})",
                    row.t, last.t
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn csv_header(d: usize, p_list: &[f64]) -> String {
        let mut cols: Vec<String> = vec!["t".into(), "mass".into()];
        for a in 1..=d {
            cols.push(format!("mom_{a}"));
        }
        cols.push("energy".into());
        cols.push("entropy".into());
        for p in p_list {
            cols.push(format!("lp_{}", fmt_p(*p)));
        }
        cols.extend(["R".into(), "S".into(), "dE_dt".into(), "dH_dt".into()]);
        for p in p_list {
            cols.push(format!("dLp_{}_dt", fmt_p(*p)));
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut s = Self::csv_header(self.d, &self.p_list);
        s.push('\n');
        for r in &self.rows {
            let mut fields: Vec<f64> = vec![r.t, r.mass];
            fields.extend(&r.momentum);
            fields.push(r.energy);
            fields.push(r.entropy);
            fields.extend(&r.lp_norms);
            fields.extend([r.r, r.s, r.energy_rate, r.entropy_rate]);
            fields.extend(&r.lp_rates);
            let line: Vec<String> = fields.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    /// Parses the CSV written by [`ObservableSeries::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| KineticError::Parse { line, message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let d = cols.iter().filter(|c| c.starts_with("mom_")).count();
        if d == 0 || d > 2 {
            return Err(bad(1, "missing momentum columns".into()));
        }
        let p_list: Vec<f64> = cols
            .iter()
            .filter_map(|c| c.strip_prefix("lp_"))
            .map(|p| p.replace('p', ".").parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(1, format!("bad p label: {e}")))?;
        if Self::csv_header(d, &p_list) != header {
            return Err(bad(1, format!("unexpected header `{header}`")));
        }
        let np = p_list.len();
        let mut series = Self::new(d, p_list);
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(k + 2, e.to_string()))?;
            if vals.len() != cols.len() {
                return Err(bad(k + 2, "wrong column count".into()));
            }
            let mut it = vals.into_iter();
            let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
            let head = take(2);
            let momentum = take(d);
            let ee = take(2);
            let lp_norms = take(np);
            let tail = take(4);
            let lp_rates = take(np);
            series.push(ObservableRow {
                t: head[0],
                mass: head[1],
                momentum,
                energy: ee[0],
                entropy: ee[1],
                lp_norms,
                r: tail[0],
                s: tail[1],
                energy_rate: tail[2],
                entropy_rate: tail[3],
                lp_rates,
            })?;
        }
        Ok(series)
    }
}

/// Column label for an exponent: `2` → `2`, `1.5` → `1p5`.
pub fn fmt_p(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{}", p as i64)
    } else {
        format!("{p}").replace('.', "p")
    }
}

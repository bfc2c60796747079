use rayon::prelude::*;

use super::grid::PhaseGrid;
use crate::error::{KineticError, Result};

/// Relative density floor below which the bulk velocity is undefined.
pub const RHO_FLOOR_REL: f64 = 1e-14;

/// Grid sampling of `f(t, x, v)`; values are densities (mass per phase-space volume).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DistributionField {
    pub fn zeros(grid: PhaseGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            time: 0.0,
        }
    }

    pub fn from_values(grid: PhaseGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KineticError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    /// Samples `g(x, v)` at every cell center.
    pub fn from_fn(grid: PhaseGrid, time: f64, g: impl Fn([f64; 2], [f64; 2]) -> f64 + Sync) -> Self {
        let nvc = grid.v_cells();
        let mut values = vec![0.0; grid.len()];
        values
            .par_chunks_mut(nvc)
            .enumerate()
            .for_each(|(xc, slice)| {
                let x = grid.x_coords(xc);
                for (vc, out) in slice.iter_mut().enumerate() {
                    *out = g(x, grid.v_coords(vc));
                }
            });
        Self { grid, values, time }
    }

    /// Velocity slice of one spatial cell.
    pub fn slice(&self, xcell: usize) -> &[f64] {
        let n = self.grid.v_cells();
        &self.values[xcell * n..(xcell + 1) * n]
    }

    pub fn slice_mut(&mut self, xcell: usize) -> &mut [f64] {
        let n = self.grid.v_cells();
        &mut self.values[xcell * n..(xcell + 1) * n]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ |f - g| · dx^d dv^d`.
    pub fn l1_distance(&self, other: &DistributionField) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(KineticError::GridMismatch(
                "fields live on different grids".into(),
            ));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Block averages over `kx` cells per x-axis and `kv` per v-axis.
    pub fn coarsen(&self, kx: usize, kv: usize) -> Result<DistributionField> {
        let g = self.grid;
        if kx == 0 || kv == 0 || g.nx() % kx != 0 || g.nv() % kv != 0 {
            return Err(KineticError::InvalidGrid(format!(
                "cannot coarsen {}x{} cells by {kx}x{kv}",
                g.nx(),
                g.nv()
            )));
        }
        let c = PhaseGrid::with_origin(g.d(), g.lx(), g.lv(), g.nx() / kx, g.nv() / kv, g.x0(), g.v0())?;
        let mut out = DistributionField::zeros(c);
        out.time = self.time;
        let d = g.d() as i32;
        let norm = 1.0 / ((kx as f64).powi(d) * (kv as f64).powi(d));
        for xc in 0..g.x_cells() {
            let xm = g.x_multi(xc);
            let cx = if g.d() == 1 {
                xm[0] / kx
            } else {
                (xm[0] / kx) * c.nx() + xm[1] / kx
            };
            for (vc, &f) in self.slice(xc).iter().enumerate() {
                let vm = g.v_multi(vc);
                let cv = if g.d() == 1 {
                    vm[0] / kv
                } else {
                    (vm[0] / kv) * c.nv() + vm[1] / kv
                };
                out.values[c.index(cx, cv)] += f * norm;
            }
        }
        Ok(out)
    }
}

/// Velocity moments per spatial cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub d: usize,
    /// `ρ(x) = ∫ f dv`
    pub rho: Vec<f64>,
    /// `m(x) = ∫ v f dv`, stored with stride `d`.
    pub mom: Vec<f64>,
    /// `q(x) = ∫ |v|² f dv`
    pub q: Vec<f64>,
    /// `u = m / ρ` where defined, 0 otherwise; stride `d`.
    pub u: Vec<f64>,
    pub defined: Vec<bool>,
}

impl MomentField {
    pub fn mom_at(&self, xcell: usize) -> &[f64] {
        &self.mom[xcell * self.d..(xcell + 1) * self.d]
    }

    pub fn u_at(&self, xcell: usize) -> Option<&[f64]> {
        self.defined[xcell].then(|| &self.u[xcell * self.d..(xcell + 1) * self.d])
    }
}

/// Midpoint-rule moments of one velocity slice: `(ρ, m, q)`.
pub fn slice_moments(grid: &PhaseGrid, slice: &[f64]) -> (f64, [f64; 2], f64) {
    let dvv = grid.dv_vol();
    let (mut rho, mut m, mut q) = (0.0, [0.0; 2], 0.0);
    if grid.d() == 1 {
        for (j, &f) in slice.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let v = grid.v_center(j);
            rho += f;
            m[0] += v * f;
            q += v * v * f;
        }
    } else {
        let nv = grid.nv();
        for j1 in 0..nv {
            let v1 = grid.v_center(j1);
            let row = &slice[j1 * nv..(j1 + 1) * nv];
            for (j2, &f) in row.iter().enumerate() {
                if f == 0.0 {
                    continue;
                }
                let v2 = grid.v_center(j2);
                rho += f;
                m[0] += v1 * f;
                m[1] += v2 * f;
                q += (v1 * v1 + v2 * v2) * f;
            }
        }
    }
    (rho * dvv, [m[0] * dvv, m[1] * dvv], q * dvv)
}

/// Velocity moments of `f` at every spatial cell.
pub fn moments(f: &DistributionField) -> MomentField {
    let grid = f.grid;
    let d = grid.d();
    let nxc = grid.x_cells();
    let per_cell: Vec<(f64, [f64; 2], f64)> = (0..nxc)
        .into_par_iter()
        .map(|xc| slice_moments(&grid, f.slice(xc)))
        .collect();
    let floor = RHO_FLOOR_REL * f.mass() / grid.x_volume();
    let mut out = MomentField {
        d,
        rho: Vec::with_capacity(nxc),
        mom: Vec::with_capacity(nxc * d),
        q: Vec::with_capacity(nxc),
        u: Vec::with_capacity(nxc * d),
        defined: Vec::with_capacity(nxc),
    };
    for (rho, m, q) in per_cell {
        let ok = rho > floor && rho > 0.0;
        out.rho.push(rho);
        out.q.push(q);
        out.defined.push(ok);
        for a in 0..d {
            out.mom.push(m[a]);
            out.u.push(if ok { m[a] / rho } else { 0.0 });
        }
    }
    out
}

/// Local alignment field `E[f](x, v) = ρ(x) v − m(x)`.
pub fn alignment_field(moments: &MomentField, xcell: usize, v: &[f64]) -> Vec<f64> {
    let rho = moments.rho[xcell];
    moments
        .mom_at(xcell)
        .iter()
        .zip(v)
        .map(|(m, vi)| rho * vi - m)
        .collect()
}

/// `h(v) = max_x f(x, v)` on the velocity grid.
pub fn h_profile(f: &DistributionField) -> Vec<f64> {
    let nvc = f.grid.v_cells();
    let mut h = vec![0.0f64; nvc];
    for slice in f.values.chunks(nvc) {
        for (hv, &fv) in h.iter_mut().zip(slice) {
            if fv > *hv {
                *hv = fv;
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> PhaseGrid {
        PhaseGrid::new(1, 2.0, 6.0, 4, 600).unwrap()
    }

    #[test]
    fn constant_field_moments() {
        let g = grid1();
        let c = 0.7;
        let f = DistributionField::from_fn(g, 0.0, |_, _| c);
        let m = moments(&f);
        for xc in 0..g.x_cells() {
            assert!((m.rho[xc] - 6.0 * c).abs() < 1e-12);
            assert!(m.mom[xc].abs() < 1e-12);
            // midpoint rule on v^2 has error -L_v dv^2 / 12 per unit height
            assert!((m.q[xc] - 18.0 * c).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_field_has_undefined_velocity() {
        let f = DistributionField::zeros(grid1());
        let m = moments(&f);
        assert!(m.rho.iter().all(|&r| r == 0.0));
        assert!(m.defined.iter().all(|&ok| !ok));
        assert!(m.u_at(0).is_none());
    }

    #[test]
    fn single_cell_near_one() {
        let g = grid1();
        let j = g.locate_v(1.0).unwrap();
        let w = 0.3;
        let mut f = DistributionField::zeros(g);
        for xc in 0..g.x_cells() {
            f.slice_mut(xc)[j] = w / g.dv();
        }
        let m = moments(&f);
        for xc in 0..g.x_cells() {
            assert!((m.rho[xc] - w).abs() < 1e-12);
            let u = m.u_at(xc).unwrap()[0];
            assert!((u - 1.0).abs() <= g.dv() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn alignment_examples() {
        let m = MomentField {
            d: 1,
            rho: vec![1.0],
            mom: vec![0.0],
            q: vec![0.0],
            u: vec![0.0],
            defined: vec![true],
        };
        assert_eq!(alignment_field(&m, 0, &[2.0]), vec![2.0]);

        // uniform c on [-1, 1], v = 0.5: E = 2c * 0.5 = c
        let g = PhaseGrid::new(1, 1.0, 2.0, 1, 200).unwrap();
        let c = 0.4;
        let f = DistributionField::from_fn(g, 0.0, |_, _| c);
        let mf = moments(&f);
        let e = alignment_field(&mf, 0, &[0.5])[0];
        assert!((e - c).abs() < 1e-12);
    }

    #[test]
    fn h_profile_of_patch() {
        let g = PhaseGrid::new(1, 2.0, 4.0, 40, 80).unwrap();
        let f = DistributionField::from_fn(g, 0.0, |x, v| {
            if x[0] <= 1.0 && v[0].abs() <= 1.0 {
                0.5
            } else {
                0.0
            }
        });
        let h = h_profile(&f);
        for (j, hv) in h.iter().enumerate() {
            let expect = if g.v_center(j).abs() <= 1.0 { 0.5 } else { 0.0 };
            assert_eq!(*hv, expect);
        }
        assert!(h_profile(&DistributionField::zeros(g)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn h_profile_separable() {
        let g = PhaseGrid::new(1, 1.0, 2.0, 10, 10).unwrap();
        let gx = |x: f64| 1.0 + (3.0 * x).sin();
        let kv = |v: f64| (-v * v).exp();
        let f = DistributionField::from_fn(g, 0.0, |x, v| gx(x[0]) * kv(v[0]));
        let gmax = (0..10).map(|i| gx(g.x_center(i))).fold(0.0, f64::max);
        for (j, hv) in h_profile(&f).iter().enumerate() {
            assert!((hv - gmax * kv(g.v_center(j))).abs() < 1e-14);
        }
    }
}

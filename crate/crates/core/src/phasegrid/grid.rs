use serde::{Deserialize, Serialize};

use crate::error::{KineticError, Result};

/// Truncated tensor grid over `[x0, x0 + L_x]^d × [v0, v0 + L_v]^d`.
///
/// Every spatial axis shares `(nx, L_x, x0)` and every velocity axis shares
/// `(nv, L_v, v0)`. Flat storage is row-major with the x-axes outermost:
/// `index = xcell * nv^d + vcell`, where `xcell` and `vcell` are themselves
/// row-major over their axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    d: usize,
    nx: usize,
    nv: usize,
    lx: f64,
    lv: f64,
    x0: f64,
    v0: f64,
}

impl PhaseGrid {
    /// Grid on `[0, L_x]^d × [-L_v/2, L_v/2]^d`.
    pub fn new(d: usize, lx: f64, lv: f64, nx: usize, nv: usize) -> Result<Self> {
        Self::with_origin(d, lx, lv, nx, nv, 0.0, -0.5 * lv)
    }

    pub fn with_origin(
        d: usize,
        lx: f64,
        lv: f64,
        nx: usize,
        nv: usize,
        x0: f64,
        v0: f64,
    ) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(KineticError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {d}"
            )));
        }
        if nx == 0 || nv == 0 {
            return Err(KineticError::InvalidGrid("cell counts must be positive".into()));
        }
        if !(lx > 0.0 && lx.is_finite() && lv > 0.0 && lv.is_finite()) {
            return Err(KineticError::InvalidGrid(format!(
                "extents must be positive and finite (L_x = {lx}, L_v = {lv})"
            )));
        }
        if !(x0.is_finite() && v0.is_finite()) {
            return Err(KineticError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            d,
            nx,
            nv,
            lx,
            lv,
            x0,
            v0,
        })
    }

    /// Builds the grid from spacings; `L/Δ` must be an integer to 1e-9 relative.
    pub fn from_spacing(d: usize, lx: f64, lv: f64, dx: f64, dv: f64) -> Result<Self> {
        let nx = cells_for(lx, dx, "x")?;
        let nv = cells_for(lv, dv, "v")?;
        Self::new(d, lx, lv, nx, nv)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn lv(&self) -> f64 {
        self.lv
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn dv(&self) -> f64 {
        self.lv / self.nv as f64
    }

    /// Number of spatial cells, `nx^d`.
    pub fn x_cells(&self) -> usize {
        self.nx.pow(self.d as u32)
    }
    /// Number of velocity cells, `nv^d`.
    pub fn v_cells(&self) -> usize {
        self.nv.pow(self.d as u32)
    }
    /// Total phase-space cell count, `nx^d · nv^d`.
    pub fn len(&self) -> usize {
        self.x_cells() * self.v_cells()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx_vol(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }
    pub fn dv_vol(&self) -> f64 {
        self.dv().powi(self.d as i32)
    }
    pub fn cell_volume(&self) -> f64 {
        self.dx_vol() * self.dv_vol()
    }
    /// Volume of the spatial domain, `L_x^d`.
    pub fn x_volume(&self) -> f64 {
        self.lx.powi(self.d as i32)
    }

    /// Center of spatial cell `i` along one axis.
    pub fn x_center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx()
    }
    /// Center of velocity cell `j` along one axis.
    pub fn v_center(&self, j: usize) -> f64 {
        self.v0 + (j as f64 + 0.5) * self.dv()
    }
    /// Lower edge `k` (0..=nv) of the velocity axis.
    pub fn v_edge(&self, k: usize) -> f64 {
        self.v0 + k as f64 * self.dv()
    }

    /// Per-axis indices of a flat spatial cell. Unused trailing slots are 0.
    pub fn x_multi(&self, xcell: usize) -> [usize; 2] {
        split(xcell, self.nx, self.d)
    }
    pub fn v_multi(&self, vcell: usize) -> [usize; 2] {
        split(vcell, self.nv, self.d)
    }

    /// Coordinates of a spatial cell center; slot 1 is 0 when `d = 1`.
    pub fn x_coords(&self, xcell: usize) -> [f64; 2] {
        let m = self.x_multi(xcell);
        let mut out = [0.0; 2];
        for a in 0..self.d {
            out[a] = self.x_center(m[a]);
        }
        out
    }
    pub fn v_coords(&self, vcell: usize) -> [f64; 2] {
        let m = self.v_multi(vcell);
        let mut out = [0.0; 2];
        for a in 0..self.d {
            out[a] = self.v_center(m[a]);
        }
        out
    }

    pub fn index(&self, xcell: usize, vcell: usize) -> usize {
        xcell * self.v_cells() + vcell
    }

    /// Locates a point on a spatial axis, `None` outside the grid.
    pub fn locate_x(&self, x: f64) -> Option<usize> {
        locate(x, self.x0, self.dx(), self.nx)
    }
    pub fn locate_v(&self, v: f64) -> Option<usize> {
        locate(v, self.v0, self.dv(), self.nv)
    }

    /// Largest velocity norm over the (closed) velocity box.
    pub fn max_speed(&self) -> f64 {
        let m = self.v0.abs().max((self.v0 + self.lv).abs());
        m * (self.d as f64).sqrt()
    }

    /// Largest velocity component magnitude.
    pub fn max_component_speed(&self) -> f64 {
        self.v0.abs().max((self.v0 + self.lv).abs())
    }

    /// True when both grids describe identical cells.
    pub fn same_as(&self, other: &PhaseGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        self.d == other.d
            && self.nx == other.nx
            && self.nv == other.nv
            && close(self.lx, other.lx)
            && close(self.lv, other.lv)
            && close(self.x0, other.x0)
            && close(self.v0, other.v0)
    }
}

fn cells_for(length: f64, spacing: f64, axis: &str) -> Result<usize> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(KineticError::InvalidGrid(format!(
            "spacing d{axis} must be positive, got {spacing}"
        )));
    }
    let ratio = length / spacing;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(KineticError::InvalidGrid(format!(
            "L_{axis} = {length} is not an integer multiple of d{axis} = {spacing}"
        )));
    }
    Ok(n as usize)
}

fn split(flat: usize, n: usize, d: usize) -> [usize; 2] {
    if d == 1 {
        [flat, 0]
    } else {
        [flat / n, flat % n]
    }
}

fn locate(p: f64, origin: f64, h: f64, n: usize) -> Option<usize> {
    let s = (p - origin) / h;
    if !(s >= 0.0) || s >= n as f64 {
        return None;
    }
    Some((s as usize).min(n - 1))
}

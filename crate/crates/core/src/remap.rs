//! One-dimensional conservative remap with limited piecewise-linear
//! reconstruction.
//!
//! A line of cell averages is advanced by moving, through every cell edge,
//! the mass of the reconstruction lying in the swept region next to the
//! edge. The swept width is given per edge in cell units (`|D| ≤ 1`), signed
//! positive when mass moves toward higher indices. Cells outside the line
//! are zero (zero inflow); mass crossing the two end edges is reported as
//! outflow.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Slope limiter of the piecewise-linear reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limiter {
    /// Piecewise-constant reconstruction (linear remap with donor-cell weights).
    DonorCell,
    Minmod,
    VanLeer,
    /// Monotonized central.
    Mc,
    #[default]
    Superbee,
}

impl Limiter {
    /// Limited slope (as a difference across one cell) from the left and right differences.
    #[inline(always)]
    pub fn slope(self, a: f64, b: f64) -> f64 {
        if a * b <= 0.0 {
            return 0.0;
        }
        match self {
            Limiter::DonorCell => 0.0,
            Limiter::Minmod => {
                if a.abs() < b.abs() {
                    a
                } else {
                    b
                }
            }
            Limiter::VanLeer => 2.0 * a * b / (a + b),
            Limiter::Mc => {
                let m = (2.0 * a.abs()).min(2.0 * b.abs()).min(0.5 * (a + b).abs());
                m.copysign(a)
            }
            Limiter::Superbee => {
                let (x, y) = (a.abs(), b.abs());
                let m = (2.0 * x).min(y).max(x.min(2.0 * y));
                m.copysign(a)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Limiter::DonorCell => "donor",
            Limiter::Minmod => "minmod",
            Limiter::VanLeer => "vanleer",
            Limiter::Mc => "mc",
            Limiter::Superbee => "superbee",
        }
    }
}

impl FromStr for Limiter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "donor" | "donor_cell" | "upwind" | "none" => Ok(Limiter::DonorCell),
            "minmod" => Ok(Limiter::Minmod),
            "vanleer" | "van_leer" => Ok(Limiter::VanLeer),
            "mc" => Ok(Limiter::Mc),
            "superbee" => Ok(Limiter::Superbee),
            other => Err(format!("unknown limiter `{other}`")),
        }
    }
}

/// Mass of the reconstruction of cell `(avg, slope)` swept through an edge.
///
/// `disp > 0`: the right part of the cell, of width `disp`, leaves through its
/// upper edge. `disp < 0`: the left part leaves through its lower edge; the
/// returned flux is then negative.
#[inline(always)]
pub fn edge_flux(disp: f64, avg: f64, slope: f64) -> f64 {
    if disp > 0.0 {
        disp * (avg + 0.5 * slope * (1.0 - disp))
    } else if disp < 0.0 {
        disp * (avg - 0.5 * slope * (1.0 + disp))
    } else {
        0.0
    }
}

/// Outflow through the two end edges of a line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Outflow {
    pub low: f64,
    pub high: f64,
}

impl Outflow {
    pub fn total(&self) -> f64 {
        self.low + self.high
    }
}

/// Remaps `f` into `out` using per-edge swept widths `disp(e)`, `e = 0..=n`.
pub fn remap_line(
    f: &[f64],
    out: &mut [f64],
    limiter: Limiter,
    disp: impl Fn(usize) -> f64,
) -> Outflow {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return Outflow::default();
    }
    let at = |k: isize| -> f64 {
        if k < 0 || k as usize >= n {
            0.0
        } else {
            f[k as usize]
        }
    };
    let slope = |k: isize| -> f64 {
        let c = at(k);
        limiter.slope(c - at(k - 1), at(k + 1) - c)
    };
    let flux = |e: usize| -> f64 {
        let dsp = disp(e);
        debug_assert!(dsp.abs() <= 1.0 + 1e-12, "swept width {dsp} exceeds one cell");
        if dsp > 0.0 {
            let k = e as isize - 1;
            if k < 0 {
                return 0.0;
            }
            edge_flux(dsp, at(k), slope(k))
        } else if dsp < 0.0 {
            if e >= n {
                return 0.0;
            }
            edge_flux(dsp, at(e as isize), slope(e as isize))
        } else {
            0.0
        }
    };
    let mut lower = flux(0);
    let low = -lower;
    for k in 0..n {
        let upper = flux(k + 1);
        out[k] = f[k] - (upper - lower);
        lower = upper;
    }
    Outflow {
        low: low.max(0.0),
        high: lower.max(0.0),
    }
}

/// Restores the first moment of a remapped line with an upwind shift.
///
/// `before` is the first moment `Σ c_k f_k` to restore (in units of cell
/// index), computed on the pre-remap line. Mass moves only across interior
/// edges of `line`, so mass is unchanged and the first moment becomes
/// `before` up to round-off. Returns the shift actually applied (in cells).
pub fn restore_first_moment(line: &mut [f64], before: f64) -> f64 {
    let n = line.len();
    if n < 2 {
        return 0.0;
    }
    let after: f64 = line.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let deficit = before - after;
    if deficit == 0.0 {
        return 0.0;
    }
    // moving mass G across edge (k, k+1) raises the first moment by G
    let (upwind_sum, shift) = if deficit > 0.0 {
        let s: f64 = line[..n - 1].iter().sum();
        (s, deficit / s)
    } else {
        let s: f64 = line[1..].iter().sum();
        (s, deficit / s)
    };
    if !(upwind_sum > 0.0) || !shift.is_finite() || shift.abs() >= 1.0 {
        return 0.0;
    }
    if shift > 0.0 {
        let mut carry = 0.0;
        for k in 0..n {
            let moving = if k + 1 < n { shift * line[k] } else { 0.0 };
            line[k] += carry - moving;
            carry = moving;
        }
    } else {
        let c = -shift;
        let mut carry = 0.0;
        for k in (0..n).rev() {
            let moving = if k > 0 { c * line[k] } else { 0.0 };
            line[k] += carry - moving;
            carry = moving;
        }
    }
    shift
}

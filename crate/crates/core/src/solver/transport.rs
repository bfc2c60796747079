use super::active::{dims, strides, ActiveBox};
use crate::error::{KineticError, Result};
use crate::phasegrid::DistributionField;
use crate::remap::{edge_flux, Limiter};

/// Values in `(−NEG_TOL, 0)` are treated as round-off and clipped.
pub const NEG_TOL: f64 = 1e-12;

/// Values below this are flushed to zero after each substep so that
/// geometric tails ahead of a front stop growing the active box.
pub const FLUSH_BELOW: f64 = 1e-200;

/// Scratch space reused across transport sweeps.
#[derive(Debug, Default, Clone)]
pub struct TransportScratch {
    flux: Vec<f64>,
    cour: Vec<f64>,
}

/// Free transport `f(x − v dt, v)` along spatial axis `axis` over the active box.
///
/// Grows the box by one cell along the axis beforehand and trims empty
/// boundary planes afterwards. Returns the mass that left the grid.
pub(crate) fn transport_axis(
    f: &mut DistributionField,
    bbox: &mut ActiveBox,
    axis: usize,
    dt: f64,
    limiter: Limiter,
    scratch: &mut TransportScratch,
) -> Result<f64> {
    if bbox.is_empty() || dt == 0.0 {
        return Ok(0.0);
    }
    let grid = f.grid;
    let d = grid.d();
    let (n, naxes) = dims(&grid);
    let s = strides(&grid);
    let last = naxes - 1;
    bbox.grow(&grid, axis);
    let (i0, i1) = (bbox.lo[axis], bbox.hi[axis]);
    let (r0, r1) = (bbox.lo[last], bbox.hi[last]);
    let len = r1 - r0;
    let na = n[axis];
    let sa = s[axis];
    let scale = dt / grid.dx();
    let vaxis = d + axis;

    scratch.flux.resize((i1 - i0 + 1) * len, 0.0);
    scratch.cour.resize(len, 0.0);
    if vaxis == last {
        for k in 0..len {
            scratch.cour[k] = grid.v_center(r0 + k) * scale;
        }
    }

    // columns: every combination of axes other than `axis` and `last`
    let mut column = *bbox;
    column.lo[axis] = 0;
    column.hi[axis] = 1;
    let mut outflow = 0.0;
    let mut worst = 0.0f64;
    let values = &mut f.values;
    let flux = &mut scratch.flux;
    let cour = &mut scratch.cour;
    column.for_each_row(&grid, |base, idx| {
        if vaxis != last {
            let c = grid.v_center(idx[vaxis]) * scale;
            cour.iter_mut().for_each(|x| *x = c);
        }
        let at = |i: isize, k: usize| -> f64 {
            if i < 0 || i as usize >= na {
                0.0
            } else {
                values[base + i as usize * sa + r0 + k]
            }
        };
        for e in i0..=i1 {
            let row = &mut flux[(e - i0) * len..(e - i0 + 1) * len];
            let e = e as isize;
            for k in 0..len {
                let c = cour[k];
                row[k] = if c > 0.0 {
                    let (a, b, cc) = (at(e - 2, k), at(e - 1, k), at(e, k));
                    edge_flux(c, b, limiter.slope(b - a, cc - b))
                } else if c < 0.0 {
                    let (a, b, cc) = (at(e - 1, k), at(e, k), at(e + 1, k));
                    edge_flux(c, b, limiter.slope(b - a, cc - b))
                } else {
                    0.0
                };
            }
        }
        if i0 == 0 {
            outflow += flux[..len].iter().map(|&x| (-x).max(0.0)).sum::<f64>();
        }
        if i1 == na {
            let top = &flux[(i1 - i0) * len..];
            outflow += top.iter().map(|&x| x.max(0.0)).sum::<f64>();
        }
        for i in i0..i1 {
            let lower = &flux[(i - i0) * len..(i - i0 + 1) * len];
            let upper = &flux[(i - i0 + 1) * len..(i - i0 + 2) * len];
            let row = &mut values[base + i * sa + r0..base + i * sa + r1];
            for k in 0..len {
                let v = row[k] - (upper[k] - lower[k]);
                row[k] = if v < FLUSH_BELOW {
                    worst = worst.min(v);
                    0.0
                } else {
                    v
                };
            }
        }
    });
    if worst < -NEG_TOL {
        return Err(KineticError::NumericalAbort {
            time: f.time,
            message: format!("transport produced a negative value {worst:e}"),
        });
    }
    trim_axis(f, bbox, axis);
    Ok(outflow * grid.cell_volume())
}

/// Drops all-zero boundary planes of the box along `axis`.
pub(crate) fn trim_axis(f: &DistributionField, bbox: &mut ActiveBox, axis: usize) {
    let plane_empty = |bbox: &ActiveBox, i: usize| -> bool {
        let mut plane = *bbox;
        plane.lo[axis] = i;
        plane.hi[axis] = i + 1;
        let last = bbox.naxes - 1;
        let mut empty = true;
        plane.for_each_row(&f.grid, |base, _| {
            if empty {
                let row = &f.values[base + plane.lo[last]..base + plane.hi[last]];
                empty = row.iter().all(|&v| v == 0.0);
            }
        });
        empty
    };
    while bbox.lo[axis] < bbox.hi[axis] && plane_empty(bbox, bbox.lo[axis]) {
        bbox.lo[axis] += 1;
    }
    while bbox.lo[axis] < bbox.hi[axis] && plane_empty(bbox, bbox.hi[axis] - 1) {
        bbox.hi[axis] -= 1;
    }
    if bbox.lo[axis] >= bbox.hi[axis] {
        *bbox = ActiveBox {
            naxes: bbox.naxes,
            lo: [0; 4],
            hi: [0; 4],
        };
    }
}

/// Whole-cell offset of a row moving at `v` after elapsed time `t`.
#[inline]
pub fn lattice_offset(v: f64, t: f64, dx: f64) -> i64 {
    (v * t / dx).round() as i64
}

/// Free transport along `axis` by whole-cell shifts: each row moves by
/// `round(v t_to / dx) − round(v t_from / dx)` cells, so the accumulated
/// displacement is exact to within half a cell and nothing diffuses.
pub(crate) fn lattice_axis(
    f: &mut DistributionField,
    bbox: &mut ActiveBox,
    axis: usize,
    t_from: f64,
    t_to: f64,
    scratch: &mut TransportScratch,
) -> f64 {
    if bbox.is_empty() || t_from == t_to {
        return 0.0;
    }
    let grid = f.grid;
    let d = grid.d();
    let (n, naxes) = dims(&grid);
    let s = strides(&grid);
    let last = naxes - 1;
    let vaxis = d + axis;
    let dx = grid.dx();
    let shift_of = |j: usize| {
        let v = grid.v_center(j);
        lattice_offset(v, t_to, dx) - lattice_offset(v, t_from, dx)
    };
    let (vlo, vhi) = (bbox.lo[vaxis], bbox.hi[vaxis]);
    let reach = (vlo..vhi).map(|j| shift_of(j).unsigned_abs() as usize).max().unwrap_or(0);
    if reach == 0 {
        return 0.0;
    }
    for _ in 0..reach {
        bbox.grow(&grid, axis);
    }
    let (i0, i1) = (bbox.lo[axis], bbox.hi[axis]);
    let (r0, r1) = (bbox.lo[last], bbox.hi[last]);
    let len = r1 - r0;
    let na = n[axis];
    let sa = s[axis];
    let planes = i1 - i0;
    scratch.flux.resize(planes * len, 0.0);
    scratch.cour.resize(len, 0.0);
    if vaxis == last {
        for k in 0..len {
            scratch.cour[k] = shift_of(r0 + k) as f64;
        }
    }
    let mut column = *bbox;
    column.lo[axis] = 0;
    column.hi[axis] = 1;
    let mut lost = 0.0;
    let values = &mut f.values;
    let tmp = &mut scratch.flux;
    let sh = &mut scratch.cour;
    column.for_each_row(&grid, |base, idx| {
        if vaxis != last {
            let c = shift_of(idx[vaxis]) as f64;
            sh.iter_mut().for_each(|x| *x = c);
        }
        for i in i0..i1 {
            let src = &values[base + i * sa + r0..base + i * sa + r1];
            tmp[(i - i0) * len..(i - i0 + 1) * len].copy_from_slice(src);
        }
        for i in i0..i1 {
            let row = &mut values[base + i * sa + r0..base + i * sa + r1];
            for k in 0..len {
                let from = i as i64 - sh[k] as i64;
                row[k] = if from >= i0 as i64 && from < i1 as i64 {
                    tmp[(from as usize - i0) * len + k]
                } else {
                    0.0
                };
            }
        }
        // rows pushed past the grid edge
        for i in i0..i1 {
            for k in 0..len {
                let to = i as i64 + sh[k] as i64;
                if to < 0 || to >= na as i64 {
                    lost += tmp[(i - i0) * len + k];
                }
            }
        }
    });
    trim_axis(f, bbox, axis);
    lost * grid.cell_volume()
}

use super::active::{dims, strides, ActiveBox};
use super::config::PatchSpec;
use crate::phasegrid::{DistributionField, PhaseGrid};

/// Covered fraction of `[lo, hi]`, snapped to 0 or 1 within round-off of
/// the grid edges so that no specks appear next to the patch.
fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    let frac = (hi.min(b) - lo.max(a)).max(0.0) / (hi - lo);
    if frac < 1e-12 {
        0.0
    } else if frac > 1.0 - 1e-12 {
        1.0
    } else {
        frac
    }
}

/// Cell averages of the uniform patch, followed by the requested smoothing.
///
/// Cells only partly covered get the covered fraction of the height, so the
/// mass equals `height · side^{2d}` whenever the patch lies inside the grid.
pub fn patch_field(grid: PhaseGrid, spec: &PatchSpec) -> DistributionField {
    let d = grid.d();
    let h = spec.height_for(d);
    let half = 0.5 * spec.side;
    let (dx, dv) = (grid.dx(), grid.dv());
    let xw: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..grid.nx())
                .map(|i| {
                    let lo = grid.x0() + i as f64 * dx;
                    overlap(lo, lo + dx, spec.center_x[a] - half, spec.center_x[a] + half)
                })
                .collect()
        })
        .collect();
    let vw: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..grid.nv())
                .map(|j| {
                    let lo = grid.v_edge(j);
                    overlap(lo, lo + dv, spec.center_v[a] - half, spec.center_v[a] + half)
                })
                .collect()
        })
        .collect();
    let mut f = DistributionField::zeros(grid);
    for xc in 0..grid.x_cells() {
        let xm = grid.x_multi(xc);
        let wx: f64 = (0..d).map(|a| xw[a][xm[a]]).product();
        if wx == 0.0 {
            continue;
        }
        let slice = f.slice_mut(xc);
        for (vc, out) in slice.iter_mut().enumerate() {
            let vm = grid.v_multi(vc);
            let wv: f64 = (0..d).map(|a| vw[a][vm[a]]).product();
            *out = h * wx * wv;
        }
    }
    for _ in 0..spec.smoothing {
        jacobi_smooth(&mut f);
    }
    f
}

/// One conservative `(¼, ½, ¼)` pass along every phase-space axis.
///
/// Mass is kept exactly unless the field touches the grid boundary.
pub fn jacobi_smooth(f: &mut DistributionField) {
    let grid = f.grid;
    let (n, naxes) = dims(&grid);
    let s = strides(&grid);
    let full = ActiveBox::full(&grid);
    for axis in 0..naxes {
        let src = f.values.clone();
        let (na, sa) = (n[axis], s[axis]);
        let last = naxes - 1;
        let nl = n[last];
        full.for_each_row(&grid, |base, idx| {
            let _ = idx;
            for k in 0..nl {
                let off = base + k;
                let i = if axis == last { k } else { idx[axis] };
                let c = src[off];
                let lo = if i > 0 { src[off - sa] } else { 0.0 };
                let hi = if i + 1 < na { src[off + sa] } else { 0.0 };
                f.values[off] = 0.25 * lo + 0.5 * c + 0.25 * hi;
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_patch_has_unit_mass() {
        let g = PhaseGrid::from_spacing(1, 20.0, 6.0, 0.05, 0.01).unwrap();
        let spec = PatchSpec {
            center_x: [11.0, 0.0],
            center_v: [-0.3, 0.0],
            side: 2.0,
            height: None,
            smoothing: 0,
        };
        let f = patch_field(g, &spec);
        assert!((f.mass() - 1.0).abs() < 1e-12);
        assert!((f.max_value() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn partial_cells_get_fractions() {
        let g = PhaseGrid::new(1, 4.0, 4.0, 4, 4).unwrap();
        let spec = PatchSpec {
            center_x: [2.0, 0.0],
            center_v: [0.0, 0.0],
            side: 1.0,
            height: Some(1.0),
            smoothing: 0,
        };
        let f = patch_field(g, &spec);
        assert!((f.mass() - 1.0).abs() < 1e-14);
        assert!((f.values[g.index(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn smoothing_conserves_interior_mass_in_two_dimensions() {
        let g = PhaseGrid::new(2, 4.0, 4.0, 12, 12).unwrap();
        let spec = PatchSpec {
            center_x: [2.0, 2.0],
            center_v: [0.0, 0.0],
            side: 1.0,
            height: None,
            smoothing: 2,
        };
        let f = patch_field(g, &spec);
        assert!((f.mass() - 1.0).abs() < 1e-13);
        assert!(f.max_value() < 1.0);
    }
}

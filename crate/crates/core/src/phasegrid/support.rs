use super::field::DistributionField;

/// Free-flow image of the initial support box `B_{R0} × B_{R0}`:
/// `Q(t) = {(x, v) : |v| ≤ R0, |x − v t| ≤ R0}` in re-centered coordinates.
///
/// Coordinates are translated so that the initial patch center
/// `(x_center, v_center)` maps to the origin; the Galilean frame moves with
/// `v_center`, so the invariant is `|x − v t − x_center|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportSet {
    pub d: usize,
    pub r0: f64,
    pub t: f64,
    pub x_center: [f64; 2],
    pub v_center: [f64; 2],
    /// Extra positional uncertainty of the transport scheme, in cells of `dx`.
    pub registration: f64,
}

impl SupportSet {
    pub fn new(d: usize, r0: f64, t: f64) -> Self {
        Self {
            d,
            r0,
            t,
            x_center: [0.0; 2],
            v_center: [0.0; 2],
            registration: 0.0,
        }
    }

    pub fn centered(mut self, x_center: [f64; 2], v_center: [f64; 2]) -> Self {
        self.x_center = x_center;
        self.v_center = v_center;
        self
    }

    pub fn with_registration(mut self, cells: f64) -> Self {
        self.registration = cells;
        self
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    fn local(&self, x: &[f64], v: &[f64]) -> (f64, f64) {
        let (mut v2, mut s2) = (0.0, 0.0);
        for a in 0..self.d {
            let vr = v[a] - self.v_center[a];
            let xr = x[a] - v[a] * self.t - self.x_center[a];
            v2 += vr * vr;
            s2 += xr * xr;
        }
        (v2.sqrt(), s2.sqrt())
    }

    /// Membership predicate.
    pub fn contains(&self, x: &[f64], v: &[f64]) -> bool {
        let (vn, sn) = self.local(x, v);
        vn <= self.r0 && sn <= self.r0
    }

    /// Diameter bound `h(t) = min{2 R0, 2 R0 / t}` on the velocity section.
    pub fn diameter_bound(&self) -> f64 {
        diameter_bound(self.r0, self.t)
    }

    /// Mass carried by cells that do not touch `Q(t)`.
    ///
    /// A cell is counted as touching when its center lies within `Q(t)`
    /// inflated by the cell half-diagonal in each of the two constraints,
    /// plus the registration error of the transport scheme in `x`.
    pub fn mass_outside(&self, f: &DistributionField) -> f64 {
        let g = f.grid;
        let sd = (g.d() as f64).sqrt();
        let v_slack = 0.5 * g.dv() * sd;
        let x_slack = ((0.5 + self.registration) * g.dx() + 0.5 * g.dv() * self.t.abs()) * sd;
        let mut outside = 0.0;
        for xc in 0..g.x_cells() {
            let x = g.x_coords(xc);
            for (vc, &fv) in f.slice(xc).iter().enumerate() {
                if fv == 0.0 {
                    continue;
                }
                let v = g.v_coords(vc);
                let (vn, sn) = self.local(&x, &v);
                if vn > self.r0 + v_slack || sn > self.r0 + x_slack {
                    outside += fv;
                }
            }
        }
        outside * g.cell_volume()
    }
}

/// `h(t) = min{2 R0, 2 R0 / t}`.
pub fn diameter_bound(r0: f64, t: f64) -> f64 {
    if t <= 1.0 {
        2.0 * r0
    } else {
        2.0 * r0 / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn initial_box() {
        let q = SupportSet::new(1, 1.0, 0.0);
        assert!(q.contains(&[0.9], &[-0.9]));
        assert!(!q.contains(&[1.1], &[0.0]));
        assert!(!q.contains(&[0.0], &[1.1]));
        assert_eq!(q.diameter_bound(), 2.0);
    }

    #[test]
    fn free_characteristic_from_origin_stays_inside() {
        for &v in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
            for &t in &[0.0, 0.5, 3.0, 40.0] {
                let q = SupportSet::new(1, 1.0, t);
                assert!(q.contains(&[v * t], &[v]));
            }
        }
    }

    #[test]
    fn diameter_at_four() {
        assert_eq!(SupportSet::new(1, 1.0, 4.0).diameter_bound(), 0.5);
    }

    #[test]
    fn recentered_predicate() {
        let q = SupportSet::new(1, 1.0, 2.0).centered([11.0, 0.0], [-0.3, 0.0]);
        // the patch center moves with velocity −0.3
        assert!(q.contains(&[11.0 - 0.6], &[-0.3]));
        assert!(!q.contains(&[11.0], &[0.8]));
        // free flight from (10.2, 0.6) lands at 11.4
        assert!(q.contains(&[11.4], &[0.6]));
        assert!(!q.contains(&[11.4], &[-0.5]));
    }

    proptest! {
        #[test]
        fn diameter_bound_nonincreasing(r0 in 0.01f64..10.0, t in 0.0f64..100.0, dt in 0.0f64..10.0) {
            prop_assert!(diameter_bound(r0, t + dt) <= diameter_bound(r0, t));
        }
    }
}

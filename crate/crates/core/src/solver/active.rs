use crate::phasegrid::{DistributionField, PhaseGrid};

/// Axis-aligned index box containing every nonzero cell of a field.
///
/// Axes follow storage order: `0..d` are spatial, `d..2d` are velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveBox {
    pub naxes: usize,
    pub lo: [usize; 4],
    pub hi: [usize; 4],
}

pub(crate) fn dims(grid: &PhaseGrid) -> ([usize; 4], usize) {
    let d = grid.d();
    let mut n = [1; 4];
    for a in 0..d {
        n[a] = grid.nx();
        n[d + a] = grid.nv();
    }
    (n, 2 * d)
}

pub(crate) fn strides(grid: &PhaseGrid) -> [usize; 4] {
    let (n, naxes) = dims(grid);
    let mut s = [0; 4];
    let mut acc = 1;
    for a in (0..naxes).rev() {
        s[a] = acc;
        acc *= n[a];
    }
    s
}

impl ActiveBox {
    /// Tight box around the nonzero cells; an empty field gives an empty box.
    pub fn scan(f: &DistributionField) -> Self {
        let (n, naxes) = dims(&f.grid);
        let full = ActiveBox {
            naxes,
            lo: [0; 4],
            hi: n,
        };
        full.shrink(f)
    }

    pub fn full(grid: &PhaseGrid) -> Self {
        let (n, naxes) = dims(grid);
        ActiveBox {
            naxes,
            lo: [0; 4],
            hi: n,
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..self.naxes).any(|a| self.lo[a] >= self.hi[a])
    }

    /// Tightens the box by visiting only the cells it currently contains.
    pub fn shrink(&self, f: &DistributionField) -> Self {
        let s = strides(&f.grid);
        let mut lo = self.hi;
        let mut hi = self.lo;
        let mut any = false;
        self.for_each_row(&f.grid, |base, idx| {
            let last = self.naxes - 1;
            let row = &f.values[base + self.lo[last]..base + self.hi[last]];
            let first = row.iter().position(|&v| v != 0.0);
            if let Some(p0) = first {
                let p1 = row.iter().rposition(|&v| v != 0.0).unwrap();
                any = true;
                for a in 0..last {
                    lo[a] = lo[a].min(idx[a]);
                    hi[a] = hi[a].max(idx[a] + 1);
                }
                lo[last] = lo[last].min(self.lo[last] + p0);
                hi[last] = hi[last].max(self.lo[last] + p1 + 1);
            }
        });
        let _ = s;
        if !any {
            return ActiveBox {
                naxes: self.naxes,
                lo: [0; 4],
                hi: [0; 4],
            };
        }
        ActiveBox {
            naxes: self.naxes,
            lo,
            hi,
        }
    }

    /// Calls `visit(base_offset, multi_index)` for every row along the last axis.
    pub fn for_each_row(&self, grid: &PhaseGrid, mut visit: impl FnMut(usize, [usize; 4])) {
        if self.is_empty() {
            return;
        }
        let s = strides(grid);
        let last = self.naxes - 1;
        let mut idx = self.lo;
        loop {
            let base: usize = (0..last).map(|a| idx[a] * s[a]).sum();
            visit(base, idx);
            // odometer over axes 0..last
            let mut a = last;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < self.hi[a] {
                    break;
                }
                idx[a] = self.lo[a];
                if a == 0 {
                    return;
                }
            }
        }
    }

    /// Grows the box by one cell on both sides of `axis`, clamped to the grid.
    pub fn grow(&mut self, grid: &PhaseGrid, axis: usize) {
        let (n, _) = dims(grid);
        if self.is_empty() {
            return;
        }
        self.lo[axis] = self.lo[axis].saturating_sub(1);
        self.hi[axis] = (self.hi[axis] + 1).min(n[axis]);
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        (0..self.naxes).all(|a| idx[a] >= self.lo[a] && idx[a] < self.hi[a])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_finds_tight_box() {
        let g = PhaseGrid::new(1, 1.0, 1.0, 10, 12).unwrap();
        let mut f = DistributionField::zeros(g);
        f.values[g.index(3, 4)] = 1.0;
        f.values[g.index(6, 9)] = 2.0;
        let b = ActiveBox::scan(&f);
        assert_eq!(&b.lo[..2], &[3, 4]);
        assert_eq!(&b.hi[..2], &[7, 10]);
        assert!(ActiveBox::scan(&DistributionField::zeros(g)).is_empty());
    }

    #[test]
    fn scan_in_four_axes() {
        let g = PhaseGrid::new(2, 1.0, 1.0, 5, 6).unwrap();
        let mut f = DistributionField::zeros(g);
        let xc = 2 * 5 + 3;
        let vc = 1 * 6 + 4;
        f.values[g.index(xc, vc)] = 1.0;
        let b = ActiveBox::scan(&f);
        assert_eq!(b.lo, [2, 3, 1, 4]);
        assert_eq!(b.hi, [3, 4, 2, 5]);
        let mut rows = 0;
        ActiveBox::full(&g).for_each_row(&g, |_, _| rows += 1);
        assert_eq!(rows, 5 * 5 * 6);
    }
}

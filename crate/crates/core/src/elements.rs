// Element quadrature shared by the energy and the second-variation assembly.
//
// Even cell counts use quadratic elements over pairs of cells with 3-point
// Gauss rules; odd counts fall back to linear elements with 2-point rules.
// In both cases the row sums of the element mass equal the grid weights
// (Simpson or trapezoid), which is what makes the lumped mass consistent.

use crate::geometry::AngularGrid;

#[derive(Clone, Copy, Debug)]
pub(crate) struct QuadPoint {
    pub idx: [usize; 3],
    pub len: usize,
    pub phi: [f64; 3],
    pub dphi: [f64; 3],
    pub weight: f64,
}

impl QuadPoint {
    #[inline]
    pub fn value(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.len {
            s += self.phi[a] * f[self.idx[a]];
        }
        s
    }

    #[inline]
    pub fn slope(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.len {
            s += self.dphi[a] * f[self.idx[a]];
        }
        s
    }
}

pub(crate) fn quadrature(grid: &AngularGrid) -> Vec<QuadPoint> {
    let n = grid.n_cells();
    let h = grid.h();
    let mut pts = Vec::new();
    if n % 2 == 0 {
        let g = (0.6f64).sqrt();
        let rule = [(-g, 5.0 / 9.0), (0.0, 8.0 / 9.0), (g, 5.0 / 9.0)];
        for e in 0..n / 2 {
            let idx = [2 * e, 2 * e + 1, 2 * e + 2];
            for &(xi, w) in &rule {
                pts.push(QuadPoint {
                    idx,
                    len: 3,
                    phi: [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)],
                    dphi: [(xi - 0.5) / h, -2.0 * xi / h, (xi + 0.5) / h],
                    weight: w * h,
                });
            }
        }
    } else {
        let g = 1.0 / 3f64.sqrt();
        for e in 0..n {
            for xi in [-g, g] {
                pts.push(QuadPoint {
                    idx: [e, e + 1, 0],
                    len: 2,
                    phi: [0.5 * (1.0 - xi), 0.5 * (1.0 + xi), 0.0],
                    dphi: [-1.0 / h, 1.0 / h, 0.0],
                    weight: 0.5 * h,
                });
            }
        }
    }
    pts
}

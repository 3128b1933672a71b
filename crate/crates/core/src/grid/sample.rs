//! Continuous access to lattice distance fields.

use super::DistanceField;
use crate::error::{Error, Result};
use crate::Vec3;

impl DistanceField {
    /// Fractional cell-center coordinates of `p`: cell centers sit at integers.
    #[inline]
    fn lattice_coords(&self, p: &Vec3) -> [f64; 3] {
        let g = &self.geometry;
        [
            (p.x - g.origin.x) / g.resolution - 0.5,
            (p.y - g.origin.y) / g.resolution - 0.5,
            (p.z - g.origin.z) / g.resolution - 0.5,
        ]
    }

    /// Trilinear interpolation between the 8 surrounding cell centers.
    ///
    /// Defined between the first and last cell centers on every axis.
    pub fn sample_distance(&self, p: &Vec3) -> Result<f64> {
        let f = self.lattice_coords(p);
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let last = (self.geometry.dims[a] - 1) as f64;
            if !(f[a] >= 0.0 && f[a] <= last) {
                return Err(Error::OutOfBounds(format!(
                    "point ({:.3}, {:.3}, {:.3}) outside interpolation range",
                    p.x, p.y, p.z
                )));
            }
            let i = (f[a].floor() as usize).min(self.geometry.dims[a] - 2);
            base[a] = i;
            t[a] = f[a] - i as f64;
        }
        let mut acc = 0.0;
        for dx in 0..2 {
            let wx = if dx == 0 { 1.0 - t[0] } else { t[0] };
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - t[1] } else { t[1] };
                for dz in 0..2 {
                    let wz = if dz == 0 { 1.0 - t[2] } else { t[2] };
                    acc += wx * wy * wz * self.at([base[0] + dx, base[1] + dy, base[2] + dz]);
                }
            }
        }
        Ok(acc)
    }

    /// Clamps `p` into the region where [`Self::sample_distance`] and a full
    /// gradient-fit window are defined.
    pub fn clamp_inside(&self, p: &Vec3, margin_cells: usize) -> Vec3 {
        let g = &self.geometry;
        let mut q = *p;
        for a in 0..3 {
            let lo = g.origin[a] + (margin_cells as f64 + 0.5) * g.resolution;
            let hi = g.origin[a] + (g.dims[a] as f64 - margin_cells as f64 - 0.5) * g.resolution;
            if lo <= hi {
                q[a] = q[a].clamp(lo, hi);
            } else {
                q[a] = 0.5 * (lo + hi);
            }
        }
        q
    }

    /// Cubic B-spline smoothing of the lattice values, with its exact gradient.
    ///
    /// The result is C2 in `p`, so finite differences of the value agree with
    /// the returned gradient everywhere. Needs two cells of margin per side.
    pub fn sample_smooth(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        let f = self.lattice_coords(p);
        let mut base = [0usize; 3];
        let mut w = [[0.0; 4]; 3];
        let mut dw = [[0.0; 4]; 3];
        for a in 0..3 {
            let n = self.geometry.dims[a];
            let fl = f[a].floor();
            if !(fl >= 1.0 && fl + 2.0 <= (n - 1) as f64) {
                return Err(Error::OutOfBounds(format!(
                    "point ({:.3}, {:.3}, {:.3}) too close to the field boundary",
                    p.x, p.y, p.z
                )));
            }
            base[a] = fl as usize - 1;
            let t = f[a] - fl;
            let t2 = t * t;
            let t3 = t2 * t;
            let u = 1.0 - t;
            w[a] = [
                u * u * u / 6.0,
                (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
                (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
                t3 / 6.0,
            ];
            dw[a] = [
                -u * u / 2.0,
                (3.0 * t2 - 4.0 * t) / 2.0,
                (-3.0 * t2 + 2.0 * t + 1.0) / 2.0,
                t2 / 2.0,
            ];
        }
        let mut value = 0.0;
        let mut grad = Vec3::zeros();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let v = self.at([base[0] + i, base[1] + j, base[2] + k]);
                    value += w[0][i] * w[1][j] * w[2][k] * v;
                    grad.x += dw[0][i] * w[1][j] * w[2][k] * v;
                    grad.y += w[0][i] * dw[1][j] * w[2][k] * v;
                    grad.z += w[0][i] * w[1][j] * dw[2][k] * v;
                }
            }
        }
        Ok((value, grad / self.geometry.resolution))
    }
}

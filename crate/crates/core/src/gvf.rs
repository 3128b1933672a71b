//! Guiding vector field synthesized from discretized path points.
//!
//! `χ(ξ) = K1 τ(ξ) + K2 tanh(d/r) n(ξ)`: the tangent `τ` averages the chords
//! around the nearest path point, the normal `n` is the negated gradient of
//! the trajectory distance field `U` (path cells as the occupied set), and
//! `d = U(ξ)`.

use std::io::Write;

use crate::bspline::PathPoints;
use crate::error::{Error, Result};
use crate::grid::{euclidean_distance_transform, rasterize_path, DistanceField, GridGeometry};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GvfParams {
    /// Tangential gain (strength of aggregation).
    pub k1: f64,
    /// Normal gain (strength of dispersion).
    pub k2: f64,
    /// Convergence bandwidth in meters.
    pub r: f64,
    /// Margin of the trajectory-field window around the path, meters.
    pub margin: f64,
    /// Below this `‖∇U‖` the normal term is dropped.
    pub grad_eps: f64,
}

impl Default for GvfParams {
    fn default() -> Self {
        Self {
            k1: 1.5,
            k2: 1.5,
            r: 0.5,
            margin: 2.0,
            grad_eps: 1e-6,
        }
    }
}

impl GvfParams {
    fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gains and bandwidth must be positive (K1 = {}, K2 = {}, r = {})",
                self.k1, self.k2, self.r
            )));
        }
        Ok(())
    }
}

/// `s(d) = tanh(d / r)`.
pub fn shape(d: f64, r: f64) -> f64 {
    (d / r).tanh()
}

#[derive(Debug, Clone)]
pub struct GuidingField {
    pub path: PathPoints,
    pub u_field: DistanceField,
    pub params: GvfParams,
}

impl GuidingField {
    /// Rasterizes `path` into a window enclosing the path points and `extra`
    /// (typically the robot position) plus the margin, and distance-transforms it.
    pub fn build(path: PathPoints, resolution: f64, params: GvfParams, extra: &[Vec3]) -> Result<Self> {
        params.validate()?;
        let first = *path
            .points
            .first()
            .ok_or_else(|| Error::InvalidArgument("path has no points".into()))?;
        let (lo, hi) = path
            .points
            .iter()
            .chain(extra)
            .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let m = Vec3::repeat(params.margin.max(params.r));
        let geometry = GridGeometry::snapped(&(lo - m), &(hi + m), resolution)?;
        let raster = rasterize_path(&path.points, &geometry)?;
        let u_field = euclidean_distance_transform(&raster)?;
        Ok(Self {
            path,
            u_field,
            params,
        })
    }

    /// Wraps a precomputed trajectory field, which must cover every path
    /// point with at least `r` of margin.
    pub fn with_field(path: PathPoints, u_field: DistanceField, params: GvfParams) -> Result<Self> {
        params.validate()?;
        if path.is_empty() {
            return Err(Error::InvalidArgument("path has no points".into()));
        }
        let g = &u_field.geometry;
        let (lo, hi) = (g.origin, g.max_corner());
        for (i, p) in path.points.iter().enumerate() {
            if (0..3).any(|a| p[a] - lo[a] < params.r || hi[a] - p[a] < params.r) {
                return Err(Error::OutOfBounds(format!(
                    "path point {i} within {} m of the field boundary",
                    params.r
                )));
            }
        }
        Ok(Self {
            path,
            u_field,
            params,
        })
    }

    /// Index of the closest path point; ties go to the larger index.
    pub fn nearest_index(&self, xi: &Vec3) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.path.points.iter().enumerate() {
            let d = (p - xi).norm_squared();
            if d <= best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Unit tangent from the chords around the nearest path point.
    pub fn tangent(&self, xi: &Vec3) -> Result<Vec3> {
        self.tangent_at(self.nearest_index(xi))
    }

    pub fn tangent_at(&self, i: usize) -> Result<Vec3> {
        let p = &self.path.points;
        let sum = match p.len() {
            0 | 1 => {
                return Err(Error::NumericalDegeneracy(
                    "tangent needs at least two path points".into(),
                ))
            }
            // A single chord: its direction is the only one available.
            2 => p[1] - p[0],
            n => {
                let c = i.clamp(1, n - 2);
                (p[c + 1] - p[c]) + (p[c] - p[c - 1])
            }
        };
        let norm = sum.norm();
        if norm < 1e-9 {
            return Err(Error::NumericalDegeneracy(format!(
                "chords around path point {i} cancel"
            )));
        }
        Ok(sum / norm)
    }

    /// Unit direction of `-∇U`, or `None` where the gradient vanishes.
    pub fn normal(&self, xi: &Vec3) -> Result<Option<Vec3>> {
        let g = self.u_field.fit_gradient(xi)?;
        let norm = g.norm();
        Ok((norm >= self.params.grad_eps).then(|| -g / norm))
    }

    /// Distance to the path through the trajectory field.
    pub fn distance(&self, xi: &Vec3) -> Result<f64> {
        self.u_field.sample_distance(xi)
    }

    /// The guiding vector `χ(ξ)`.
    pub fn guide(&self, xi: &Vec3) -> Result<Vec3> {
        let tau = self.tangent(xi)?;
        let d = self.distance(xi)?;
        let mut chi = self.params.k1 * tau;
        if let Some(n) = self.normal(xi)? {
            chi += self.params.k2 * shape(d, self.params.r) * n;
        }
        Ok(chi)
    }

    /// Writes `x,y,chi_x,chi_y,d` on the lattice `x0 + i·spacing`,
    /// `y0 + j·spacing` at height `z`; points outside the field get `NaN`.
    pub fn write_slice_csv(
        &self,
        min: [f64; 2],
        max: [f64; 2],
        z: f64,
        spacing: f64,
        mut w: impl Write,
    ) -> Result<usize> {
        if !(spacing > 0.0) || max[0] < min[0] || max[1] < min[1] {
            return Err(Error::InvalidArgument("slice needs positive spacing and ordered bounds".into()));
        }
        let count = |a: usize| ((max[a] - min[a]) / spacing + 1e-9).floor() as usize + 1;
        let (nx, ny) = (count(0), count(1));
        writeln!(w, "x,y,chi_x,chi_y,d")?;
        for j in 0..ny {
            for i in 0..nx {
                let p = Vec3::new(min[0] + i as f64 * spacing, min[1] + j as f64 * spacing, z);
                let (chi, d) = match (self.guide(&p), self.distance(&p)) {
                    (Ok(chi), Ok(d)) => (chi, d),
                    _ => (Vec3::repeat(f64::NAN), f64::NAN),
                };
                writeln!(w, "{},{},{},{},{}", p.x, p.y, chi.x, chi.y, d)?;
            }
        }
        Ok(nx * ny)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn straight(n: usize, spacing: f64) -> PathPoints {
        PathPoints::new(
            (0..n).map(|i| Vec3::new(i as f64 * spacing, 0.0, 0.0)).collect(),
            0.05,
        )
    }

    fn straight_field() -> GuidingField {
        GuidingField::build(straight(201, 0.05), 0.05, GvfParams::default(), &[]).unwrap()
    }

    #[test]
    fn shape_values() {
        assert_eq!(shape(0.0, 1.0), 0.0);
        assert_relative_eq!(shape(1.0, 1.0), 0.761594155955765, epsilon = 1e-12);
        assert!(shape(10.0, 1.0) > 0.9999);
    }

    #[test]
    fn nearest_index_and_ties() {
        let f = straight_field();
        assert_eq!(f.nearest_index(&Vec3::new(0.15, 0.0, 0.0)), 3);
        assert_eq!(f.nearest_index(&Vec3::new(0.125, 0.3, 0.0)), 3);
    }

    #[test]
    fn tangents() {
        let f = straight_field();
        assert_relative_eq!(f.tangent(&Vec3::new(2.0, 0.3, 0.0)).unwrap(), Vec3::x(), epsilon = 1e-12);
        assert_relative_eq!(f.tangent_at(0).unwrap(), Vec3::x(), epsilon = 1e-12);
        assert_relative_eq!(f.tangent_at(200).unwrap(), Vec3::x(), epsilon = 1e-12);

        let corner = PathPoints::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0)],
            0.1,
        );
        let g = GuidingField::build(corner, 0.1, GvfParams::default(), &[]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(g.tangent_at(1).unwrap(), Vec3::new(h, h, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn reversing_chords_are_degenerate() {
        let back = PathPoints::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::zeros()],
            0.1,
        );
        let g = GuidingField::build(back, 0.1, GvfParams::default(), &[]).unwrap();
        assert!(matches!(g.tangent_at(1), Err(Error::NumericalDegeneracy(_))));
    }

    #[test]
    fn normal_points_back_to_straight_path() {
        let f = straight_field();
        let n = f.normal(&Vec3::new(5.0, 1.0, 0.0)).unwrap().unwrap();
        assert!(n.dot(&-Vec3::y()).acos().to_degrees() < 5.0);
    }

    #[test]
    fn on_path_guide_is_pure_propagation() {
        let f = straight_field();
        let chi = f.guide(&Vec3::new(5.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(chi, Vec3::new(1.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn off_path_magnitude() {
        let f = straight_field();
        let chi = f.guide(&Vec3::new(5.0, 1.0, 0.0)).unwrap();
        let expect = 1.5f64.powi(2) + (1.5 * (1.0f64 / f.params.r).tanh()).powi(2);
        assert_relative_eq!(chi.norm_squared(), expect, max_relative = 1e-6);
    }

    #[test]
    fn bounded_everywhere() {
        let f = straight_field();
        let g = &f.u_field.geometry;
        for i in (3..g.dims[0] - 3).step_by(7) {
            for j in (3..g.dims[1] - 3).step_by(5) {
                for k in (3..g.dims[2] - 3).step_by(5) {
                    let p = g.cell_center([i, j, k]) + Vec3::new(0.013, -0.007, 0.002);
                    let chi = f.guide(&p).unwrap();
                    assert!(chi.norm() <= 3.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn covering_invariant_is_checked() {
        let f = straight_field();
        let path = PathPoints::new(vec![Vec3::new(-3.5, 0.0, 0.0), Vec3::zeros()], 0.1);
        assert!(GuidingField::with_field(path, f.u_field.clone(), GvfParams::default()).is_err());
        assert!(GuidingField::with_field(f.path.clone(), f.u_field, GvfParams::default()).is_ok());
    }

    #[test]
    fn slice_rows() {
        let f = straight_field();
        let mut buf = Vec::new();
        let rows = f.write_slice_csv([0.0, -1.0], [10.0, 1.0], 0.0, 0.25, &mut buf).unwrap();
        assert_eq!(rows, 41 * 9);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rows + 1);
        let on_path = text.lines().find(|l| l.starts_with("5,0,")).unwrap();
        let cols: Vec<f64> = on_path.split(',').map(|v| v.parse().unwrap()).collect();
        assert_relative_eq!(cols[2], 1.5, epsilon = 1e-12);
        assert_eq!(cols[3], 0.0);
    }
}

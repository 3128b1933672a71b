//! Local quadratic least-squares fit of a distance field.
//!
//! Model around a query point, with displacement `d` in meters:
//! `U(p + d) ≈ θ0 + θ1 dx + θ2 dy + θ3 dz + θ4 dx²/2 + θ5 dx dy + θ6 dx dz
//!  + θ7 dy²/2 + θ8 dy dz + θ9 dz²/2`, so the gradient at `p` is `(θ1, θ2, θ3)`.

use std::sync::OnceLock;

use nalgebra::{SMatrix, SVector};

use super::{Cell, DistanceField};
use crate::error::{Error, Result};
use crate::Vec3;

pub const QUADRATIC_TERMS: usize = 10;

/// Default fit window half-width in cells (a 5×5×5 window).
pub const DEFAULT_WINDOW_RADIUS: usize = 2;

type Mat10 = SMatrix<f64, QUADRATIC_TERMS, QUADRATIC_TERMS>;
type Vec10 = SVector<f64, QUADRATIC_TERMS>;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientFit {
    /// Coefficients with displacements measured in meters from `center`.
    pub theta: [f64; QUADRATIC_TERMS],
    pub center: Vec3,
    pub window_radius: usize,
}

impl GradientFit {
    pub fn gradient(&self) -> Vec3 {
        Vec3::new(self.theta[1], self.theta[2], self.theta[3])
    }

    /// Model value at displacement `d` from the center.
    pub fn eval(&self, d: &Vec3) -> f64 {
        basis(d).iter().zip(&self.theta).map(|(b, t)| b * t).sum()
    }
}

fn basis(d: &Vec3) -> [f64; QUADRATIC_TERMS] {
    [
        1.0,
        d.x,
        d.y,
        d.z,
        0.5 * d.x * d.x,
        d.x * d.y,
        d.x * d.z,
        0.5 * d.y * d.y,
        d.y * d.z,
        0.5 * d.z * d.z,
    ]
}

/// Least-squares quadratic through `(displacement, value)` samples.
pub fn solve_quadratic_fit(samples: &[(Vec3, f64)]) -> Result<[f64; QUADRATIC_TERMS]> {
    let scale = samples
        .iter()
        .map(|(d, _)| d.amax())
        .fold(0.0, f64::max);
    if samples.len() < QUADRATIC_TERMS || scale == 0.0 {
        return Err(Error::NumericalDegeneracy(format!(
            "{} samples cannot determine a quadratic",
            samples.len()
        )));
    }
    let mut normal = Mat10::zeros();
    let mut rhs = Vec10::zeros();
    for (d, v) in samples {
        let b = Vec10::from(basis(&(d / scale)));
        normal += b * b.transpose();
        rhs += b * *v;
    }
    let eig = normal.symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e.abs())));
    if !(lo > hi * 1e-12) {
        return Err(Error::NumericalDegeneracy(
            "rank-deficient normal equations".into(),
        ));
    }
    let chol = normal.cholesky().ok_or_else(|| {
        Error::NumericalDegeneracy("normal equations not positive definite".into())
    })?;
    let t = chol.solve(&rhs);
    let mut theta = [0.0; QUADRATIC_TERMS];
    for (i, th) in theta.iter_mut().enumerate() {
        let order = match i {
            0 => 0,
            1..=3 => 1,
            _ => 2,
        };
        *th = t[i] / scale.powi(order);
    }
    Ok(theta)
}

/// Precomputed least-squares operator for a full cubic window, in cell units
/// relative to the window's central cell.
struct WindowOperator {
    offsets: Vec<[i64; 3]>,
    /// Row `s` holds the contribution of sample `s` to each coefficient.
    weights: Vec<[f64; QUADRATIC_TERMS]>,
}

impl WindowOperator {
    fn build(radius: usize) -> Self {
        let r = radius as i64;
        let mut offsets = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                for k in -r..=r {
                    offsets.push([i, j, k]);
                }
            }
        }
        let mut normal = Mat10::zeros();
        let rows: Vec<Vec10> = offsets
            .iter()
            .map(|o| Vec10::from(basis(&Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64))))
            .collect();
        for b in &rows {
            normal += b * b.transpose();
        }
        let chol = normal
            .cholesky()
            .expect("full box window always determines a quadratic");
        let weights = rows
            .iter()
            .map(|b| {
                let w = chol.solve(b);
                let mut out = [0.0; QUADRATIC_TERMS];
                out.copy_from_slice(w.as_slice());
                out
            })
            .collect();
        Self { offsets, weights }
    }
}

fn operator(radius: usize) -> &'static WindowOperator {
    static OPS: OnceLock<[WindowOperator; 2]> = OnceLock::new();
    let ops = OPS.get_or_init(|| [WindowOperator::build(1), WindowOperator::build(2)]);
    &ops[radius - 1]
}

fn window_fits(dims: [usize; 3], c: Cell, r: usize) -> bool {
    (0..3).all(|a| c[a] >= r && c[a] + r < dims[a])
}

/// Quadratic fit over the 5×5×5 window around the cell containing `p`,
/// shrinking to 3×3×3 when the larger window would leave the field.
pub fn fit_quadratic(field: &DistanceField, p: &Vec3) -> Result<GradientFit> {
    let g = &field.geometry;
    let out_of_bounds = || {
        Error::OutOfBounds(format!(
            "fit window around ({:.3}, {:.3}, {:.3}) leaves the field",
            p.x, p.y, p.z
        ))
    };
    let c = g.cell_of(p).ok_or_else(out_of_bounds)?;
    let radius = [DEFAULT_WINDOW_RADIUS, 1]
        .into_iter()
        .find(|&r| window_fits(g.dims, c, r))
        .ok_or_else(out_of_bounds)?;
    let op = operator(radius);

    let mut t = [0.0; QUADRATIC_TERMS];
    for (o, w) in op.offsets.iter().zip(&op.weights) {
        let cell = [
            (c[0] as i64 + o[0]) as usize,
            (c[1] as i64 + o[1]) as usize,
            (c[2] as i64 + o[2]) as usize,
        ];
        let v = field.at(cell);
        for (ti, wi) in t.iter_mut().zip(w) {
            *ti += wi * v;
        }
    }

    // Re-expand the cell-unit polynomial about p and convert to meters.
    let res = g.resolution;
    let e = (p - g.cell_center(c)) / res;
    let value = basis(&e).iter().zip(&t).map(|(b, ti)| b * ti).sum();
    let gx = t[1] + t[4] * e.x + t[5] * e.y + t[6] * e.z;
    let gy = t[2] + t[5] * e.x + t[7] * e.y + t[8] * e.z;
    let gz = t[3] + t[6] * e.x + t[8] * e.y + t[9] * e.z;
    let r2 = res * res;
    Ok(GradientFit {
        theta: [
            value,
            gx / res,
            gy / res,
            gz / res,
            t[4] / r2,
            t[5] / r2,
            t[6] / r2,
            t[7] / r2,
            t[8] / r2,
            t[9] / r2,
        ],
        center: *p,
        window_radius: radius,
    })
}

impl DistanceField {
    /// Gradient of the local quadratic fit at `p`.
    pub fn fit_gradient(&self, p: &Vec3) -> Result<Vec3> {
        Ok(fit_quadratic(self, p)?.gradient())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use proptest::prelude::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(Vec3::new(-1.0, -1.0, -1.0), 0.1, [30, 30, 20]).unwrap()
    }

    #[test]
    fn linear_field() {
        let f = DistanceField::from_fn(geom(), |p| p.x);
        let g = f.fit_gradient(&Vec3::new(0.23, 0.41, -0.07)).unwrap();
        assert!((g - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn constant_field() {
        let f = DistanceField::from_fn(geom(), |_| 0.7);
        let g = f.fit_gradient(&Vec3::new(0.0, 0.3, 0.1)).unwrap();
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn paraboloid_gradient() {
        // U = x² + y² about a fit center at the origin; query at (1, 1, 0)
        // relative to it.
        let g0 = GridGeometry::new(Vec3::new(-0.05, -0.05, -0.65), 0.1, [25, 25, 13]).unwrap();
        let f = DistanceField::from_fn(g0, |p| p.x * p.x + p.y * p.y);
        let fit = fit_quadratic(&f, &Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert_eq!(fit.window_radius, 2);
        assert!((fit.gradient() - Vec3::new(2.0, 2.0, 0.0)).norm() < 1e-6);
        assert!((fit.theta[0] - 2.0).abs() < 1e-9);
        assert!((fit.theta[4] - 2.0).abs() < 1e-6);
        assert!((fit.theta[7] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn window_shrinks_then_fails_at_boundary() {
        let f = DistanceField::from_fn(geom(), |p| p.y);
        let g = f.geometry;
        let near = g.cell_center([1, 10, 10]);
        let fit = fit_quadratic(&f, &near).unwrap();
        assert_eq!(fit.window_radius, 1);
        assert!((fit.gradient() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
        let edge = g.cell_center([0, 10, 10]);
        assert!(matches!(fit_quadratic(&f, &edge), Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn coplanar_samples_are_degenerate() {
        let samples: Vec<(Vec3, f64)> = (0..25)
            .map(|i| (Vec3::new((i % 5) as f64, (i / 5) as f64, 0.0), i as f64))
            .collect();
        assert!(matches!(
            solve_quadratic_fit(&samples),
            Err(Error::NumericalDegeneracy(_))
        ));
    }

    fn residual(theta: &[f64; 10], samples: &[(Vec3, f64)]) -> f64 {
        samples
            .iter()
            .map(|(d, v)| {
                let m: f64 = basis(d).iter().zip(theta).map(|(b, t)| b * t).sum();
                (m - v).powi(2)
            })
            .sum()
    }

    proptest! {
        #[test]
        fn fit_minimizes_residual(
            vals in proptest::collection::vec(-1.0f64..1.0, 27),
            perturb in proptest::collection::vec(-0.1f64..0.1, 10),
        ) {
            let samples: Vec<(Vec3, f64)> = (0..27)
                .map(|i| {
                    let d = Vec3::new((i / 9) as f64 - 1.0, ((i / 3) % 3) as f64 - 1.0, (i % 3) as f64 - 1.0);
                    (d * 0.1, vals[i])
                })
                .collect();
            let theta = solve_quadratic_fit(&samples).unwrap();
            let best = residual(&theta, &samples);
            let mut other = theta;
            for (o, p) in other.iter_mut().zip(&perturb) {
                *o += p;
            }
            prop_assert!(best <= residual(&other, &samples) + 1e-12);
        }

        #[test]
        fn quadratic_fields_are_recovered(
            c in proptest::collection::vec(-2.0f64..2.0, 10),
            x in -0.5f64..0.5, y in -0.5f64..0.5, z in -0.3f64..0.3,
        ) {
            let f = DistanceField::from_fn(geom(), |p| {
                c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.z
                    + c[4] * p.x * p.x + c[5] * p.x * p.y + c[6] * p.x * p.z
                    + c[7] * p.y * p.y + c[8] * p.y * p.z + c[9] * p.z * p.z
            });
            let p = Vec3::new(x, y, z);
            let analytic = Vec3::new(
                c[1] + 2.0 * c[4] * x + c[5] * y + c[6] * z,
                c[2] + c[5] * x + 2.0 * c[7] * y + c[8] * z,
                c[3] + c[6] * x + c[8] * y + 2.0 * c[9] * z,
            );
            let g = f.fit_gradient(&p).unwrap();
            prop_assert!((g - analytic).norm() <= 1e-6 * analytic.norm().max(1.0));
        }
    }
}

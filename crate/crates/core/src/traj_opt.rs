//! Refinement of B-spline control points by smoothness and clearance costs.
//!
//! `J_total = λ_s J_s + λ_c J_c` over the interior control points
//! `C_p..C_{N-p}`; the first and last `p` control points stay fixed.
//! `J_s` sums squared third differences of the control polygon. `J_c` sums
//! `(d(C_i) - d_thr)²` over interior points closer than `d_thr` to an
//! obstacle, where `d` is the C2 cubic B-spline smoothing of the obstacle
//! distance field, so the analytic gradient is exact for the cost evaluated.

use std::io::Write;

use crate::bspline::UniformBSpline;
use crate::error::{Error, Result};
use crate::grid::DistanceField;
use crate::lbfgs::{self, LbfgsSettings, Termination};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostWeights {
    pub lambda_s: f64,
    pub lambda_c: f64,
    pub d_thr: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            lambda_s: 5.0,
            lambda_c: 10.0,
            d_thr: 0.35,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptProblem<'a> {
    pub spline: UniformBSpline,
    /// Obstacle distance field; `None` means no known obstacle nearby.
    pub esdf: Option<&'a DistanceField>,
    pub weights: CostWeights,
}

/// A cost value with its gradient with respect to each free control point.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub value: f64,
    pub gradient: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub j_s: f64,
    pub j_c: f64,
    pub j_total: f64,
    /// Free control points that fell outside the distance field.
    pub outside: usize,
}

impl<'a> OptProblem<'a> {
    pub fn new(spline: UniformBSpline, esdf: Option<&'a DistanceField>, weights: CostWeights) -> Result<Self> {
        let n = spline.last_index();
        let p = spline.degree();
        if n < 2 * p {
            return Err(Error::InvalidArgument(format!(
                "{} control points leave no free point for degree {p}",
                n + 1
            )));
        }
        if weights.lambda_s < 0.0 || weights.lambda_c < 0.0 || weights.d_thr < 0.0 {
            return Err(Error::InvalidArgument("cost weights must be nonnegative".into()));
        }
        Ok(Self {
            spline,
            esdf,
            weights,
        })
    }

    /// Indices of the free control points, `p..=N-p`.
    pub fn free_range(&self) -> std::ops::RangeInclusive<usize> {
        let p = self.spline.degree();
        p..=self.spline.last_index() - p
    }

    pub fn free_count(&self) -> usize {
        self.spline.last_index() + 1 - 2 * self.spline.degree()
    }

    fn with_free(&self, x: &[f64]) -> Vec<Vec3> {
        let mut cps = self.spline.control_points().to_vec();
        for (k, i) in self.free_range().enumerate() {
            cps[i] = Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        }
        cps
    }

    pub fn free_vector(&self) -> Vec<f64> {
        self.free_range()
            .flat_map(|i| {
                let c = self.spline.control_points()[i];
                [c.x, c.y, c.z]
            })
            .collect()
    }

    /// Evaluates `J_total` and its gradient at the stacked free coordinates `x`.
    pub fn evaluate(&self, x: &[f64]) -> (CostBreakdown, Vec<f64>) {
        let cps = self.with_free(x);
        let s = smoothness(&cps, self.free_range());
        let c = collision(&cps, self.free_range(), self.esdf, self.weights.d_thr);
        let w = &self.weights;
        let mut grad = Vec::with_capacity(x.len());
        for (gs, gc) in s.gradient.iter().zip(&c.0.gradient) {
            let g = w.lambda_s * gs + w.lambda_c * gc;
            grad.extend_from_slice(&[g.x, g.y, g.z]);
        }
        (
            CostBreakdown {
                j_s: s.value,
                j_c: c.0.value,
                j_total: w.lambda_s * s.value + w.lambda_c * c.0.value,
                outside: c.1,
            },
            grad,
        )
    }

    pub fn breakdown(&self) -> CostBreakdown {
        self.evaluate(&self.free_vector()).0
    }
}

fn smoothness(cps: &[Vec3], free: std::ops::RangeInclusive<usize>) -> CostGradient {
    let mut value = 0.0;
    let mut full = vec![Vec3::zeros(); cps.len()];
    for i in 0..cps.len().saturating_sub(3) {
        let r = cps[i + 3] - 3.0 * cps[i + 2] + 3.0 * cps[i + 1] - cps[i];
        value += r.norm_squared();
        full[i + 3] += 2.0 * r;
        full[i + 2] -= 6.0 * r;
        full[i + 1] += 6.0 * r;
        full[i] -= 2.0 * r;
    }
    CostGradient {
        value,
        gradient: full[free].to_vec(),
    }
}

fn collision(
    cps: &[Vec3],
    free: std::ops::RangeInclusive<usize>,
    esdf: Option<&DistanceField>,
    d_thr: f64,
) -> (CostGradient, usize) {
    let mut value = 0.0;
    let mut outside = 0;
    let mut gradient = Vec::new();
    for c in &cps[free] {
        let Some(field) = esdf else {
            gradient.push(Vec3::zeros());
            continue;
        };
        let (d, grad_d) = match field.sample_smooth(c) {
            Ok(v) => v,
            Err(_) => {
                outside += 1;
                let g = &field.geometry;
                let center = 0.5 * (g.origin + g.max_corner());
                let to_center = center - c;
                let dir = if to_center.norm() > 0.0 {
                    to_center.normalize()
                } else {
                    Vec3::zeros()
                };
                (0.0, dir)
            }
        };
        if d < d_thr {
            value += (d - d_thr).powi(2);
            gradient.push(2.0 * (d - d_thr) * grad_d);
        } else {
            gradient.push(Vec3::zeros());
        }
    }
    (CostGradient { value, gradient }, outside)
}

/// `J_s` and its gradient per free control point.
pub fn smoothness_cost(problem: &OptProblem) -> CostGradient {
    smoothness(problem.spline.control_points(), problem.free_range())
}

/// `J_c` and its gradient per free control point.
pub fn collision_cost(problem: &OptProblem) -> CostGradient {
    collision(
        problem.spline.control_points(),
        problem.free_range(),
        problem.esdf,
        problem.weights.d_thr,
    )
    .0
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OptIteration {
    pub iteration: usize,
    pub j_s: f64,
    pub j_c: f64,
    pub j_total: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub spline: UniformBSpline,
    pub termination: Termination,
    pub iterations: Vec<OptIteration>,
    pub initial: CostBreakdown,
    pub last: CostBreakdown,
}

impl OptOutcome {
    pub fn write_diagnostics_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "iteration,J_s,J_c,J_total,grad_norm,step")?;
        for it in &self.iterations {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                it.iteration, it.j_s, it.j_c, it.j_total, it.grad_norm, it.step
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for OptSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: 1e-4,
            memory: 8,
        }
    }
}

/// Minimizes `J_total` over the free control points with L-BFGS.
pub fn optimize(problem: &OptProblem, settings: &OptSettings) -> Result<OptOutcome> {
    if settings.max_iters < 1 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let lb = LbfgsSettings {
        memory: settings.memory,
        max_iters: settings.max_iters,
        grad_tol: settings.grad_tol,
        ..Default::default()
    };
    let x0 = problem.free_vector();
    let initial = problem.evaluate(&x0).0;
    let mut iterations = Vec::new();
    let result = lbfgs::minimize(
        |x, g| {
            let (b, grad) = problem.evaluate(x);
            g.copy_from_slice(&grad);
            b.j_total
        },
        &x0,
        &lb,
        |info, x| {
            let b = problem.evaluate(x).0;
            iterations.push(OptIteration {
                iteration: info.iteration,
                j_s: b.j_s,
                j_c: b.j_c,
                j_total: b.j_total,
                grad_norm: info.grad_inf_norm,
                step: info.step,
            });
        },
    );
    if result.termination == Termination::LineSearchFailure {
        log::debug!("trajectory optimization line search failed; returning best iterate");
    }
    let spline = problem.spline.with_control_points(problem.with_free(&result.x))?;
    let last = problem.evaluate(&result.x).0;
    Ok(OptOutcome {
        spline,
        termination: result.termination,
        iterations,
        initial,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{euclidean_distance_transform, rasterize_scene, GridGeometry};
    use crate::scene::{Bounds, Obstacle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spline(cps: Vec<Vec3>) -> UniformBSpline {
        UniformBSpline::new(3, cps, 1.0).unwrap()
    }

    fn linear_field() -> DistanceField {
        // d = x over a box; lets clearance values be placed exactly.
        let g = GridGeometry::new(Vec3::new(-1.0, -1.0, -1.0), 0.1, [40, 20, 20]).unwrap();
        DistanceField::from_fn(g, |p| p.x)
    }

    #[test]
    fn affine_and_quadratic_polygons_are_smooth() {
        let line: Vec<Vec3> = (0..8).map(|i| Vec3::new(i as f64, 2.0 * i as f64, -1.0)).collect();
        let p = OptProblem::new(spline(line), None, CostWeights::default()).unwrap();
        let s = smoothness_cost(&p);
        assert_eq!(s.value, 0.0);
        assert!(s.gradient.iter().all(|g| g.norm() == 0.0));
        let para: Vec<Vec3> = (0..8).map(|i| Vec3::new((i * i) as f64, 0.0, 0.0)).collect();
        let p = OptProblem::new(spline(para), None, CostWeights::default()).unwrap();
        assert_eq!(smoothness_cost(&p).value, 0.0);
    }

    #[test]
    fn too_few_control_points() {
        let cps = vec![Vec3::zeros(); 5];
        assert!(OptProblem::new(spline(cps), None, CostWeights::default()).is_err());
    }

    #[test]
    fn collision_term_values() {
        let field = linear_field();
        let mk = |x: f64| {
            let mut cps: Vec<Vec3> = (0..7).map(|i| Vec3::new(1.5, 0.1 * i as f64 - 0.3, 0.0)).collect();
            cps[3].x = x;
            OptProblem::new(spline(cps), Some(&field), CostWeights::default()).unwrap()
        };
        let far = collision_cost(&mk(1.5));
        assert_eq!(far.value, 0.0);
        let near = collision_cost(&mk(0.15));
        assert!((near.value - 0.04).abs() < 1e-12);
        let g = near.gradient[0];
        assert!((g - Vec3::new(2.0 * (0.15 - 0.35), 0.0, 0.0)).norm() < 1e-12);
        let at = collision_cost(&mk(0.35));
        assert_eq!(at.value, 0.0);
        assert_eq!(at.gradient[0], Vec3::zeros());
        // Just inside the threshold the gradient is already tiny: C1 across it.
        let inside = collision_cost(&mk(0.35 - 1e-7));
        assert!(inside.gradient[0].norm() < 1e-6);
    }

    #[test]
    fn outside_field_is_penalized_toward_center() {
        let field = linear_field();
        let mut cps: Vec<Vec3> = (0..7).map(|i| Vec3::new(1.5, 0.1 * i as f64 - 0.3, 0.0)).collect();
        cps[3] = Vec3::new(9.0, 0.0, 0.0);
        let p = OptProblem::new(spline(cps), Some(&field), CostWeights::default()).unwrap();
        let c = collision_cost(&p);
        assert!((c.value - 0.35 * 0.35).abs() < 1e-12);
        // Descent (-gradient) moves back toward the field.
        assert!(c.gradient[0].x > 0.0);
        assert_eq!(p.breakdown().outside, 1);
    }

    fn random_problem(seed: u64) -> (DistanceField, Vec<Vec3>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = Bounds {
            min: [0.0, 0.0, 0.0],
            max: [6.0, 4.0, 2.0],
        };
        let obstacles: Vec<Obstacle> = (0..6)
            .map(|_| Obstacle::Cylinder {
                center: [rng.gen_range(1.0..5.0), rng.gen_range(0.5..3.5)],
                radius: rng.gen_range(0.2..0.5),
                z_min: 0.0,
                z_max: 2.0,
            })
            .collect();
        let grid = rasterize_scene(&obstacles, &bounds, 0.1).unwrap();
        let field = euclidean_distance_transform(&grid).unwrap();
        let cps = (0..10)
            .map(|i| {
                Vec3::new(
                    0.5 + 0.5 * i as f64 + rng.gen_range(-0.2..0.2),
                    2.0 + rng.gen_range(-1.2..1.2),
                    1.0 + rng.gen_range(-0.4..0.4),
                )
            })
            .collect();
        (field, cps)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..4 {
            let (field, cps) = random_problem(seed);
            let p = OptProblem::new(spline(cps), Some(&field), CostWeights::default()).unwrap();
            let x = p.free_vector();
            let (_, g) = p.evaluate(&x);
            let h = 1e-5;
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.evaluate(&xp).0.j_total - p.evaluate(&xm).0.j_total) / (2.0 * h);
                if g[i].abs() > 1e-8 {
                    let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs());
                    assert!(rel < 1e-4, "seed {seed} comp {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn smoothness_is_translation_invariant() {
        let (_, cps) = random_problem(11);
        let shifted: Vec<Vec3> = cps.iter().map(|c| c + Vec3::new(3.0, -7.0, 0.5)).collect();
        let a = smoothness_cost(&OptProblem::new(spline(cps), None, CostWeights::default()).unwrap());
        let b = smoothness_cost(&OptProblem::new(spline(shifted), None, CostWeights::default()).unwrap());
        assert!((a.value - b.value).abs() < 1e-12 * a.value.max(1.0));
        for (x, y) in a.gradient.iter().zip(&b.gradient) {
            assert!((x - y).norm() < 1e-12 * x.norm().max(1.0));
        }
    }

    #[test]
    fn smoothing_only_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cps: Vec<Vec3> = (0..12)
            .map(|i| Vec3::new(i as f64, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let s = spline(cps.clone());
        let p = OptProblem::new(s, None, CostWeights::default()).unwrap();
        let out = optimize(&p, &OptSettings::default()).unwrap();
        assert!(out.last.j_s < out.initial.j_s);
        let after = out.spline.control_points();
        for i in (0..3).chain(9..12) {
            assert_eq!(after[i], cps[i]);
        }
        assert!(out
            .iterations
            .windows(2)
            .all(|w| w[1].j_total <= w[0].j_total));
    }

    #[test]
    fn zero_collision_weight_reaches_least_squares_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cps: Vec<Vec3> = (0..10)
            .map(|i| Vec3::new(i as f64, rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        let field = linear_field();
        let w = CostWeights {
            lambda_c: 0.0,
            ..Default::default()
        };
        let p = OptProblem::new(spline(cps.clone()), Some(&field), w).unwrap();
        let out = optimize(
            &p,
            &OptSettings {
                max_iters: 500,
                grad_tol: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();

        // J_s is quadratic in the free y values: solve the normal equations directly.
        let free: Vec<usize> = (3..=6).collect();
        let rows = cps.len() - 3;
        let mut a = nalgebra::DMatrix::<f64>::zeros(rows, free.len());
        let mut b = nalgebra::DVector::<f64>::zeros(rows);
        let coef = [-1.0, 3.0, -3.0, 1.0];
        for r in 0..rows {
            for (o, c) in coef.iter().enumerate() {
                let i = r + o;
                match free.iter().position(|&f| f == i) {
                    Some(col) => a[(r, col)] += c,
                    None => b[r] -= c * cps[i].y,
                }
            }
        }
        let y = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * b));
        for (k, &i) in free.iter().enumerate() {
            let got = out.spline.control_points()[i].y;
            assert!((got - y[k]).abs() < 1e-5, "cp {i}: {got} vs {}", y[k]);
        }
    }

    #[test]
    fn diagnostics_csv_has_header_and_rows() {
        let cps: Vec<Vec3> = (0..8).map(|i| Vec3::new(i as f64, ((i % 2) as f64) * 0.5, 0.0)).collect();
        let p = OptProblem::new(spline(cps), None, CostWeights::default()).unwrap();
        let out = optimize(&p, &OptSettings::default()).unwrap();
        let mut buf = Vec::new();
        out.write_diagnostics_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,J_s,J_c,J_total,grad_norm,step\n"));
        assert_eq!(text.lines().count(), out.iterations.len() + 1);
    }
}

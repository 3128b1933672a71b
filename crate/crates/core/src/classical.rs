//! Analytic guiding vector fields for implicitly defined paths.
//!
//! A path is the common zero set of `n - 1` level functions `φ_i` in `ℝⁿ`.
//! The field adds a propagation term (the generalized cross product of the
//! gradients: a 90° rotation of `∇φ` in the plane, `∇φ1 × ∇φ2` in space) to
//! a convergence term `-Σ k_i φ_i ∇φ_i`. Only a small catalog of paths is
//! supported; it serves as a reference for the discretized field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard used when normalizing field components.
pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathShape {
    /// `φ = x² + y² - R²`
    Circle2 { radius: f64 },
    /// `φ = a x + b y + c`
    Line2 { a: f64, b: f64, c: f64 },
    /// `φ1 = x² + y² - R²`, `φ2 = z - h`
    Circle3 { radius: f64, height: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitPath {
    pub shape: PathShape,
    /// One positive gain per level function.
    pub gains: Vec<f64>,
}

impl ImplicitPath {
    pub fn new(shape: PathShape, gains: Vec<f64>) -> Result<Self> {
        let p = Self { shape, gains };
        if p.gains.len() != p.dimension() - 1 || p.gains.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "{} path needs {} positive gains",
                p.dimension(),
                p.dimension() - 1
            )));
        }
        if let PathShape::Line2 { a, b, .. } = shape {
            if a == 0.0 && b == 0.0 {
                return Err(Error::InvalidArgument("degenerate line".into()));
            }
        }
        Ok(p)
    }

    /// Catalog entry with unit gains.
    pub fn unit_gains(shape: PathShape) -> Self {
        let n = match shape {
            PathShape::Circle3 { .. } => 2,
            _ => 1,
        };
        Self::new(shape, vec![1.0; n]).expect("catalog shape with unit gains")
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            PathShape::Circle2 { .. } | PathShape::Line2 { .. } => 2,
            PathShape::Circle3 { .. } => 3,
        }
    }

    fn check(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dimension() {
            return Err(Error::InvalidArgument(format!(
                "expected a {}-vector, got length {}",
                self.dimension(),
                xi.len()
            )));
        }
        Ok(())
    }

    /// Level values and gradients `(φ_i, ∇φ_i)`.
    pub fn levels(&self, xi: &[f64]) -> Vec<(f64, Vec<f64>)> {
        match self.shape {
            PathShape::Circle2 { radius } => vec![(
                xi[0] * xi[0] + xi[1] * xi[1] - radius * radius,
                vec![2.0 * xi[0], 2.0 * xi[1]],
            )],
            PathShape::Line2 { a, b, c } => vec![(a * xi[0] + b * xi[1] + c, vec![a, b])],
            PathShape::Circle3 { radius, height } => vec![
                (
                    xi[0] * xi[0] + xi[1] * xi[1] - radius * radius,
                    vec![2.0 * xi[0], 2.0 * xi[1], 0.0],
                ),
                (xi[2] - height, vec![0.0, 0.0, 1.0]),
            ],
        }
    }

    /// Propagation term: generalized cross product of the level gradients.
    pub fn propagation(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check(xi)?;
        let l = self.levels(xi);
        Ok(match self.dimension() {
            2 => {
                let g = &l[0].1;
                vec![-g[1], g[0]]
            }
            _ => {
                let (a, b) = (&l[0].1, &l[1].1);
                vec![
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                ]
            }
        })
    }

    /// Convergence term `-Σ k_i φ_i ∇φ_i`.
    pub fn convergence(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check(xi)?;
        let mut out = vec![0.0; self.dimension()];
        for ((phi, grad), k) in self.levels(xi).iter().zip(&self.gains) {
            for (o, g) in out.iter_mut().zip(grad) {
                *o -= k * phi * g;
            }
        }
        Ok(out)
    }

    /// Euclidean distance from `xi` to the path.
    pub fn distance_to_path(&self, xi: &[f64]) -> f64 {
        match self.shape {
            PathShape::Circle2 { radius } => (xi[0].hypot(xi[1]) - radius).abs(),
            PathShape::Line2 { a, b, c } => (a * xi[0] + b * xi[1] + c).abs() / a.hypot(b),
            PathShape::Circle3 { radius, height } => {
                (xi[0].hypot(xi[1]) - radius).hypot(xi[2] - height)
            }
        }
    }

    /// Sum of squared level values, the Lyapunov-like path error.
    pub fn path_error(&self, xi: &[f64]) -> f64 {
        self.levels(xi).iter().map(|(phi, _)| phi * phi).sum()
    }
}

/// `∇×φ(ξ) - Σ k_i φ_i(ξ) ∇φ_i(ξ)`.
pub fn composite_field(path: &ImplicitPath, xi: &[f64]) -> Result<Vec<f64>> {
    let t = path.propagation(xi)?;
    let n = path.convergence(xi)?;
    Ok(t.iter().zip(&n).map(|(a, b)| a + b).collect())
}

fn guarded_unit(v: &[f64], eps: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(eps);
    v.iter().map(|x| x / norm).collect()
}

/// `t̂ + k(ξ) n̂` with both components normalized by `max(‖·‖, ε)`.
pub fn normalized_field(
    path: &ImplicitPath,
    xi: &[f64],
    k: impl Fn(&[f64]) -> f64,
    eps: f64,
) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let t = guarded_unit(&path.propagation(xi)?, eps);
    let n = guarded_unit(&path.convergence(xi)?, eps);
    let gain = k(xi);
    Ok(t.iter().zip(&n).map(|(a, b)| a + gain * b).collect())
}

/// Which vector field the integrator follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldForm {
    Composite,
    /// Normalized field with a constant convergence gain.
    Normalized { gain: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSettings {
    pub step: f64,
    pub horizon: f64,
    pub form: FieldForm,
    /// Integration fails when any coordinate leaves `[-safety, safety]`.
    pub safety: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 10.0,
            form: FieldForm::Composite,
            safety: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralCurve {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub distances: Vec<f64>,
    /// Set when the field vanished along the curve (a singular point).
    pub stalled: bool,
}

/// Fixed-step RK4 integration of `ξ̇ = χ(ξ)`.
pub fn integrate_field(
    path: &ImplicitPath,
    xi0: &[f64],
    settings: &IntegrationSettings,
) -> Result<IntegralCurve> {
    path.check(xi0)?;
    if !(settings.step > 0.0 && settings.step <= 0.05) {
        return Err(Error::InvalidArgument(format!(
            "step must lie in (0, 0.05], got {}",
            settings.step
        )));
    }
    if !(settings.horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let field = |x: &[f64]| -> Vec<f64> {
        match settings.form {
            FieldForm::Composite => composite_field(path, x).expect("dimension checked"),
            FieldForm::Normalized { gain } => {
                normalized_field(path, x, |_| gain, DEFAULT_EPSILON).expect("dimension checked")
            }
        }
    };
    let axpy = |x: &[f64], a: f64, v: &[f64]| -> Vec<f64> {
        x.iter().zip(v).map(|(xi, vi)| xi + a * vi).collect()
    };

    let h = settings.step;
    let steps = (settings.horizon / h).round() as usize;
    let mut x = xi0.to_vec();
    let mut curve = IntegralCurve {
        times: vec![0.0],
        states: vec![x.clone()],
        distances: vec![path.distance_to_path(&x)],
        stalled: false,
    };
    for s in 1..=steps {
        let k1 = field(&x);
        if k1.iter().map(|v| v * v).sum::<f64>() < 1e-24 {
            curve.stalled = true;
        }
        let k2 = field(&axpy(&x, h / 2.0, &k1));
        let k3 = field(&axpy(&x, h / 2.0, &k2));
        let k4 = field(&axpy(&x, h, &k3));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = s as f64 * h;
        if x.iter().any(|v| !v.is_finite() || v.abs() > settings.safety) {
            return Err(Error::Divergence { t });
        }
        curve.times.push(t);
        curve.distances.push(path.distance_to_path(&x));
        curve.states.push(x.clone());
    }
    Ok(curve)
}

//! Uniform clamped B-splines.
//!
//! Knots are `0` repeated `p + 1` times, the integers `1..=N-p`, then
//! `N - p + 1` repeated `p + 1` times, so the parameter domain is
//! `[0, N - p + 1]` and the curve interpolates the first and last control
//! points. Time maps to the parameter affinely through `time_scale`
//! (seconds per knot interval).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

pub const DEFAULT_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct UniformBSpline {
    degree: usize,
    control_points: Vec<Vec3>,
    time_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct SplineFile {
    degree: usize,
    control_points: Vec<[f64; 3]>,
    time_scale: f64,
}

impl Serialize for UniformBSpline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SplineFile {
            degree: self.degree,
            control_points: self.control_points.iter().map(|c| [c.x, c.y, c.z]).collect(),
            time_scale: self.time_scale,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for UniformBSpline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = SplineFile::deserialize(d)?;
        UniformBSpline::new(
            f.degree,
            f.control_points.into_iter().map(Vec3::from).collect(),
            f.time_scale,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl UniformBSpline {
    pub fn new(degree: usize, control_points: Vec<Vec3>, time_scale: f64) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidArgument(format!("degree must be ≥ 2, got {degree}")));
        }
        if control_points.len() < degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} needs at least {} control points, got {}",
                degree + 1,
                control_points.len()
            )));
        }
        if !(time_scale > 0.0 && time_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time scale must be positive, got {time_scale}"
            )));
        }
        if control_points.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite control point".into()));
        }
        Ok(Self {
            degree,
            control_points,
            time_scale,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    /// Replaces the control points, keeping degree and timing.
    pub fn with_control_points(&self, control_points: Vec<Vec3>) -> Result<Self> {
        Self::new(self.degree, control_points, self.time_scale)
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn set_time_scale(&mut self, time_scale: f64) -> Result<()> {
        if !(time_scale > 0.0 && time_scale.is_finite()) {
            return Err(Error::InvalidArgument("time scale must be positive".into()));
        }
        self.time_scale = time_scale;
        Ok(())
    }

    /// Index of the last control point, `N`.
    pub fn last_index(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn knot(&self, j: usize) -> f64 {
        let n = self.last_index() as i64;
        let p = self.degree as i64;
        (j as i64 - p).clamp(0, n - p + 1) as f64
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..self.control_points.len() + self.degree + 1)
            .map(|j| self.knot(j))
            .collect()
    }

    /// Parameter domain `[u_p, u_{N+1}]`.
    pub fn domain(&self) -> (f64, f64) {
        (0.0, (self.last_index() - self.degree + 1) as f64)
    }

    pub fn duration(&self) -> f64 {
        self.domain().1 * self.time_scale
    }

    /// Greville abscissa of control point `i`: the mean of its `p` inner knots.
    pub fn greville(&self, i: usize) -> f64 {
        (1..=self.degree).map(|k| self.knot(i + k)).sum::<f64>() / self.degree as f64
    }

    fn span(&self, u: f64) -> usize {
        let hi = self.domain().1;
        let k = u.floor() as usize + self.degree;
        if u >= hi {
            self.last_index()
        } else {
            k
        }
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(u >= lo && u <= hi) {
            return Err(Error::Domain {
                value: u,
                min: lo,
                max: hi,
            });
        }
        Ok(())
    }

    /// De Boor evaluation at parameter `u`.
    pub fn evaluate(&self, u: f64) -> Result<Vec3> {
        self.check_domain(u)?;
        let p = self.degree;
        let k = self.span(u);
        let mut d: Vec<Vec3> = (0..=p).map(|j| self.control_points[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let lo = self.knot(j + k - p);
                let hi = self.knot(j + 1 + k - r);
                let alpha = (u - lo) / (hi - lo);
                d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
            }
        }
        Ok(d[p])
    }

    pub fn evaluate_at_time(&self, t: f64) -> Result<Vec3> {
        let u = (t / self.time_scale).min(self.domain().1);
        self.evaluate(u)
    }

    /// Nonzero basis functions at `u`: `(first_index, values)` with
    /// `values[r] = N_{first_index + r}^p(u)`.
    pub fn basis(&self, u: f64) -> Result<(usize, Vec<f64>)> {
        self.check_domain(u)?;
        let p = self.degree;
        let k = self.span(u);
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knot(k + 1 - j);
            right[j] = self.knot(k + j) - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        Ok((k - p, n))
    }

    pub fn start(&self) -> Vec3 {
        self.control_points[0]
    }

    pub fn end(&self) -> Vec3 {
        *self.control_points.last().unwrap()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Discretized path `P_0..P_M` sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoints {
    pub points: Vec<Vec3>,
    pub dt: f64,
}

impl PathPoints {
    /// Drops consecutive duplicates.
    pub fn new(points: Vec<Vec3>, dt: f64) -> Self {
        Self {
            points: dedup(&points, 1e-12),
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }
}

pub(crate) fn dedup(points: &[Vec3], tol: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|q| (p - q).norm() > tol) {
            out.push(*p);
        }
    }
    out
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at arc length `s` along a polyline (clamped to its ends).
pub fn point_at_arc_length(points: &[Vec3], s: f64) -> Vec3 {
    let mut remaining = s.max(0.0);
    for w in points.windows(2) {
        let len = (w[1] - w[0]).norm();
        if remaining <= len && len > 0.0 {
            return w[0] + (w[1] - w[0]) * (remaining / len);
        }
        remaining -= len;
    }
    *points.last().expect("non-empty polyline")
}

/// Samples the spline at `t_m = m·dt`, clamping the final sample to the end.
pub fn sample_uniform(spline: &UniformBSpline, dt: f64) -> Result<PathPoints> {
    let duration = spline.duration();
    if !(dt > 0.0) || dt > duration * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "sampling interval {dt} outside (0, {duration}]"
        )));
    }
    let intervals = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut points = Vec::with_capacity(intervals + 1);
    for m in 0..intervals {
        points.push(spline.evaluate_at_time(m as f64 * dt)?);
    }
    points.push(spline.end());
    Ok(PathPoints::new(points, dt))
}

/// Fits a spline through `waypoints` at chord-length parameters.
///
/// The first and last control points are pinned to the first and last
/// waypoints. When the interior least-squares system is underdetermined or
/// rank-deficient, the control polygon is instead placed on the waypoint
/// polyline at arc lengths proportional to the Greville abscissae.
pub fn fit_through(waypoints: &[Vec3], degree: usize, n_control: usize) -> Result<UniformBSpline> {
    let pts = dedup(waypoints, 1e-9);
    if waypoints.len() < 2 {
        return Err(Error::InvalidArgument("need at least two waypoints".into()));
    }
    let template = UniformBSpline::new(degree, vec![Vec3::zeros(); n_control], 1.0)?;
    if pts.len() < 2 {
        return template.with_control_points(vec![pts[0]; n_control]);
    }
    let total = polyline_length(&pts);
    let u_end = template.domain().1;
    let mut s = 0.0;
    let mut params = Vec::with_capacity(pts.len());
    params.push(0.0);
    for w in pts.windows(2) {
        s += (w[1] - w[0]).norm();
        params.push((u_end * s / total).min(u_end));
    }
    fit_with_params(&pts, &params, degree, n_control)
}

/// Least-squares fit at caller-supplied parameters (same pinning and fallback
/// rules as [`fit_through`]).
pub fn fit_with_params(
    waypoints: &[Vec3],
    params: &[f64],
    degree: usize,
    n_control: usize,
) -> Result<UniformBSpline> {
    if waypoints.len() != params.len() || waypoints.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two waypoints with one parameter each".into(),
        ));
    }
    let template = UniformBSpline::new(degree, vec![Vec3::zeros(); n_control], 1.0)?;
    let first = waypoints[0];
    let last = *waypoints.last().unwrap();
    let unknowns = n_control - 2;
    let fallback = || -> Result<UniformBSpline> {
        let total = polyline_length(waypoints);
        let u_end = template.domain().1;
        let mut cps: Vec<Vec3> = (0..n_control)
            .map(|i| point_at_arc_length(waypoints, total * template.greville(i) / u_end))
            .collect();
        cps[0] = first;
        cps[n_control - 1] = last;
        template.with_control_points(cps)
    };
    if unknowns == 0 {
        let mut cps = vec![first; n_control];
        cps[n_control - 1] = last;
        return template.with_control_points(cps);
    }

    let rows = waypoints.len();
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut b = DMatrix::<f64>::zeros(rows, 3);
    for (r, (w, &u)) in waypoints.iter().zip(params).enumerate() {
        let (first_idx, vals) = template.basis(u)?;
        let mut target = *w;
        for (o, v) in vals.iter().enumerate() {
            let i = first_idx + o;
            if i == 0 {
                target -= first * *v;
            } else if i == n_control - 1 {
                target -= last * *v;
            } else {
                a[(r, i - 1)] = *v;
            }
        }
        for c in 0..3 {
            b[(r, c)] = target[c];
        }
    }
    if rows < unknowns {
        return fallback();
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return fallback();
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::NumericalDegeneracy(e.to_string()))?;
    let mut cps = Vec::with_capacity(n_control);
    cps.push(first);
    for i in 0..unknowns {
        cps.push(Vec3::new(x[(i, 0)], x[(i, 1)], x[(i, 2)]));
    }
    cps.push(last);
    template.with_control_points(cps)
}

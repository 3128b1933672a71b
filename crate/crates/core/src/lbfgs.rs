//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion (Nocedal 1980) for the search direction; bracketing and
//! zoom with safeguarded cubic interpolation for the step length (Nocedal and
//! Wright, algorithms 3.5 and 3.6). Only points satisfying the sufficient
//! decrease condition are accepted, so the cost never increases.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the infinity norm of the gradient drops below this.
    pub grad_tol: f64,
    /// Stop when the relative cost decrease of an iteration drops below this.
    pub rel_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_evals: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iters: 100,
            grad_tol: 1e-4,
            rel_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_evals: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    RelativeDecrease,
    /// The line search found no acceptable step; the best iterate is returned.
    LineSearchFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInfo {
    pub iteration: usize,
    pub cost: f64,
    pub grad_inf_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Clone)]
struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Minimizes `fun`, which writes the gradient into its second argument and
/// returns the cost. `observe` is called once per accepted iteration.
pub fn minimize<F, O>(mut fun: F, x0: &[f64], settings: &LbfgsSettings, mut observe: O) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    O: FnMut(&IterationInfo, &[f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = fun(&x, &mut g);
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);

    observe(
        &IterationInfo {
            iteration: 0,
            cost: f,
            grad_inf_norm: inf_norm(&g),
            step: 0.0,
        },
        &x,
    );

    let finish = |x: Vec<f64>, f: f64, g: Vec<f64>, it: usize, ev: usize, t: Termination| LbfgsResult {
        x,
        cost: f,
        gradient: g,
        iterations: it,
        evaluations: ev,
        termination: t,
    };

    if n == 0 || inf_norm(&g) < settings.grad_tol {
        return finish(x, f, g, 0, evaluations, Termination::GradientTolerance);
    }

    for iter in 1..=settings.max_iters {
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let initial = if history.is_empty() {
            (1.0 / inf_norm(&d)).min(1.0)
        } else {
            1.0
        };

        let mut eval = |alpha: f64| {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let mut gt = vec![0.0; n];
            let ft = fun(&xt, &mut gt);
            evaluations += 1;
            Probe {
                alpha,
                f: ft,
                slope: dot(&gt, &d),
                x: xt,
                g: gt,
            }
        };
        let found = strong_wolfe(&mut eval, f, slope, initial, settings);

        let probe = match found {
            Ok(p) => p,
            Err(best) => {
                let (bx, bf, bg) = match best {
                    Some(p) if p.f < f => (p.x, p.f, p.g),
                    _ => (x, f, g),
                };
                return finish(bx, bf, bg, iter, evaluations, Termination::LineSearchFailure);
            }
        };

        let s: Vec<f64> = probe.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = probe.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let previous = f;
        x = probe.x;
        g = probe.g;
        f = probe.f;
        let gn = inf_norm(&g);
        observe(
            &IterationInfo {
                iteration: iter,
                cost: f,
                grad_inf_norm: gn,
                step: probe.alpha,
            },
            &x,
        );
        if gn < settings.grad_tol {
            return finish(x, f, g, iter, evaluations, Termination::GradientTolerance);
        }
        if (previous - f) <= settings.rel_tol * previous.abs().max(f64::MIN_POSITIVE) {
            return finish(x, f, g, iter, evaluations, Termination::RelativeDecrease);
        }
    }
    let it = settings.max_iters;
    finish(x, f, g, it, evaluations, Termination::MaxIterations)
}

/// Returns a step satisfying the strong Wolfe conditions, or the best
/// sufficient-decrease probe seen when none is found.
fn strong_wolfe(
    eval: &mut impl FnMut(f64) -> Probe,
    f0: f64,
    slope0: f64,
    initial: f64,
    s: &LbfgsSettings,
) -> Result<Probe, Option<Probe>> {
    let armijo = |p: &Probe| p.f <= f0 + s.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -s.c2 * slope0;
    let mut best: Option<Probe> = None;
    let keep = |p: &Probe, best: &mut Option<Probe>| {
        if p.f.is_finite() && armijo(p) && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(p.clone());
        }
    };

    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: Vec::new(),
        g: Vec::new(),
    };
    let mut alpha = initial;
    let mut evals = 0;
    let (mut lo, mut hi) = loop {
        if evals >= s.max_line_evals {
            return Err(best);
        }
        let p = eval(alpha);
        evals += 1;
        if !p.f.is_finite() {
            alpha *= 0.5;
            continue;
        }
        keep(&p, &mut best);
        if !armijo(&p) || (evals > 1 && p.f >= prev.f) {
            break (prev, p);
        }
        if curvature(&p) {
            return Ok(p);
        }
        if p.slope >= 0.0 {
            break (p, prev);
        }
        prev = p;
        alpha *= 2.0;
    };

    while evals < s.max_line_evals {
        let (a_lo, a_hi) = (lo.alpha, hi.alpha);
        if (a_hi - a_lo).abs() < 1e-16 * a_lo.abs().max(1.0) {
            break;
        }
        let trial = cubic_minimizer(&lo, &hi)
            .filter(|t| {
                let (l, h) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
                let margin = 0.1 * (h - l);
                *t > l + margin && *t < h - margin
            })
            .unwrap_or(0.5 * (a_lo + a_hi));
        let p = eval(trial);
        evals += 1;
        keep(&p, &mut best);
        if !p.f.is_finite() || !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(p);
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    Err(best)
}

fn cubic_minimizer(a: &Probe, b: &Probe) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let n = x.len();
        let mut f = 0.0;
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * x[i] * a - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        f
    }

    #[test]
    fn solves_rosenbrock() {
        let settings = LbfgsSettings {
            max_iters: 500,
            grad_tol: 1e-8,
            rel_tol: 0.0,
            ..Default::default()
        };
        let mut costs = Vec::new();
        let r = minimize(rosenbrock, &[-1.2, 1.0, -0.5, 0.8], &settings, |info, _| costs.push(info.cost));
        assert_eq!(r.termination, Termination::GradientTolerance);
        for v in &r.x {
            assert!((v - 1.0).abs() < 1e-6, "{:?}", r.x);
        }
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_converges_fast() {
        let diag = [1.0, 10.0, 100.0, 0.5];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut s = 0.0;
            for i in 0..4 {
                g[i] = diag[i] * (x[i] - i as f64);
                s += 0.5 * diag[i] * (x[i] - i as f64).powi(2);
            }
            s
        };
        let r = minimize(f, &[5.0; 4], &LbfgsSettings::default(), |_, _| {});
        assert_eq!(r.termination, Termination::GradientTolerance);
        assert!(r.iterations < 30);
    }

    #[test]
    fn iteration_cap() {
        let settings = LbfgsSettings {
            max_iters: 2,
            grad_tol: 0.0,
            rel_tol: 0.0,
            ..Default::default()
        };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &settings, |_, _| {});
        assert_eq!(r.termination, Termination::MaxIterations);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn inconsistent_gradient_reports_line_search_failure() {
        // Gradient points the wrong way: no descent is ever found.
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = -2.0 * x[0];
            x[0] * x[0]
        };
        let r = minimize(f, &[1.0], &LbfgsSettings::default(), |_, _| {});
        assert_eq!(r.termination, Termination::LineSearchFailure);
        assert_eq!(r.cost, 1.0);
    }
}

//! BFGS minimization with a strong-Wolfe line search.
//!
//! The objective returns `None` when it cannot be evaluated at a point; the
//! line search treats such points as `+inf` and shrinks the step.

use serde::{Deserialize, Serialize};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 25;
const MAX_ZOOM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Sup-norm of the gradient.
    pub grad_tolerance: f64,
    /// Sup-norm of the step relative to `1 + |x|`.
    pub step_tolerance: f64,
    /// Relative objective improvement over `window` iterations.
    pub rel_tolerance: f64,
    pub window: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iterations: 2000,
            grad_tolerance: 1e-6,
            step_tolerance: 1e-10,
            rel_tolerance: 1e-9,
            window: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    RelativeImprovement,
    StepTolerance,
    MaxIterations,
    LineSearchFailed,
    NonFiniteStart,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::GradientTolerance
                | Termination::RelativeImprovement
                | Termination::StepTolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Evaluation at a trial point along the search direction.
struct Probe<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    x_trial: Vec<f64>,
    g_trial: Vec<f64>,
    last_alpha: f64,
    last_value: f64,
}

impl<F> Probe<'_, F>
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    /// Value and directional derivative at `alpha`; `+inf` when the
    /// objective fails.
    fn eval(&mut self, alpha: f64) -> (f64, f64) {
        for ((xt, x), d) in self.x_trial.iter_mut().zip(self.x).zip(self.dir) {
            *xt = x + alpha * d;
        }
        self.last_alpha = alpha;
        match (self.f)(&self.x_trial, &mut self.g_trial) {
            Some(v) if v.is_finite() && self.g_trial.iter().all(|g| g.is_finite()) => {
                self.last_value = v;
                (v, dot(&self.g_trial, self.dir))
            }
            _ => {
                self.last_value = f64::INFINITY;
                (f64::INFINITY, f64::NAN)
            }
        }
    }
}

/// Safeguarded cubic interpolation of the minimizer between two points.
fn interpolate(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let (xa, fa, da) = a;
    let (xb, fb, db) = b;
    let lo = xa.min(xb);
    let hi = xa.max(xb);
    let width = hi - lo;
    let bisect = 0.5 * (xa + xb);
    if !fb.is_finite() || !da.is_finite() || !db.is_finite() {
        return bisect;
    }
    let d1 = da + db - 3.0 * (fa - fb) / (xa - xb);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return bisect;
    }
    let d2 = (xb - xa).signum() * disc.sqrt();
    let cand = xb - (xb - xa) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if cand.is_finite() && cand > lo + 0.1 * width && cand < hi - 0.1 * width {
        cand
    } else {
        bisect
    }
}

/// Strong-Wolfe line search. Returns the accepted step.
fn line_search<F>(probe: &mut Probe<'_, F>, f0: f64, d0: f64, alpha_init: f64) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    let mut prev = (0.0, f0, d0);
    let mut alpha = alpha_init;
    for i in 0..MAX_BRACKET {
        let (f, d) = probe.eval(alpha);
        let cur = (alpha, f, d);
        if f > f0 + C1 * alpha * d0 || (i > 0 && f >= prev.1) {
            return zoom(probe, f0, d0, prev, cur);
        }
        if d.abs() <= -C2 * d0 {
            return Some(alpha);
        }
        if d >= 0.0 {
            return zoom(probe, f0, d0, cur, prev);
        }
        prev = cur;
        alpha *= 2.0;
    }
    None
}

fn zoom<F>(
    probe: &mut Probe<'_, F>,
    f0: f64,
    d0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    for _ in 0..MAX_ZOOM {
        let alpha = interpolate(lo, hi);
        if (hi.0 - lo.0).abs() < 1e-16 * (1.0 + lo.0.abs()) {
            break;
        }
        let (f, d) = probe.eval(alpha);
        if f > f0 + C1 * alpha * d0 || f >= lo.1 {
            hi = (alpha, f, d);
        } else {
            if d.abs() <= -C2 * d0 {
                return Some(alpha);
            }
            if d * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, f, d);
        }
    }
    // fall back to the best point with sufficient decrease
    (lo.0 > 0.0 && lo.1 < f0).then_some(lo.0)
}

/// Minimize `f`, which writes the gradient into its second argument.
pub fn minimize<F>(mut f: F, x0: &[f64], options: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut value = match f(&x, &mut g) {
        Some(v) if v.is_finite() && g.iter().all(|v| v.is_finite()) => v,
        _ => {
            return Minimum {
                x,
                value: f64::INFINITY,
                gradient: g,
                iterations: 0,
                termination: Termination::NonFiniteStart,
            }
        }
    };

    // inverse Hessian approximation, row-major
    let mut h_inv = identity(n);
    let mut fresh = true;
    let mut history = vec![value];
    let mut dir = vec![0.0; n];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if sup_norm(&g) < options.grad_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }
        for i in 0..n {
            dir[i] = -dot(&h_inv[i * n..(i + 1) * n], &g);
        }
        let mut d0 = dot(&g, &dir);
        if !(d0 < 0.0) {
            h_inv = identity(n);
            fresh = true;
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            d0 = -dot(&g, &g);
        }
        let alpha_init = if fresh {
            (1.0 / sup_norm(&g)).min(1.0)
        } else {
            1.0
        };

        let mut probe = Probe {
            f: &mut f,
            x: &x,
            dir: &dir,
            x_trial: vec![0.0; n],
            g_trial: vec![0.0; n],
            last_alpha: f64::NAN,
            last_value: f64::INFINITY,
        };
        let accepted = line_search(&mut probe, value, d0, alpha_init);
        let Some(alpha) = accepted else {
            if fresh {
                termination = Termination::LineSearchFailed;
                break;
            }
            h_inv = identity(n);
            fresh = true;
            continue;
        };
        if probe.last_alpha != alpha {
            probe.eval(alpha);
        }
        let new_value = probe.last_value;
        let x_new = std::mem::take(&mut probe.x_trial);
        let g_new = std::mem::take(&mut probe.g_trial);
        drop(probe);

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step_small = sup_norm(&s) <= options.step_tolerance * (1.0 + sup_norm(&x));
        x = x_new;
        g = g_new;
        value = new_value;
        iterations += 1;

        let sy = dot(&s, &yv);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if fresh {
                let scale = sy / dot(&yv, &yv);
                h_inv.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            bfgs_update(&mut h_inv, &s, &yv, sy);
        }

        history.push(value);
        if sup_norm(&g) < options.grad_tolerance {
            termination = Termination::GradientTolerance;
            break;
        }
        if history.len() > options.window {
            let past = history[history.len() - 1 - options.window];
            if past - value <= options.rel_tolerance * value.abs().max(1.0) {
                termination = Termination::RelativeImprovement;
                break;
            }
        }
        if step_small {
            termination = Termination::StepTolerance;
            break;
        }
    }

    Minimum {
        x,
        value,
        gradient: g,
        iterations,
        termination,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> Option<f64> {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        Some((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
    }

    #[test]
    fn solves_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(m.termination.converged(), "{:?}", m.termination);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn quadratic_in_few_steps() {
        let f = |x: &[f64], g: &mut [f64]| {
            let a = [4.0, 1.0, 0.5];
            let mut v = 0.0;
            for i in 0..3 {
                g[i] = a[i] * (x[i] - i as f64);
                v += 0.5 * a[i] * (x[i] - i as f64).powi(2);
            }
            Some(v)
        };
        let m = minimize(f, &[5.0, 5.0, 5.0], &BfgsOptions::default());
        assert_eq!(m.termination, Termination::GradientTolerance);
        assert!(m.iterations < 20);
        for i in 0..3 {
            assert!((m.x[i] - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn respects_infeasible_region() {
        // -ln(x) + x has its minimum at 1 and is undefined for x <= 0
        let f = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return None;
            }
            g[0] = -1.0 / x[0] + 1.0;
            Some(-x[0].ln() + x[0])
        };
        let m = minimize(f, &[0.01], &BfgsOptions::default());
        assert!(m.termination.converged());
        assert!((m.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_start() {
        let m = minimize(|_: &[f64], _: &mut [f64]| None, &[0.0], &BfgsOptions::default());
        assert_eq!(m.termination, Termination::NonFiniteStart);
    }

    #[test]
    fn iteration_cap() {
        let opts = BfgsOptions {
            max_iterations: 3,
            ..BfgsOptions::default()
        };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &opts);
        assert_eq!(m.termination, Termination::MaxIterations);
        assert_eq!(m.iterations, 3);
    }
}

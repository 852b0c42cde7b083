//! Maximum-likelihood fitting, numerical Hessians, information criteria and
//! order/complexity selection.
//!
//! Each restart draws initial network weights uniformly from
//! `[-init_scale, init_scale] / sqrt(J)` using a ChaCha8 generator seeded
//! with `seed` on stream `restart`, so restart `r` starts from the same
//! point regardless of how many restarts are requested. The dispersion
//! `alpha` and inflation `omega` are optimized as `ln(alpha)` and
//! `logit(omega)`; everything reported (estimates, Hessian) is in the
//! original parameterization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::logistic;
use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::model::{LogLikelihood, ModelSpec};
use crate::network::Response;
use crate::optim::{self, BfgsOptions, Termination};
use crate::series::CountSeries;

const GP_ALPHA_START: f64 = 0.1;
const ZIB_OMEGA_START: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 20,
            seed: 0,
            init_scale: 1.0,
            max_iterations: 2000,
            grad_tolerance: 1e-6,
            step_tolerance: 1e-10,
        }
    }
}

impl FitOptions {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::usage("restarts must be at least 1"));
        }
        if !(self.grad_tolerance > 0.0 && self.step_tolerance > 0.0 && self.init_scale > 0.0) {
            return Err(Error::usage("tolerances and init_scale must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::usage("max_iterations must be positive"));
        }
        Ok(())
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions {
            max_iterations: self.max_iterations,
            grad_tolerance: self.grad_tolerance,
            step_tolerance: self.step_tolerance,
            ..BfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub seed: u64,
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub status: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub weights: Vec<f64>,
    pub aux: Option<f64>,
    /// Name of each entry of [`FitResult::params`].
    pub layout: Vec<String>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub k_params: usize,
    pub effective_t: usize,
    /// Hessian of the negative log-likelihood at the estimate, row-major
    /// over `weights` followed by `aux`.
    pub hessian: Vec<Vec<f64>>,
    pub converged: bool,
    pub options: FitOptions,
    pub restart_log: Vec<RestartRecord>,
}

impl FitResult {
    /// `weights` followed by `aux`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend(self.aux);
        p
    }

    /// Square roots of the diagonal of the inverse Hessian, when it is
    /// positive definite.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let k = self.hessian.len();
        let h = nalgebra::DMatrix::from_fn(k, k, |i, j| self.hessian[i][j]);
        let chol = h.cholesky()?;
        let inv = chol.inverse();
        Some((0..k).map(|i| inv[(i, i)].sqrt()).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `(aic, bic)` with `aic = -2l + 2k` and `bic = -2l + k ln(t_eff)`.
pub fn information_criteria(loglik: f64, k: usize, t_eff: usize) -> (f64, f64) {
    let k = k as f64;
    (
        -2.0 * loglik + 2.0 * k,
        -2.0 * loglik + k * (t_eff as f64).ln(),
    )
}

/// Map between the optimizer's unconstrained coordinates and natural
/// parameters.
#[derive(Debug, Clone, Copy)]
struct Reparam {
    family: Family,
    n_net: usize,
}

impl Reparam {
    fn to_natural(&self, theta: &[f64], out: &mut [f64]) {
        out[..self.n_net].copy_from_slice(&theta[..self.n_net]);
        if let Some(&a) = theta.get(self.n_net) {
            out[self.n_net] = match self.family {
                Family::GeneralizedPoisson => a.exp(),
                _ => logistic(a),
            };
        }
    }

    /// Chain factor `d natural / d theta` for the auxiliary coordinate.
    fn aux_jacobian(&self, natural_aux: f64) -> f64 {
        match self.family {
            Family::GeneralizedPoisson => natural_aux,
            _ => natural_aux * (1.0 - natural_aux),
        }
    }
}

fn check_degenerate_data(spec: &ModelSpec, series: &CountSeries) -> Result<()> {
    let y = &series.y[spec.condition_on..];
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        let at_edge = first == 0 || spec.family.bound() == Some(first);
        if at_edge {
            return Err(Error::domain(format!(
                "every count in the sample equals {first}; the {} likelihood has no interior maximum",
                spec.family.name()
            )));
        }
    }
    Ok(())
}

fn initial_point(spec: &ModelSpec, options: &FitOptions, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(restart as u64);
    let scale = options.init_scale / (spec.input_dim() as f64).sqrt();
    let mut theta: Vec<f64> = (0..spec.n_network_params())
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    match spec.family {
        Family::GeneralizedPoisson => theta.push(GP_ALPHA_START.ln()),
        Family::ZeroInflatedBinomial { .. } => {
            theta.push((ZIB_OMEGA_START / (1.0 - ZIB_OMEGA_START)).ln())
        }
        _ => {}
    }
    theta
}

struct RestartOutcome {
    record: RestartRecord,
    natural: Vec<f64>,
}

fn run_restart(ll: &LogLikelihood<'_>, options: &FitOptions, restart: usize) -> RestartOutcome {
    let spec = ll.spec();
    let reparam = Reparam {
        family: spec.family,
        n_net: spec.n_network_params(),
    };
    let k = spec.n_params();
    let mut natural = vec![0.0; k];
    let mut grad = vec![0.0; k];
    let objective = |theta: &[f64], g: &mut [f64]| -> Option<f64> {
        reparam.to_natural(theta, &mut natural);
        let value = ll.value_and_gradient(&natural, &mut grad).ok()?;
        for (gi, v) in g.iter_mut().zip(&grad) {
            *gi = -v;
        }
        if k > reparam.n_net {
            g[reparam.n_net] *= reparam.aux_jacobian(natural[reparam.n_net]);
        }
        Some(-value)
    };
    let start = initial_point(spec, options, restart);
    let min = optim::minimize(objective, &start, &options.bfgs());
    let mut natural = vec![0.0; k];
    reparam.to_natural(&min.x, &mut natural);
    let loglik = min.value.is_finite().then_some(-min.value);
    RestartOutcome {
        record: RestartRecord {
            index: restart,
            seed: options.seed,
            loglik,
            iterations: min.iterations,
            status: min.termination,
        },
        natural,
    }
}

/// Fit by multi-start quasi-Newton maximization of the log-likelihood.
pub fn fit(series: &CountSeries, spec: &ModelSpec, options: &FitOptions) -> Result<FitResult> {
    options.validate()?;
    let ll = LogLikelihood::new(spec, series)?;
    check_degenerate_data(spec, series)?;

    let outcomes: Vec<RestartOutcome> = (0..options.restarts)
        .into_par_iter()
        .map(|r| run_restart(&ll, options, r))
        .collect();

    let best = outcomes
        .iter()
        .filter(|o| o.record.status.converged())
        .filter_map(|o| o.record.loglik.map(|l| (l, o)))
        // strict comparison keeps the lowest index on ties
        .fold(None::<(f64, &RestartOutcome)>, |acc, (l, o)| match acc {
            Some((bl, _)) if bl >= l => acc,
            _ => Some((l, o)),
        });
    let restart_log: Vec<RestartRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let Some((_, best)) = best else {
        return Err(Error::NonConvergence { log: restart_log });
    };

    let params = best.natural.clone();
    let loglik = ll.value(&params)?;
    let hessian = hessian_of(&ll, &params)?;
    let k_params = spec.n_params();
    let effective_t = ll.effective_len();
    let (aic, bic) = information_criteria(loglik, k_params, effective_t);
    let (weights, aux) = spec.split_params(&params)?;
    Ok(FitResult {
        spec: spec.clone(),
        weights: weights.to_vec(),
        aux,
        layout: spec.param_names(),
        loglik,
        aic,
        bic,
        k_params,
        effective_t,
        hessian,
        converged: true,
        options: *options,
        restart_log,
    })
}

/// A [`FitResult`] at fixed parameter values, without optimization
/// (`converged` is false and the restart log is empty).
pub fn evaluate(series: &CountSeries, spec: &ModelSpec, params: &[f64]) -> Result<FitResult> {
    let ll = LogLikelihood::new(spec, series)?;
    let (weights, aux) = spec.split_params(params)?;
    let loglik = ll.value(params)?;
    let hessian = hessian_of(&ll, params)?;
    let k_params = spec.n_params();
    let effective_t = ll.effective_len();
    let (aic, bic) = information_criteria(loglik, k_params, effective_t);
    Ok(FitResult {
        spec: spec.clone(),
        weights: weights.to_vec(),
        aux,
        layout: spec.param_names(),
        loglik,
        aic,
        bic,
        k_params,
        effective_t,
        hessian,
        converged: false,
        options: FitOptions::default(),
        restart_log: Vec::new(),
    })
}

/// Hessian of `-loglik` at `params` by central differences of the exact
/// gradient, symmetrized.
pub fn numerical_hessian(
    series: &CountSeries,
    spec: &ModelSpec,
    params: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let ll = LogLikelihood::new(spec, series)?;
    hessian_of(&ll, params)
}

fn hessian_of(ll: &LogLikelihood<'_>, params: &[f64]) -> Result<Vec<Vec<f64>>> {
    let spec = ll.spec();
    let n_net = spec.n_network_params();
    // keep the auxiliary probe inside its domain
    let limit = |i: usize, v: f64| -> f64 {
        if i < n_net {
            return f64::INFINITY;
        }
        match spec.family {
            Family::GeneralizedPoisson => 0.5 * v,
            _ => 0.5 * v.min(1.0 - v),
        }
    };
    let neg_grad = |x: &[f64], g: &mut [f64]| -> Result<()> {
        ll.value_and_gradient(x, g)?;
        g.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    };
    hessian_from_gradient(neg_grad, params, limit)
}

/// Central-difference Hessian of a function given its gradient, with step
/// `sqrt(eps) * (1 + |x_i|)` capped by `max_step(i, x_i)`.
pub fn hessian_from_gradient(
    mut grad: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    x: &[f64],
    max_step: impl Fn(usize, f64) -> f64,
) -> Result<Vec<Vec<f64>>> {
    let k = x.len();
    let mut h = vec![vec![0.0; k]; k];
    let mut xp = x.to_vec();
    let mut g_up = vec![0.0; k];
    let mut g_down = vec![0.0; k];
    for i in 0..k {
        let step = (f64::EPSILON.sqrt() * (1.0 + x[i].abs())).min(max_step(i, x[i]));
        xp[i] = x[i] + step;
        grad(&xp, &mut g_up)?;
        xp[i] = x[i] - step;
        grad(&xp, &mut g_down)?;
        xp[i] = x[i];
        for j in 0..k {
            h[j][i] = (g_up[j] - g_down[j]) / (2.0 * step);
        }
    }
    let mut bad = Vec::new();
    for i in 0..k {
        for j in 0..i {
            let avg = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = avg;
            h[j][i] = avg;
        }
        for j in 0..k {
            if !h[i][j].is_finite() {
                bad.push((i, j));
            }
        }
    }
    if bad.is_empty() {
        Ok(h)
    } else {
        Err(Error::Numerical { indices: bad })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleAlignment {
    /// Every candidate conditions on the largest `p` among candidates.
    Common,
    /// Every candidate uses its own maximal sample.
    Own,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub effective_t: usize,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub aic_rank: Option<usize>,
    pub bic_rank: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTable {
    pub response: Response,
    pub family: Family,
    pub alignment: SampleAlignment,
    pub rows: Vec<OrderRow>,
    /// BIC-preferred order refit on its own maximal sample.
    pub winner: Option<FitResult>,
}

impl OrderTable {
    pub fn best_by_aic(&self) -> Option<&OrderRow> {
        self.rows.iter().find(|r| r.aic_rank == Some(1))
    }

    pub fn best_by_bic(&self) -> Option<&OrderRow> {
        self.rows.iter().find(|r| r.bic_rank == Some(1))
    }
}

fn ranks(values: &[Option<f64>]) -> Vec<Option<usize>> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    idx.sort_by(|&a, &b| values[a].unwrap().total_cmp(&values[b].unwrap()).then(a.cmp(&b)));
    let mut out = vec![None; values.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        out[i] = Some(rank + 1);
    }
    out
}

/// Rank candidate orders `(p, q)` of the model in `template` by AIC and BIC.
pub fn select_order(
    series: &CountSeries,
    template: &ModelSpec,
    candidates: &[(usize, usize)],
    alignment: SampleAlignment,
    options: &FitOptions,
) -> Result<OrderTable> {
    if candidates.is_empty() {
        return Err(Error::usage("no candidate orders given"));
    }
    let max_p = candidates.iter().map(|c| c.0).max().unwrap_or(0);
    let base_extra = template.condition_on.saturating_sub(template.p);
    let specs: Vec<ModelSpec> = candidates
        .iter()
        .map(|&(p, q)| {
            let s = template.clone().with_order(p, q).with_condition_on(p + base_extra);
            match alignment {
                SampleAlignment::Common => s.with_condition_on(max_p + base_extra),
                SampleAlignment::Own => s,
            }
        })
        .collect();
    let fits: Vec<Result<FitResult>> = specs.iter().map(|s| fit(series, s, options)).collect();

    let mut rows: Vec<OrderRow> = specs
        .iter()
        .zip(&fits)
        .map(|(s, f)| OrderRow {
            p: s.p,
            q: s.q,
            k: s.n_params(),
            effective_t: s.effective_len(series),
            loglik: f.as_ref().ok().map(|f| f.loglik),
            aic: f.as_ref().ok().map(|f| f.aic),
            bic: f.as_ref().ok().map(|f| f.bic),
            aic_rank: None,
            bic_rank: None,
            error: f.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    if rows.iter().all(|r| r.error.is_some()) {
        let first = fits.into_iter().find_map(|f| f.err());
        return Err(first.unwrap_or_else(|| Error::usage("all candidate fits failed")));
    }
    let aic: Vec<_> = rows.iter().map(|r| r.aic).collect();
    let bic: Vec<_> = rows.iter().map(|r| r.bic).collect();
    for (row, (a, b)) in rows.iter_mut().zip(ranks(&aic).into_iter().zip(ranks(&bic))) {
        row.aic_rank = a;
        row.bic_rank = b;
    }

    let winner_idx = rows.iter().position(|r| r.bic_rank == Some(1));
    let winner = match (winner_idx, alignment) {
        (Some(i), SampleAlignment::Common) if specs[i].condition_on != specs[i].p + base_extra => {
            let own = specs[i].clone().with_order(specs[i].p, specs[i].q);
            let own = ModelSpec {
                condition_on: own.p + base_extra,
                ..own
            };
            fit(series, &own, options).ok()
        }
        (Some(i), _) => fits.into_iter().nth(i).and_then(|f| f.ok()),
        (None, _) => None,
    };

    Ok(OrderTable {
        response: template.response,
        family: template.family,
        alignment,
        rows,
        winner,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenRow {
    pub hidden: usize,
    pub k: usize,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenTable {
    /// `floor(0.1 * T_eff / (J + 1))`.
    pub cap: usize,
    pub effective_t: usize,
    pub rows: Vec<HiddenRow>,
}

impl HiddenTable {
    fn argmin(&self, key: impl Fn(&HiddenRow) -> Option<f64>) -> Option<usize> {
        self.rows
            .iter()
            .filter_map(|r| key(r).map(|v| (v, r.hidden)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, h)| h)
    }

    pub fn best_by_aic(&self) -> Option<usize> {
        self.argmin(|r| r.aic)
    }

    pub fn best_by_bic(&self) -> Option<usize> {
        self.argmin(|r| r.bic)
    }
}

/// Rule-of-thumb cap on hidden units: ten observations per parameter.
pub fn hidden_cap(effective_t: usize, input_dim: usize) -> usize {
    (0.1 * effective_t as f64 / (input_dim + 1) as f64).floor() as usize
}

/// Fit the neural model for each hidden-layer size in `hidden`.
pub fn select_hidden(
    series: &CountSeries,
    template: &ModelSpec,
    hidden: &[usize],
    allow_over_cap: bool,
    options: &FitOptions,
) -> Result<HiddenTable> {
    if hidden.is_empty() {
        return Err(Error::usage("no hidden-layer sizes given"));
    }
    template.validate(series)?;
    let effective_t = template.effective_len(series);
    let cap = hidden_cap(effective_t, template.input_dim());
    if !allow_over_cap {
        if let Some(&h) = hidden.iter().find(|&&h| h > cap) {
            return Err(Error::usage(format!(
                "H = {h} exceeds the rule-of-thumb cap {cap}; override to fit anyway"
            )));
        }
    }
    let output = template.response.output();
    let rows: Vec<HiddenRow> = hidden
        .iter()
        .map(|&h| {
            let spec = template.clone().with_response(Response::neural(h, output));
            let f = fit(series, &spec, options);
            HiddenRow {
                hidden: h,
                k: spec.n_params(),
                loglik: f.as_ref().ok().map(|f| f.loglik),
                aic: f.as_ref().ok().map(|f| f.aic),
                bic: f.as_ref().ok().map(|f| f.bic),
                error: f.err().map(|e| e.to_string()),
            }
        })
        .collect();
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(Error::usage(format!(
            "all hidden-layer fits failed: {}",
            rows[0].error.as_deref().unwrap_or("")
        )));
    }
    Ok(HiddenTable {
        cap,
        effective_t,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Activation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn information_criteria_gaps() {
        let gap = |k, t| {
            let (a, b) = information_criteria(-350.0, k, t);
            b - a
        };
        assert_abs_diff_eq!(gap(2, 210), 2.0 * (210f64.ln() - 2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(gap(6, 210), 20.083, epsilon = 1e-3);
        assert_abs_diff_eq!(gap(12, 137), 35.040, epsilon = 1e-3);
        let (aic, bic) = information_criteria(-10.0, 3, 100);
        assert_eq!(aic, 26.0);
        assert_eq!(bic, 20.0 + 3.0 * 100f64.ln());
    }

    #[test]
    fn hidden_caps() {
        assert_eq!(hidden_cap(210, 2), 7);
        assert_eq!(hidden_cap(211, 2), 7);
        assert_eq!(hidden_cap(137, 3), 3);
    }

    #[test]
    fn quadratic_hessian_is_exact() {
        let a = [[4.0, 1.0, -0.5], [1.0, 3.0, 0.2], [-0.5, 0.2, 2.0]];
        let grad = |x: &[f64], g: &mut [f64]| {
            for i in 0..3 {
                g[i] = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() + 1.0;
            }
            Ok(())
        };
        let h = hessian_from_gradient(grad, &[0.3, -1.0, 2.0], |_, _| f64::INFINITY).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(h[i][j], a[i][j], epsilon = 1e-8);
                assert_eq!(h[i][j], h[j][i]);
            }
        }
    }

    #[test]
    fn non_finite_hessian_reported() {
        let grad = |x: &[f64], g: &mut [f64]| {
            g[0] = if x[0] > 0.0 { f64::NAN } else { 0.0 };
            g[1] = 0.0;
            Ok(())
        };
        let err = hessian_from_gradient(grad, &[0.0, 0.0], |_, _| f64::INFINITY).unwrap_err();
        assert!(matches!(err, Error::Numerical { ref indices } if indices.contains(&(0, 0))));
    }

    #[test]
    fn constant_poisson_hessian() {
        // identity response with only a constant input: lambda = beta
        let y = vec![3, 1, 4, 1, 5, 9, 2, 6];
        let series = CountSeries::new(y.clone()).unwrap();
        let spec = ModelSpec::new(0, 0, Response::degenerate(Activation::Identity), Family::Poisson);
        let lambda = series.mean();
        let h = numerical_hessian(&series, &spec, &[lambda]).unwrap();
        let sum: u64 = y.iter().sum();
        assert_abs_diff_eq!(h[0][0], sum as f64 / (lambda * lambda), epsilon = 1e-6);

        // softplus response: -d2l/db2 = sum(y) s'^2 / s^2 at the optimum
        let spec = ModelSpec::new(0, 0, Response::degenerate(Activation::Softplus), Family::Poisson);
        let beta = (lambda.exp() - 1.0).ln();
        let h = numerical_hessian(&series, &spec, &[beta]).unwrap();
        let s1 = logistic(beta);
        assert_abs_diff_eq!(h[0][0], sum as f64 * s1 * s1 / (lambda * lambda), epsilon = 1e-6);
    }

    #[test]
    fn fit_is_deterministic() {
        let y: Vec<u64> = (0..150).map(|i| ((i * 7 + 3) % 11 / 3) as u64).collect();
        let series = CountSeries::new(y).unwrap();
        let spec = ModelSpec::new(1, 0, Response::neural(2, Activation::Softplus), Family::Poisson);
        let opts = FitOptions::default().with_restarts(4).with_seed(17);
        let a = fit(&series, &spec, &opts).unwrap();
        let b = fit(&series, &spec, &opts).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.restart_log.len(), 4);
        assert_eq!(a.k_params, 6);
        assert_eq!(a.effective_t, 149);
        let (aic, bic) = information_criteria(a.loglik, a.k_params, a.effective_t);
        assert_eq!((a.aic, a.bic), (aic, bic));
    }

    #[test]
    fn degenerate_data_rejected() {
        let series = CountSeries::new(vec![0; 40]).unwrap();
        let spec = ModelSpec::new(1, 0, Response::degenerate(Activation::Softplus), Family::GeneralizedPoisson);
        assert!(matches!(fit(&series, &spec, &FitOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn non_convergence_carries_log() {
        let y: Vec<u64> = (0..60).map(|i| (i % 5) as u64).collect();
        let series = CountSeries::new(y).unwrap();
        let spec = ModelSpec::new(1, 0, Response::neural(3, Activation::Softplus), Family::Poisson);
        let opts = FitOptions {
            max_iterations: 1,
            restarts: 3,
            ..FitOptions::default()
        };
        match fit(&series, &spec, &opts) {
            Err(Error::NonConvergence { log }) => assert_eq!(log.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn ranks_handle_failures_and_ties() {
        let r = ranks(&[Some(3.0), None, Some(1.0), Some(3.0)]);
        assert_eq!(r, vec![Some(2), None, Some(1), Some(3)]);
    }
}

//! The INGARCH conditional-mean recursion.
//!
//! At each time `t` (0-based, `t >= p`) the response maps the input vector
//!
//! ```text
//! x_t = (1, y[t-1], ..., y[t-p], m[t-1], ..., m[t-q], covariates[t])
//! ```
//!
//! to the conditional mean parameter `m[t]` (a Poisson rate or a binomial
//! success probability). Lagged means before `t = p` are initialized at the
//! sample mean of the counts (the sample proportion for bounded families).
//! Each non-constant input passes through an affine transform recorded in
//! the [`ModelSpec`].

use serde::{Deserialize, Serialize};

use crate::distributions::{CountDistribution, Family};
use crate::error::{Error, Result};
use crate::network::{ForwardState, Network, Response};
use crate::series::CountSeries;

/// `scaled = (raw - offset) * factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub offset: f64,
    pub factor: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        offset: 0.0,
        factor: 1.0,
    };

    /// Maps `[min, max]` onto `[0, 1]`; identity for a constant column.
    pub fn unit_interval(values: &[f64]) -> Affine {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            Affine {
                offset: lo,
                factor: 1.0 / (hi - lo),
            }
        } else {
            Affine::IDENTITY
        }
    }

    #[inline]
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) * self.factor
    }

    #[inline]
    pub fn invert(&self, scaled: f64) -> f64 {
        scaled / self.factor + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateScaling {
    /// Min-max scaling to `[0, 1]` over the series.
    UnitInterval,
    Raw,
}

/// Affine transforms for the non-constant inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub counts: Affine,
    pub means: Affine,
    pub covariates: Vec<Affine>,
}

impl Default for InputScaling {
    fn default() -> Self {
        InputScaling {
            counts: Affine::IDENTITY,
            means: Affine::IDENTITY,
            covariates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    pub response: Response,
    pub family: Family,
    pub covariates: Vec<String>,
    pub scaling: InputScaling,
    /// Number of leading observations the likelihood conditions on
    /// (at least `p`); the effective sample is `T - condition_on`.
    pub condition_on: usize,
}

impl ModelSpec {
    pub fn new(p: usize, q: usize, response: Response, family: Family) -> Self {
        ModelSpec {
            p,
            q,
            response,
            family,
            covariates: Vec::new(),
            scaling: InputScaling::default(),
            condition_on: p,
        }
    }

    /// Adds covariate columns, computing their scaling from `series`.
    pub fn with_covariates(
        mut self,
        series: &CountSeries,
        names: &[&str],
        scaling: CovariateScaling,
    ) -> Result<Self> {
        for name in names {
            let cov = series
                .covariate(name)
                .ok_or_else(|| Error::usage(format!("series has no covariate '{name}'")))?;
            let affine = match scaling {
                CovariateScaling::UnitInterval => Affine::unit_interval(&cov.values),
                CovariateScaling::Raw => Affine::IDENTITY,
            };
            self.covariates.push(name.to_string());
            self.scaling.covariates.push(affine);
        }
        Ok(self)
    }

    pub fn with_order(mut self, p: usize, q: usize) -> Self {
        let extra = self.condition_on.saturating_sub(self.p);
        self.p = p;
        self.q = q;
        self.condition_on = p + extra;
        self
    }

    pub fn with_response(mut self, response: Response) -> Self {
        self.response = response;
        self
    }

    pub fn with_condition_on(mut self, n: usize) -> Self {
        self.condition_on = n.max(self.p);
        self
    }

    /// `J = 1 + p + q + covariates`.
    pub fn input_dim(&self) -> usize {
        1 + self.p + self.q + self.covariates.len()
    }

    pub fn n_network_params(&self) -> usize {
        self.response.n_params(self.input_dim())
    }

    pub fn n_params(&self) -> usize {
        self.n_network_params() + usize::from(self.family.has_aux())
    }

    /// True when no input varies over time, so the fitted mean is constant.
    pub fn is_constant_mean(&self) -> bool {
        self.p + self.q == 0 && self.covariates.is_empty()
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.response, self.input_dim())
    }

    /// Names of the inputs in network order, starting with `const`.
    pub fn input_names(&self) -> Vec<String> {
        let mean_sym = if self.family.is_bounded() { "p" } else { "lambda" };
        let mut names = vec!["const".to_string()];
        names.extend((1..=self.p).map(|j| format!("y[t-{j}]")));
        names.extend((1..=self.q).map(|j| format!("{mean_sym}[t-{j}]")));
        names.extend(self.covariates.iter().cloned());
        names
    }

    /// Names of the entries of the flat parameter vector, in layout order.
    pub fn param_names(&self) -> Vec<String> {
        let inputs = self.input_names();
        let mut names = match self.response {
            Response::Neural { hidden, .. } => {
                let mut v: Vec<String> = (0..hidden)
                    .flat_map(|h| inputs.iter().map(move |x| format!("w0[{x},{}]", h + 1)))
                    .collect();
                v.extend((1..=hidden).map(|h| format!("w1[{h}]")));
                v
            }
            Response::Degenerate { .. } => inputs.iter().map(|x| format!("beta[{x}]")).collect(),
        };
        names.extend(self.family.aux_name().map(String::from));
        names
    }

    /// Affine transform for input slot `j` (`j >= 1`).
    pub fn input_affine(&self, j: usize) -> Affine {
        if j == 0 {
            Affine::IDENTITY
        } else if j <= self.p {
            self.scaling.counts
        } else if j <= self.p + self.q {
            self.scaling.means
        } else {
            self.scaling.covariates[j - 1 - self.p - self.q]
        }
    }

    pub fn validate(&self, series: &CountSeries) -> Result<()> {
        if self.scaling.covariates.len() != self.covariates.len() {
            return Err(Error::Shape {
                what: "covariate scaling",
                expected: self.covariates.len(),
                got: self.scaling.covariates.len(),
            });
        }
        for name in &self.covariates {
            if series.covariate(name).is_none() {
                return Err(Error::usage(format!("series has no covariate '{name}'")));
            }
        }
        if let Some(n) = self.family.bound() {
            match series.bound {
                Some(b) if b == n => {}
                Some(b) => {
                    return Err(Error::usage(format!(
                        "series bound {b} differs from model bound {n}"
                    )))
                }
                None => {
                    return Err(Error::usage(format!(
                        "{} family requires a bounded series",
                        self.family.name()
                    )))
                }
            }
        }
        if self.condition_on < self.p {
            return Err(Error::usage("condition_on must be at least p"));
        }
        if series.len() <= self.condition_on {
            return Err(Error::usage(format!(
                "series of length {} is too short to condition on {} observations",
                series.len(),
                self.condition_on
            )));
        }
        Ok(())
    }

    /// Effective sample size `T - condition_on`.
    pub fn effective_len(&self, series: &CountSeries) -> usize {
        series.len().saturating_sub(self.condition_on)
    }

    /// Split a full parameter vector into network weights and the auxiliary
    /// parameter.
    pub fn split_params<'p>(&self, params: &'p [f64]) -> Result<(&'p [f64], Option<f64>)> {
        if params.len() != self.n_params() {
            return Err(Error::Shape {
                what: "parameters",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let (w, aux) = params.split_at(self.n_network_params());
        Ok((w, aux.first().copied()))
    }

    pub fn distribution(&self, aux: Option<f64>) -> Result<CountDistribution> {
        self.family.with_aux(aux)
    }

    /// Initial value of lagged means before the first filtered step.
    pub fn initial_mean(&self, series: &CountSeries) -> f64 {
        let m = series.mean();
        let init = match self.family.bound() {
            Some(n) => m / n as f64,
            None => m,
        };
        self.family.clamp_mean_param(init)
    }

    /// Writes the input vector for time `t` into `out`.
    fn fill_input(&self, series: &CountSeries, t: usize, lagged_means: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        let mut j = 1;
        for lag in 1..=self.p {
            out[j] = self.scaling.counts.apply(series.y[t - lag] as f64);
            j += 1;
        }
        for &m in lagged_means.iter().take(self.q) {
            out[j] = self.scaling.means.apply(m);
            j += 1;
        }
        for (name, affine) in self.covariates.iter().zip(&self.scaling.covariates) {
            // validated to exist
            let cov = series.covariate(name).expect("covariate present");
            out[j] = affine.apply(cov.values[t]);
            j += 1;
        }
    }
}

/// Input vector at time `t` (0-based). `lagged_means` holds
/// `m[t-1], ..., m[t-q]`.
pub fn build_input(
    series: &CountSeries,
    spec: &ModelSpec,
    t: usize,
    lagged_means: &[f64],
) -> Result<Vec<f64>> {
    if t < spec.p || t >= series.len() {
        return Err(Error::Index {
            index: t,
            reason: format!("inputs exist for t in {}..{}", spec.p, series.len()),
        });
    }
    if lagged_means.len() != spec.q {
        return Err(Error::Shape {
            what: "lagged means",
            expected: spec.q,
            got: lagged_means.len(),
        });
    }
    for name in &spec.covariates {
        if series.covariate(name).is_none() {
            return Err(Error::usage(format!("series has no covariate '{name}'")));
        }
    }
    let mut x = vec![0.0; spec.input_dim()];
    spec.fill_input(series, t, lagged_means, &mut x);
    Ok(x)
}

/// Conditional mean parameters and the inputs that produced them, for
/// `t = p..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub means: Vec<f64>,
    inputs: Vec<f64>,
    pub input_dim: usize,
    /// Time index of `means[0]`.
    pub start: usize,
    pub effective_t: usize,
}

impl FilterOutput {
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks(self.input_dim)
    }
}

/// Log-likelihood of a model on a fixed series, with its exact gradient.
///
/// For `q = 0` the inputs are assembled once into a design matrix; with
/// `q > 0` the recursion is run sequentially and the gradient carries the
/// sensitivities `d m[t] / d w` forward through the lagged means.
#[derive(Debug, Clone)]
pub struct LogLikelihood<'a> {
    spec: &'a ModelSpec,
    series: &'a CountSeries,
    network: Network,
    init_mean: f64,
    design: Option<Vec<f64>>,
}

impl<'a> LogLikelihood<'a> {
    pub fn new(spec: &'a ModelSpec, series: &'a CountSeries) -> Result<Self> {
        let mut ll = Self::sequential(spec, series)?;
        if spec.q == 0 {
            let j_dim = spec.input_dim();
            let mut design = vec![0.0; (series.len() - spec.p) * j_dim];
            for (i, row) in design.chunks_mut(j_dim).enumerate() {
                spec.fill_input(series, spec.p + i, &[], row);
            }
            ll.design = Some(design);
        }
        Ok(ll)
    }

    /// Like [`LogLikelihood::new`] but always assembles inputs step by step.
    pub fn sequential(spec: &'a ModelSpec, series: &'a CountSeries) -> Result<Self> {
        spec.validate(series)?;
        Ok(LogLikelihood {
            spec,
            series,
            network: spec.network()?,
            init_mean: spec.initial_mean(series),
            design: None,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn series(&self) -> &CountSeries {
        self.series
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    pub fn effective_len(&self) -> usize {
        self.spec.effective_len(self.series)
    }

    pub fn value(&self, params: &[f64]) -> Result<f64> {
        self.run(params, None, None)
    }

    pub fn value_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> Result<f64> {
        if grad.len() != params.len() {
            return Err(Error::Shape {
                what: "gradient buffer",
                expected: params.len(),
                got: grad.len(),
            });
        }
        self.run(params, Some(grad), None)
    }

    /// Conditional mean parameters for network weights `weights`.
    pub fn filter(&self, weights: &[f64]) -> Result<FilterOutput> {
        if weights.len() != self.spec.n_network_params() {
            return Err(Error::Shape {
                what: "weights",
                expected: self.spec.n_network_params(),
                got: weights.len(),
            });
        }
        let mut out = FilterOutput {
            means: Vec::with_capacity(self.series.len() - self.spec.p),
            inputs: Vec::with_capacity((self.series.len() - self.spec.p) * self.spec.input_dim()),
            input_dim: self.spec.input_dim(),
            start: self.spec.p,
            effective_t: self.series.len() - self.spec.p,
        };
        self.walk(weights, |_, x, _, theta| {
            out.means.push(theta);
            out.inputs.extend_from_slice(x);
            Ok(())
        })?;
        Ok(out)
    }

    /// Runs the recursion, calling `visit(t, x, state, theta)` at each step.
    fn walk(
        &self,
        weights: &[f64],
        mut visit: impl FnMut(usize, &[f64], &ForwardState, f64) -> Result<()>,
    ) -> Result<()> {
        let spec = self.spec;
        let j_dim = spec.input_dim();
        let q = spec.q;
        let mut lagged = vec![self.init_mean; q];
        let mut x = vec![0.0; j_dim];
        let mut state = ForwardState::default();
        for t in spec.p..self.series.len() {
            let row: &[f64] = match &self.design {
                Some(d) => &d[(t - spec.p) * j_dim..(t - spec.p + 1) * j_dim],
                None => {
                    spec.fill_input(self.series, t, &lagged, &mut x);
                    &x
                }
            };
            self.network.forward_into(weights, row, &mut state);
            if !state.output.is_finite() {
                return Err(Error::Filter {
                    t,
                    reason: format!("response output {}", state.output),
                });
            }
            let theta = spec.family.clamp_mean_param(state.output);
            visit(t, row, &state, theta)?;
            if q > 0 {
                lagged.rotate_right(1);
                lagged[0] = theta;
            }
        }
        Ok(())
    }

    fn run(
        &self,
        params: &[f64],
        mut grad: Option<&mut [f64]>,
        mut terms: Option<&mut Vec<f64>>,
    ) -> Result<f64> {
        let spec = self.spec;
        let (weights, aux) = spec.split_params(params)?;
        let dist = spec.distribution(aux)?;
        let n_net = weights.len();
        let q = spec.q;
        let start = spec.condition_on;
        let y = &self.series.y;

        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        // ring of d m[t-j] / d w, one row per lag
        let mut sens = if grad.is_some() && q > 0 {
            vec![0.0; q * n_net]
        } else {
            Vec::new()
        };
        let mut d_cur = vec![0.0; if q > 0 { n_net } else { 0 }];
        let mean_factor = spec.scaling.means.factor;
        let lag_slot = 1 + spec.p;

        let mut total = 0.0;
        self.walk(weights, |t, x, state, theta| {
            let k = y[t];
            if t >= start {
                let lp = dist.log_pmf_unchecked(k, theta);
                total += lp;
                if let Some(v) = terms.as_deref_mut() {
                    v.push(lp);
                }
            }
            let Some(g) = grad.as_deref_mut() else {
                return Ok(());
            };
            let score = if t >= start {
                dist.score_mean_unchecked(k, theta)
            } else {
                0.0
            };
            if q == 0 {
                if score != 0.0 {
                    self.network.backward_into(weights, x, state, score, &mut g[..n_net]);
                }
            } else {
                d_cur.fill(0.0);
                self.network.backward_into(weights, x, state, 1.0, &mut d_cur);
                for j in 1..=q {
                    if t < spec.p + j {
                        continue; // m[t-j] is the fixed initial value
                    }
                    let slot = (t - j) % q;
                    let partial =
                        self.network.input_partial(weights, state, lag_slot + j - 1) * mean_factor;
                    if partial != 0.0 {
                        let prev = &sens[slot * n_net..(slot + 1) * n_net];
                        for (d, s) in d_cur.iter_mut().zip(prev) {
                            *d += partial * s;
                        }
                    }
                }
                if score != 0.0 {
                    for (gi, d) in g[..n_net].iter_mut().zip(&d_cur) {
                        *gi += score * d;
                    }
                }
                let slot = t % q;
                sens[slot * n_net..(slot + 1) * n_net].copy_from_slice(&d_cur);
            }
            if aux.is_some() && t >= start {
                g[n_net] += dist.score_aux_unchecked(k, theta);
            }
            Ok(())
        })?;
        if !total.is_finite() {
            return Err(Error::Filter {
                t: start,
                reason: format!("log-likelihood {total}"),
            });
        }
        Ok(total)
    }

    /// Per-observation log-likelihood contributions for `t >= condition_on`.
    pub fn terms(&self, params: &[f64]) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(self.effective_len());
        self.run(params, None, Some(&mut v))?;
        Ok(v)
    }
}

pub fn filter(spec: &ModelSpec, weights: &[f64], series: &CountSeries) -> Result<FilterOutput> {
    LogLikelihood::sequential(spec, series)?.filter(weights)
}

/// Total log-likelihood over `t >= condition_on`, constants included.
pub fn loglik(spec: &ModelSpec, params: &[f64], series: &CountSeries) -> Result<f64> {
    LogLikelihood::new(spec, series)?.value(params)
}

pub fn loglik_grad(spec: &ModelSpec, params: &[f64], series: &CountSeries) -> Result<Vec<f64>> {
    let mut g = vec![0.0; params.len()];
    LogLikelihood::new(spec, series)?.value_and_gradient(params, &mut g)?;
    Ok(g)
}

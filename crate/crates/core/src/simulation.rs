//! Simulation of count series from a fully specified model.
//!
//! Randomness comes from `ChaCha8Rng` (the `rand_chacha` crate), seeded with
//! `seed_from_u64(seed)` and switched to stream `replication`. ChaCha output
//! is platform independent, so a seed reproduces the same series
//! everywhere. [`simulate`] is replication 0.
//!
//! The first `p` counts are drawn at the mean parameter obtained with every
//! count lag at zero, and lagged means start at that value; the burn-in
//! period absorbs this start-up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::network::ForwardState;
use crate::series::CountSeries;

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: ModelSpec,
    /// Network weights followed by the auxiliary parameter, if any.
    pub params: Vec<f64>,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Raw covariate paths of length `burn_in + length`, in the order of
    /// `spec.covariates`.
    pub covariates: Vec<Vec<f64>>,
}

impl SimConfig {
    pub fn new(spec: ModelSpec, params: Vec<f64>, length: usize, seed: u64) -> Self {
        SimConfig {
            spec,
            params,
            length,
            burn_in: DEFAULT_BURN_IN,
            seed,
            covariates: Vec::new(),
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_covariates(mut self, covariates: Vec<Vec<f64>>) -> Self {
        self.covariates = covariates;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::usage("simulation length must be positive"));
        }
        if self.burn_in < self.spec.p.max(self.spec.q) {
            return Err(Error::usage(format!(
                "burn_in {} shorter than max(p, q) = {}",
                self.burn_in,
                self.spec.p.max(self.spec.q)
            )));
        }
        if self.covariates.len() != self.spec.covariates.len() {
            return Err(Error::Shape {
                what: "covariate paths",
                expected: self.spec.covariates.len(),
                got: self.covariates.len(),
            });
        }
        let total = self.burn_in + self.length;
        for c in &self.covariates {
            if c.len() != total {
                return Err(Error::Shape {
                    what: "covariate path length",
                    expected: total,
                    got: c.len(),
                });
            }
        }
        Ok(())
    }
}

/// Draws one series; identical to replication 0 of [`simulate_replications`].
pub fn simulate(config: &SimConfig) -> Result<CountSeries> {
    simulate_replication(config, 0)
}

/// Draws `count` independent series concurrently, replication `r` on
/// generator stream `r`.
pub fn simulate_replications(config: &SimConfig, count: usize) -> Result<Vec<CountSeries>> {
    (0..count)
        .into_par_iter()
        .map(|r| simulate_replication(config, r as u64))
        .collect()
}

pub fn simulate_replication(config: &SimConfig, replication: u64) -> Result<CountSeries> {
    config.validate()?;
    let spec = &config.spec;
    let (weights, aux) = spec.split_params(&config.params)?;
    let dist = spec.distribution(aux)?;
    let net = spec.network()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replication);

    let total = config.burn_in + config.length;
    let (p, q) = (spec.p, spec.q);
    let mut y: Vec<u64> = Vec::with_capacity(total);
    let mut lagged = vec![0.0; q];
    let mut x = vec![0.0; spec.input_dim()];
    let mut state = ForwardState::default();

    let mut step = |t: usize, y: &[u64], lagged: &[f64], zero_lags: bool| -> Result<f64> {
        x[0] = 1.0;
        for lag in 1..=p {
            let v = if zero_lags { 0.0 } else { y[t - lag] as f64 };
            x[lag] = spec.scaling.counts.apply(v);
        }
        for (j, &m) in lagged.iter().enumerate() {
            x[1 + p + j] = spec.scaling.means.apply(m);
        }
        for (c, (path, affine)) in config.covariates.iter().zip(&spec.scaling.covariates).enumerate() {
            x[1 + p + q + c] = affine.apply(path[t]);
        }
        net.forward_into(weights, &x, &mut state);
        if !state.output.is_finite() {
            return Err(Error::Simulation {
                t,
                reason: format!("response output {}", state.output),
            });
        }
        Ok(spec.family.clamp_mean_param(state.output))
    };

    let start_mean = {
        lagged.fill(0.0);
        let theta = step(0, &y, &lagged, true)?;
        lagged.fill(theta);
        theta
    };
    for t in 0..total {
        let theta = if t < p {
            start_mean
        } else {
            step(t, &y, &lagged, false)?
        };
        let draw = dist.sample(theta, &mut rng).map_err(|e| Error::Simulation {
            t,
            reason: e.to_string(),
        })?;
        y.push(draw);
        if q > 0 && t >= p {
            lagged.rotate_right(1);
            lagged[0] = theta;
        }
    }

    let kept = y.split_off(config.burn_in);
    let mut series = CountSeries::new(kept)?;
    if let Some(n) = spec.family.bound() {
        series = series.with_bound(n)?;
    }
    for (name, path) in spec.covariates.iter().zip(&config.covariates) {
        series = series.with_covariate(name.clone(), path[config.burn_in..].to_vec())?;
    }
    Ok(series)
}

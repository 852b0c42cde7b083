//! Shared fixtures for the benchmarks.

use ningarch::{simulate, Activation, CountSeries, Family, ModelSpec, Response, SimConfig};

/// A simulated series of length `t` from a fixed parameter vector for `spec`.
pub fn fixture(spec: &ModelSpec, t: usize) -> (Vec<f64>, CountSeries) {
    let mut params: Vec<f64> = (0..spec.n_network_params())
        .map(|i| 0.4 * ((i as f64 * 1.7).sin()))
        .collect();
    params.extend(match spec.family {
        Family::GeneralizedPoisson => Some(0.2),
        Family::ZeroInflatedBinomial { .. } => Some(0.3),
        _ => None,
    });
    let series = simulate(&SimConfig::new(spec.clone(), params.clone(), t, 1).with_burn_in(100))
        .expect("fixture parameters are admissible");
    (params, series)
}

pub fn neural(p: usize, q: usize, hidden: usize, family: Family) -> ModelSpec {
    let output = if family.is_bounded() { Activation::Logistic } else { Activation::Softplus };
    ModelSpec::new(p, q, Response::neural(hidden, output), family)
}

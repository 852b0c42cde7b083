#![allow(dead_code)]

use ningarch::{Activation, CountSeries, Family, ModelSpec, Response, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FAMILIES: [Family; 4] = [
    Family::Poisson,
    Family::GeneralizedPoisson,
    Family::Binomial { n: 10 },
    Family::ZeroInflatedBinomial { n: 10 },
];

pub const ORDERS: [(usize, usize); 3] = [(1, 0), (2, 0), (1, 1)];

/// Softplus output for rates, logistic for probabilities.
pub fn output_for(family: Family) -> Activation {
    if family.is_bounded() {
        Activation::Logistic
    } else {
        Activation::Softplus
    }
}

pub fn responses(family: Family) -> [Response; 2] {
    let out = output_for(family);
    [Response::neural(2, out), Response::degenerate(out)]
}

pub fn aux_value(family: Family) -> Option<f64> {
    match family {
        Family::GeneralizedPoisson => Some(0.2),
        Family::ZeroInflatedBinomial { .. } => Some(0.4),
        _ => None,
    }
}

/// Random parameters for `spec`, small enough to keep the recursion stable.
pub fn random_params(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut params: Vec<f64> = (0..spec.n_network_params())
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    if let Some(aux) = aux_value(spec.family) {
        params.push(aux);
    }
    params
}

/// A random model of the given shape and a length-`t` series simulated from it.
pub fn random_case(
    family: Family,
    response: Response,
    (p, q): (usize, usize),
    t: usize,
    seed: u64,
) -> (ModelSpec, Vec<f64>, CountSeries) {
    let spec = ModelSpec::new(p, q, response, family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = random_params(&spec, &mut rng);
    let series = ningarch::simulate(&SimConfig::new(spec.clone(), params.clone(), t, seed).with_burn_in(100))
        .expect("simulation");
    (spec, params, series)
}

/// Five-point central difference of `f` at `x` with step `h`.
pub fn fd_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Five-point central-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 2e-4 * (1.0 + x[i].abs());
            let mut at = |v: f64| {
                xp[i] = v;
                let r = f(&xp);
                xp[i] = x[i];
                r
            };
            let (a, b, c, d) = (at(x[i] - 2.0 * h), at(x[i] - h), at(x[i] + h), at(x[i] + 2.0 * h));
            (a - 8.0 * b + 8.0 * c - d) / (12.0 * h)
        })
        .collect()
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel_err(*x, *y)).fold(0.0, f64::max)
}

//! Post-fit diagnostics: Pearson residuals, autocorrelations, marginal
//! effects with delta-method bands, and zero-state probabilities.
//!
//! Input vectors passed to the functions here are on the raw data scale
//! (counts, rates or probabilities, unscaled covariates) with the constant
//! `1` in slot 0; the model's input scaling is applied internally.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distributions::CountDistribution;
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::model::LogLikelihood;
use crate::network::Network;
use crate::series::CountSeries;

/// Conditional mean and variance at each `t >= condition_on`.
pub fn conditional_moments(series: &CountSeries, fit: &FitResult) -> Result<Vec<(f64, f64)>> {
    let ll = LogLikelihood::new(&fit.spec, series)?;
    let dist = fit.spec.distribution(fit.aux)?;
    let out = ll.filter(&fit.weights)?;
    let skip = fit.spec.condition_on - out.start;
    out.means[skip..]
        .iter()
        .map(|&theta| dist.moments(theta))
        .collect()
}

/// `r_t = (y_t - mu_t) / sqrt(v_t)` for `t >= condition_on`.
pub fn pearson_residuals(series: &CountSeries, fit: &FitResult) -> Result<Vec<f64>> {
    let start = fit.spec.condition_on;
    conditional_moments(series, fit)?
        .into_iter()
        .enumerate()
        .map(|(i, (mu, var))| {
            if var > 0.0 {
                Ok((series.y[start + i] as f64 - mu) / var.sqrt())
            } else {
                Err(Error::ZeroVariance { t: start + i })
            }
        })
        .collect()
}

/// Sample autocorrelations at lags `1..=max_lag`, each normalized by
/// `sum (v_t - mean)^2`.
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if values.len() <= max_lag {
        return Err(Error::UndefinedAcf(format!(
            "need more than {max_lag} values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if !(denom > 0.0) {
        return Err(Error::UndefinedAcf("series is constant".into()));
    }
    Ok((1..=max_lag)
        .map(|lag| dev.iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub mean: f64,
    /// Denominator `N`.
    pub variance: f64,
    pub acf: Vec<f64>,
    /// `1.96 / sqrt(effective_t)`.
    pub critical_value: f64,
    pub effective_t: usize,
}

pub fn residual_summary(
    residuals: &[f64],
    max_lag: usize,
    effective_t: usize,
) -> Result<ResidualSummary> {
    if residuals.is_empty() {
        return Err(Error::usage("no residuals to summarize"));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let variance = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(ResidualSummary {
        mean,
        variance,
        acf: acf(residuals, max_lag)?,
        critical_value: 1.96 / (effective_t as f64).sqrt(),
        effective_t,
    })
}

/// Two-sided standard-normal quantile for a pointwise band at `level`.
pub fn z_for_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::usage(format!("level must lie in (0, 1), got {level}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

/// Inverse of the negative log-likelihood Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    matrix: DMatrix<f64>,
    ridge: Option<f64>,
}

impl Covariance {
    /// Inverts `hessian` by Cholesky. With `allow_ridge`, a matrix that is
    /// not positive definite is retried as `H + eps I` with
    /// `eps = 1e-8 * trace(H) / k`.
    pub fn from_hessian(hessian: &[Vec<f64>], allow_ridge: bool) -> Result<Self> {
        let k = hessian.len();
        if hessian.iter().any(|row| row.len() != k) {
            return Err(Error::Shape {
                what: "Hessian columns",
                expected: k,
                got: hessian.iter().map(Vec::len).find(|&l| l != k).unwrap_or(k),
            });
        }
        let h = DMatrix::from_fn(k, k, |i, j| hessian[i][j]);
        if let Some(chol) = h.clone().cholesky() {
            return Ok(Covariance {
                matrix: chol.inverse(),
                ridge: None,
            });
        }
        if !allow_ridge {
            return Err(Error::Inference(
                "Hessian is singular or indefinite; retry with the ridge fallback".into(),
            ));
        }
        let eps = 1e-8 * h.trace().abs() / k as f64;
        let ridged = h + DMatrix::identity(k, k) * eps;
        match ridged.cholesky() {
            Some(chol) if eps > 0.0 => Ok(Covariance {
                matrix: chol.inverse(),
                ridge: Some(eps),
            }),
            _ => Err(Error::Inference(format!(
                "Hessian is not positive definite even with ridge {eps:e}"
            ))),
        }
    }

    pub fn from_fit(fit: &FitResult, allow_ridge: bool) -> Result<Self> {
        Self::from_hessian(&fit.hessian, allow_ridge)
    }

    /// Ridge added to the Hessian, if the fallback was used.
    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `g^T H^{-1} g`.
    pub fn quadratic_form(&self, g: &[f64]) -> f64 {
        let g = DVector::from_column_slice(g);
        (g.transpose() * &self.matrix * &g)[(0, 0)]
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.matrix[(i, i)]
    }
}

/// Network input on the model scale for a raw input vector, after domain
/// checks on each slot.
fn scaled_input(fit: &FitResult, raw: &[f64]) -> Result<Vec<f64>> {
    let spec = &fit.spec;
    if raw.len() != spec.input_dim() {
        return Err(Error::Shape {
            what: "input vector",
            expected: spec.input_dim(),
            got: raw.len(),
        });
    }
    let names = spec.input_names();
    let mut x = Vec::with_capacity(raw.len());
    for (j, &v) in raw.iter().enumerate() {
        let ok = if !v.is_finite() {
            false
        } else if j == 0 {
            v == 1.0
        } else if j <= spec.p {
            v >= 0.0 && spec.family.bound().map_or(true, |n| v <= n as f64)
        } else if j <= spec.p + spec.q {
            if spec.family.is_bounded() {
                (0.0..=1.0).contains(&v)
            } else {
                v >= 0.0
            }
        } else {
            true
        };
        if !ok {
            return Err(Error::domain(format!("value {v} invalid for input '{}'", names[j])));
        }
        x.push(spec.input_affine(j).apply(v));
    }
    Ok(x)
}

/// Conditional mean parameter (rate or success probability) at a raw input.
pub fn mean_parameter(fit: &FitResult, raw: &[f64]) -> Result<f64> {
    let net = fit.spec.network()?;
    let x = scaled_input(fit, raw)?;
    let out = net.forward(&fit.weights, &x)?.output;
    Ok(fit.spec.family.clamp_mean_param(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// Predicted conditional mean `E[y_t | x]`.
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    pub variance: f64,
    /// Conditional mean parameter (equals `mean` for unbounded families).
    pub mean_parameter: f64,
}

/// Delta-method band for the conditional mean at a raw input, using a
/// precomputed covariance.
pub fn ci_band_with(
    fit: &FitResult,
    covariance: &Covariance,
    raw: &[f64],
    level: f64,
) -> Result<Band> {
    let z = z_for_level(level)?;
    band_at(fit, &fit.spec.network()?, covariance, &fit.distribution()?, raw, z)
}

/// Delta-method band for the conditional mean at a raw input. Fails with an
/// inference error when the Hessian is not positive definite.
pub fn ci_band(fit: &FitResult, raw: &[f64], level: f64) -> Result<Band> {
    ci_band_with(fit, &Covariance::from_fit(fit, false)?, raw, level)
}

fn band_at(
    fit: &FitResult,
    net: &Network,
    cov: &Covariance,
    dist: &CountDistribution,
    raw: &[f64],
    z: f64,
) -> Result<Band> {
    if cov.dim() != fit.k_params {
        return Err(Error::Shape {
            what: "covariance",
            expected: fit.k_params,
            got: cov.dim(),
        });
    }
    let x = scaled_input(fit, raw)?;
    let state = net.forward(&fit.weights, &x)?;
    let theta = fit.spec.family.clamp_mean_param(state.output);
    let (mean, _) = dist.moments(theta)?;
    let (dmean_dtheta, dmean_daux) = match *dist {
        CountDistribution::Poisson | CountDistribution::GeneralizedPoisson { .. } => (1.0, 0.0),
        CountDistribution::Binomial { n } => (n as f64, 0.0),
        CountDistribution::ZeroInflatedBinomial { n, omega } => {
            (n as f64 * (1.0 - omega), -(n as f64) * theta)
        }
    };
    let mut grad = net.backward(&fit.weights, &x, &state, dmean_dtheta)?;
    if fit.aux.is_some() {
        grad.push(dmean_daux);
    }
    let variance = cov.quadratic_form(&grad).max(0.0);
    let half = z * variance.sqrt();
    Ok(Band {
        mean,
        low: mean - half,
        high: mean + half,
        variance,
        mean_parameter: theta,
    })
}

impl FitResult {
    pub fn distribution(&self) -> Result<CountDistribution> {
        self.spec.distribution(self.aux)
    }
}

/// Raw input vector with every slot at its average over the fitted sample
/// (`t >= condition_on`), lagged means taken from the filtered path.
pub fn mean_context(series: &CountSeries, fit: &FitResult) -> Result<Vec<f64>> {
    let ll = LogLikelihood::new(&fit.spec, series)?;
    let out = ll.filter(&fit.weights)?;
    let skip = fit.spec.condition_on - out.start;
    let j_dim = fit.spec.input_dim();
    let mut sums = vec![0.0; j_dim];
    let mut n = 0usize;
    for x in out.inputs().skip(skip) {
        for (s, v) in sums.iter_mut().zip(x) {
            *s += v;
        }
        n += 1;
    }
    Ok(sums
        .iter()
        .enumerate()
        .map(|(j, s)| {
            if j == 0 {
                1.0
            } else {
                fit.spec.input_affine(j).invert(s / n as f64)
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub varying_input: String,
    pub grid: Vec<f64>,
    /// Raw input vector; the varying slot holds the first grid value.
    pub context: Vec<f64>,
    pub predicted_mean: Vec<f64>,
    /// Success probability along the grid, for bounded families.
    pub success_probability: Option<Vec<f64>>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub level: f64,
    /// Ridge added to the Hessian when the fallback was needed.
    pub ridge: Option<f64>,
}

impl EffectCurve {
    /// Delimited table with columns `grid,mean,low,high` (plus `prob` for
    /// bounded families).
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("grid,mean,low,high");
        if self.success_probability.is_some() {
            out.push_str(",prob");
        }
        out.push('\n');
        for i in 0..self.grid.len() {
            let _ = write!(
                out,
                "{},{},{},{}",
                self.grid[i], self.predicted_mean[i], self.ci_low[i], self.ci_high[i]
            );
            if let Some(p) = &self.success_probability {
                let _ = write!(out, ",{}", p[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Predicted conditional mean as input `varying` moves over `grid`, all
/// other inputs fixed at `context`, with pointwise delta-method bands.
pub fn marginal_effect_curve(
    fit: &FitResult,
    varying: &str,
    grid: &[f64],
    context: &[f64],
    level: f64,
    covariance: &Covariance,
) -> Result<EffectCurve> {
    let names = fit.spec.input_names();
    let slot = names
        .iter()
        .position(|n| n == varying)
        .filter(|&j| j > 0)
        .ok_or_else(|| {
            Error::usage(format!(
                "'{varying}' is not a varying model input (inputs: {})",
                names[1..].join(", ")
            ))
        })?;
    if grid.is_empty() {
        return Err(Error::usage("effect grid is empty"));
    }
    if context.len() != names.len() {
        return Err(Error::Shape {
            what: "context",
            expected: names.len(),
            got: context.len(),
        });
    }
    let z = z_for_level(level)?;
    let net = fit.spec.network()?;
    let dist = fit.distribution()?;
    let mut x = context.to_vec();
    let mut bands = Vec::with_capacity(grid.len());
    for &g in grid {
        x[slot] = g;
        bands.push(band_at(fit, &net, covariance, &dist, &x, z)?);
    }
    let mut context = context.to_vec();
    context[slot] = grid[0];
    Ok(EffectCurve {
        varying_input: varying.to_string(),
        grid: grid.to_vec(),
        context,
        predicted_mean: bands.iter().map(|b| b.mean).collect(),
        success_probability: fit
            .spec
            .family
            .is_bounded()
            .then(|| bands.iter().map(|b| b.mean_parameter).collect()),
        ci_low: bands.iter().map(|b| b.low).collect(),
        ci_high: bands.iter().map(|b| b.high).collect(),
        level,
        ridge: covariance.ridge(),
    })
}

/// `P(Y = 0)` at mean parameter `theta`, in closed form.
pub fn zero_probability(dist: &CountDistribution, theta: f64) -> f64 {
    match *dist {
        CountDistribution::Poisson => (-theta).exp(),
        CountDistribution::GeneralizedPoisson { alpha } => (-theta / (1.0 + alpha * theta)).exp(),
        CountDistribution::Binomial { n } => (1.0 - theta).powf(n as f64),
        CountDistribution::ZeroInflatedBinomial { n, omega } => {
            omega + (1.0 - omega) * (1.0 - theta).powf(n as f64)
        }
    }
}

/// `P(Y_t = 0)` when every count lag is zero and the remaining inputs are
/// taken from `context` (raw scale).
pub fn zero_state_probability(fit: &FitResult, context: &[f64]) -> Result<f64> {
    let mut x = context.to_vec();
    if x.len() != fit.spec.input_dim() {
        return Err(Error::Shape {
            what: "input vector",
            expected: fit.spec.input_dim(),
            got: x.len(),
        });
    }
    for v in &mut x[1..=fit.spec.p] {
        *v = 0.0;
    }
    let theta = mean_parameter(fit, &x)?;
    Ok(zero_probability(&fit.distribution()?, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Activation;
    use crate::distributions::Family;
    use crate::model::ModelSpec;
    use crate::network::Response;
    use approx::assert_abs_diff_eq;

    fn fixed_fit(spec: ModelSpec, weights: Vec<f64>, aux: Option<f64>, series: &CountSeries) -> FitResult {
        let mut params = weights;
        params.extend(aux);
        crate::estimation::evaluate(series, &spec, &params).unwrap()
    }

    #[test]
    fn acf_examples() {
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(acf(&alt, 1).unwrap()[0] <= -0.99);
        assert!(matches!(acf(&[2.0; 10], 1), Err(Error::UndefinedAcf(_))));
        assert!(matches!(acf(&[1.0, 2.0], 2), Err(Error::UndefinedAcf(_))));
    }

    #[test]
    fn summary_examples() {
        let s = residual_summary(&[1.0, -1.0, 2.0, 0.5], 2, 137).unwrap();
        assert_abs_diff_eq!(s.critical_value, 0.167, epsilon = 5e-4);
        assert_abs_diff_eq!(s.mean, 0.625, epsilon = 1e-14);
        assert!(matches!(residual_summary(&[0.0; 5], 1, 5), Err(Error::UndefinedAcf(_))));
    }

    #[test]
    fn z_quantiles() {
        assert_abs_diff_eq!(z_for_level(0.90).unwrap(), 1.6449, epsilon = 1e-4);
        assert_abs_diff_eq!(z_for_level(0.95).unwrap(), 1.96, epsilon = 1e-3);
        assert!(z_for_level(1.0).is_err());
    }

    #[test]
    fn residual_example() {
        // constant rate 1 via identity response on the constant input
        let series = CountSeries::new(vec![4, 1, 0, 2]).unwrap();
        let spec = ModelSpec::new(0, 0, Response::degenerate(Activation::Identity), Family::Poisson);
        let fit = fixed_fit(spec, vec![1.0], None, &series);
        let r = pearson_residuals(&series, &fit).unwrap();
        assert_eq!(r, vec![3.0, 0.0, -1.0, 1.0]);
    }

    #[test]
    fn one_parameter_band_matches_fisher_information() {
        let y = vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3];
        let series = CountSeries::new(y).unwrap();
        let spec = ModelSpec::new(0, 0, Response::degenerate(Activation::Identity), Family::Poisson);
        let lambda = series.mean();
        let fit = fixed_fit(spec, vec![lambda], None, &series);
        let band = ci_band(&fit, &[1.0], 0.9).unwrap();
        let half = 1.6448536269514722 * (lambda / 10.0).sqrt();
        assert_abs_diff_eq!(band.mean, lambda, epsilon = 1e-12);
        assert_abs_diff_eq!(band.high - band.mean, half, epsilon = 1e-6);
        assert_abs_diff_eq!(band.mean - band.low, half, epsilon = 1e-6);
    }

    #[test]
    fn singular_hessian_needs_ridge() {
        let h = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(Covariance::from_hessian(&h, false), Err(Error::Inference(_))));
        let c = Covariance::from_hessian(&h, true).unwrap();
        assert!(c.ridge().unwrap() > 0.0);
    }

    #[test]
    fn identity_curve_is_affine() {
        let y: Vec<u64> = (0..80).map(|i| (i * 5 % 7) as u64).collect();
        let series = CountSeries::new(y).unwrap();
        let spec = ModelSpec::new(1, 0, Response::degenerate(Activation::Identity), Family::Poisson);
        let beta = vec![1.2, 0.4];
        let fit = fixed_fit(spec, beta.clone(), None, &series);
        let cov = Covariance::from_fit(&fit, true).unwrap();
        let grid: Vec<f64> = (0..10).map(f64::from).collect();
        let curve = marginal_effect_curve(&fit, "y[t-1]", &grid, &[1.0, 0.0], 0.9, &cov).unwrap();
        for (g, m) in grid.iter().zip(&curve.predicted_mean) {
            assert_abs_diff_eq!(*m, beta[0] + beta[1] * g, epsilon = 1e-12);
        }
        for i in 0..grid.len() {
            assert!(curve.ci_low[i] <= curve.predicted_mean[i]);
            assert!(curve.predicted_mean[i] <= curve.ci_high[i]);
        }
        assert!(marginal_effect_curve(&fit, "const", &grid, &[1.0, 0.0], 0.9, &cov).is_err());
        assert!(marginal_effect_curve(&fit, "y[t-1]", &[-1.0], &[1.0, 0.0], 0.9, &cov).is_err());
    }

    #[test]
    fn zero_state_examples() {
        let series = CountSeries::new(vec![0, 1, 0, 2, 1]).unwrap();
        let spec = ModelSpec::new(1, 0, Response::degenerate(Activation::Identity), Family::Poisson);
        let fit = fixed_fit(spec, vec![std::f64::consts::LN_2, 0.3], None, &series);
        let p0 = zero_state_probability(&fit, &[1.0, 7.0]).unwrap();
        assert_abs_diff_eq!(p0, 0.5, epsilon = 1e-15);

        let zib = CountDistribution::ZeroInflatedBinomial { n: 10, omega: 0.3 };
        assert_abs_diff_eq!(zero_probability(&zib, 1e-12), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mean_context_averages_inputs() {
        let series = CountSeries::new(vec![2, 4, 6, 8]).unwrap();
        let spec = ModelSpec::new(1, 0, Response::degenerate(Activation::Softplus), Family::Poisson);
        let fit = fixed_fit(spec, vec![0.5, 0.1], None, &series);
        assert_eq!(mean_context(&series, &fit).unwrap(), vec![1.0, 4.0]);
    }
}

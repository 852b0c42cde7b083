//! Conditional count distributions.
//!
//! Each family is parameterized by its *mean parameter*: the Poisson and
//! generalized Poisson rate `lambda`, or the binomial success probability
//! `p`. The generalized Poisson dispersion `alpha` and the zero-inflation
//! weight `omega` are auxiliary parameters estimated alongside the response.
//!
//! The zero-inflated binomial puts the recursion on the success probability
//! of the binomial component; `omega` is a constant mixture weight.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior margin applied to response outputs during filtering.
pub const DOMAIN_MARGIN: f64 = 1e-10;

const LOG_FACTORIAL_TABLE: usize = 10_000;
const GP_TAIL_MASS: f64 = 1e-12;

/// Family kind as stored in a model specification. Auxiliary parameter
/// values live in the parameter vector, not here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Poisson,
    GeneralizedPoisson,
    Binomial { n: u64 },
    ZeroInflatedBinomial { n: u64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Poisson => "Poisson",
            Family::GeneralizedPoisson => "gen. Poisson",
            Family::Binomial { .. } => "binomial",
            Family::ZeroInflatedBinomial { .. } => "ZIB",
        }
    }

    pub fn bound(&self) -> Option<u64> {
        match *self {
            Family::Binomial { n } | Family::ZeroInflatedBinomial { n } => Some(n),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bound().is_some()
    }

    pub fn has_aux(&self) -> bool {
        matches!(
            self,
            Family::GeneralizedPoisson | Family::ZeroInflatedBinomial { .. }
        )
    }

    pub fn aux_name(&self) -> Option<&'static str> {
        match self {
            Family::GeneralizedPoisson => Some("alpha"),
            Family::ZeroInflatedBinomial { .. } => Some("omega"),
            _ => None,
        }
    }

    /// Instantiate the distribution with its auxiliary parameter.
    pub fn with_aux(&self, aux: Option<f64>) -> Result<CountDistribution> {
        let dist = match (*self, aux) {
            (Family::Poisson, None) => CountDistribution::Poisson,
            (Family::Binomial { n }, None) => CountDistribution::Binomial { n },
            (Family::GeneralizedPoisson, Some(alpha)) => {
                CountDistribution::GeneralizedPoisson { alpha }
            }
            (Family::ZeroInflatedBinomial { n }, Some(omega)) => {
                CountDistribution::ZeroInflatedBinomial { n, omega }
            }
            (family, aux) => {
                return Err(Error::usage(format!(
                    "{} family {} an auxiliary parameter",
                    family.name(),
                    if aux.is_some() { "does not take" } else { "requires" }
                )))
            }
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Clamp a raw response output into the interior of the parameter domain.
    #[inline]
    pub fn clamp_mean_param(&self, value: f64) -> f64 {
        if self.is_bounded() {
            value.clamp(DOMAIN_MARGIN, 1.0 - DOMAIN_MARGIN)
        } else {
            value.max(DOMAIN_MARGIN)
        }
    }
}

/// A fully parameterized conditional distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CountDistribution {
    Poisson,
    GeneralizedPoisson { alpha: f64 },
    Binomial { n: u64 },
    ZeroInflatedBinomial { n: u64, omega: f64 },
}

impl CountDistribution {
    pub fn family(&self) -> Family {
        match *self {
            CountDistribution::Poisson => Family::Poisson,
            CountDistribution::GeneralizedPoisson { .. } => Family::GeneralizedPoisson,
            CountDistribution::Binomial { n } => Family::Binomial { n },
            CountDistribution::ZeroInflatedBinomial { n, .. } => {
                Family::ZeroInflatedBinomial { n }
            }
        }
    }

    pub fn aux(&self) -> Option<f64> {
        match *self {
            CountDistribution::GeneralizedPoisson { alpha } => Some(alpha),
            CountDistribution::ZeroInflatedBinomial { omega, .. } => Some(omega),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CountDistribution::GeneralizedPoisson { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::domain(format!("dispersion alpha must be > 0, got {alpha}")))
            }
            CountDistribution::Binomial { n: 0 } | CountDistribution::ZeroInflatedBinomial { n: 0, .. } => {
                Err(Error::domain("binomial bound n must be positive"))
            }
            CountDistribution::ZeroInflatedBinomial { omega, .. } if !(0.0..1.0).contains(&omega) => {
                Err(Error::domain(format!("inflation omega must lie in [0, 1), got {omega}")))
            }
            _ => Ok(()),
        }
    }

    fn check_param(&self, theta: f64) -> Result<()> {
        let ok = match self {
            CountDistribution::Poisson | CountDistribution::GeneralizedPoisson { .. } => {
                theta > 0.0 && theta.is_finite()
            }
            _ => theta > 0.0 && theta < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "mean parameter {theta} outside the {} domain",
                self.family().name()
            )))
        }
    }

    fn check_support(&self, k: u64) -> Result<()> {
        match self {
            CountDistribution::Binomial { n } | CountDistribution::ZeroInflatedBinomial { n, .. }
                if k > *n =>
            {
                Err(Error::Support {
                    k,
                    support: format!("0..={n}"),
                })
            }
            _ => Ok(()),
        }
    }

    /// Natural log of the probability mass at `k`, constants included.
    pub fn log_pmf(&self, k: u64, theta: f64) -> Result<f64> {
        self.check_param(theta)?;
        self.check_support(k)?;
        Ok(self.log_pmf_unchecked(k, theta))
    }

    pub(crate) fn log_pmf_unchecked(&self, k: u64, theta: f64) -> f64 {
        let kf = k as f64;
        match *self {
            CountDistribution::Poisson => kf * theta.ln() - theta - ln_factorial(k),
            CountDistribution::GeneralizedPoisson { alpha } => {
                let denom = 1.0 + alpha * theta;
                let a = 1.0 + alpha * kf;
                let lead = if k == 0 { 0.0 } else { kf * (theta / denom).ln() };
                lead + (kf - 1.0) * a.ln() - ln_factorial(k) - theta * a / denom
            }
            CountDistribution::Binomial { n } => binomial_log_pmf(n, k, theta),
            CountDistribution::ZeroInflatedBinomial { n, omega } => {
                if omega == 0.0 {
                    return binomial_log_pmf(n, k, theta);
                }
                let binom = (-omega).ln_1p() + binomial_log_pmf(n, k, theta);
                if k == 0 {
                    log_sum_exp(omega.ln(), binom)
                } else {
                    binom
                }
            }
        }
    }

    /// Conditional mean and variance at mean parameter `theta`.
    pub fn moments(&self, theta: f64) -> Result<(f64, f64)> {
        self.check_param(theta)?;
        Ok(self.moments_unchecked(theta))
    }

    pub(crate) fn moments_unchecked(&self, theta: f64) -> (f64, f64) {
        match *self {
            CountDistribution::Poisson => (theta, theta),
            CountDistribution::GeneralizedPoisson { alpha } => {
                let s = 1.0 + alpha * theta;
                (theta, theta * s * s)
            }
            CountDistribution::Binomial { n } => {
                let n = n as f64;
                (n * theta, n * theta * (1.0 - theta))
            }
            CountDistribution::ZeroInflatedBinomial { n, omega } => {
                let n = n as f64;
                let pi = (1.0 - omega) * theta;
                let var = n * pi * (1.0 - pi) + n * (n - 1.0) * omega / (1.0 - omega) * pi * pi;
                (n * pi, var)
            }
        }
    }

    /// Derivative of the log-pmf with respect to the mean parameter.
    pub fn score_wrt_mean(&self, k: u64, theta: f64) -> Result<f64> {
        self.check_param(theta)?;
        self.check_support(k)?;
        Ok(self.score_mean_unchecked(k, theta))
    }

    pub(crate) fn score_mean_unchecked(&self, k: u64, theta: f64) -> f64 {
        let kf = k as f64;
        match *self {
            CountDistribution::Poisson => kf / theta - 1.0,
            CountDistribution::GeneralizedPoisson { alpha } => {
                let s = 1.0 + alpha * theta;
                kf / theta - kf * alpha / s - (1.0 + alpha * kf) / (s * s)
            }
            CountDistribution::Binomial { n } => binomial_score(n, k, theta),
            CountDistribution::ZeroInflatedBinomial { n, omega } => {
                if k > 0 || omega == 0.0 {
                    binomial_score(n, k, theta)
                } else {
                    // weight of the binomial component in P(X = 0)
                    let w = binomial_zero_weight(n, theta, omega);
                    -w * n as f64 / (1.0 - theta)
                }
            }
        }
    }

    /// Derivative of the log-pmf with respect to `alpha` (generalized
    /// Poisson) or `omega` (zero-inflated binomial).
    pub fn score_wrt_aux(&self, k: u64, theta: f64) -> Result<f64> {
        match self {
            CountDistribution::Poisson => {
                return Err(Error::UnsupportedFamily { family: "Poisson" })
            }
            CountDistribution::Binomial { .. } => {
                return Err(Error::UnsupportedFamily { family: "binomial" })
            }
            _ => {}
        }
        self.check_param(theta)?;
        self.check_support(k)?;
        Ok(self.score_aux_unchecked(k, theta))
    }

    pub(crate) fn score_aux_unchecked(&self, k: u64, theta: f64) -> f64 {
        let kf = k as f64;
        match *self {
            CountDistribution::GeneralizedPoisson { alpha } => {
                let s = 1.0 + alpha * theta;
                -kf * theta / s + kf * (kf - 1.0) / (1.0 + alpha * kf)
                    - theta * (kf - theta) / (s * s)
            }
            CountDistribution::ZeroInflatedBinomial { n, omega } => {
                if k > 0 {
                    -1.0 / (1.0 - omega)
                } else {
                    let b0 = (n as f64 * (-theta).ln_1p()).exp();
                    (1.0 - b0) / (omega + (1.0 - omega) * b0)
                }
            }
            _ => 0.0,
        }
    }

    /// Draw one count.
    ///
    /// Poisson and binomial draws use `rand_distr`; the generalized Poisson
    /// is sampled by inversion of its cumulative pmf, stopping once the
    /// accumulated mass reaches `1 - 1e-12`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<u64> {
        self.check_param(theta)?;
        let draw = match *self {
            CountDistribution::Poisson => sample_poisson(theta, rng)?,
            CountDistribution::GeneralizedPoisson { .. } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut k = 0u64;
                loop {
                    cum += self.log_pmf_unchecked(k, theta).exp();
                    if cum >= u || cum >= 1.0 - GP_TAIL_MASS {
                        break k;
                    }
                    k += 1;
                }
            }
            CountDistribution::Binomial { n } => sample_binomial(n, theta, rng)?,
            CountDistribution::ZeroInflatedBinomial { n, omega } => {
                if rng.random::<f64>() < omega {
                    0
                } else {
                    sample_binomial(n, theta, rng)?
                }
            }
        };
        Ok(draw)
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    let dist = Poisson::new(lambda).map_err(|e| Error::domain(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

fn sample_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    let dist = Binomial::new(n, p).map_err(|e| Error::domain(e.to_string()))?;
    Ok(dist.sample(rng))
}

fn binomial_log_pmf(n: u64, k: u64, p: f64) -> f64 {
    let kf = k as f64;
    let nk = (n - k) as f64;
    ln_choose(n, k) + kf * p.ln() + nk * (-p).ln_1p()
}

fn binomial_score(n: u64, k: u64, p: f64) -> f64 {
    k as f64 / p - (n - k) as f64 / (1.0 - p)
}

/// `(1-omega)(1-p)^n / (omega + (1-omega)(1-p)^n)`.
fn binomial_zero_weight(n: u64, p: f64, omega: f64) -> f64 {
    let b = (1.0 - omega) * (n as f64 * (-p).ln_1p()).exp();
    b / (omega + b)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_TABLE + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=LOG_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln k!`, tabulated up to 10^4 and from `ln_gamma(k + 1)` beyond.
pub fn ln_factorial(k: u64) -> f64 {
    match log_factorial_table().get(k as usize) {
        Some(v) => *v,
        None => statrs::function::gamma::ln_gamma(k as f64 + 1.0),
    }
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gp(alpha: f64) -> CountDistribution {
        CountDistribution::GeneralizedPoisson { alpha }
    }

    fn zib(n: u64, omega: f64) -> CountDistribution {
        CountDistribution::ZeroInflatedBinomial { n, omega }
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6 * (1.0 + x.abs());
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn log_pmf_examples() {
        let pois = CountDistribution::Poisson;
        assert_abs_diff_eq!(pois.log_pmf(0, 1.0).unwrap(), -1.0, epsilon = 1e-15);

        for (lambda, alpha) in [(0.5, 0.1), (2.0, 0.25), (7.0, 1.3)] {
            let expect = -lambda / (1.0 + alpha * lambda);
            assert_abs_diff_eq!(gp(alpha).log_pmf(0, lambda).unwrap(), expect, epsilon = 1e-14);
        }

        let v = zib(10, 0.43).log_pmf(0, 0.3).unwrap();
        let direct = (0.43 + 0.57 * 0.7f64.powi(10)).ln();
        assert_abs_diff_eq!(v, direct, epsilon = 1e-14);
        assert_abs_diff_eq!(v, -0.807210, epsilon = 1e-6);

        // zero-state probability of 0.5 corresponds to lambda = ln 2
        let lambda = -(0.5f64.ln());
        assert_abs_diff_eq!(pois.log_pmf(0, lambda).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn gp_matches_direct_formula() {
        // direct product form of the pmf, independent of the log implementation
        let (lambda, alpha): (f64, f64) = (2.0, 0.13);
        for k in 0..15u64 {
            let kf = k as f64;
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            let p = (lambda / (1.0 + alpha * lambda)).powi(k as i32)
                * (1.0 + alpha * kf).powf(kf - 1.0)
                / fact
                * (-lambda * (1.0 + alpha * kf) / (1.0 + alpha * lambda)).exp();
            assert_abs_diff_eq!(gp(alpha).log_pmf(k, lambda).unwrap().exp(), p, epsilon = 1e-14);
        }
    }

    #[test]
    fn errors() {
        let binom = CountDistribution::Binomial { n: 10 };
        assert!(matches!(binom.log_pmf(11, 0.5), Err(Error::Support { k: 11, .. })));
        assert!(matches!(binom.log_pmf(3, 1.0), Err(Error::Domain(_))));
        assert!(matches!(CountDistribution::Poisson.log_pmf(3, 0.0), Err(Error::Domain(_))));
        assert!(matches!(
            CountDistribution::Poisson.score_wrt_aux(1, 1.0),
            Err(Error::UnsupportedFamily { .. })
        ));
        assert!(matches!(binom.score_wrt_aux(1, 0.5), Err(Error::UnsupportedFamily { .. })));
        assert!(Family::GeneralizedPoisson.with_aux(Some(-0.1)).is_err());
        assert!(Family::GeneralizedPoisson.with_aux(None).is_err());
        assert!(Family::Poisson.with_aux(Some(0.1)).is_err());
        assert!(Family::ZeroInflatedBinomial { n: 10 }.with_aux(Some(1.0)).is_err());
    }

    #[test]
    fn moments_examples() {
        let (m, v) = gp(0.25).moments(1.0).unwrap();
        assert_eq!(m, 1.0);
        assert_abs_diff_eq!(v, 1.5625, epsilon = 1e-15);

        let (bm, bv) = CountDistribution::Binomial { n: 10 }.moments(0.37).unwrap();
        let (zm, zv) = zib(10, 0.0).moments(0.37).unwrap();
        assert_abs_diff_eq!(bm, zm, epsilon = 1e-15);
        assert_abs_diff_eq!(bv, zv, epsilon = 1e-15);
    }

    #[test]
    fn zib_moments_brute_force() {
        let dist = zib(10, 0.43);
        let probs: Vec<f64> = (0..=10).map(|k| dist.log_pmf(k, 0.5).unwrap().exp()).collect();
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let var: f64 = probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum();
        let (m, v) = dist.moments(0.5).unwrap();
        assert_abs_diff_eq!(m, mean, epsilon = 1e-10);
        assert_abs_diff_eq!(v, var, epsilon = 1e-10);
    }

    #[test]
    fn score_examples() {
        assert_eq!(CountDistribution::Poisson.score_wrt_mean(3, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            CountDistribution::Binomial { n: 10 }.score_wrt_mean(4, 0.4).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let d = gp(0.13);
        let oracle = fd(|l| d.log_pmf(3, l).unwrap(), 2.0);
        assert_abs_diff_eq!(d.score_wrt_mean(3, 2.0).unwrap(), oracle, epsilon = 1e-7);

        let z = zib(10, 0.43);
        for k in [1, 5, 10] {
            assert_abs_diff_eq!(z.score_wrt_aux(k, 0.3).unwrap(), -1.0 / 0.57, epsilon = 1e-14);
        }
        let oracle = fd(|w| zib(10, w).log_pmf(0, 0.3).unwrap(), 0.43);
        assert_abs_diff_eq!(z.score_wrt_aux(0, 0.3).unwrap(), oracle, epsilon = 1e-7);
    }

    #[test]
    fn gp_aux_score_near_zero_alpha() {
        for k in [0, 1, 4, 12] {
            for lambda in [0.3, 3.0] {
                let alpha = 1e-4;
                let s = gp(alpha).score_wrt_aux(k, lambda).unwrap();
                let oracle = fd(|a| gp(a).log_pmf(k, lambda).unwrap(), alpha);
                assert!(s.is_finite());
                assert_abs_diff_eq!(s, oracle, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn ln_factorial_past_table() {
        let k = LOG_FACTORIAL_TABLE as u64;
        let below = ln_factorial(k);
        let above = ln_factorial(k + 1);
        assert_abs_diff_eq!(above - below, ((k + 1) as f64).ln(), epsilon = 1e-8);
    }

    #[test]
    fn sample_poisson_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let sum: u64 = (0..n)
            .map(|_| CountDistribution::Poisson.sample(4.0, &mut rng).unwrap())
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 4.0).abs() < 3.0 * (4.0 / n as f64).sqrt());
    }

    #[test]
    fn sample_gp_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = gp(0.25);
        let n = 1_000_000usize;
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(2.0, &mut rng).unwrap() as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // standard error of the sample variance from the brute-force fourth central moment
        let m4: f64 = (0..400)
            .map(|k| (k as f64 - 2.0).powi(4) * dist.log_pmf(k, 2.0).unwrap().exp())
            .sum();
        let se = ((m4 - 4.5 * 4.5) / n as f64).sqrt();
        assert!((var - 4.5).abs() < 3.0 * se, "var {var} se {se}");
    }

    #[test]
    fn sample_zib_degenerate_inflation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eps = 1e-3;
        let dist = zib(10, 1.0 - eps);
        let n = 200_000;
        let zeros = (0..n).filter(|_| dist.sample(0.5, &mut rng).unwrap() == 0).count();
        assert!(zeros as f64 / n as f64 >= 1.0 - 2.0 * eps);
    }

    #[test]
    fn sample_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dist = zib(4, 0.2);
        for _ in 0..10_000 {
            assert!(dist.sample(0.9, &mut rng).unwrap() <= 4);
        }
    }
}

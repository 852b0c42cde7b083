mod common;

use common::{random_case, responses, FAMILIES};
use ningarch::diagnostics::{
    acf, ci_band_with, conditional_moments, marginal_effect_curve, mean_context, mean_parameter,
    pearson_residuals, residual_summary, zero_state_probability, Covariance,
};
use ningarch::{evaluate, simulate, Activation, Family, ModelSpec, Response, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn residuals_reconstruct_counts() {
    for family in FAMILIES {
        let (spec, params, series) = random_case(family, responses(family)[0], (1, 1), 200, 21);
        let fit = evaluate(&series, &spec, &params).unwrap();
        let r = pearson_residuals(&series, &fit).unwrap();
        let moments = conditional_moments(&series, &fit).unwrap();
        for (i, ((mu, v), r)) in moments.iter().zip(&r).enumerate() {
            let y = mu + r * v.sqrt();
            assert!((y - series.y[spec.p + i] as f64).abs() < 1e-10);
        }
    }
}

#[test]
fn residuals_under_true_model_are_standardized() {
    let spec = ModelSpec::new(1, 1, Response::degenerate(Activation::Softplus), Family::Poisson);
    let params = vec![0.4, 0.3, 0.4];
    let series = simulate(&SimConfig::new(spec.clone(), params.clone(), 5000, 8)).unwrap();
    let fit = evaluate(&series, &spec, &params).unwrap();
    let r = pearson_residuals(&series, &fit).unwrap();
    let s = residual_summary(&r, 2, fit.effective_t).unwrap();
    assert!(s.mean.abs() < 0.05, "mean {}", s.mean);
    assert!((s.variance - 1.0).abs() < 0.05, "variance {}", s.variance);
    let arith = r.iter().sum::<f64>() / r.len() as f64;
    assert!((s.mean - arith).abs() < 1e-14);
}

#[test]
fn white_noise_acf_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    assert!(acf(&v, 1).unwrap()[0].abs() < 0.03);
    assert!(acf(&v, 5).unwrap().iter().all(|a| (-1.0..=1.0).contains(a)));
}

#[test]
fn wider_level_contains_narrower_band() {
    for family in FAMILIES {
        let (spec, params, series) = random_case(family, responses(family)[1], (1, 0), 300, 31);
        let fit = evaluate(&series, &spec, &params).unwrap();
        let cov = Covariance::from_fit(&fit, true).unwrap();
        let ctx = mean_context(&series, &fit).unwrap();
        let b90 = ci_band_with(&fit, &cov, &ctx, 0.90).unwrap();
        let b95 = ci_band_with(&fit, &cov, &ctx, 0.95).unwrap();
        assert!(b95.low <= b90.low && b90.high <= b95.high);
        assert!(b90.variance >= 0.0);
        assert!(b90.low <= b90.mean && b90.mean <= b90.high);
    }
}

#[test]
fn softplus_curve_is_nearly_linear_far_from_zero() {
    let spec = ModelSpec::new(1, 0, Response::degenerate(Activation::Softplus), Family::Poisson);
    let params = vec![2.0, 0.5];
    let series = simulate(&SimConfig::new(spec.clone(), params.clone(), 500, 2)).unwrap();
    let fit = evaluate(&series, &spec, &params).unwrap();
    let cov = Covariance::from_fit(&fit, true).unwrap();
    let grid: Vec<f64> = (0..=20).map(f64::from).collect();
    let curve = marginal_effect_curve(&fit, "y[t-1]", &grid, &[1.0, 0.0], 0.9, &cov).unwrap();
    for w in curve.predicted_mean.windows(2) {
        let slope = w[1] - w[0];
        assert!(slope <= 0.5 && slope >= 0.5 / 1.12, "slope {slope}");
    }
}

#[test]
fn zero_state_probability_in_unit_interval() {
    for family in FAMILIES {
        for response in responses(family) {
            let (spec, params, series) = random_case(family, response, (2, 1), 200, 41);
            let fit = evaluate(&series, &spec, &params).unwrap();
            let mut ctx = mean_context(&series, &fit).unwrap();
            let p0 = zero_state_probability(&fit, &ctx).unwrap();
            assert!(p0 > 0.0 && p0 <= 1.0);
            ctx[1] = 0.0;
            ctx[2] = 0.0;
            let theta = mean_parameter(&fit, &ctx).unwrap();
            let direct = fit.distribution().unwrap().log_pmf(0, theta).unwrap().exp();
            assert!((p0 - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn bounded_curve_reports_count_scale_mean() {
    let family = Family::Binomial { n: 10 };
    let (spec, params, series) = random_case(family, responses(family)[1], (1, 0), 200, 51);
    let fit = evaluate(&series, &spec, &params).unwrap();
    let cov = Covariance::from_fit(&fit, true).unwrap();
    let curve = marginal_effect_curve(&fit, "y[t-1]", &[0.0, 5.0, 10.0], &[1.0, 0.0], 0.9, &cov).unwrap();
    let probs = curve.success_probability.as_ref().unwrap();
    for (m, p) in curve.predicted_mean.iter().zip(probs) {
        assert!((m - 10.0 * p).abs() < 1e-12);
    }
    assert!(curve.to_csv().starts_with("grid,mean,low,high,prob\n"));
    assert!(marginal_effect_curve(&fit, "y[t-1]", &[11.0], &[1.0, 0.0], 0.9, &cov).is_err());
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ningarch::diagnostics::{
    ci_band_with, marginal_effect_curve, mean_context, pearson_residuals, residual_summary,
    zero_state_probability, Covariance,
};
use ningarch::estimation::{select_hidden, select_order};
use ningarch::series::{read_series, write_series};
use ningarch::simulation::simulate_replications;
use ningarch::{
    Activation, CountSeries, CovariateScaling, Family, FitOptions, FitResult, IngestOptions,
    ModelSpec, Response, SampleAlignment, SimConfig,
};

use crate::args::{
    AlignmentArg, DataArgs, DiagnoseArgs, FamilyArg, FitArgs, FitOptionArgs, ModelArgs, OutputArg,
    ReportArgs, ResponseArg, ScaleArg, SelectHiddenArgs, SelectOrderArgs, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::report;

/// Files to write (name, contents), text for stdout and the input files read.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub stdout: String,
    pub inputs: Vec<PathBuf>,
}

fn load_series(data: &DataArgs) -> CliResult<CountSeries> {
    let opts = IngestOptions {
        count_column: data.count_col.clone(),
        bound: data.bound,
        covariates: data.covariates.clone(),
    };
    read_series(&data.data, &opts).map_err(|e| CliError::reading(&data.data, e))
}

fn load_fit(path: &Path) -> CliResult<FitResult> {
    FitResult::load(path).map_err(|e| CliError::reading(path, e))
}

fn family(arg: FamilyArg, bound: Option<u64>) -> CliResult<Family> {
    let need_bound = || {
        bound.ok_or_else(|| {
            CliError::usage("binomial families need --bound (or a '# bound=n' line in the data file)")
        })
    };
    Ok(match arg {
        FamilyArg::Poisson => Family::Poisson,
        FamilyArg::Genpois => Family::GeneralizedPoisson,
        FamilyArg::Binomial => Family::Binomial { n: need_bound()? },
        FamilyArg::Zib => Family::ZeroInflatedBinomial { n: need_bound()? },
    })
}

fn output_activation(arg: Option<OutputArg>, family: Family) -> Activation {
    match arg {
        Some(OutputArg::Softplus) => Activation::Softplus,
        Some(OutputArg::Logistic) => Activation::Logistic,
        Some(OutputArg::Identity) => Activation::Identity,
        None if family.is_bounded() => Activation::Logistic,
        None => Activation::Softplus,
    }
}

fn single_hidden(model: &ModelArgs) -> CliResult<usize> {
    match model.hidden.as_ref().map(|h| h.0.as_slice()) {
        Some([h]) => Ok(*h),
        Some(_) => Err(CliError::usage("this command takes a single --hidden value")),
        None => Err(CliError::usage("a neural response needs --hidden")),
    }
}

fn response(model: &ModelArgs, family: Family) -> CliResult<Response> {
    let out = output_activation(model.output, family);
    Ok(match model.response {
        ResponseArg::Degenerate => Response::degenerate(out),
        ResponseArg::Neural => Response::neural(single_hidden(model)?, out),
    })
}

/// Model specification from flags, without covariates.
fn base_spec(model: &ModelArgs, bound: Option<u64>) -> CliResult<ModelSpec> {
    let family = family(model.family, bound)?;
    Ok(ModelSpec::new(model.p, model.q, response(model, family)?, family))
}

fn spec_for(model: &ModelArgs, data: &DataArgs, series: &CountSeries) -> CliResult<ModelSpec> {
    let spec = base_spec(model, series.bound)?;
    let names: Vec<&str> = data.covariates.iter().map(String::as_str).collect();
    let scaling = match data.scale_covariates {
        ScaleArg::Unit => CovariateScaling::UnitInterval,
        ScaleArg::Raw => CovariateScaling::Raw,
    };
    Ok(spec.with_covariates(series, &names, scaling)?)
}

fn fit_options(args: &FitOptionArgs) -> CliResult<FitOptions> {
    if args.restarts == 0 || args.max_iter == 0 {
        return Err(CliError::usage("--restarts and --max-iter must be positive"));
    }
    Ok(FitOptions {
        restarts: args.restarts,
        seed: args.seed,
        max_iterations: args.max_iter,
        ..FitOptions::default()
    })
}

fn parse_orders(args: &SelectOrderArgs) -> CliResult<Vec<(usize, usize)>> {
    if let Some(max) = args.max_order {
        let orders: Vec<_> = (1..=max)
            .flat_map(|p| (0..=max - p).map(move |q| (p, q)))
            .collect();
        if orders.is_empty() {
            return Err(CliError::usage("--max-order must be at least 1"));
        }
        return Ok(orders);
    }
    if args.orders.is_empty() {
        return Ok(vec![(1, 0), (2, 0), (1, 1)]);
    }
    args.orders
        .iter()
        .map(|o| {
            let (p, q) = o
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("order '{o}' is not of the form p:q")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::usage(format!("order '{o}' is not of the form p:q")))
            };
            Ok((parse(p)?, parse(q)?))
        })
        .collect()
}

pub fn select_order_cmd(args: &SelectOrderArgs) -> CliResult<Artifacts> {
    let series = load_series(&args.data)?;
    let template = spec_for(&args.model, &args.data, &series)?;
    let orders = parse_orders(args)?;
    let alignment = match args.alignment {
        AlignmentArg::Common => SampleAlignment::Common,
        AlignmentArg::Own => SampleAlignment::Own,
    };
    let table = select_order(&series, &template, &orders, alignment, &fit_options(&args.fit)?)?;
    let text = report::order_table(&table, &template);
    let mut files = vec![
        ("order_table.txt".to_string(), text.clone()),
        ("order_table.json".to_string(), serde_json::to_string_pretty(&table)?),
    ];
    if let Some(w) = &table.winner {
        files.push(("fit.json".into(), w.to_json()?));
    }
    Ok(Artifacts {
        files,
        stdout: text,
        inputs: vec![args.data.data.clone()],
    })
}

pub fn select_hidden_cmd(args: &SelectHiddenArgs) -> CliResult<Artifacts> {
    let series = load_series(&args.data)?;
    let sizes = args
        .model
        .hidden
        .as_ref()
        .ok_or_else(|| CliError::usage("select-hidden needs --hidden (e.g. 1-7)"))?
        .0
        .clone();
    let mut model = args.model.clone();
    model.response = ResponseArg::Degenerate;
    let template = spec_for(&model, &args.data, &series)?;
    let template = template.clone().with_response(Response::neural(sizes[0], template.response.output()));
    let table = select_hidden(&series, &template, &sizes, args.allow_over_cap, &fit_options(&args.fit)?)?;
    let text = report::hidden_table(&table, &template);
    Ok(Artifacts {
        files: vec![
            ("hidden_table.txt".into(), text.clone()),
            ("hidden_table.json".into(), serde_json::to_string_pretty(&table)?),
        ],
        stdout: text,
        inputs: vec![args.data.data.clone()],
    })
}

pub fn fit_cmd(args: &FitArgs) -> CliResult<Artifacts> {
    let series = load_series(&args.data)?;
    let spec = spec_for(&args.model, &args.data, &series)?;
    let fit = ningarch::fit(&series, &spec, &fit_options(&args.fit)?)?;
    let text = report::fit_report(&fit);
    Ok(Artifacts {
        files: vec![("fit.json".into(), fit.to_json()?), ("report.txt".into(), text.clone())],
        stdout: text,
        inputs: vec![args.data.data.clone()],
    })
}

pub fn report_cmd(args: &ReportArgs) -> CliResult<Artifacts> {
    let fit = load_fit(&args.fit)?;
    let text = report::fit_report(&fit);
    Ok(Artifacts {
        files: vec![("report.txt".into(), text.clone())],
        stdout: text,
        inputs: vec![args.fit.clone()],
    })
}

/// Settings for [`diagnose`].
#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub max_lag: usize,
    pub level: f64,
    pub effects: Vec<String>,
    /// `(lo, hi, step)`.
    pub grid: Option<(f64, f64, f64)>,
    pub at: Vec<(String, f64)>,
    pub strict: bool,
}

impl DiagnoseOptions {
    pub fn from_args(args: &DiagnoseArgs) -> CliResult<Self> {
        let grid = args.grid.as_deref().map(parse_grid).transpose()?;
        let at = args
            .at
            .iter()
            .map(|a| {
                let (name, value) = a
                    .split_once('=')
                    .ok_or_else(|| CliError::usage(format!("--at '{a}' is not name=value")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("--at '{a}' has a non-numeric value")))?;
                Ok((name.trim().to_string(), value))
            })
            .collect::<CliResult<_>>()?;
        Ok(DiagnoseOptions {
            max_lag: args.max_lag,
            level: args.level,
            effects: args.effects.clone(),
            grid,
            at,
            strict: args.strict,
        })
    }
}

fn parse_grid(s: &str) -> CliResult<(f64, f64, f64)> {
    let bad = || CliError::usage(format!("grid '{s}' is not lo:hi:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    match parts[..] {
        [lo, hi, step] if step > 0.0 && hi >= lo => Ok((lo, hi, step)),
        _ => Err(bad()),
    }
}

fn grid_points((lo, hi, step): (f64, f64, f64)) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Default grid: every count from 0 to the sample maximum for count lags,
/// 21 points over the sample range otherwise.
fn default_grid(series: &CountSeries, fit: &FitResult, slot: usize) -> CliResult<Vec<f64>> {
    let spec = &fit.spec;
    if slot <= spec.p {
        let max = series.y.iter().copied().max().unwrap_or(0);
        return Ok((0..=max).map(|v| v as f64).collect());
    }
    let values: Vec<f64> = if slot <= spec.p + spec.q {
        ningarch::model::filter(spec, &fit.weights, series)?.means
    } else {
        let name = &spec.covariates[slot - 1 - spec.p - spec.q];
        series.covariate(name).map(|c| c.values.clone()).unwrap_or_default()
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(CliError::usage("cannot derive a default grid; pass --grid"));
    }
    Ok((0..=20).map(|i| lo + (hi - lo) * i as f64 / 20.0).collect())
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    s.trim_matches('_').split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

/// Diagnostic files for `fit` on `series`.
pub fn diagnose(series: &CountSeries, fit: &FitResult, opts: &DiagnoseOptions) -> CliResult<Vec<(String, String)>> {
    let residuals = pearson_residuals(series, fit)?;
    let summary = residual_summary(&residuals, opts.max_lag, fit.effective_t)?;
    let mut text = report::residual_table(fit, &summary);

    let names = fit.spec.input_names();
    let mut context = mean_context(series, fit)?;
    for (name, value) in &opts.at {
        let slot = names
            .iter()
            .position(|n| n == name)
            .filter(|&j| j > 0)
            .ok_or_else(|| CliError::usage(format!("--at: '{name}' is not a model input")))?;
        context[slot] = *value;
    }
    let covariance = Covariance::from_fit(fit, !opts.strict)?;
    let band = ci_band_with(fit, &covariance, &context, opts.level)?;
    let p0 = zero_state_probability(fit, &context)?;

    let _ = writeln!(text);
    let _ = writeln!(text, "context (sample means unless overridden):");
    for (name, value) in names.iter().zip(&context).skip(1) {
        let _ = writeln!(text, "  {name:<16} {value:.6}");
    }
    let _ = writeln!(
        text,
        "predicted mean {:.6}, {:.0}% band [{:.6}, {:.6}]",
        band.mean,
        100.0 * opts.level,
        band.low,
        band.high
    );
    let _ = writeln!(text, "P(y_t = 0 | count lags = 0) = {p0:.6}");
    if let Some(eps) = covariance.ridge() {
        let _ = writeln!(text, "note: Hessian not positive definite; ridge {eps:.3e} added");
    }

    let mut files = vec![
        ("residuals.csv".to_string(), residuals.iter().map(|r| format!("{r}\n")).collect::<String>()),
        ("residual_summary.json".to_string(), serde_json::to_string_pretty(&summary)?),
    ];
    for effect in &opts.effects {
        let slot = names
            .iter()
            .position(|n| n == effect)
            .filter(|&j| j > 0)
            .ok_or_else(|| {
                CliError::usage(format!("--effect: '{effect}' is not a model input ({})", names[1..].join(", ")))
            })?;
        let grid = match opts.grid {
            Some(g) => grid_points(g),
            None => default_grid(series, fit, slot)?,
        };
        let curve = marginal_effect_curve(fit, effect, &grid, &context, opts.level, &covariance)?;
        let file = format!("effect_{}.csv", slug(effect));
        let _ = writeln!(text, "marginal effect of {effect}: {file}");
        files.push((file, curve.to_csv()));
    }
    files.insert(0, ("diagnostics.txt".to_string(), text));
    Ok(files)
}

pub fn diagnose_cmd(args: &DiagnoseArgs) -> CliResult<Artifacts> {
    let fit = load_fit(&args.fit)?;
    let opts = IngestOptions {
        count_column: args.count_col.clone(),
        bound: fit.spec.family.bound(),
        covariates: fit.spec.covariates.clone(),
    };
    let series = read_series(&args.data, &opts).map_err(|e| CliError::reading(&args.data, e))?;
    let files = diagnose(&series, &fit, &DiagnoseOptions::from_args(args)?)?;
    Ok(Artifacts {
        stdout: files[0].1.clone(),
        files,
        inputs: vec![args.data.clone(), args.fit.clone()],
    })
}

pub fn simulate_cmd(args: &SimulateArgs) -> CliResult<Artifacts> {
    let mut inputs = Vec::new();
    let (spec, params) = match &args.fit {
        Some(path) => {
            inputs.push(path.clone());
            let fit = load_fit(path)?;
            let params = fit.params();
            (fit.spec, params)
        }
        None => {
            if args.params.is_empty() {
                return Err(CliError::usage("simulate needs --fit or --params"));
            }
            (base_spec(&args.model, args.bound)?, args.params.clone())
        }
    };
    let covariates = if spec.covariates.is_empty() {
        Vec::new()
    } else {
        let path = args.covariate_data.as_ref().ok_or_else(|| {
            CliError::usage(format!(
                "the model uses covariates ({}); pass --covariate-data",
                spec.covariates.join(", ")
            ))
        })?;
        inputs.push(path.clone());
        let opts = IngestOptions {
            count_column: args.count_col.clone(),
            bound: None,
            covariates: spec.covariates.clone(),
        };
        let data = read_series(path, &opts).map_err(|e| CliError::reading(path, e))?;
        data.covariates.into_iter().map(|c| c.values).collect()
    };
    let config = SimConfig::new(spec, params, args.length, args.seed)
        .with_burn_in(args.burn_in)
        .with_covariates(covariates);
    if args.replications == 0 {
        return Err(CliError::usage("--replications must be positive"));
    }
    let series = simulate_replications(&config, args.replications)?;
    let files: Vec<(String, String)> = if series.len() == 1 {
        vec![("series.csv".into(), write_series(&series[0]))]
    } else {
        series
            .iter()
            .enumerate()
            .map(|(r, s)| (format!("series_{:03}.csv", r + 1), write_series(s)))
            .collect()
    };
    let mut stdout = String::new();
    for (name, s) in files.iter().zip(&series).map(|((n, _), s)| (n, s)) {
        let sum = s.summary();
        let _ = writeln!(
            stdout,
            "{name}: T = {}, min {}, max {}, mean {:.4}, zero fraction {:.4}",
            sum.len, sum.min, sum.max, sum.mean, sum.zero_fraction
        );
    }
    Ok(Artifacts {
        files,
        stdout,
        inputs,
    })
}

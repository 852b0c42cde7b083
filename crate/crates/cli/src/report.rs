//! Plain-text tables.

use std::fmt::Write as _;

use ningarch::estimation::{HiddenTable, OrderTable};
use ningarch::{FitResult, ModelSpec, ResidualSummary};

fn covariate_flag(spec: &ModelSpec) -> String {
    if spec.covariates.is_empty() {
        "no".into()
    } else {
        spec.covariates.join("+")
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.decimals$}"))
}

fn rank(v: Option<usize>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

const MODEL_HEADER: &str = "response   cond. distribution  covariates  order";

fn model_columns(spec: &ModelSpec) -> String {
    format!(
        "{:<10} {:<19} {:<11} {:<6}",
        spec.response.label(),
        spec.family.name(),
        covariate_flag(spec),
        format!("({},{})", spec.p, spec.q)
    )
}

pub fn order_table(table: &OrderTable, template: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{MODEL_HEADER}   k  T_eff        AIC        BIC  AIC rank  BIC rank"
    );
    for row in &table.rows {
        let spec = template.clone().with_order(row.p, row.q);
        let _ = write!(
            out,
            "{} {:>3} {:>6} {:>10} {:>10} {:>9} {:>9}",
            model_columns(&spec),
            row.k,
            row.effective_t,
            opt(row.aic, 2),
            opt(row.bic, 2),
            rank(row.aic_rank),
            rank(row.bic_rank),
        );
        if let Some(e) = &row.error {
            let _ = write!(out, "  failed: {e}");
        }
        out.push('\n');
    }
    if let Some(w) = &table.winner {
        let _ = writeln!(
            out,
            "BIC choice ({},{}) refit on T_eff = {}: AIC {:.2}, BIC {:.2}",
            w.spec.p, w.spec.q, w.effective_t, w.aic, w.bic
        );
    }
    out
}

pub fn hidden_table(table: &HiddenTable, template: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "rule-of-thumb cap: H <= floor(0.1 * {} / ({} + 1)) = {}",
        table.effective_t,
        template.input_dim(),
        table.cap
    );
    let _ = writeln!(out, "{MODEL_HEADER}   H   k        AIC        BIC");
    for row in &table.rows {
        let _ = write!(
            out,
            "{} {:>3} {:>3} {:>10} {:>10}",
            model_columns(template),
            row.hidden,
            row.k,
            opt(row.aic, 2),
            opt(row.bic, 2)
        );
        if let Some(e) = &row.error {
            let _ = write!(out, "  failed: {e}");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "minimum AIC at H = {}, minimum BIC at H = {}",
        table.best_by_aic().map_or("-".into(), |h| h.to_string()),
        table.best_by_bic().map_or("-".into(), |h| h.to_string())
    );
    out
}

pub fn fit_report(fit: &FitResult) -> String {
    let mut out = String::new();
    let spec = &fit.spec;
    let _ = writeln!(out, "{MODEL_HEADER}  hidden");
    let _ = writeln!(out, "{} {:>6}", model_columns(spec), spec.response.hidden());
    let _ = writeln!(out);
    let _ = writeln!(out, "log-likelihood  {:.4}", fit.loglik);
    let _ = writeln!(out, "AIC             {:.2}", fit.aic);
    let _ = writeln!(out, "BIC             {:.2}", fit.bic);
    let _ = writeln!(out, "parameters      {}", fit.k_params);
    let _ = writeln!(out, "T_eff           {}", fit.effective_t);
    let converged = fit.restart_log.iter().filter(|r| r.status.converged()).count();
    let _ = writeln!(
        out,
        "restarts        {converged} of {} converged (seed {})",
        fit.restart_log.len(),
        fit.options.seed
    );
    let _ = writeln!(out);
    let se = fit.standard_errors();
    let _ = writeln!(out, "{:<22} {:>12} {:>12}", "parameter", "estimate", "std. error");
    for (i, (name, value)) in fit.layout.iter().zip(fit.params()).enumerate() {
        let err = se.as_ref().map(|s| s[i]);
        let _ = writeln!(out, "{name:<22} {value:>12.6} {:>12}", opt(err, 6));
    }
    if se.is_none() {
        let _ = writeln!(out, "standard errors unavailable: Hessian not positive definite");
    }
    out
}

pub fn residual_table(fit: &FitResult, summary: &ResidualSummary) -> String {
    let mut out = String::new();
    let _ = write!(out, "{MODEL_HEADER}  mean(r_t)   var(r_t)");
    for lag in 1..=summary.acf.len() {
        let _ = write!(out, "  {:>9}", format!("ACF({lag})"));
    }
    out.push('\n');
    let _ = write!(
        out,
        "{} {:>10.3} {:>10.3}",
        model_columns(&fit.spec),
        summary.mean,
        summary.variance
    );
    for a in &summary.acf {
        let _ = write!(out, "  {a:>9.3}");
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "ACF critical value 1.96/sqrt({}) = {:.3}",
        summary.effective_t, summary.critical_value
    );
    out
}

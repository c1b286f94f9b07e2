//! Deterministic JSON reports for fit results.
//!
//! Keys are emitted in sorted order and every floating-point value is
//! rounded to a fixed precision of 1e-10 before serialization, so identical
//! inputs produce byte-identical reports. Non-finite values serialize as
//! `null`.

use crate::fit::{goodness_of_fit, studentize, FitResult};
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;

/// Rounds to the report precision; non-finite maps to `null`.
fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded = (x * 1e10).round() / 1e10;
    serde_json::Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
}

fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

/// One row per scalar parameter: margin, effect, level combination,
/// estimate, standard error, studentized value, constrained flag.
pub fn parameter_rows(result: &FitResult) -> Vec<Value> {
    let scheme = result.model.scheme();
    let names = scheme.variable_names();
    let stud: Vec<Option<f64>> = studentize(result).unwrap_or_default();
    let cov = result.cov_lambda.as_ref();
    result
        .lambda_hat
        .labels
        .iter()
        .enumerate()
        .map(|(i, lab)| {
            let constrained = result.model.is_constrained(&lab.margin, &lab.effect);
            let se = cov.map(|c| c[(i, i)].max(0.0).sqrt());
            json!({
                "margin": lab.margin.label(&names),
                "effect": lab.effect.label(&names),
                "levels": lab.levels,
                "estimate": num(result.lambda_hat.values[i]),
                "se": opt_num(se),
                "studentized": opt_num(stud.get(i).copied().flatten()),
                "constrained": constrained,
            })
        })
        .collect()
}

/// Builds the full report document.
pub fn fit_report(result: &FitResult) -> Value {
    let gof = goodness_of_fit(result).ok();
    let trace: Vec<Value> = result
        .trace
        .iter()
        .map(|it| {
            json!({
                "step": num(it.step),
                "constraint_norm": num(it.constraint_norm),
                "score_norm": num(it.score_norm),
            })
        })
        .collect();
    json!({
        "model": result.model.describe(),
        "statistics": {
            "deviance": num(result.deviance),
            "pearson": num(result.pearson),
            "df": result.df,
            "p_deviance": opt_num(gof.as_ref().and_then(|g| g.p_deviance)),
            "p_pearson": opt_num(gof.as_ref().and_then(|g| g.p_pearson)),
            "loglik": num(result.loglik()),
            "total": num(result.observed.sum()),
        },
        "convergence": {
            "converged": result.converged,
            "iterations": result.iterations,
            "tol_constraint": num(result.settings.tol_constraint),
            "tol_score": num(result.settings.tol_score),
            "trace": trace,
        },
        "parameters": parameter_rows(result),
        "fitted": {
            "counts": result.mu_hat.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "probabilities": result.pi_hat.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        },
        "observed": {
            "counts": result.observed.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        },
    })
}

/// Serializes the report with a trailing newline.
pub fn render(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("serializable report");
    s.push('\n');
    s
}

pub fn write_report(result: &FitResult, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render(&fit_report(result)).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_to_fixed_precision() {
        assert_eq!(num(0.123456789012345), json!(0.1234567890));
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(f64::INFINITY), Value::Null);
    }
}

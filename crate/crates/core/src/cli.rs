//! The `margraph` command-line front end.
//!
//! Four subcommands tie the library together: `independencies` reads the
//! independence structure off a graph, `params` prints a parameterization's
//! margin/effect assignment, `check-od` tests ordered decomposability of a
//! margin sequence, and `fit` runs a constrained maximum-likelihood fit and
//! writes a JSON report.
//!
//! Exit codes: 0 success, 2 input error, 3 non-convergence.
//!
//! Node sets on the command line are comma-separated; within a set,
//! single-character node labels concatenate (`134`) and longer labels join
//! with `+` (`X1+X3`).

use crate::fit::{fit, goodness_of_fit, FitSettings};
use crate::graph::BidirectedGraph;
use crate::mll::{ordered_decomposable, ModelSpec, OdMode, SchemeKind};
use crate::report;
use crate::set::VarSet;
use crate::table::{ContingencyTable, VariableSpec};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "margraph",
    version,
    about = "Marginal-independence (bi-directed graph) models for contingency tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    /// Disconnected-set parameterization of the graph model
    Dset,
    /// Multivariate logistic parameterization
    Mvlogistic,
    /// Undirected log-linear model with the same skeleton
    Undirected,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Strict,
    Search,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// List disconnected sets and marginal independence statements
    Independencies {
        /// Graph JSON file: {"nodes": [...], "edges": [[..,..], ...]}
        graph: PathBuf,
        /// Drop statements implied by larger disconnected sets
        #[arg(long)]
        reduce: bool,
    },
    /// Print the (margin, effect) assignment of a parameterization
    Params {
        #[arg(long)]
        graph: PathBuf,
        /// Level counts in node order, e.g. 2,3,2 (required without --data)
        #[arg(long)]
        levels: Option<String>,
        /// Read variable levels from a data file instead
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Dset)]
        scheme: SchemeArg,
        /// Margin order override for the dset scheme, e.g. "13,14,24,134,124"
        #[arg(long)]
        order: Option<String>,
    },
    /// Test ordered decomposability of a margin sequence
    #[command(name = "check-od")]
    CheckOd {
        /// The sequence, e.g. "13,14,25,35,134,135,235,12345"
        #[arg(long)]
        margins: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
        mode: ModeArg,
    },
    /// Fit a model by constrained maximum likelihood
    Fit {
        #[arg(long)]
        graph: PathBuf,
        /// Cell-count CSV (header of variable names plus a `count` column)
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::Dset)]
        scheme: SchemeArg,
        /// Margin order override for the dset scheme
        #[arg(long)]
        order: Option<String>,
        /// Additional effect sets to constrain to zero (repeatable)
        #[arg(long = "extra-zero")]
        extra_zero: Vec<String>,
        /// Convergence tolerance on the constraint norm
        #[arg(long)]
        tol: Option<f64>,
        /// Convergence tolerance on the scaled score norm
        #[arg(long = "tol-score")]
        tol_score: Option<f64>,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        #[arg(long = "max-halvings")]
        max_halvings: Option<usize>,
        /// Write the report to this path
        #[arg(long)]
        out: Option<PathBuf>,
        /// How to render the report on stdout
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

struct CliError(String);

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

/// Runs the CLI against explicit writers; returns the exit code.
pub fn run_with(
    args: impl IntoIterator<Item = OsString>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INPUT
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::Independencies { graph, reduce } => cmd_independencies(&graph, reduce, out),
        Command::Params { graph, levels, data, scheme, order } => {
            cmd_params(&graph, levels.as_deref(), data.as_deref(), scheme, order.as_deref(), out)
        }
        Command::CheckOd { margins, mode } => cmd_check_od(&margins, mode, out),
        Command::Fit {
            graph,
            data,
            scheme,
            order,
            extra_zero,
            tol,
            tol_score,
            max_iter,
            max_halvings,
            out: out_path,
            format,
        } => cmd_fit(
            &graph,
            &data,
            scheme,
            order.as_deref(),
            &extra_zero,
            tol,
            tol_score,
            max_iter,
            max_halvings,
            out_path.as_deref(),
            format,
            out,
        ),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

/// Runs the CLI on real stdio.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

fn parse_set_token(token: &str, names: &[String]) -> Result<VarSet, CliError> {
    let token = token.trim();
    if token.is_empty() {
        return Err(CliError("empty node set".into()));
    }
    let labels: Vec<String> = if token.contains('+') {
        token.split('+').map(|s| s.trim().to_string()).collect()
    } else if names.iter().all(|n| n.chars().count() == 1) {
        token.chars().map(|c| c.to_string()).collect()
    } else {
        vec![token.to_string()]
    };
    let mut indices = Vec::with_capacity(labels.len());
    for label in &labels {
        let idx = names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| CliError(format!("unknown node `{label}`")))?;
        indices.push(idx);
    }
    Ok(VarSet::new(indices))
}

fn parse_set_list(s: &str, names: &[String]) -> Result<Vec<VarSet>, CliError> {
    s.split(',').map(|tok| parse_set_token(tok, names)).collect()
}

fn cmd_independencies(
    graph_path: &std::path::Path,
    reduce: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let g = BidirectedGraph::from_path(graph_path)?;
    let names = g.node_names().to_vec();
    let dsets = g.disconnected_sets();
    writeln!(out, "nodes ({}): {}", names.len(), names.join(" "))?;
    let edges: Vec<String> =
        g.edges().iter().map(|&(i, j)| format!("{}-{}", names[i], names[j])).collect();
    writeln!(out, "edges ({}): {}", edges.len(), edges.join(" "))?;
    let shown: Vec<String> = dsets.iter().map(|d| d.label(&names)).collect();
    writeln!(out, "disconnected sets ({}): {}", dsets.len(), shown.join(" "))?;
    let statements = g.independence_statements(reduce);
    let title = if reduce { "reduced independence statements" } else { "independence statements" };
    writeln!(out, "{title} ({}):", statements.len())?;
    for s in &statements {
        writeln!(out, "  {}", s.label(&names))?;
    }
    if g.has_chordless_4chain() {
        writeln!(out, "no Markov-equivalent DAG on the same nodes (induced 4-chain present)")?;
    } else {
        writeln!(out, "a Markov-equivalent DAG on the same nodes exists (no induced 4-chain)")?;
    }
    Ok(EXIT_OK)
}

fn variables_for(
    g: &BidirectedGraph,
    levels: Option<&str>,
    data: Option<&std::path::Path>,
) -> Result<Vec<VariableSpec>, CliError> {
    let names = g.node_names();
    match (levels, data) {
        (Some(spec), _) => {
            let parsed: Result<Vec<usize>, _> =
                spec.split(',').map(|s| s.trim().parse::<usize>()).collect();
            let parsed = parsed.map_err(|_| CliError(format!("bad levels list `{spec}`")))?;
            if parsed.len() != names.len() {
                return Err(CliError(format!(
                    "{} level counts for {} nodes",
                    parsed.len(),
                    names.len()
                )));
            }
            names
                .iter()
                .zip(parsed)
                .map(|(n, l)| VariableSpec::new(n.clone(), l).map_err(CliError::from))
                .collect()
        }
        (None, Some(path)) => {
            let table = ContingencyTable::from_path(path)?;
            let table = table
                .reorder(names)
                .map_err(|e| CliError(format!("graph/data variable mismatch: {e}")))?;
            Ok(table.variables().to_vec())
        }
        (None, None) => Err(CliError("provide --levels or --data".into())),
    }
}

fn cmd_params(
    graph_path: &std::path::Path,
    levels: Option<&str>,
    data: Option<&std::path::Path>,
    scheme_arg: SchemeArg,
    order: Option<&str>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let g = BidirectedGraph::from_path(graph_path)?;
    let vars = variables_for(&g, levels, data)?;
    let names = g.node_names().to_vec();
    let model = build_model(&g, &vars, scheme_arg, order)?;
    let scheme = model.scheme();
    writeln!(out, "scheme: {}", scheme.kind())?;
    let margins: Vec<String> = scheme.margins().iter().map(|m| m.label(&names)).collect();
    writeln!(out, "margins: {}", margins.join(" "))?;
    writeln!(out, "{:<10} {:<10} {:<22} zero", "effect", "margin", "parameter")?;
    let mut effects: Vec<VarSet> =
        scheme.assignments().iter().flat_map(|a| a.effects.clone()).collect();
    effects.sort();
    for l in &effects {
        let margin = scheme.margin_of(l).expect("complete scheme").clone();
        let mark = if model.is_constrained(&margin, l) { "*" } else { "" };
        writeln!(
            out,
            "{:<10} {:<10} {:<22} {}",
            l.label(&names),
            margin.label(&names),
            format!("lambda({}; {})", margin.label(&names), l.label(&names)),
            mark
        )?;
    }
    writeln!(out, "constrained blocks: {}  (q = {})", model.zero_blocks().len(), model.q())?;
    Ok(EXIT_OK)
}

fn cmd_check_od(margins: &str, mode: ModeArg, out: &mut dyn Write) -> Result<i32, CliError> {
    // the universe is whatever labels appear in the sequence
    let mut labels: Vec<String> = Vec::new();
    for token in margins.split(',') {
        let token = token.trim();
        let parts: Vec<String> = if token.contains('+') {
            token.split('+').map(|s| s.trim().to_string()).collect()
        } else {
            token.chars().map(|c| c.to_string()).collect()
        };
        for p in parts {
            if !p.is_empty() && !labels.contains(&p) {
                labels.push(p);
            }
        }
    }
    labels.sort();
    let sets = parse_set_list(margins, &labels)?;
    let od_mode = match mode {
        ModeArg::Strict => OdMode::Strict,
        ModeArg::Search => OdMode::Search,
    };
    let verdict = ordered_decomposable(&sets, od_mode)?;
    let shown: Vec<String> = sets.iter().map(|s| s.label(&labels)).collect();
    writeln!(out, "sequence: {}", shown.join(" "))?;
    writeln!(out, "mode: {mode:?}", mode = od_mode)?;
    writeln!(out, "ordered decomposable: {}", verdict.decomposable)?;
    if let Some(prefix) = verdict.failing_prefix {
        let shown: Vec<String> = prefix.iter().map(|s| s.label(&labels)).collect();
        writeln!(out, "failing prefix (maximal elements): {}", shown.join(" "))?;
    }
    Ok(EXIT_OK)
}

fn build_model(
    g: &BidirectedGraph,
    vars: &[VariableSpec],
    scheme: SchemeArg,
    order: Option<&str>,
) -> Result<ModelSpec, CliError> {
    let names = g.node_names().to_vec();
    let model = match scheme {
        SchemeArg::Dset => match order {
            Some(o) => {
                let sets = parse_set_list(o, &names)?;
                ModelSpec::from_graph_with_order(g, vars, &sets)?
            }
            None => ModelSpec::from_graph(g, vars, SchemeKind::Dset)?,
        },
        SchemeArg::Mvlogistic => ModelSpec::from_graph(g, vars, SchemeKind::MvLogistic)?,
        SchemeArg::Undirected => ModelSpec::undirected(g, vars)?,
    };
    Ok(model)
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    graph_path: &std::path::Path,
    data_path: &std::path::Path,
    scheme: SchemeArg,
    order: Option<&str>,
    extra_zero: &[String],
    tol: Option<f64>,
    tol_score: Option<f64>,
    max_iter: Option<usize>,
    max_halvings: Option<usize>,
    out_path: Option<&std::path::Path>,
    format: FormatArg,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let g = BidirectedGraph::from_path(graph_path)?;
    let table = ContingencyTable::from_path(data_path)?;
    let table = table
        .reorder(g.node_names())
        .map_err(|e| CliError(format!("graph/data variable mismatch: {e}")))?;
    let vars = table.variables().to_vec();
    let mut model = build_model(&g, &vars, scheme, order)?;
    if !extra_zero.is_empty() {
        let names = g.node_names().to_vec();
        let mut keys = Vec::new();
        for spec in extra_zero {
            for set in parse_set_list(spec, &names)? {
                keys.push(model.scheme().key_for_effect(&set)?);
            }
        }
        model = model.add_zero_blocks(&keys)?;
    }
    let mut settings = FitSettings::default();
    if let Some(t) = tol {
        settings.tol_constraint = t;
    }
    if let Some(t) = tol_score {
        settings.tol_score = t;
    }
    if let Some(m) = max_iter {
        settings.max_iter = m;
    }
    if let Some(m) = max_halvings {
        settings.max_halvings = m;
    }

    let result = fit(&table, &model, &settings)?;
    let report = report::fit_report(&result);
    if let Some(path) = out_path {
        std::fs::write(path, report::render(&report))?;
    }
    match format {
        FormatArg::Json => {
            write!(out, "{}", report::render(&report))?;
        }
        FormatArg::Text => {
            write_text_report(&result, out)?;
        }
    }
    writeln!(
        out,
        "G2={:.6} X2={:.6} df={} iter={} converged={}",
        result.deviance, result.pearson, result.df, result.iterations, result.converged
    )?;
    Ok(if result.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

fn write_text_report(result: &crate::fit::FitResult, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = report::parameter_rows(result);
    writeln!(
        out,
        "{:<10} {:<10} {:<8} {:>10} {:>10} {:>12}  zero",
        "margin", "effect", "levels", "estimate", "s.e.", "studentized"
    )?;
    let fmt = |v: &serde_json::Value| -> String {
        match v.as_f64() {
            Some(x) => format!("{x:.4}"),
            None => ".".to_string(),
        }
    };
    for row in &rows {
        let levels: Vec<String> = row["levels"]
            .as_array()
            .map(|a| a.iter().map(|x| x.to_string()).collect())
            .unwrap_or_default();
        writeln!(
            out,
            "{:<10} {:<10} {:<8} {:>10} {:>10} {:>12}  {}",
            row["margin"].as_str().unwrap_or(""),
            row["effect"].as_str().unwrap_or(""),
            levels.join(","),
            fmt(&row["estimate"]),
            fmt(&row["se"]),
            fmt(&row["studentized"]),
            if row["constrained"].as_bool().unwrap_or(false) { "*" } else { "" }
        )?;
    }
    if let Ok(gof) = goodness_of_fit(result) {
        let p = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| ".".into());
        writeln!(
            out,
            "deviance G2={:.4} (p={}), pearson X2={:.4} (p={}), df={}",
            gof.deviance,
            p(gof.p_deviance),
            gof.pearson,
            p(gof.p_pearson),
            gof.df
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let args = std::iter::once("margraph")
            .chain(args.iter().copied())
            .map(OsString::from)
            .collect::<Vec<_>>();
        let code = run_with(args, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn check_od_reports_failing_prefix() {
        let (code, out, _) = run_str(&[
            "check-od",
            "--margins",
            "13,14,25,35,134,135,235,12345",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("ordered decomposable: false"));
        assert!(out.contains("failing prefix (maximal elements): 13 14 25 35"));
        let (code, out, _) = run_str(&[
            "check-od",
            "--margins",
            "13,35,135,14,25,134,235,12345",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("ordered decomposable: true"));
    }

    #[test]
    fn check_od_two_margins_trivial() {
        let (code, out, _) = run_str(&["check-od", "--margins", "12,23"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("ordered decomposable: true"));
    }

    #[test]
    fn bad_margins_exit_2() {
        let (code, _, err) = run_str(&["check-od", "--margins", "12,,34"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("error"));
    }

    #[test]
    fn missing_file_exits_2() {
        let (code, _, err) = run_str(&["independencies", "/nonexistent/graph.json"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(!err.is_empty());
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_str(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("margraph"));
    }
}

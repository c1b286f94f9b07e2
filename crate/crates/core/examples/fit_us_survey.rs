//! Fit a six-variable marginal independence model to the U.S. social survey
//! table (13067 respondents, 144 cells), then reduce it by zeroing all
//! log-linear effects above second order and read the two-factor estimates
//! off their two-way margins.
//!
//! Run with `cargo run --example fit_us_survey`.

use margraph::fit::{fit, FitSettings};
use margraph::graph::BidirectedGraph;
use margraph::mll::{ModelSpec, SchemeKind};
use margraph::set::VarSet;
use margraph::table::ContingencyTable;

fn data(name: &str) -> String {
    format!("{}/data/{}", env!("CARGO_MANIFEST_DIR"), name)
}

fn main() {
    let graph = BidirectedGraph::from_path(data("gss_us.json")).unwrap();
    let table = ContingencyTable::from_path(data("gss_us.csv")).unwrap();
    let table = table.reorder(graph.node_names()).unwrap();
    let names = graph.node_names().to_vec();

    let shown: Vec<String> =
        graph.disconnected_sets().iter().map(|d| d.label(&names)).collect();
    println!("disconnected sets: {}", shown.join(" "));

    let model =
        ModelSpec::from_graph(&graph, table.variables(), SchemeKind::MvLogistic).unwrap();
    let r = fit(&table, &model, &FitSettings::default()).unwrap();
    println!(
        "bi-directed model: G2 = {:.2} on {} df, {} iterations",
        r.deviance, r.df, r.iterations
    );

    // reduce: zero every effect of order three or higher
    let extra: Vec<(VarSet, VarSet)> = VarSet::all_nonempty_subsets(names.len())
        .into_iter()
        .filter(|l| l.len() >= 3)
        .map(|l| model.scheme().key_for_effect(&l).unwrap())
        .filter(|key| !model.is_constrained(&key.0, &key.1))
        .collect();
    let reduced = model.add_zero_blocks(&extra).unwrap();
    let rr = fit(&table, &reduced, &FitSettings::default()).unwrap();
    println!("two-factor model:  G2 = {:.2} on {} df", rr.deviance, rr.df);
    println!();

    // surviving two-factor terms with their standard errors; entries are
    // baseline contrasts (level 1 as reference), so for three-level
    // variables the rows beyond (2,2) accumulate the adjacent-category
    // log odds-ratios
    println!("{:<8} {:<8} {:>9} {:>8}  significant", "margin", "levels", "estimate", "s.e.");
    let cov = rr.cov_lambda.as_ref().unwrap();
    for (i, lab) in rr.lambda_hat.labels.iter().enumerate() {
        if lab.effect.len() != 2 || rr.model.is_constrained(&lab.margin, &lab.effect) {
            continue;
        }
        let est = rr.lambda_hat.values[i];
        let se = cov[(i, i)].sqrt();
        let star = if (est / se).abs() > 1.96 { "*" } else { "" };
        let levels: Vec<String> = lab.levels.iter().map(|l| l.to_string()).collect();
        println!(
            "{:<8} {:<8} {:>9.2} {:>8.3}  {}",
            lab.effect.label(&names),
            levels.join(","),
            est,
            se,
            star
        );
    }
}

//! Fit the 4-chain marginal independence model to the psychiatric-symptom
//! table (stability, validity, depression, solidity; N = 362) and compare
//! it with the best undirected log-linear model on the same skeleton idea.
//!
//! Run with `cargo run --example fit_psychiatric`.

use margraph::fit::{fit, goodness_of_fit, studentize, FitSettings};
use margraph::graph::BidirectedGraph;
use margraph::mll::{ModelSpec, SchemeKind};
use margraph::set::VarSet;
use margraph::table::ContingencyTable;

fn data(name: &str) -> String {
    format!("{}/data/{}", env!("CARGO_MANIFEST_DIR"), name)
}

fn main() {
    let table = ContingencyTable::from_path(data("coppen.csv")).unwrap();
    let graph = BidirectedGraph::from_path(data("chain4.json")).unwrap();
    let table = table.reorder(graph.node_names()).unwrap();
    let names = graph.node_names().to_vec();
    let settings = FitSettings::default();

    // multivariate logistic parameterization: marginal association estimates
    let model = ModelSpec::from_graph(&graph, table.variables(), SchemeKind::MvLogistic).unwrap();
    let r = fit(&table, &model, &settings).unwrap();
    let gof = goodness_of_fit(&r).unwrap();
    println!(
        "4-chain model: G2 = {:.2} on {} df (p = {:.3}), {} iterations",
        gof.deviance,
        gof.df,
        gof.p_deviance.unwrap(),
        r.iterations
    );
    println!();
    println!("{:<8} {:>9} {:>12}", "effect", "estimate", "studentized");
    let stud = studentize(&r).unwrap();
    for (i, lab) in r.lambda_hat.labels.iter().enumerate() {
        if r.model.is_constrained(&lab.margin, &lab.effect) {
            continue;
        }
        println!(
            "{:<8} {:>9.2} {:>12.2}",
            lab.effect.label(&names),
            r.lambda_hat.values[i],
            stud[i].unwrap()
        );
    }
    println!();

    // the same fit under the disconnected-set parameterization: identical
    // expected counts, different unconstrained parameters
    let dset = ModelSpec::from_graph(&graph, table.variables(), SchemeKind::Dset).unwrap();
    let rd = fit(&table, &dset, &settings).unwrap();
    let full = VarSet::full(4);
    println!("disconnected-set parameterization, blocks housed in the full margin:");
    for (i, lab) in rd.lambda_hat.labels.iter().enumerate() {
        if lab.margin == full && !rd.model.is_constrained(&lab.margin, &lab.effect) {
            println!(
                "  lambda({}; {}) = {:.2}",
                lab.margin.label(&names),
                lab.effect.label(&names),
                rd.lambda_hat.values[i]
            );
        }
    }
    println!();

    // dropping the four-factor term barely changes the fit
    let reduced = dset.add_zero_blocks(&[(full.clone(), full)]).unwrap();
    let rr = fit(&table, &reduced, &settings).unwrap();
    println!("with the four-factor term removed: G2 = {:.2} on {} df", rr.deviance, rr.df);

    // undirected comparison: the graphical log-linear model with cliques
    // {X1,X2} and {X2,X3,X4}
    let skeleton = BidirectedGraph::from_path(data("loglin_12_234.json")).unwrap();
    let undirected = ModelSpec::undirected(&skeleton, table.variables()).unwrap();
    let ru = fit(&table, &undirected, &settings).unwrap();
    println!(
        "undirected [X1 X2][X2 X3 X4] model: G2 = {:.2} on {} df",
        ru.deviance, ru.df
    );
}

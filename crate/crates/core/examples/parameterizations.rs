//! Compare the three marginal log-linear parameterizations of the 4-chain
//! model: ordinary log-linear, multivariate logistic, and disconnected-set.
//! Each effect set lands in exactly one margin; the disconnected sets carry
//! the model's zero constraints.
//!
//! Run with `cargo run --example parameterizations`.

use margraph::graph::BidirectedGraph;
use margraph::mll::{ModelSpec, ParamScheme, SchemeKind};
use margraph::set::VarSet;
use margraph::table::VariableSpec;

fn main() {
    let g = BidirectedGraph::from_path(format!(
        "{}/data/chain4.json",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    let vars: Vec<VariableSpec> = g
        .node_names()
        .iter()
        .map(|n| VariableSpec::new(n.clone(), 2).unwrap())
        .collect();
    let names = g.node_names().to_vec();

    let loglinear = ParamScheme::loglinear(&vars).unwrap();
    let mvlogistic = ParamScheme::mvlogistic(&vars).unwrap();
    let dset = ParamScheme::dset(&g, &vars, None).unwrap();
    let model = ModelSpec::from_graph(&g, &vars, SchemeKind::Dset).unwrap();

    println!(
        "dset margins: {}",
        dset.margins().iter().map(|m| m.label(&names)).collect::<Vec<_>>().join(" ")
    );
    println!();
    println!(
        "{:<12} {:<14} {:<14} {:<14} zero",
        "effect", "loglinear", "mvlogistic", "dset"
    );
    let mut effects: Vec<VarSet> = VarSet::all_nonempty_subsets(vars.len());
    effects.sort();
    for l in &effects {
        let housed = |s: &ParamScheme| s.margin_of(l).unwrap().label(&names);
        let in_dset = dset.margin_of(l).unwrap().clone();
        let mark = if model.is_constrained(&in_dset, l) { "*" } else { "" };
        println!(
            "{:<12} {:<14} {:<14} {:<14} {}",
            l.label(&names),
            housed(&loglinear),
            housed(&mvlogistic),
            housed(&dset),
            mark
        );
    }
    println!();
    println!("q = {} scalar zero constraints define the model", model.q());
    println!();
    println!("machine-readable description:");
    println!("{}", serde_json::to_string_pretty(&model.describe()).unwrap());
}

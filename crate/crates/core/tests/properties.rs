//! Randomized invariants for the table, graph and parameterization layers.

use margraph::graph::BidirectedGraph;
use margraph::mll::{contrast_block, ModelSpec, ParamScheme, SchemeKind};
use margraph::set::VarSet;
use margraph::table::{build_t, ContingencyTable, VariableSpec};
use nalgebra::DVector;
use proptest::collection::vec;
use proptest::prelude::*;

fn levels_strategy() -> impl Strategy<Value = Vec<usize>> {
    vec(2usize..=4, 1..=4)
}

fn vars_from(levels: &[usize]) -> Vec<VariableSpec> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &l)| VariableSpec::new(format!("v{i}"), l).unwrap())
        .collect()
}

fn graph_strategy() -> impl Strategy<Value = BidirectedGraph> {
    (2usize..=5, any::<u16>()).prop_map(|(d, mask)| {
        let names: Vec<String> = (0..d).map(|i| format!("n{i}")).collect();
        let mut edges = Vec::new();
        let mut bit = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                if mask & (1 << (bit % 16)) != 0 {
                    edges.push((names[i].clone(), names[j].clone()));
                }
                bit += 1;
            }
        }
        BidirectedGraph::new(&names, &edges).unwrap()
    })
}

/// Test-local connectivity check, independent of the library's walk.
fn is_connected_subset(g: &BidirectedGraph, nodes: &[usize]) -> bool {
    if nodes.is_empty() {
        return true;
    }
    let mut reached = vec![nodes[0]];
    let mut frontier = vec![nodes[0]];
    while let Some(u) = frontier.pop() {
        for &v in nodes {
            if !reached.contains(&v) && g.has_edge(u, v) {
                reached.push(v);
                frontier.push(v);
            }
        }
    }
    reached.len() == nodes.len()
}

proptest! {
    #[test]
    fn flat_index_is_a_bijection(levels in levels_strategy()) {
        let t: usize = levels.iter().product();
        prop_assume!(t <= 256);
        let table = ContingencyTable::new(vars_from(&levels), vec![0.0; t]).unwrap();
        for flat in 0..t {
            let cell = table.cell_at(flat);
            prop_assert_eq!(table.flat_index(&cell).unwrap(), flat);
        }
    }

    #[test]
    fn marginalization_commutes(levels in levels_strategy(), seed in any::<u64>()) {
        let t: usize = levels.iter().product();
        prop_assume!(t <= 256 && levels.len() >= 2);
        let counts: Vec<f64> =
            (0..t).map(|i| ((seed.rotate_left(i as u32) % 97) + 1) as f64).collect();
        let table = ContingencyTable::new(vars_from(&levels), counts).unwrap();
        let d = levels.len();
        let m = VarSet::new(0..d - 1);
        let m_small = VarSet::new([0]);
        let direct = table.marginalize(&m_small).unwrap();
        let via = table.marginalize(&m).unwrap().marginalize(&m_small).unwrap();
        for (a, b) in direct.counts().iter().zip(via.counts()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        // idempotence on the same margin
        let once = table.marginalize(&m).unwrap();
        let twice = once.marginalize(&VarSet::new(0..d - 1)).unwrap();
        prop_assert_eq!(once.counts(), twice.counts());
    }

    #[test]
    fn t_matrix_reproduces_marginalization(levels in levels_strategy(), seed in any::<u64>()) {
        let t: usize = levels.iter().product();
        prop_assume!(t <= 128);
        let d = levels.len();
        let counts: Vec<f64> =
            (0..t).map(|i| ((seed.rotate_right(i as u32) % 89) + 1) as f64).collect();
        let table = ContingencyTable::new(vars_from(&levels), counts.clone()).unwrap();
        let margins: Vec<VarSet> = VarSet::all_nonempty_subsets(d);
        let t_mat = build_t(&levels, &margins).unwrap();
        let stacked = &t_mat * DVector::from_column_slice(&counts);
        let mut expected: Vec<f64> = Vec::new();
        for m in &margins {
            expected.extend_from_slice(table.marginalize(m).unwrap().counts());
        }
        for (a, b) in stacked.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn contrast_rows_sum_to_zero(levels in levels_strategy(), mask in 1u16..16) {
        let d = levels.len();
        let m = VarSet::new((0..d).filter(|&i| mask & (1 << i) != 0));
        prop_assume!(!m.is_empty());
        for l in m.nonempty_subsets(false) {
            let block = contrast_block(&levels, &m, &l).unwrap();
            for r in 0..block.nrows() {
                prop_assert!(block.row(r).sum().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schemes_are_complete(g in graph_strategy()) {
        let d = g.node_count();
        let vars: Vec<VariableSpec> = g
            .node_names()
            .iter()
            .map(|n| VariableSpec::new(n.clone(), 2).unwrap())
            .collect();
        let t: usize = 1 << d;
        for scheme in [
            ParamScheme::mvlogistic(&vars).unwrap(),
            ParamScheme::dset(&g, &vars, None).unwrap(),
            ParamScheme::loglinear(&vars).unwrap(),
        ] {
            prop_assert_eq!(scheme.param_count(), t - 1);
            let mut effects: Vec<VarSet> =
                scheme.assignments().iter().flat_map(|a| a.effects.clone()).collect();
            effects.sort();
            prop_assert_eq!(effects, VarSet::all_nonempty_subsets(d));
            // uniform distribution has all parameters zero
            let lambda = scheme.compute_lambda(&vec![1.0 / t as f64; t]).unwrap();
            for &x in lambda.values.iter() {
                prop_assert!(x.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn undirected_constraints_dominate(g in graph_strategy()) {
        let vars: Vec<VariableSpec> = g
            .node_names()
            .iter()
            .map(|n| VariableSpec::new(n.clone(), 2).unwrap())
            .collect();
        let undirected = ModelSpec::undirected(&g, &vars).unwrap();
        let bidirected = ModelSpec::from_graph(&g, &vars, SchemeKind::MvLogistic).unwrap();
        prop_assert!(undirected.q() >= bidirected.q());
        // every disconnected set is incomplete
        let incomplete = g.incomplete_sets();
        for d in g.disconnected_sets() {
            prop_assert!(incomplete.contains(&d));
        }
    }

    #[test]
    fn disconnected_sets_match_component_counts(g in graph_strategy()) {
        let d = g.node_count();
        let listed = g.disconnected_sets();
        for mask in 1u32..(1u32 << d) {
            let nodes: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).collect();
            let s = VarSet::new(nodes.iter().copied());
            let connected = is_connected_subset(&g, &nodes);
            let in_list = listed.contains(&s);
            // a subset appears exactly when it is disconnected
            prop_assert_eq!(in_list, !connected && nodes.len() >= 2);
            let comps = g.connected_components(&s).unwrap();
            prop_assert_eq!(comps.len() >= 2, in_list);
            let union: VarSet = comps.iter().fold(VarSet::empty(), |acc, c| acc.union(c));
            prop_assert_eq!(union, s);
        }
    }

    #[test]
    fn reduced_statements_regenerate_all_sets(g in graph_strategy()) {
        let reduced = g.independence_statements(true);
        let mut covered: Vec<VarSet> = Vec::new();
        for stmt in &reduced {
            for sub in stmt.source.nonempty_subsets(false) {
                let touched =
                    stmt.blocks.iter().filter(|b| !b.intersection(&sub).is_empty()).count();
                if touched >= 2 && !covered.contains(&sub) {
                    covered.push(sub);
                }
            }
        }
        covered.sort();
        prop_assert_eq!(covered, g.disconnected_sets());
    }

    #[test]
    fn statement_blocks_partition_their_source(g in graph_strategy()) {
        for stmt in g.independence_statements(false) {
            prop_assert!(stmt.blocks.len() >= 2);
            let union: VarSet =
                stmt.blocks.iter().fold(VarSet::empty(), |acc, b| acc.union(b));
            prop_assert_eq!(&union, &stmt.source);
            let total: usize = stmt.blocks.iter().map(|b| b.len()).sum();
            prop_assert_eq!(total, stmt.source.len());
        }
    }
}

//! Brute-force reference maximizers for small tables.
//!
//! Used by the test suite to validate the scoring algorithm on an
//! independent path: closed-form complete-independence estimates, and a
//! penalized search over the simplex in an unconstrained softmax
//! parameterization. Not a production fitting path.

use crate::mll::{MllError, ModelSpec};
use crate::set::VarSet;
use crate::table::{ContingencyTable, TableError};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Search is restricted to tables this small; beyond it the oracle would no
/// longer be an honest brute-force check.
pub const MAX_CELLS: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("table has {0} cells; the oracle is capped at {MAX_CELLS}")]
    TableTooLarge(usize),
    #[error("blocks must partition the variable set")]
    BadPartition,
    #[error("a block margin has a zero cell; closed form undefined")]
    ZeroBlockMargin,
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error(transparent)]
    Mll(#[from] MllError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    ClosedFormIndependence,
    ProjectedSearch,
}

/// A reference maximizer: a feasible probability vector and its likelihood.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub pi_star: Vec<f64>,
    /// Multinomial log-likelihood kernel `Σ n log π*` over observed cells.
    pub loglik: f64,
    pub method: OracleMethod,
}

/// Settings for [`constrained_search`]; fixed in test configuration for
/// reproducibility.
#[derive(Clone, Debug)]
pub struct SearchSettings {
    pub restarts: usize,
    pub seed: u64,
    /// Penalty weights run `10^0, 10^1, …, 10^max_weight_pow`.
    pub max_weight_pow: u32,
    /// Feasibility requirement on `‖h‖∞`.
    pub feasibility_tol: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { restarts: 20, seed: 1, max_weight_pow: 8, feasibility_tol: 1e-8 }
    }
}

fn loglik(counts: &[f64], pi: &[f64]) -> f64 {
    counts
        .iter()
        .zip(pi)
        .filter(|(&n, _)| n > 0.0)
        .map(|(&n, &p)| n * p.ln())
        .sum()
}

/// Closed-form MLE under complete independence of the partition blocks:
/// `π*` is the product of the observed block-marginal proportions.
pub fn independence_mle(
    table: &ContingencyTable,
    partition: &[VarSet],
) -> Result<OracleResult, OracleError> {
    let d = table.variables().len();
    let mut seen = vec![false; d];
    for block in partition {
        for v in block.iter() {
            if v >= d || seen[v] {
                return Err(OracleError::BadPartition);
            }
            seen[v] = true;
        }
    }
    if !seen.iter().all(|&s| s) || partition.iter().any(|b| b.is_empty()) {
        return Err(OracleError::BadPartition);
    }
    let total = table.total();
    let marginals: Vec<ContingencyTable> = partition
        .iter()
        .map(|b| table.marginalize(b))
        .collect::<Result<_, _>>()?;
    for m in &marginals {
        if m.counts().contains(&0.0) {
            return Err(OracleError::ZeroBlockMargin);
        }
    }
    let t = table.cell_count();
    let mut pi = vec![1.0f64; t];
    for (flat, p) in pi.iter_mut().enumerate() {
        let cell = table.cell_at(flat);
        for (block, margin) in partition.iter().zip(&marginals) {
            let sub: Vec<usize> = block.iter().map(|v| cell[v]).collect();
            *p *= margin.counts()[margin.flat_index(&sub)?] / total;
        }
    }
    let ll = loglik(table.counts(), &pi);
    Ok(OracleResult { pi_star: pi, loglik: ll, method: OracleMethod::ClosedFormIndependence })
}

/// Maximizes the multinomial log-likelihood subject to the model's zero
/// constraints by a multiplier-corrected penalty search in softmax
/// coordinates, with seeded random restarts. Deterministic given the seed.
pub fn constrained_search(
    table: &ContingencyTable,
    model: &ModelSpec,
    settings: &SearchSettings,
) -> Result<OracleResult, OracleError> {
    let scheme = model.scheme();
    let table = table.reorder(&scheme.variable_names())?;
    let t = table.cell_count();
    if t > MAX_CELLS {
        return Err(OracleError::TableTooLarge(t));
    }
    let n = table.count_vector();
    let total = n.sum();
    let q = model.q();
    let c_d = model.constrained_contrasts();
    let t_mat = scheme.marginalization_matrix();

    let softmax = |z: &DVector<f64>| -> DVector<f64> {
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = z.map(|x| (x - max).exp());
        let s = e.sum();
        e / s
    };
    let constraints = |p: &DVector<f64>| -> DVector<f64> {
        if q == 0 {
            return DVector::zeros(0);
        }
        &c_d * (t_mat * p).map(f64::ln)
    };
    // objective (to minimize) and its gradient in z
    let objective = |z: &DVector<f64>, tau: &DVector<f64>, w: f64| -> (f64, DVector<f64>) {
        let p = softmax(z);
        let h = constraints(&p);
        let nll = -n
            .iter()
            .zip(p.iter())
            .filter(|(&ni, _)| ni > 0.0)
            .map(|(&ni, &pi)| ni / total * pi.ln())
            .sum::<f64>();
        let f = nll + tau.dot(&h) + 0.5 * w * h.norm_squared();
        let mut grad = &p - &n / total;
        if q > 0 {
            let margins = t_mat * &p;
            let mut u = &c_d.transpose() * (tau + &h * w); // m-vector
            for (r, x) in u.iter_mut().enumerate() {
                *x /= margins[r];
            }
            let v = t_mat.transpose() * u; // t-vector
            let pv = p.dot(&v);
            for i in 0..grad.len() {
                grad[i] += p[i] * (v[i] - pv);
            }
        }
        (f, grad)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut best: Option<OracleResult> = None;
    let smoothed_start: DVector<f64> =
        n.map(|x| ((x + 0.5) / (total + 0.5 * t as f64)).ln());

    for restart in 0..settings.restarts.max(1) {
        let mut z = if restart == 0 {
            smoothed_start.clone()
        } else {
            DVector::from_iterator(t, (0..t).map(|_| rng.random_range(-1.0..1.0)))
        };
        let mut tau = DVector::zeros(q);
        // keep the best feasible stage endpoint: once the constraints are
        // resolved to machine precision, pushing the weight higher only
        // amplifies rounding noise
        let mut restart_best: Option<(f64, DVector<f64>)> = None;
        for pow in 0..=settings.max_weight_pow {
            let w = 10f64.powi(pow as i32);
            z = bfgs_minimize(&z, |zz| objective(zz, &tau, w));
            let p = softmax(&z);
            let h = constraints(&p);
            if h.iter().all(|&x| x.abs() <= settings.feasibility_tol) {
                let ll = loglik(n.as_slice(), p.as_slice());
                if restart_best.as_ref().is_none_or(|(b, _)| ll > *b) {
                    restart_best = Some((ll, p));
                }
            }
            if h.amax() <= settings.feasibility_tol * 1e-3 {
                break;
            }
            tau += &h * w;
        }
        if let Some((ll, p)) = restart_best {
            let better = match &best {
                None => true,
                Some(b) => ll > b.loglik,
            };
            if better {
                best = Some(OracleResult {
                    pi_star: p.as_slice().to_vec(),
                    loglik: ll,
                    method: OracleMethod::ProjectedSearch,
                });
            }
        }
    }
    best.ok_or_else(|| {
        OracleError::SearchFailed(format!(
            "no feasible point within {:e} in {} restarts",
            settings.feasibility_tol,
            settings.restarts.max(1)
        ))
    })
}

/// Plain dense BFGS with Armijo backtracking; dimensions here never exceed
/// [`MAX_CELLS`].
fn bfgs_minimize<F>(start: &DVector<f64>, f: F) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let dim = start.len();
    let mut z = start.clone();
    let (mut fz, mut g) = f(&z);
    let mut b_inv = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..400 {
        let gnorm = g.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if gnorm < 1e-11 {
            break;
        }
        let mut dir = -(&b_inv * &g);
        if dir.dot(&g) >= 0.0 {
            b_inv = DMatrix::identity(dim, dim);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let z_try = &z + &dir * step;
            let (f_try, g_try) = f(&z_try);
            if f_try.is_finite() {
                let armijo = f_try <= fz + 1e-4 * step * slope;
                // near the optimum the Armijo decrease drops below the
                // floating-point resolution of f; accept on gradient
                // decrease instead so the iteration can keep polishing
                let noise_floor = f_try <= fz + 1e-12 * fz.abs().max(1.0)
                    && g_try.norm() < 0.999 * g.norm();
                if armijo || noise_floor {
                    accepted = Some((z_try, f_try, g_try));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((z_new, f_new, g_new)) = accepted else { break };
        let s = &z_new - &z;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let by = &b_inv * &y;
            let yby = y.dot(&by);
            // BFGS inverse update
            b_inv += (sy + yby) * rho * rho * (&s * s.transpose())
                - rho * (&by * s.transpose() + &s * by.transpose());
        }
        z = z_new;
        fz = f_new;
        g = g_new;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BidirectedGraph;
    use crate::mll::{ModelSpec, ParamScheme, SchemeKind};
    use crate::table::VariableSpec;
    use approx::assert_relative_eq;

    fn binary_vars(names: &[&str]) -> Vec<VariableSpec> {
        names.iter().map(|n| VariableSpec::new(*n, 2).unwrap()).collect()
    }

    #[test]
    fn independence_mle_2x2() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b"]),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap();
        let r =
            independence_mle(&table, &[VarSet::new([0]), VarSet::new([1])]).unwrap();
        let expect = [0.3 * 0.4, 0.3 * 0.6, 0.7 * 0.4, 0.7 * 0.6];
        for (a, b) in r.pi_star.iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_block_partition_returns_observed_proportions() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b"]),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap();
        let r = independence_mle(&table, &[VarSet::new([0, 1])]).unwrap();
        for (a, b) in r.pi_star.iter().zip(table.counts()) {
            assert_relative_eq!(*a, b / 100.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn partition_must_cover_all_variables() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b"]),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap();
        assert!(matches!(
            independence_mle(&table, &[VarSet::new([0])]),
            Err(OracleError::BadPartition)
        ));
        assert!(matches!(
            independence_mle(&table, &[VarSet::new([0]), VarSet::new([0, 1])]),
            Err(OracleError::BadPartition)
        ));
    }

    #[test]
    fn zero_margin_is_rejected() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b"]),
            vec![0.0, 0.0, 30.0, 40.0],
        )
        .unwrap();
        assert!(matches!(
            independence_mle(&table, &[VarSet::new([0]), VarSet::new([1])]),
            Err(OracleError::ZeroBlockMargin)
        ));
    }

    #[test]
    fn search_matches_closed_form_independence() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b"]),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap();
        let g = BidirectedGraph::new(&["a", "b"], &[]).unwrap();
        let model =
            ModelSpec::from_graph(&g, table.variables(), SchemeKind::MvLogistic).unwrap();
        let settings = SearchSettings { restarts: 4, ..SearchSettings::default() };
        let search = constrained_search(&table, &model, &settings).unwrap();
        let closed =
            independence_mle(&table, &[VarSet::new([0]), VarSet::new([1])]).unwrap();
        assert_relative_eq!(search.loglik, closed.loglik, epsilon = 1e-6);
        for (a, b) in search.pi_star.iter().zip(&closed.pi_star) {
            assert_relative_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn search_on_saturated_model_returns_observed() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b"]),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap();
        let scheme = ParamScheme::mvlogistic(table.variables()).unwrap();
        let model = ModelSpec::saturated(scheme);
        let settings = SearchSettings { restarts: 2, ..SearchSettings::default() };
        let r = constrained_search(&table, &model, &settings).unwrap();
        for (a, b) in r.pi_star.iter().zip(table.counts()) {
            assert_relative_eq!(*a, b / 100.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn search_is_seed_deterministic() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b", "c"]),
            vec![21.0, 4.0, 5.0, 16.0, 2.0, 11.0, 13.0, 1.0],
        )
        .unwrap();
        let g = BidirectedGraph::new(&["a", "b", "c"], &[("a", "c"), ("b", "c")]).unwrap();
        let model = ModelSpec::from_graph(&g, table.variables(), SchemeKind::Dset).unwrap();
        let settings = SearchSettings { restarts: 3, ..SearchSettings::default() };
        let r1 = constrained_search(&table, &model, &settings).unwrap();
        let r2 = constrained_search(&table, &model, &settings).unwrap();
        assert_eq!(r1.pi_star, r2.pi_star);
        // feasibility of the winner
        let lambda = model.scheme().compute_lambda(&r1.pi_star).unwrap();
        for (m, l) in model.zero_blocks() {
            for v in lambda.block_values(m, l) {
                assert!(v.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn oversized_tables_are_rejected() {
        let table = ContingencyTable::new(
            binary_vars(&["a", "b", "c", "d", "e"]),
            vec![1.0; 32],
        )
        .unwrap();
        let scheme = ParamScheme::mvlogistic(table.variables()).unwrap();
        let model = ModelSpec::saturated(scheme);
        assert!(matches!(
            constrained_search(&table, &model, &SearchSettings::default()),
            Err(OracleError::TableTooLarge(32))
        ));
    }
}

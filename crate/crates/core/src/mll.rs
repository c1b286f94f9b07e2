//! Hierarchical complete marginal log-linear parameterizations and the
//! constraint sets that turn them into marginal-independence models.
//!
//! A parameterization assigns every nonempty effect set `L ⊆ V` to exactly
//! one margin of a non-decreasing margin sequence ending in `V`; the
//! parameter block for `(M, L)` is a contrast of log marginal probabilities,
//! `λ^M_L = C^M_L log π^M`, built from Kronecker products of per-variable
//! baseline contrasts. Stacking all blocks gives `λ = C log(T π)` with a
//! block-diagonal `C` of `t − 1` rows.

use crate::graph::{BidirectedGraph, GraphError};
use crate::set::VarSet;
use crate::table::{build_t, TableError, VariableSpec};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MllError {
    #[error("effect set must be nonempty")]
    EmptyEffect,
    #[error("effect {0} is not contained in margin {1}")]
    EffectOutsideMargin(String, String),
    #[error("variable index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("margin sequence is not non-decreasing: {0} precedes {1} but contains it")]
    DecreasingSequence(String, String),
    #[error("duplicate margin {0}")]
    DuplicateMargin(String),
    #[error("empty margin in sequence")]
    EmptyMargin,
    #[error("margin order must be an arrangement of the disconnected sets; {0} does not match")]
    InvalidOrder(String),
    #[error("no parameter block ({0}, {1}) in this scheme")]
    UnknownBlock(String, String),
    #[error("block ({0}, {1}) is already constrained to zero")]
    AlreadyConstrained(String, String),
    #[error("graph nodes do not match variables: {0}")]
    VariableMismatch(String),
    #[error("probability vector has a non-positive entry")]
    NonPositiveProbability,
    #[error("probability vector has length {got}, expected {want}")]
    WrongLength { got: usize, want: usize },
    #[error("closed-form inversion requires the ordinary log-linear scheme")]
    NotLogLinear,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Baseline contrast block `C^M_L`: the Kronecker product over the margin's
/// variables (in declared order) of `(-1 | I)` for variables in the effect
/// and the baseline selector row `(1, 0, …, 0)` otherwise.
///
/// Rows are indexed by the non-baseline level combinations of the effect
/// variables, later variables varying fastest.
pub fn contrast_block(levels: &[usize], m: &VarSet, l: &VarSet) -> Result<DMatrix<f64>, MllError> {
    if l.is_empty() {
        return Err(MllError::EmptyEffect);
    }
    if !l.is_subset(m) {
        return Err(MllError::EffectOutsideMargin(format!("{l}"), format!("{m}")));
    }
    if let Some(i) = m.iter().find(|&i| i >= levels.len()) {
        return Err(MllError::IndexOutOfRange(i));
    }
    let mut block = DMatrix::from_element(1, 1, 1.0);
    for v in m.iter() {
        let b = levels[v];
        let factor = if l.contains(v) {
            let mut f = DMatrix::zeros(b - 1, b);
            for r in 0..b - 1 {
                f[(r, 0)] = -1.0;
                f[(r, r + 1)] = 1.0;
            }
            f
        } else {
            let mut f = DMatrix::zeros(1, b);
            f[(0, 0)] = 1.0;
            f
        };
        block = block.kronecker(&factor);
    }
    Ok(block)
}

/// Non-baseline level combinations `i_L` for an effect, aligned with the rows
/// of [`contrast_block`]: levels run `2..=b_v`, later variables fastest.
pub fn level_combinations(levels: &[usize], l: &VarSet) -> Vec<Vec<usize>> {
    let vars: Vec<usize> = l.iter().collect();
    let sizes: Vec<usize> = vars.iter().map(|&v| levels[v] - 1).collect();
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut r| {
            let mut combo = vec![0usize; vars.len()];
            for k in (0..vars.len()).rev() {
                combo[k] = r % sizes[k] + 2;
                r /= sizes[k];
            }
            combo
        })
        .collect()
}

/// The effect sets housed by one margin of a hierarchical complete
/// parameterization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectAssignment {
    pub margin: VarSet,
    /// Effects in canonical order; each nonempty `L ⊆ V` appears in exactly
    /// one assignment across the scheme.
    pub effects: Vec<VarSet>,
}

/// Validates a margin sequence and assigns every nonempty effect set to the
/// first margin containing it. The full set is appended when absent.
pub fn generate_assignments(
    d: usize,
    margins: &[VarSet],
) -> Result<Vec<EffectAssignment>, MllError> {
    let mut seq: Vec<VarSet> = margins.to_vec();
    for m in &seq {
        if m.is_empty() {
            return Err(MllError::EmptyMargin);
        }
        if let Some(i) = m.iter().find(|&i| i >= d) {
            return Err(MllError::IndexOutOfRange(i));
        }
    }
    for i in 0..seq.len() {
        for j in (i + 1)..seq.len() {
            if seq[i] == seq[j] {
                return Err(MllError::DuplicateMargin(format!("{}", seq[i])));
            }
            if seq[i].is_superset(&seq[j]) {
                return Err(MllError::DecreasingSequence(
                    format!("{}", seq[i]),
                    format!("{}", seq[j]),
                ));
            }
        }
    }
    let full = VarSet::full(d);
    if seq.last() != Some(&full) {
        seq.push(full);
    }

    let mut assigned: BTreeMap<VarSet, usize> = BTreeMap::new();
    for (j, m) in seq.iter().enumerate() {
        for l in m.nonempty_subsets(false) {
            assigned.entry(l).or_insert(j);
        }
    }
    let mut out: Vec<EffectAssignment> =
        seq.iter().map(|m| EffectAssignment { margin: m.clone(), effects: Vec::new() }).collect();
    for (l, j) in assigned {
        out[j].effects.push(l);
    }
    for a in &mut out {
        a.effects.sort();
    }
    Ok(out)
}

/// Identifies one scalar parameter: its margin, effect set and the
/// non-baseline level combination of the effect variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLabel {
    pub margin: VarSet,
    pub effect: VarSet,
    pub levels: Vec<usize>,
}

/// Row range of one `(margin, effect)` block within the stacked parameter
/// vector, plus the per-row level combinations.
#[derive(Clone, Debug)]
pub struct BlockInfo {
    pub rows: Range<usize>,
    pub level_combos: Vec<Vec<usize>>,
}

/// Which standard margin sequence generated a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    /// Every nonempty subset as its own margin: `η^M = λ^M_M`.
    MvLogistic,
    /// The model's disconnected sets followed by the full margin.
    Dset,
    /// The single margin `V`: ordinary log-linear `θ_L = λ^V_L`.
    LogLinear,
    Custom,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SchemeKind::MvLogistic => "mvlogistic",
            SchemeKind::Dset => "dset",
            SchemeKind::LogLinear => "loglinear",
            SchemeKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A hierarchical complete marginal log-linear parameterization:
/// `λ = C log(T π)` with labeled rows.
#[derive(Clone, Debug)]
pub struct ParamScheme {
    variables: Vec<VariableSpec>,
    kind: SchemeKind,
    assignments: Vec<EffectAssignment>,
    c: DMatrix<f64>,
    t_mat: DMatrix<f64>,
    index: BTreeMap<(VarSet, VarSet), BlockInfo>,
    labels: Vec<ParamLabel>,
    /// maps each effect to the margin housing it
    margin_of: BTreeMap<VarSet, VarSet>,
}

impl ParamScheme {
    /// Builds the scheme generated by an explicit margin sequence.
    pub fn from_margins(
        variables: &[VariableSpec],
        margins: &[VarSet],
        kind: SchemeKind,
    ) -> Result<Self, MllError> {
        let d = variables.len();
        let levels: Vec<usize> = variables.iter().map(|v| v.levels).collect();
        let t: usize = levels.iter().product();
        let assignments = generate_assignments(d, margins)?;
        let margin_seq: Vec<VarSet> = assignments.iter().map(|a| a.margin.clone()).collect();
        let t_mat = build_t(&levels, &margin_seq)?;
        let m_cols = t_mat.nrows();

        let mut c = DMatrix::zeros(t - 1, m_cols);
        let mut index = BTreeMap::new();
        let mut labels = Vec::with_capacity(t - 1);
        let mut margin_of = BTreeMap::new();
        let mut row = 0usize;
        let mut col = 0usize;
        for a in &assignments {
            let t_m: usize = a.margin.iter().map(|v| levels[v]).product();
            for l in &a.effects {
                let block = contrast_block(&levels, &a.margin, l)?;
                let combos = level_combinations(&levels, l);
                debug_assert_eq!(block.nrows(), combos.len());
                c.view_mut((row, col), (block.nrows(), t_m)).copy_from(&block);
                index.insert(
                    (a.margin.clone(), l.clone()),
                    BlockInfo { rows: row..row + block.nrows(), level_combos: combos.clone() },
                );
                for combo in &combos {
                    labels.push(ParamLabel {
                        margin: a.margin.clone(),
                        effect: l.clone(),
                        levels: combo.clone(),
                    });
                }
                margin_of.insert(l.clone(), a.margin.clone());
                row += block.nrows();
            }
            col += t_m;
        }
        assert_eq!(row, t - 1, "complete parameterization must have t-1 rows");
        Ok(ParamScheme {
            variables: variables.to_vec(),
            kind,
            assignments,
            c,
            t_mat,
            index,
            labels,
            margin_of,
        })
    }

    /// The multivariate logistic scheme: margins are all nonempty subsets in
    /// canonical order, so every effect lives in its own margin.
    pub fn mvlogistic(variables: &[VariableSpec]) -> Result<Self, MllError> {
        let margins = VarSet::all_nonempty_subsets(variables.len());
        Self::from_margins(variables, &margins, SchemeKind::MvLogistic)
    }

    /// The disconnected-set scheme for a graph: its disconnected sets in
    /// canonical order (or a supplied non-decreasing arrangement of them)
    /// with the full margin appended when absent.
    pub fn dset(
        graph: &BidirectedGraph,
        variables: &[VariableSpec],
        order: Option<&[VarSet]>,
    ) -> Result<Self, MllError> {
        check_graph_variables(graph, variables)?;
        let canonical = graph.disconnected_sets();
        let full = VarSet::full(variables.len());
        let margins: Vec<VarSet> = match order {
            None => canonical,
            Some(seq) => {
                let mut given: Vec<VarSet> =
                    seq.iter().filter(|m| **m != full).cloned().collect();
                let mut sorted = given.clone();
                sorted.sort();
                if sorted != canonical {
                    return Err(MllError::InvalidOrder(
                        seq.iter().map(|s| format!("{s}")).collect::<Vec<_>>().join(" "),
                    ));
                }
                if seq.last() == Some(&full) {
                    given.push(full.clone());
                }
                given
            }
        };
        Self::from_margins(variables, &margins, SchemeKind::Dset)
    }

    /// The ordinary log-linear scheme, generated by the single margin `V`.
    pub fn loglinear(variables: &[VariableSpec]) -> Result<Self, MllError> {
        let full = VarSet::full(variables.len());
        Self::from_margins(variables, &[full], SchemeKind::LogLinear)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.levels).collect()
    }

    /// Number of cells of the full table.
    pub fn cell_count(&self) -> usize {
        self.t_mat.ncols()
    }

    /// Total parameter count, `t − 1`.
    pub fn param_count(&self) -> usize {
        self.c.nrows()
    }

    pub fn margins(&self) -> Vec<VarSet> {
        self.assignments.iter().map(|a| a.margin.clone()).collect()
    }

    pub fn assignments(&self) -> &[EffectAssignment] {
        &self.assignments
    }

    /// The stacked block-diagonal contrast matrix, `(t−1) × m`.
    pub fn contrast_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// The stacked marginalization matrix, `m × t`.
    pub fn marginalization_matrix(&self) -> &DMatrix<f64> {
        &self.t_mat
    }

    /// Row labels aligned with the parameter vector.
    pub fn labels(&self) -> &[ParamLabel] {
        &self.labels
    }

    pub fn block(&self, margin: &VarSet, effect: &VarSet) -> Option<&BlockInfo> {
        self.index.get(&(margin.clone(), effect.clone()))
    }

    /// The margin housing a given effect set.
    pub fn margin_of(&self, effect: &VarSet) -> Option<&VarSet> {
        self.margin_of.get(effect)
    }

    /// The `(margin, effect)` key for an effect set.
    pub fn key_for_effect(&self, effect: &VarSet) -> Result<(VarSet, VarSet), MllError> {
        let margin = self
            .margin_of(effect)
            .ok_or_else(|| MllError::UnknownBlock("?".into(), format!("{effect}")))?;
        Ok((margin.clone(), effect.clone()))
    }

    /// `λ = C log(T π)` for a strictly positive probability vector.
    pub fn compute_lambda(&self, pi: &[f64]) -> Result<LabeledParams, MllError> {
        let t = self.cell_count();
        if pi.len() != t {
            return Err(MllError::WrongLength { got: pi.len(), want: t });
        }
        if pi.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(MllError::NonPositiveProbability);
        }
        let total: f64 = pi.iter().sum();
        let pi = DVector::from_iterator(t, pi.iter().map(|&p| p / total));
        let margins = &self.t_mat * pi;
        let logm = margins.map(f64::ln);
        let values = &self.c * logm;
        Ok(LabeledParams { labels: self.labels.clone(), values })
    }

    /// Closed-form inverse for the ordinary log-linear scheme: rebuilds the
    /// probability vector from `θ` by expanding `log p(i) = Σ_L θ_L(i_L)`
    /// (terms with a baseline index vanish) and normalizing.
    pub fn invert_loglinear(&self, theta: &DVector<f64>) -> Result<Vec<f64>, MllError> {
        let d = self.variables.len();
        if self.assignments.len() != 1 || self.assignments[0].margin != VarSet::full(d) {
            return Err(MllError::NotLogLinear);
        }
        if theta.len() != self.param_count() {
            return Err(MllError::WrongLength { got: theta.len(), want: self.param_count() });
        }
        let levels = self.levels();
        let t = self.cell_count();
        let mut logp = vec![0.0f64; t];
        for (flat, lp) in logp.iter_mut().enumerate() {
            let cell = cell_at(&levels, flat);
            for (key, info) in &self.index {
                let l = &key.1;
                if l.iter().any(|v| cell[v] == 1) {
                    continue;
                }
                let combo: Vec<usize> = l.iter().map(|v| cell[v]).collect();
                let offset =
                    info.level_combos.iter().position(|c| *c == combo).expect("combo in block");
                *lp += theta[info.rows.start + offset];
            }
        }
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = logp.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = p.iter().sum();
        for x in &mut p {
            *x /= sum;
        }
        Ok(p)
    }

    /// JSON description: margins, effect assignments and matrix shapes.
    /// Matrices are regenerable from the listing and are not serialized.
    pub fn describe(&self) -> serde_json::Value {
        let names = self.variable_names();
        serde_json::json!({
            "kind": self.kind.to_string(),
            "variables": self.variables.iter().map(|v| {
                serde_json::json!({"name": v.name, "levels": v.levels})
            }).collect::<Vec<_>>(),
            "margins": self.margins().iter().map(|m| m.label(&names)).collect::<Vec<_>>(),
            "assignments": self.assignments.iter().map(|a| {
                serde_json::json!({
                    "margin": a.margin.label(&names),
                    "effects": a.effects.iter().map(|l| l.label(&names)).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
            "shapes": {
                "contrast": [self.c.nrows(), self.c.ncols()],
                "marginalization": [self.t_mat.nrows(), self.t_mat.ncols()],
            },
        })
    }
}

/// A labeled parameter vector `λ`.
#[derive(Clone, Debug)]
pub struct LabeledParams {
    pub labels: Vec<ParamLabel>,
    pub values: DVector<f64>,
}

impl LabeledParams {
    /// All values of one `(margin, effect)` block, by label match.
    pub fn block_values(&self, margin: &VarSet, effect: &VarSet) -> Vec<f64> {
        self.labels
            .iter()
            .zip(self.values.iter())
            .filter(|(lab, _)| &lab.margin == margin && &lab.effect == effect)
            .map(|(_, &v)| v)
            .collect()
    }
}

fn cell_at(levels: &[usize], mut flat: usize) -> Vec<usize> {
    let mut cell = vec![1usize; levels.len()];
    for k in (0..levels.len()).rev() {
        cell[k] = flat % levels[k] + 1;
        flat /= levels[k];
    }
    cell
}

fn check_graph_variables(
    graph: &BidirectedGraph,
    variables: &[VariableSpec],
) -> Result<(), MllError> {
    let names: Vec<&str> = variables.iter().map(|v| v.name.as_str()).collect();
    if graph.node_names().iter().map(String::as_str).ne(names.iter().copied()) {
        return Err(MllError::VariableMismatch(format!(
            "graph nodes {:?} vs variables {:?}",
            graph.node_names(),
            names
        )));
    }
    Ok(())
}

/// A parameterization together with the blocks constrained to zero.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    scheme: ParamScheme,
    zero_blocks: Vec<(VarSet, VarSet)>,
    q: usize,
}

impl ModelSpec {
    /// Constrains the given `(margin, effect)` blocks of a scheme to zero.
    pub fn new(scheme: ParamScheme, zero_blocks: Vec<(VarSet, VarSet)>) -> Result<Self, MllError> {
        let names = scheme.variable_names();
        let mut blocks = zero_blocks;
        blocks.sort();
        for pair in blocks.windows(2) {
            if pair[0] == pair[1] {
                return Err(MllError::AlreadyConstrained(
                    pair[0].0.label(&names),
                    pair[0].1.label(&names),
                ));
            }
        }
        let mut q = 0usize;
        for (m, l) in &blocks {
            let info = scheme
                .block(m, l)
                .ok_or_else(|| MllError::UnknownBlock(m.label(&names), l.label(&names)))?;
            q += info.rows.len();
        }
        Ok(ModelSpec { scheme, zero_blocks: blocks, q })
    }

    /// The bi-directed graph model: `η^D = 0` for every disconnected set,
    /// within either the multivariate logistic or the disconnected-set
    /// scheme. In both, the block for `D` is housed in margin `D` itself.
    pub fn from_graph(
        graph: &BidirectedGraph,
        variables: &[VariableSpec],
        kind: SchemeKind,
    ) -> Result<Self, MllError> {
        check_graph_variables(graph, variables)?;
        let scheme = match kind {
            SchemeKind::MvLogistic => ParamScheme::mvlogistic(variables)?,
            SchemeKind::Dset => ParamScheme::dset(graph, variables, None)?,
            _ => return Err(MllError::InvalidOrder(format!("scheme kind {kind}"))),
        };
        let zero = graph.disconnected_sets().into_iter().map(|d| (d.clone(), d)).collect();
        ModelSpec::new(scheme, zero)
    }

    /// Same model constraints over an explicitly ordered disconnected-set
    /// scheme.
    pub fn from_graph_with_order(
        graph: &BidirectedGraph,
        variables: &[VariableSpec],
        order: &[VarSet],
    ) -> Result<Self, MllError> {
        let scheme = ParamScheme::dset(graph, variables, Some(order))?;
        let zero = graph.disconnected_sets().into_iter().map(|d| (d.clone(), d)).collect();
        ModelSpec::new(scheme, zero)
    }

    /// The undirected-graph log-linear model with the same skeleton:
    /// `θ_L = 0` for every incomplete set, in the ordinary log-linear scheme.
    pub fn undirected(
        graph: &BidirectedGraph,
        variables: &[VariableSpec],
    ) -> Result<Self, MllError> {
        check_graph_variables(graph, variables)?;
        let scheme = ParamScheme::loglinear(variables)?;
        let full = VarSet::full(variables.len());
        let zero =
            graph.incomplete_sets().into_iter().map(|l| (full.clone(), l)).collect();
        ModelSpec::new(scheme, zero)
    }

    /// The saturated model on a scheme: no constraints.
    pub fn saturated(scheme: ParamScheme) -> Self {
        ModelSpec { scheme, zero_blocks: Vec::new(), q: 0 }
    }

    /// Adds further zero blocks; keys must exist and not already be
    /// constrained.
    pub fn add_zero_blocks(&self, extra: &[(VarSet, VarSet)]) -> Result<Self, MllError> {
        let names = self.scheme.variable_names();
        let mut blocks = self.zero_blocks.clone();
        for key in extra {
            if self.zero_blocks.contains(key) {
                return Err(MllError::AlreadyConstrained(
                    key.0.label(&names),
                    key.1.label(&names),
                ));
            }
            blocks.push(key.clone());
        }
        ModelSpec::new(self.scheme.clone(), blocks)
    }

    pub fn scheme(&self) -> &ParamScheme {
        &self.scheme
    }

    pub fn zero_blocks(&self) -> &[(VarSet, VarSet)] {
        &self.zero_blocks
    }

    pub fn is_constrained(&self, margin: &VarSet, effect: &VarSet) -> bool {
        self.zero_blocks.iter().any(|(m, l)| m == margin && l == effect)
    }

    /// Total number of scalar zero constraints; the model's degrees of
    /// freedom.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Global row indices (into the parameter vector) of all constrained
    /// blocks, in zero-block order.
    pub fn constrained_rows(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.q);
        for (m, l) in &self.zero_blocks {
            let info = self.scheme.block(m, l).expect("validated block");
            rows.extend(info.rows.clone());
        }
        rows
    }

    /// The `q × m` sub-matrix of `C` holding the constrained rows.
    pub fn constrained_contrasts(&self) -> DMatrix<f64> {
        let c = self.scheme.contrast_matrix();
        let rows = self.constrained_rows();
        let mut out = DMatrix::zeros(rows.len(), c.ncols());
        for (k, &r) in rows.iter().enumerate() {
            out.row_mut(k).copy_from(&c.row(r));
        }
        out
    }

    /// JSON description of the model: scheme listing plus zero blocks.
    pub fn describe(&self) -> serde_json::Value {
        let names = self.scheme.variable_names();
        let mut value = self.scheme.describe();
        value["zero_blocks"] = serde_json::Value::Array(
            self.zero_blocks
                .iter()
                .map(|(m, l)| {
                    serde_json::json!({"margin": m.label(&names), "effect": l.label(&names)})
                })
                .collect(),
        );
        value["q"] = serde_json::json!(self.q);
        value
    }
}

/// Verdict of the ordered-decomposability test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OdVerdict {
    pub decomposable: bool,
    /// The maximal elements at the first failing prefix, when not
    /// decomposable.
    pub failing_prefix: Option<Vec<VarSet>>,
}

/// How prefixes are tested for decomposability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OdMode {
    /// Running-intersection check on the maximal elements in order of first
    /// appearance. The default; matches the sequence as written.
    Strict,
    /// Existence of *some* running-intersection ordering of the maximal
    /// elements at each prefix.
    Search,
}

/// Tests ordered decomposability of a non-decreasing margin sequence.
///
/// For every prefix of length `k ≥ 3`, the maximal elements of the prefix
/// must form a decomposable family. `Strict` checks the running-intersection
/// property in order of first appearance; `Search` asks whether any ordering
/// works. Sequences with at most two margins pass trivially.
pub fn ordered_decomposable(margins: &[VarSet], mode: OdMode) -> Result<OdVerdict, MllError> {
    for i in 0..margins.len() {
        if margins[i].is_empty() {
            return Err(MllError::EmptyMargin);
        }
        for j in (i + 1)..margins.len() {
            if margins[i] == margins[j] {
                return Err(MllError::DuplicateMargin(format!("{}", margins[i])));
            }
            if margins[i].is_superset(&margins[j]) {
                return Err(MllError::DecreasingSequence(
                    format!("{}", margins[i]),
                    format!("{}", margins[j]),
                ));
            }
        }
    }
    if margins.len() <= 2 {
        return Ok(OdVerdict { decomposable: true, failing_prefix: None });
    }
    for k in 3..=margins.len() {
        let maximal = maximal_elements(&margins[..k]);
        let ok = match mode {
            OdMode::Strict => rip_in_order(&maximal),
            OdMode::Search => is_decomposable_family(&maximal),
        };
        if !ok {
            return Ok(OdVerdict { decomposable: false, failing_prefix: Some(maximal) });
        }
    }
    Ok(OdVerdict { decomposable: true, failing_prefix: None })
}

/// Sets not strictly contained in any other, in order of first appearance.
fn maximal_elements(sets: &[VarSet]) -> Vec<VarSet> {
    sets.iter()
        .filter(|s| !sets.iter().any(|o| *o != **s && s.is_subset(o)))
        .cloned()
        .collect()
}

/// Running-intersection property in the given order: each set's intersection
/// with the union of its predecessors lies inside a single predecessor
/// (empty intersections pass).
fn rip_in_order(sets: &[VarSet]) -> bool {
    let mut union = VarSet::empty();
    for (i, s) in sets.iter().enumerate() {
        if i > 0 {
            let inter = s.intersection(&union);
            if !inter.is_empty() && !sets[..i].iter().any(|prev| inter.is_subset(prev)) {
                return false;
            }
        }
        union = union.union(s);
    }
    true
}

/// Whether some ordering of the family satisfies the running-intersection
/// property, via ear removal: repeatedly drop vertices occurring in a single
/// set and sets contained in other sets; the family is decomposable exactly
/// when everything is consumed.
fn is_decomposable_family(sets: &[VarSet]) -> bool {
    let mut work: Vec<VarSet> = sets.to_vec();
    loop {
        let mut changed = false;
        // drop sets contained in another remaining set
        let mut kept: Vec<VarSet> = Vec::new();
        for (i, s) in work.iter().enumerate() {
            let dominated = work
                .iter()
                .enumerate()
                .any(|(j, o)| i != j && s.is_subset(o) && (s != o || j < i));
            if !dominated {
                kept.push(s.clone());
            } else {
                changed = true;
            }
        }
        work = kept;
        // drop vertices occurring in exactly one set
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for s in &work {
            for v in s.iter() {
                *counts.entry(v).or_insert(0) += 1;
            }
        }
        let lonely: Vec<usize> =
            counts.iter().filter(|(_, &c)| c == 1).map(|(&v, _)| v).collect();
        if !lonely.is_empty() {
            changed = true;
            work = work
                .iter()
                .map(|s| VarSet::new(s.iter().filter(|v| !lonely.contains(v))))
                .filter(|s| !s.is_empty())
                .collect();
        } else {
            work.retain(|s| !s.is_empty());
        }
        if work.is_empty() {
            return true;
        }
        if !changed {
            return false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BidirectedGraph;
    use approx::assert_relative_eq;

    fn binary_vars(names: &[&str]) -> Vec<VariableSpec> {
        names.iter().map(|n| VariableSpec::new(*n, 2).unwrap()).collect()
    }

    fn chain4() -> BidirectedGraph {
        BidirectedGraph::new(&["1", "2", "3", "4"], &[("1", "2"), ("2", "3"), ("3", "4")]).unwrap()
    }

    fn v(ids: &[usize]) -> VarSet {
        VarSet::new(ids.iter().copied())
    }

    #[test]
    fn contrast_blocks_match_definitions() {
        // single binary logit
        let b = contrast_block(&[2], &v(&[0]), &v(&[0])).unwrap();
        assert_eq!(b.nrows(), 1);
        assert_eq!(b.as_slice(), &[-1.0, 1.0]);
        // two binary variables, effect on the first: log p(21) - log p(11)
        let b = contrast_block(&[2, 2], &v(&[0, 1]), &v(&[0])).unwrap();
        assert_eq!(b.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0, 0.0]);
        // three-level variable in the effect
        let b = contrast_block(&[3], &v(&[0]), &v(&[0])).unwrap();
        assert_eq!(b.nrows(), 2);
        assert_eq!(b.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, 0.0]);
        assert_eq!(b.row(1).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert!(contrast_block(&[2, 2], &v(&[0]), &v(&[0, 1])).is_err());
        assert!(contrast_block(&[2], &v(&[0]), &VarSet::empty()).is_err());
    }

    #[test]
    fn contrast_rows_sum_to_zero() {
        let levels = [2usize, 3, 2, 4];
        for m in VarSet::all_nonempty_subsets(4) {
            for l in m.nonempty_subsets(false) {
                let b = contrast_block(&levels, &m, &l).unwrap();
                for r in 0..b.nrows() {
                    assert_relative_eq!(b.row(r).sum(), 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn assignments_for_chain4_dset_sequence() {
        let g = chain4();
        let margins = g.disconnected_sets();
        let assignments = generate_assignments(4, &margins).unwrap();
        let find = |l: &VarSet| -> VarSet {
            assignments
                .iter()
                .find(|a| a.effects.contains(l))
                .map(|a| a.margin.clone())
                .unwrap()
        };
        // effects land in the first margin containing them
        assert_eq!(find(&v(&[0])), v(&[0, 2])); // 1 -> 13
        assert_eq!(find(&v(&[1])), v(&[1, 3])); // 2 -> 24
        assert_eq!(find(&v(&[0, 1])), v(&[0, 1, 3])); // 12 -> 124
        assert_eq!(find(&v(&[2, 3])), v(&[0, 2, 3])); // 34 -> 134
        assert_eq!(find(&v(&[1, 2])), v(&[0, 1, 2, 3])); // 23 -> 1234
        assert_eq!(find(&v(&[0, 1, 2])), v(&[0, 1, 2, 3])); // 123 -> 1234
        assert_eq!(find(&v(&[0, 1, 3])), v(&[0, 1, 3])); // 124 -> 124
        // the full margin was appended
        assert_eq!(assignments.last().unwrap().margin, VarSet::full(4));
    }

    #[test]
    fn assignment_rejects_decreasing_and_duplicate() {
        assert!(matches!(
            generate_assignments(3, &[v(&[0, 1]), v(&[0])]),
            Err(MllError::DecreasingSequence(_, _))
        ));
        assert!(matches!(
            generate_assignments(3, &[v(&[0]), v(&[0])]),
            Err(MllError::DuplicateMargin(_))
        ));
    }

    #[test]
    fn single_margin_is_ordinary_loglinear() {
        let assignments = generate_assignments(3, &[VarSet::full(3)]).unwrap();
        assert_eq!(assignments.len(), 1);
        assert_eq!(assignments[0].effects.len(), 7);
    }

    #[test]
    fn mvlogistic_assigns_each_effect_to_itself() {
        let vars = binary_vars(&["1", "2", "3"]);
        let scheme = ParamScheme::mvlogistic(&vars).unwrap();
        for a in scheme.assignments() {
            assert_eq!(a.effects, vec![a.margin.clone()]);
        }
        assert_eq!(scheme.param_count(), 7);
    }

    #[test]
    fn scheme_row_counts_are_complete() {
        let vars = vec![
            VariableSpec::new("a", 2).unwrap(),
            VariableSpec::new("b", 3).unwrap(),
            VariableSpec::new("c", 2).unwrap(),
        ];
        for scheme in [
            ParamScheme::mvlogistic(&vars).unwrap(),
            ParamScheme::loglinear(&vars).unwrap(),
        ] {
            assert_eq!(scheme.param_count(), 11);
            let mut effects: Vec<VarSet> =
                scheme.assignments().iter().flat_map(|a| a.effects.clone()).collect();
            effects.sort();
            assert_eq!(effects, VarSet::all_nonempty_subsets(3));
        }
    }

    #[test]
    fn dset_margins_for_chain4() {
        let g = chain4();
        let vars = binary_vars(&["1", "2", "3", "4"]);
        let scheme = ParamScheme::dset(&g, &vars, None).unwrap();
        let names = scheme.variable_names();
        let shown: Vec<String> =
            scheme.margins().iter().map(|m| m.label(&names)).collect();
        assert_eq!(shown, vec!["13", "14", "24", "124", "134", "1234"]);
        // T row count: 4+4+4+8+8+16
        assert_eq!(scheme.marginalization_matrix().nrows(), 44);
    }

    #[test]
    fn dset_complete_graph_is_loglinear() {
        let g = BidirectedGraph::complete(&["1", "2", "3"]).unwrap();
        let vars = binary_vars(&["1", "2", "3"]);
        let scheme = ParamScheme::dset(&g, &vars, None).unwrap();
        assert_eq!(scheme.margins(), vec![VarSet::full(3)]);
    }

    #[test]
    fn dset_rejects_wrong_order() {
        let g = chain4();
        let vars = binary_vars(&["1", "2", "3", "4"]);
        let bad = vec![v(&[0, 2]), v(&[0, 3])];
        assert!(matches!(
            ParamScheme::dset(&g, &vars, Some(&bad)),
            Err(MllError::InvalidOrder(_))
        ));
    }

    #[test]
    fn model_from_graph_q() {
        let g = chain4();
        let vars = binary_vars(&["1", "2", "3", "4"]);
        let model = ModelSpec::from_graph(&g, &vars, SchemeKind::MvLogistic).unwrap();
        assert_eq!(model.q(), 5);
        let model = ModelSpec::from_graph(&g, &vars, SchemeKind::Dset).unwrap();
        assert_eq!(model.q(), 5);
        let complete = BidirectedGraph::complete(&["1", "2", "3", "4"]).unwrap();
        let model = ModelSpec::from_graph(&complete, &vars, SchemeKind::Dset).unwrap();
        assert_eq!(model.q(), 0);
    }

    #[test]
    fn undirected_model_q() {
        let g = chain4();
        let vars = binary_vars(&["1", "2", "3", "4"]);
        let model = ModelSpec::undirected(&g, &vars).unwrap();
        assert_eq!(model.q(), 8);
        // q(undirected) >= q(bi-directed) on the same skeleton
        let bd = ModelSpec::from_graph(&g, &vars, SchemeKind::MvLogistic).unwrap();
        assert!(model.q() >= bd.q());
        let generators = BidirectedGraph::new(
            &["1", "2", "3", "4"],
            &[("1", "2"), ("2", "3"), ("2", "4"), ("3", "4")],
        )
        .unwrap();
        let model = ModelSpec::undirected(&generators, &vars).unwrap();
        assert_eq!(model.q(), 6);
    }

    #[test]
    fn add_zero_blocks_validates() {
        let g = chain4();
        let vars = binary_vars(&["1", "2", "3", "4"]);
        let model = ModelSpec::from_graph(&g, &vars, SchemeKind::Dset).unwrap();
        let full = VarSet::full(4);
        let more = model.add_zero_blocks(&[(full.clone(), full.clone())]).unwrap();
        assert_eq!(more.q(), 6);
        assert!(matches!(
            more.add_zero_blocks(&[(full.clone(), full.clone())]),
            Err(MllError::AlreadyConstrained(_, _))
        ));
        assert!(matches!(
            model.add_zero_blocks(&[(v(&[0]), v(&[0]))]),
            Err(MllError::UnknownBlock(_, _))
        ));
    }

    #[test]
    fn lambda_uniform_is_zero() {
        let vars = binary_vars(&["1", "2", "3"]);
        let scheme = ParamScheme::mvlogistic(&vars).unwrap();
        let lambda = scheme.compute_lambda(&[0.125; 8]).unwrap();
        for &x in lambda.values.iter() {
            assert_relative_eq!(x, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda_single_logit() {
        let vars = binary_vars(&["x"]);
        let scheme = ParamScheme::mvlogistic(&vars).unwrap();
        let lambda = scheme.compute_lambda(&[0.25, 0.75]).unwrap();
        assert_relative_eq!(lambda.values[0], 3.0f64.ln(), epsilon = 1e-12);
        assert!(scheme.compute_lambda(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn loglinear_round_trip() {
        let vars = vec![
            VariableSpec::new("a", 2).unwrap(),
            VariableSpec::new("b", 3).unwrap(),
            VariableSpec::new("c", 2).unwrap(),
        ];
        let scheme = ParamScheme::loglinear(&vars).unwrap();
        let raw: Vec<f64> = (1..=12).map(|i| i as f64).collect();
        let total: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let theta = scheme.compute_lambda(&pi).unwrap();
        let back = scheme.invert_loglinear(&theta.values).unwrap();
        for (a, b) in back.iter().zip(&pi) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn upward_compatibility_of_eta_blocks() {
        // η^M computed from the joint equals η^M computed on any margin ⊇ M
        let vars = vec![
            VariableSpec::new("a", 2).unwrap(),
            VariableSpec::new("b", 3).unwrap(),
            VariableSpec::new("c", 2).unwrap(),
        ];
        let raw: Vec<f64> = (0..12).map(|i| 1.0 + ((i * 7 + 3) % 11) as f64).collect();
        let total: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let table = crate::table::ContingencyTable::new(vars.clone(), pi.clone()).unwrap();
        let full_scheme = ParamScheme::mvlogistic(&vars).unwrap();
        let full_lambda = full_scheme.compute_lambda(&pi).unwrap();

        let sub = VarSet::new([0, 1]);
        let sub_table = table.marginalize(&sub).unwrap();
        let sub_scheme = ParamScheme::mvlogistic(sub_table.variables()).unwrap();
        let sub_lambda = sub_scheme.compute_lambda(sub_table.counts()).unwrap();
        for m_sub in VarSet::all_nonempty_subsets(2) {
            let m_full = VarSet::new(m_sub.iter().map(|i| [0usize, 1][i]));
            let a = full_lambda.block_values(&m_full, &m_full);
            let b = sub_lambda.block_values(&m_sub, &m_sub);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_relative_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn ordered_decomposability_examples() {
        let seq = |sets: &[&[usize]]| -> Vec<VarSet> {
            sets.iter().map(|s| VarSet::new(s.iter().copied())).collect()
        };
        // 4-chain sequence (nodes 0..3): margins 14, 134, 124, 1234
        let m = seq(&[&[0, 3], &[0, 2, 3], &[0, 1, 3], &[0, 1, 2, 3]]);
        assert!(ordered_decomposable(&m, OdMode::Strict).unwrap().decomposable);
        // five-node sequences (nodes 0..4)
        let good = seq(&[
            &[0, 2],
            &[2, 4],
            &[0, 2, 4],
            &[0, 3],
            &[1, 4],
            &[0, 2, 3],
            &[1, 2, 4],
            &[0, 1, 2, 3, 4],
        ]);
        assert!(ordered_decomposable(&good, OdMode::Strict).unwrap().decomposable);
        let bad = seq(&[
            &[0, 2],
            &[0, 3],
            &[1, 4],
            &[2, 4],
            &[0, 2, 3],
            &[0, 2, 4],
            &[1, 2, 4],
            &[0, 1, 2, 3, 4],
        ]);
        let verdict = ordered_decomposable(&bad, OdMode::Strict).unwrap();
        assert!(!verdict.decomposable);
        assert_eq!(
            verdict.failing_prefix.unwrap(),
            seq(&[&[0, 2], &[0, 3], &[1, 4], &[2, 4]])
        );
        // the same prefix admits another ordering, so search mode passes
        assert!(ordered_decomposable(&bad, OdMode::Search).unwrap().decomposable);
        // at most two margins is trivially decomposable
        let two = seq(&[&[0, 1], &[1, 2]]);
        assert!(ordered_decomposable(&two, OdMode::Strict).unwrap().decomposable);
    }

    #[test]
    fn ordered_decomposability_rejects_bad_sequences() {
        let m = vec![v(&[0, 1]), v(&[0])];
        assert!(ordered_decomposable(&m, OdMode::Strict).is_err());
    }
}

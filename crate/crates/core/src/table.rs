//! Contingency tables: cell storage, marginalization, marginalization
//! matrices and CSV ingestion.
//!
//! Cells are kept in lexicographic order with the *last* variable varying
//! fastest, so the first variable is the first Kronecker factor everywhere.

use crate::set::VarSet;
use nalgebra::{DMatrix, DVector};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("variable `{0}` must have at least 2 levels")]
    TooFewLevels(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("margin must be nonempty")]
    EmptyMargin,
    #[error("cell {0:?} out of range")]
    CellOutOfRange(Vec<usize>),
    #[error("count vector has length {got}, expected {want}")]
    WrongLength { got: usize, want: usize },
    #[error("negative count {0}")]
    NegativeCount(f64),
    #[error("duplicate cell row {0:?}")]
    DuplicateCell(Vec<usize>),
    #[error("level index `{0}` is not a positive integer")]
    BadLevel(String),
    #[error("bad count `{0}`")]
    BadCount(String),
    #[error("bad levels declaration `{0}`")]
    BadLevelsDecl(String),
    #[error("header must list variable names plus a final `count` column")]
    BadHeader,
    #[error("row has {got} fields, expected {want}")]
    RaggedRow { got: usize, want: usize },
    #[error("zero cell in odds-ratio slice")]
    ZeroSliceCell,
    #[error("odds-ratio slice underdetermined: assignment missing variable `{0}`")]
    MissingAssignment(String),
    #[error("variables {0:?} do not match table variables")]
    VariableMismatch(Vec<String>),
    #[error("failed to read table file: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
}

/// Name and level count of one categorical variable; levels are `1..=levels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableSpec {
    pub name: String,
    pub levels: usize,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, levels: usize) -> Result<Self, TableError> {
        let name = name.into();
        if levels < 2 {
            return Err(TableError::TooFewLevels(name));
        }
        Ok(VariableSpec { name, levels })
    }
}

/// A table of non-negative cell counts over the product of the variables'
/// level sets, in lexicographic order with the last variable fastest.
#[derive(Clone, Debug)]
pub struct ContingencyTable {
    variables: Vec<VariableSpec>,
    counts: Vec<f64>,
}

impl ContingencyTable {
    pub fn new(variables: Vec<VariableSpec>, counts: Vec<f64>) -> Result<Self, TableError> {
        let t: usize = variables.iter().map(|v| v.levels).product();
        if counts.len() != t {
            return Err(TableError::WrongLength { got: counts.len(), want: t });
        }
        if let Some(&c) = counts.iter().find(|&&c| c < 0.0 || !c.is_finite()) {
            return Err(TableError::NegativeCount(c));
        }
        Ok(ContingencyTable { variables, counts })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.levels).collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Number of cells.
    pub fn cell_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn count_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.counts)
    }

    /// Grand total `N`.
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Flat index of a 1-based cell `(i_1, …, i_d)`.
    pub fn flat_index(&self, cell: &[usize]) -> Result<usize, TableError> {
        flat_index(&self.levels(), cell)
    }

    /// Inverse of [`flat_index`](Self::flat_index); returns 1-based levels.
    pub fn cell_at(&self, mut flat: usize) -> Vec<usize> {
        let levels = self.levels();
        let mut cell = vec![1usize; levels.len()];
        for k in (0..levels.len()).rev() {
            cell[k] = flat % levels[k] + 1;
            flat /= levels[k];
        }
        cell
    }

    /// Sums counts over the variables outside `m`; variable order is
    /// inherited from the parent table.
    pub fn marginalize(&self, m: &VarSet) -> Result<ContingencyTable, TableError> {
        if m.is_empty() {
            return Err(TableError::EmptyMargin);
        }
        for i in m.iter() {
            if i >= self.variables.len() {
                return Err(TableError::IndexOutOfRange(i));
            }
        }
        let kept: Vec<usize> = m.iter().collect();
        let sub_levels: Vec<usize> = kept.iter().map(|&i| self.variables[i].levels).collect();
        let sub_t: usize = sub_levels.iter().product();
        let mut counts = vec![0.0; sub_t];
        for (flat, &c) in self.counts.iter().enumerate() {
            let cell = self.cell_at(flat);
            let sub_cell: Vec<usize> = kept.iter().map(|&i| cell[i]).collect();
            counts[flat_index(&sub_levels, &sub_cell).expect("in range")] += c;
        }
        let variables = kept.iter().map(|&i| self.variables[i].clone()).collect();
        ContingencyTable::new(variables, counts)
    }

    /// Marginalizes by variable names.
    pub fn marginalize_names(&self, names: &[&str]) -> Result<ContingencyTable, TableError> {
        let mut idx = Vec::new();
        for n in names {
            idx.push(self.var_index(n).ok_or_else(|| TableError::UnknownVariable(n.to_string()))?);
        }
        self.marginalize(&VarSet::new(idx))
    }

    /// Returns a copy with the variables permuted into `names` order.
    pub fn reorder(&self, names: &[String]) -> Result<ContingencyTable, TableError> {
        if names.len() != self.variables.len() {
            return Err(TableError::VariableMismatch(names.to_vec()));
        }
        let mut perm = Vec::with_capacity(names.len());
        for n in names {
            perm.push(self.var_index(n).ok_or(TableError::VariableMismatch(names.to_vec()))?);
        }
        let variables: Vec<VariableSpec> = perm.iter().map(|&i| self.variables[i].clone()).collect();
        let new_levels: Vec<usize> = variables.iter().map(|v| v.levels).collect();
        let mut counts = vec![0.0; self.counts.len()];
        for (flat, &c) in self.counts.iter().enumerate() {
            let cell = self.cell_at(flat);
            let new_cell: Vec<usize> = perm.iter().map(|&i| cell[i]).collect();
            counts[flat_index(&new_levels, &new_cell).expect("in range")] = c;
        }
        ContingencyTable::new(variables, counts)
    }

    /// Cross-product ratio of the 2×2 slice of variables `a` (levels
    /// `a_levels`) and `b` (levels `b_levels`), at the cell given by
    /// `given` for every remaining variable.
    pub fn conditional_odds_ratio_levels(
        &self,
        a: usize,
        a_levels: (usize, usize),
        b: usize,
        b_levels: (usize, usize),
        given: &[(usize, usize)],
    ) -> Result<f64, TableError> {
        let d = self.variables.len();
        if a >= d {
            return Err(TableError::IndexOutOfRange(a));
        }
        if b >= d {
            return Err(TableError::IndexOutOfRange(b));
        }
        let mut cell = vec![0usize; d];
        for &(v, level) in given {
            if v >= d {
                return Err(TableError::IndexOutOfRange(v));
            }
            cell[v] = level;
        }
        for (v, &level) in cell.iter().enumerate() {
            if v != a && v != b && level == 0 {
                return Err(TableError::MissingAssignment(self.variables[v].name.clone()));
            }
        }
        let mut slice = [[0.0; 2]; 2];
        for (ia, &la) in [a_levels.0, a_levels.1].iter().enumerate() {
            for (ib, &lb) in [b_levels.0, b_levels.1].iter().enumerate() {
                cell[a] = la;
                cell[b] = lb;
                let c = self.counts[self.flat_index(&cell)?];
                if c == 0.0 {
                    return Err(TableError::ZeroSliceCell);
                }
                slice[ia][ib] = c;
            }
        }
        Ok(slice[0][0] * slice[1][1] / (slice[0][1] * slice[1][0]))
    }

    /// [`conditional_odds_ratio_levels`](Self::conditional_odds_ratio_levels)
    /// with the default level pair `(1, 2)` for both variables.
    pub fn conditional_odds_ratio(
        &self,
        a: usize,
        b: usize,
        given: &[(usize, usize)],
    ) -> Result<f64, TableError> {
        self.conditional_odds_ratio_levels(a, (1, 2), b, (1, 2), given)
    }

    /// Parses the cell-count CSV format.
    ///
    /// The header row lists the variable names plus a final `count` column;
    /// each data row gives 1-based level indices and a non-negative count.
    /// Missing cells are zero. Lines starting with `#` are comments, except
    /// that `# levels: 2,3,2` pins the level counts (otherwise the maximum
    /// observed index is used).
    pub fn parse_csv(text: &str) -> Result<ContingencyTable, TableError> {
        let mut declared: Option<Vec<usize>> = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(spec) = rest.strip_prefix("levels:") {
                    let levels: Result<Vec<usize>, _> =
                        spec.split(',').map(|s| s.trim().parse::<usize>()).collect();
                    match levels {
                        Ok(v) if !v.is_empty() && v.iter().all(|&l| l >= 2) => declared = Some(v),
                        _ => return Err(TableError::BadLevelsDecl(spec.trim().to_string())),
                    }
                }
            }
        }

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.len() < 2 || header.iter().next_back() != Some("count") {
            return Err(TableError::BadHeader);
        }
        let names: Vec<String> = header.iter().take(header.len() - 1).map(String::from).collect();
        let d = names.len();
        if let Some(decl) = &declared {
            if decl.len() != d {
                return Err(TableError::BadLevelsDecl(format!(
                    "{} level counts for {} variables",
                    decl.len(),
                    d
                )));
            }
        }

        let mut rows: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut seen: std::collections::HashSet<Vec<usize>> = std::collections::HashSet::new();
        let mut max_level = vec![1usize; d];
        for record in rdr.records() {
            let record = record?;
            if record.len() != d + 1 {
                return Err(TableError::RaggedRow { got: record.len(), want: d + 1 });
            }
            let mut cell = Vec::with_capacity(d);
            for k in 0..d {
                let field = &record[k];
                let level: usize =
                    field.parse().map_err(|_| TableError::BadLevel(field.to_string()))?;
                if level == 0 {
                    return Err(TableError::BadLevel(field.to_string()));
                }
                max_level[k] = max_level[k].max(level);
                cell.push(level);
            }
            let count_field = &record[d];
            let count: f64 =
                count_field.parse().map_err(|_| TableError::BadCount(count_field.to_string()))?;
            if !count.is_finite() {
                return Err(TableError::BadCount(count_field.to_string()));
            }
            if count < 0.0 {
                return Err(TableError::NegativeCount(count));
            }
            if !seen.insert(cell.clone()) {
                return Err(TableError::DuplicateCell(cell));
            }
            rows.push((cell, count));
        }

        let levels = match declared {
            Some(decl) => {
                for (k, (&have, &seen)) in decl.iter().zip(&max_level).enumerate() {
                    if seen > have {
                        return Err(TableError::BadLevelsDecl(format!(
                            "declared {have} levels for `{}` but saw index {seen}",
                            names[k]
                        )));
                    }
                }
                decl
            }
            None => {
                if let Some(k) = max_level.iter().position(|&l| l < 2) {
                    return Err(TableError::TooFewLevels(names[k].clone()));
                }
                max_level
            }
        };

        let t: usize = levels.iter().product();
        let mut counts = vec![0.0; t];
        let mut filled = vec![false; t];
        for (cell, count) in rows {
            let idx = flat_index(&levels, &cell)?;
            if filled[idx] {
                return Err(TableError::DuplicateCell(cell));
            }
            filled[idx] = true;
            counts[idx] = count;
        }
        let variables = names
            .into_iter()
            .zip(levels)
            .map(|(name, levels)| VariableSpec::new(name, levels))
            .collect::<Result<Vec<_>, _>>()?;
        ContingencyTable::new(variables, counts)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<ContingencyTable, TableError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }
}

fn flat_index(levels: &[usize], cell: &[usize]) -> Result<usize, TableError> {
    if cell.len() != levels.len() {
        return Err(TableError::CellOutOfRange(cell.to_vec()));
    }
    let mut idx = 0usize;
    for (k, (&i, &b)) in cell.iter().zip(levels).enumerate() {
        if i < 1 || i > b {
            return Err(TableError::CellOutOfRange(cell.to_vec()));
        }
        let stride: usize = levels[k + 1..].iter().product();
        idx += (i - 1) * stride;
    }
    Ok(idx)
}

/// Stacked 0/1 marginalization matrix for an ordered list of margins.
///
/// The block for margin `M` maps the full probability vector to the margin's
/// cell vector in the same last-variable-fastest convention, so `T π` stacks
/// `π^{M_1}, …, π^{M_s}`.
pub fn build_t(levels: &[usize], margins: &[VarSet]) -> Result<DMatrix<f64>, TableError> {
    let d = levels.len();
    let t: usize = levels.iter().product();
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(margins.len());
    for m in margins {
        if m.is_empty() {
            return Err(TableError::EmptyMargin);
        }
        for i in m.iter() {
            if i >= d {
                return Err(TableError::IndexOutOfRange(i));
            }
        }
        // Kronecker product over variables in declared order: identity for
        // kept variables, a summing row for marginalized ones.
        let mut block = DMatrix::from_element(1, 1, 1.0);
        for (v, &b_v) in levels.iter().enumerate() {
            let factor = if m.contains(v) {
                DMatrix::identity(b_v, b_v)
            } else {
                DMatrix::from_element(1, b_v, 1.0)
            };
            block = block.kronecker(&factor);
        }
        blocks.push(block);
    }
    let m_rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(m_rows, t);
    let mut row = 0;
    for block in blocks {
        out.view_mut((row, 0), (block.nrows(), t)).copy_from(&block);
        row += block.nrows();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binary_vars(names: &[&str]) -> Vec<VariableSpec> {
        names.iter().map(|n| VariableSpec::new(*n, 2).unwrap()).collect()
    }

    #[test]
    fn flat_index_round_trips() {
        let t = ContingencyTable::new(
            vec![
                VariableSpec::new("a", 2).unwrap(),
                VariableSpec::new("b", 3).unwrap(),
                VariableSpec::new("c", 2).unwrap(),
            ],
            vec![0.0; 12],
        )
        .unwrap();
        for flat in 0..12 {
            let cell = t.cell_at(flat);
            assert_eq!(t.flat_index(&cell).unwrap(), flat);
        }
        // last variable fastest: (1,1,2) is the second cell
        assert_eq!(t.flat_index(&[1, 1, 2]).unwrap(), 1);
        assert_eq!(t.flat_index(&[1, 2, 1]).unwrap(), 2);
        assert!(t.flat_index(&[3, 1, 1]).is_err());
    }

    #[test]
    fn marginalize_2x2() {
        let t = ContingencyTable::new(binary_vars(&["x", "y"]), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = t.marginalize(&VarSet::new([0])).unwrap();
        assert_eq!(m.counts(), &[3.0, 7.0]);
        let full = t.marginalize(&VarSet::new([0, 1])).unwrap();
        assert_eq!(full.counts(), t.counts());
        assert!(t.marginalize(&VarSet::empty()).is_err());
    }

    #[test]
    fn marginalize_composes() {
        let t = ContingencyTable::new(
            binary_vars(&["a", "b", "c"]),
            (1..=8).map(|x| x as f64).collect(),
        )
        .unwrap();
        let ab = t.marginalize(&VarSet::new([0, 1])).unwrap();
        let a_direct = t.marginalize(&VarSet::new([0])).unwrap();
        let a_via = ab.marginalize(&VarSet::new([0])).unwrap();
        assert_eq!(a_direct.counts(), a_via.counts());
    }

    #[test]
    fn build_t_blocks() {
        let t = build_t(&[2, 2], &[VarSet::new([0]), VarSet::new([1]), VarSet::new([0, 1])])
            .unwrap();
        assert_eq!(t.nrows(), 8);
        assert_eq!(t.ncols(), 4);
        assert_eq!(t.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 1.0]);
        // identity block for the full margin
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(t[(4 + i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
        // column sums within one block are 1
        let single = build_t(&[2, 2], &[VarSet::new([1])]).unwrap();
        for j in 0..4 {
            assert_relative_eq!(single.column(j).sum(), 1.0);
        }
        assert!(build_t(&[2, 2], &[VarSet::empty()]).is_err());
    }

    #[test]
    fn t_matrix_matches_marginalize() {
        let levels = [2usize, 3, 2];
        let counts: Vec<f64> = (0..12).map(|i| (i * i + 1) as f64).collect();
        let table = ContingencyTable::new(
            vec![
                VariableSpec::new("a", 2).unwrap(),
                VariableSpec::new("b", 3).unwrap(),
                VariableSpec::new("c", 2).unwrap(),
            ],
            counts.clone(),
        )
        .unwrap();
        let margins = [VarSet::new([0, 2]), VarSet::new([1])];
        let t = build_t(&levels, &margins).unwrap();
        let stacked = &t * DVector::from_column_slice(&counts);
        let mut expect = Vec::new();
        for m in &margins {
            expect.extend_from_slice(table.marginalize(m).unwrap().counts());
        }
        for (a, b) in stacked.iter().zip(&expect) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn odds_ratio_uniform_slice() {
        let t = ContingencyTable::new(binary_vars(&["a", "b", "c"]), vec![2.0; 8]).unwrap();
        let or = t.conditional_odds_ratio(0, 1, &[(2, 1)]).unwrap();
        assert_relative_eq!(or, 1.0);
        // zero cell in slice errors
        let mut counts = vec![2.0; 8];
        counts[0] = 0.0;
        let t = ContingencyTable::new(binary_vars(&["a", "b", "c"]), counts).unwrap();
        assert!(matches!(
            t.conditional_odds_ratio(0, 1, &[(2, 1)]),
            Err(TableError::ZeroSliceCell)
        ));
    }

    #[test]
    fn parse_basic_and_missing_cells() {
        // a single observed level cannot be inferred as a 2-level variable
        assert!(matches!(
            ContingencyTable::parse_csv("a,b,count\n1,1,5\n"),
            Err(TableError::TooFewLevels(_))
        ));
        let text = "# levels: 2,2\na,b,count\n1,1,5\n";
        let t = ContingencyTable::parse_csv(text).unwrap();
        assert_eq!(t.counts(), &[5.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.total(), 5.0);
        // inference from fully observed cells
        let text = "a,b,count\n1,1,1\n1,2,2\n2,1,3\n2,2,4\n";
        let t = ContingencyTable::parse_csv(text).unwrap();
        assert_eq!(t.levels(), vec![2, 2]);
        assert_eq!(t.counts(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(matches!(
            ContingencyTable::parse_csv("a,b,count\n1,1,5\n1,1,3\n"),
            Err(TableError::DuplicateCell(_))
        ));
        assert!(matches!(
            ContingencyTable::parse_csv("a,b,count\n1,x,5\n"),
            Err(TableError::BadLevel(_))
        ));
        assert!(matches!(
            ContingencyTable::parse_csv("a,b,count\n1,2,-3\n"),
            Err(TableError::NegativeCount(_))
        ));
        assert!(matches!(
            ContingencyTable::parse_csv("a,b,n\n1,2,3\n"),
            Err(TableError::BadHeader)
        ));
        assert!(matches!(
            ContingencyTable::parse_csv("# levels: 2\na,b,count\n1,2,3\n"),
            Err(TableError::BadLevelsDecl(_))
        ));
        assert!(matches!(
            ContingencyTable::parse_csv("# levels: 2,2\na,b,count\n1,3,4\n"),
            Err(TableError::BadLevelsDecl(_))
        ));
    }

    #[test]
    fn reorder_permutes_axes() {
        let t = ContingencyTable::new(
            vec![VariableSpec::new("a", 2).unwrap(), VariableSpec::new("b", 3).unwrap()],
            (1..=6).map(|x| x as f64).collect(),
        )
        .unwrap();
        let r = t.reorder(&["b".into(), "a".into()]).unwrap();
        assert_eq!(r.names(), vec!["b", "a"]);
        // (a=2, b=3) count 6 becomes cell (b=3, a=2)
        assert_eq!(r.counts()[r.flat_index(&[3, 2]).unwrap()], 6.0);
        let back = r.reorder(&["a".into(), "b".into()]).unwrap();
        assert_eq!(back.counts(), t.counts());
        assert!(t.reorder(&["a".into(), "z".into()]).is_err());
    }
}

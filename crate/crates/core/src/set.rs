//! Small sorted index sets used for node subsets, margins and effect sets.

use std::cmp::Ordering;
use std::fmt;

/// A subset of variables, stored as sorted, deduplicated indices into a fixed
/// variable order.
///
/// The ordering is canonical for the whole crate: first by cardinality, then
/// lexicographically on the sorted index list. Margin sequences, disconnected
/// sets and report rows all use it.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct VarSet(Vec<usize>);

impl VarSet {
    /// Builds a set from arbitrary indices; duplicates collapse.
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VarSet(v)
    }

    /// The full set `{0, .., d-1}`.
    pub fn full(d: usize) -> Self {
        VarSet((0..d).collect())
    }

    pub fn empty() -> Self {
        VarSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }

    pub fn is_superset(&self, other: &VarSet) -> bool {
        other.is_subset(self)
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        VarSet::new(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &VarSet) -> VarSet {
        VarSet(self.iter().filter(|i| other.contains(*i)).collect())
    }

    pub fn difference(&self, other: &VarSet) -> VarSet {
        VarSet(self.iter().filter(|i| !other.contains(*i)).collect())
    }

    pub fn is_disjoint(&self, other: &VarSet) -> bool {
        self.intersection(other).is_empty()
    }

    /// Renders the set with the given variable names. Single-character names
    /// concatenate (`134`, `CF`), longer names join with commas (`X1,X3`).
    pub fn label(&self, names: &[String]) -> String {
        let parts: Vec<&str> = self.0.iter().map(|&i| names[i].as_str()).collect();
        if parts.iter().all(|p| p.chars().count() == 1) {
            parts.concat()
        } else {
            parts.join(",")
        }
    }

    /// All nonempty subsets of `{0, .., d-1}` in canonical order.
    pub fn all_nonempty_subsets(d: usize) -> Vec<VarSet> {
        let mut out: Vec<VarSet> = (1u32..(1u32 << d))
            .map(|mask| VarSet::new((0..d).filter(|&i| mask & (1 << i) != 0)))
            .collect();
        out.sort();
        out
    }

    /// Nonempty subsets of this set, in canonical order, excluding the set
    /// itself when `proper` is set.
    pub fn nonempty_subsets(&self, proper: bool) -> Vec<VarSet> {
        let elems = &self.0;
        let n = elems.len();
        let mut out: Vec<VarSet> = (1u32..(1u32 << n))
            .map(|mask| VarSet::new((0..n).filter(|&i| mask & (1 << i) != 0).map(|i| elems[i])))
            .filter(|s| !proper || s.len() < n)
            .collect();
        out.sort();
        out
    }
}

impl Ord for VarSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for VarSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for VarSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        VarSet::new(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_size_then_lex() {
        let mut sets = [VarSet::new([0, 2, 3]),
            VarSet::new([1, 3]),
            VarSet::new([0, 1, 3]),
            VarSet::new([0, 2])];
        sets.sort();
        let flat: Vec<Vec<usize>> = sets.iter().map(|s| s.as_slice().to_vec()).collect();
        assert_eq!(flat, vec![vec![0, 2], vec![1, 3], vec![0, 1, 3], vec![0, 2, 3]]);
    }

    #[test]
    fn lex_tiebreak_uses_elements_not_masks() {
        // {0,3} precedes {1,2} even though its bitmask value is larger
        assert!(VarSet::new([0, 3]) < VarSet::new([1, 2]));
    }

    #[test]
    fn subset_enumeration() {
        let s = VarSet::new([1, 4]);
        let subs = s.nonempty_subsets(false);
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[0], VarSet::new([1]));
        assert_eq!(subs[1], VarSet::new([4]));
        assert_eq!(subs[2], VarSet::new([1, 4]));
        assert_eq!(s.nonempty_subsets(true).len(), 2);
        assert_eq!(VarSet::all_nonempty_subsets(4).len(), 15);
    }

    #[test]
    fn labels_concat_when_single_char() {
        let names: Vec<String> = ["1", "2", "3"].iter().map(|s| s.to_string()).collect();
        assert_eq!(VarSet::new([0, 2]).label(&names), "13");
        let long: Vec<String> = ["X1", "X2", "X3"].iter().map(|s| s.to_string()).collect();
        assert_eq!(VarSet::new([0, 2]).label(&long), "X1,X3");
    }
}

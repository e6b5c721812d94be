//! Binary relations over `0..n`, used for both world and event accessibility.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

/// A relation on `0..n` stored as sorted successor lists.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Relation {
    succ: Vec<Vec<usize>>,
}

/// A reason a relation fails to be an equivalence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Reflexivity { at: usize },
    Symmetry { from: usize, to: usize },
    Transitivity { first: usize, middle: usize, last: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Reflexivity { at } => write!(f, "missing self-loop at {at}"),
            Violation::Symmetry { from, to } => {
                write!(f, "edge {from} -> {to} has no reverse edge")
            }
            Violation::Transitivity { first, middle, last } => write!(
                f,
                "edges {first} -> {middle} -> {last} without {first} -> {last}"
            ),
        }
    }
}

impl Relation {
    pub fn empty(n: usize) -> Relation {
        Relation { succ: vec![Vec::new(); n] }
    }

    pub fn identity(n: usize) -> Relation {
        Relation { succ: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn universal(n: usize) -> Relation {
        Relation { succ: (0..n).map(|_| (0..n).collect()).collect() }
    }

    /// Builds a relation from explicit pairs. Out-of-range indices panic.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Relation {
        let mut sets = vec![BTreeSet::new(); n];
        for (u, v) in pairs {
            assert!(u < n && v < n, "relation pair ({u}, {v}) out of range for {n} elements");
            sets[u].insert(v);
        }
        Relation { succ: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    /// The equivalence whose classes are the given blocks; elements not covered
    /// by any block form singleton classes. Overlapping blocks are merged.
    pub fn from_blocks<B: IntoIterator<Item = usize>>(
        n: usize,
        blocks: impl IntoIterator<Item = B>,
    ) -> Relation {
        let mut pairs = Vec::new();
        for block in blocks {
            let block: Vec<usize> = block.into_iter().collect();
            for &u in &block {
                for &v in &block {
                    pairs.push((u, v));
                }
            }
        }
        Relation::from_pairs(n, pairs).equivalence_closure()
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.succ[u]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.succ[u].binary_search(&v).is_ok()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    /// All reasons this relation is not an equivalence, in a fixed order.
    pub fn violations(&self) -> Vec<Violation> {
        let n = self.len();
        let mut out = Vec::new();
        for u in 0..n {
            if !self.contains(u, u) {
                out.push(Violation::Reflexivity { at: u });
            }
        }
        for (u, v) in self.pairs() {
            if !self.contains(v, u) {
                out.push(Violation::Symmetry { from: u, to: v });
            }
        }
        for (u, v) in self.pairs() {
            for &w in self.successors(v) {
                if !self.contains(u, w) {
                    out.push(Violation::Transitivity { first: u, middle: v, last: w });
                }
            }
        }
        out
    }

    pub fn is_equivalence(&self) -> bool {
        self.violations().is_empty()
    }

    /// Smallest equivalence containing the relation.
    pub fn equivalence_closure(&self) -> Relation {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = x;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for (u, v) in self.pairs().collect::<Vec<_>>() {
            let ru = find(&mut parent, u);
            let rv = find(&mut parent, v);
            if ru != rv {
                parent[ru.max(rv)] = ru.min(rv);
            }
        }
        let roots: Vec<usize> = (0..n).map(|x| find(&mut parent, x)).collect();
        Relation {
            succ: (0..n)
                .map(|u| (0..n).filter(|&v| roots[v] == roots[u]).collect())
                .collect(),
        }
    }

    /// Restriction to the kept elements, renumbered in the order given.
    pub fn restrict(&self, keep: &[usize]) -> Relation {
        let mut index = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        Relation {
            succ: keep
                .iter()
                .map(|&old| {
                    let mut vs: Vec<usize> = self.succ[old]
                        .iter()
                        .filter_map(|&v| (index[v] != usize::MAX).then_some(index[v]))
                        .collect();
                    vs.sort_unstable();
                    vs
                })
                .collect(),
        }
    }

    /// Equivalence classes, each sorted, listed by smallest member.
    /// Only meaningful for equivalences.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for u in 0..self.len() {
            if !seen[u] {
                let class: Vec<usize> = self.succ[u].clone();
                for &v in &class {
                    seen[v] = true;
                }
                out.push(class);
            }
        }
        out
    }
}

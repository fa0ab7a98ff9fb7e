//! Free factor systems as sets of core graphs over the rose.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::MarkedGraph;
use crate::stallings::SubgroupGraph;
use crate::word::{self, DirEdge, Word};

/// Non-increasing sequence of component ranks; empty for the trivial system.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Complexity(pub Vec<usize>);

impl Complexity {
    pub fn new(mut ranks: Vec<usize>) -> Self {
        ranks.retain(|&r| r > 0);
        ranks.sort_unstable_by(|a, b| b.cmp(a));
        Complexity(ranks)
    }
}

impl Ord for Complexity {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Complexity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub fn cx_compare(a: &Complexity, b: &Complexity) -> Ordering {
    a.cmp(b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeFactorSystem {
    pub components: Vec<SubgroupGraph>,
    /// Set when every component is known to be a free factor.
    pub certified: bool,
}

impl FreeFactorSystem {
    pub fn trivial() -> Self {
        FreeFactorSystem {
            components: Vec::new(),
            certified: true,
        }
    }

    /// Components generated by the given word lists. Free-factor-ness is
    /// not checked.
    pub fn from_generators(lists: &[Vec<Word>]) -> Self {
        let mut f = FreeFactorSystem {
            components: lists.iter().map(|l| SubgroupGraph::from_words(l)).collect(),
            certified: false,
        };
        f.normalize();
        f
    }

    /// Components generated by disjoint sets of standard generators.
    pub fn from_letter_sets(sets: &[Vec<usize>]) -> Self {
        let lists: Vec<Vec<Word>> = sets
            .iter()
            .map(|s| s.iter().map(|&i| vec![DirEdge::fwd(i)]).collect())
            .collect();
        let mut f = Self::from_generators(&lists);
        let mut seen = std::collections::BTreeSet::new();
        f.certified = sets.iter().flatten().all(|i| seen.insert(*i));
        f
    }

    fn normalize(&mut self) {
        let mut comps: Vec<(Vec<(usize, i32, usize)>, SubgroupGraph)> = self
            .components
            .iter()
            .map(|c| c.core())
            .filter(|c| c.rank() > 0)
            .map(|c| (c.conjugacy_canonical(), c))
            .collect();
        comps.sort_by(|a, b| a.0.cmp(&b.0));
        comps.dedup_by(|a, b| a.0 == b.0);
        self.components = comps.into_iter().map(|(_, c)| c).collect();
    }

    pub fn keys(&self) -> Vec<Vec<(usize, i32, usize)>> {
        self.components.iter().map(|c| c.conjugacy_canonical()).collect()
    }

    /// Equality of conjugacy-class sets.
    pub fn same_as(&self, other: &FreeFactorSystem) -> bool {
        self.keys() == other.keys()
    }

    pub fn complexity(&self) -> Complexity {
        Complexity::new(self.components.iter().map(|c| c.rank()).collect())
    }

    pub fn is_trivial(&self) -> bool {
        self.components.is_empty()
    }

    pub fn carries(&self, gamma: &[DirEdge]) -> bool {
        self.components.iter().any(|c| c.carries_cyclic(gamma))
    }

    /// Image under an automorphism given by generator images.
    pub fn image(&self, images: &[Word]) -> FreeFactorSystem {
        let lists: Vec<Vec<Word>> = self
            .components
            .iter()
            .map(|c| {
                c.generators()
                    .iter()
                    .map(|g| {
                        let raw: Word = g
                            .iter()
                            .flat_map(|&x| {
                                let w = &images[x.index()];
                                if x.is_forward() {
                                    w.clone()
                                } else {
                                    word::inverse(w)
                                }
                            })
                            .collect();
                        word::reduce(&raw)
                    })
                    .collect()
            })
            .collect();
        let mut f = Self::from_generators(&lists);
        f.certified = self.certified;
        f
    }
}

/// The system carried by the subgraph spanned by `edges`: one component per
/// noncontractible connected piece.
pub fn ffs_from_subgraph(g: &MarkedGraph, edges: &[usize]) -> FreeFactorSystem {
    let gr = &g.graph;
    let all: Vec<usize> = (0..gr.edge_count()).collect();
    let from_base = gr.tree_paths(&all, g.base);
    let mut lists = Vec::new();
    for comp in gr.components(edges) {
        let root = comp[0];
        let local = gr.tree_paths(edges, root);
        let comp_edges: Vec<usize> = edges
            .iter()
            .copied()
            .filter(|&e| local[gr.ends[e].0].is_some())
            .collect();
        if gr.rank_of(&comp_edges) == 0 {
            continue;
        }
        let lead = from_base[root].clone().expect("marked graph is connected");
        let mut gens = Vec::new();
        for &e in &comp_edges {
            let (u, v) = gr.ends[e];
            let (pu, pv) = (local[u].as_ref().unwrap(), local[v].as_ref().unwrap());
            let loop_ = word::concat(&[&lead, pu, &[DirEdge::fwd(e)], &word::inverse(pv), &word::inverse(&lead)]);
            let w = g.express(&loop_);
            if !w.is_empty() {
                gens.push(w);
            }
        }
        lists.push(gens);
    }
    let mut f = FreeFactorSystem::from_generators(&lists);
    f.certified = true;
    f
}

/// All nontrivial classes `[[F¹ ∩ (F²)^c]]` from fiber products of components.
pub fn meet(a: &FreeFactorSystem, b: &FreeFactorSystem) -> FreeFactorSystem {
    let mut comps = Vec::new();
    for x in &a.components {
        for y in &b.components {
            for c in x.core().fiber_product(&y.core()) {
                let core = c.core();
                if core.rank() > 0 {
                    comps.push(core);
                }
            }
        }
    }
    let mut f = FreeFactorSystem {
        components: comps,
        certified: a.certified && b.certified,
    };
    f.normalize();
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Alphabet;

    fn w(s: &str) -> Word {
        Alphabet::standard(3).parse(s).unwrap()
    }

    fn sys(lists: &[&[&str]]) -> FreeFactorSystem {
        FreeFactorSystem::from_generators(&lists.iter().map(|l| l.iter().map(|s| w(s)).collect()).collect::<Vec<_>>())
    }

    #[test]
    fn complexity_chain() {
        let c = |v: &[usize]| Complexity::new(v.to_vec());
        assert!(c(&[5, 3, 3, 1]) > c(&[4, 4, 4, 4, 4]));
        assert!(c(&[4, 4, 4, 4, 4]) > c(&[4]));
        assert!(c(&[4]) > c(&[]));
        assert_eq!(cx_compare(&c(&[3]), &c(&[3])), Ordering::Equal);
        assert_eq!(c(&[1, 3, 0]).0, vec![3, 1]);
        assert_eq!(c(&[]).to_string(), "0");
    }

    #[test]
    fn subgraph_systems() {
        let rose = MarkedGraph::rose(3);
        assert_eq!(ffs_from_subgraph(&rose, &[0, 1, 2]).complexity().0, vec![3]);
        assert_eq!(ffs_from_subgraph(&rose, &[1]).complexity().0, vec![1]);
        assert_eq!(ffs_from_subgraph(&rose, &[0, 2]).complexity().0, vec![2]);
        assert!(ffs_from_subgraph(&rose, &[]).is_trivial());
    }

    #[test]
    fn disjoint_loops() {
        // Theta-like graph: two loops joined by an arc.
        let g = crate::graph::Graph::new(2, vec![(0, 0), (0, 1), (1, 1)]).unwrap();
        let m = MarkedGraph::from_parts(g, 0, vec![vec![DirEdge::fwd(0)], vec![DirEdge::fwd(1), DirEdge::fwd(2), DirEdge::rev(1)]], vec![w("a"), vec![], w("b")])
            .unwrap();
        let f = ffs_from_subgraph(&m, &[0, 2]);
        assert_eq!(f.complexity().0, vec![1, 1]);
        assert!(f.carries(&w("a")) && f.carries(&w("b")) && !f.carries(&w("ab")));
    }

    #[test]
    fn meets() {
        let f = sys(&[&["a", "b"]]);
        assert!(meet(&f, &f).same_as(&f));
        assert!(meet(&sys(&[&["a"]]), &sys(&[&["b"]])).is_trivial());
        let m = meet(&sys(&[&["a", "b"]]), &sys(&[&["b", "c"]]));
        assert!(m.same_as(&sys(&[&["b"]])));
        let m = meet(&sys(&[&["a", "b"]]), &sys(&[&["cbC"]]));
        assert!(m.carries(&w("b")));
    }

    #[test]
    fn carrying() {
        let f = sys(&[&["a"]]);
        assert!(f.carries(&w("a")));
        assert!(!f.carries(&w("ab")));
        assert!(f.carries(&w("baB")) && f.carries(&w("bAB")));
        assert!(sys(&[&["a", "b"]]).carries(&w("aba")));
    }
}

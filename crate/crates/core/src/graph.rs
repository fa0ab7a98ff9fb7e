//! Finite graphs, tight edge paths, circuits and markings.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{self, DirEdge, Word};

/// An edge path, stored as its sequence of directed edges.
pub type Path = Vec<DirEdge>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Graph {
    pub vertex_count: usize,
    /// `(initial, terminal)` vertex of each edge in its forward orientation.
    pub ends: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(vertex_count: usize, ends: Vec<(usize, usize)>) -> Result<Self> {
        for (i, &(u, v)) in ends.iter().enumerate() {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidInput(format!("edge {i} has an endpoint outside the vertex set")));
            }
        }
        Ok(Graph { vertex_count, ends })
    }

    pub fn rose(n: usize) -> Self {
        Graph {
            vertex_count: 1,
            ends: vec![(0, 0); n],
        }
    }

    pub fn edge_count(&self) -> usize {
        self.ends.len()
    }

    pub fn init(&self, e: DirEdge) -> usize {
        let (u, v) = self.ends[e.index()];
        if e.is_forward() {
            u
        } else {
            v
        }
    }

    pub fn term(&self, e: DirEdge) -> usize {
        self.init(e.inv())
    }

    /// Directed edges leaving `v`.
    pub fn star(&self, v: usize) -> Vec<DirEdge> {
        DirEdge::all(self.edge_count()).filter(|&e| self.init(e) == v).collect()
    }

    pub fn valence(&self, v: usize) -> usize {
        self.star(v).len()
    }

    pub fn stars(&self) -> Vec<Vec<DirEdge>> {
        let mut s = vec![Vec::new(); self.vertex_count];
        for e in DirEdge::all(self.edge_count()) {
            s[self.init(e)].push(e);
        }
        s
    }

    /// Connected components of the subgraph spanned by `edges`, as vertex sets.
    /// Vertices not touched by any edge are omitted.
    pub fn components(&self, edges: &[usize]) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let n = p[y];
                p[y] = r;
                y = n;
            }
            r
        }
        let mut touched = vec![false; self.vertex_count];
        for &i in edges {
            let (u, v) = self.ends[i];
            touched[u] = true;
            touched[v] = true;
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.vertex_count];
        for v in 0..self.vertex_count {
            if !touched[v] {
                continue;
            }
            let r = find(&mut parent, v);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(v);
        }
        groups
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let all: Vec<usize> = (0..self.edge_count()).collect();
        let comps = self.components(&all);
        comps.len() == 1 && comps[0].len() == self.vertex_count || self.vertex_count == 1
    }

    /// Euler-characteristic rank of the subgraph spanned by `edges`.
    pub fn rank_of(&self, edges: &[usize]) -> usize {
        let comps = self.components(edges);
        let verts: usize = comps.iter().map(|c| c.len()).sum();
        (edges.len() + comps.len()) - verts
    }

    pub fn rank(&self) -> usize {
        let all: Vec<usize> = (0..self.edge_count()).collect();
        if self.edge_count() == 0 {
            return 0;
        }
        self.rank_of(&all)
    }

    /// Breadth-first spanning forest of the subgraph spanned by `edges`,
    /// rooted at `root`. Returns for each reached vertex the tree path from
    /// the root (None when unreached).
    pub fn tree_paths(&self, edges: &[usize], root: usize) -> Vec<Option<Path>> {
        let mut allowed = vec![false; self.edge_count()];
        for &i in edges {
            allowed[i] = true;
        }
        let stars = self.stars();
        let mut paths: Vec<Option<Path>> = vec![None; self.vertex_count];
        paths[root] = Some(Vec::new());
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &e in &stars[u] {
                if !allowed[e.index()] {
                    continue;
                }
                let v = self.term(e);
                if paths[v].is_none() {
                    let mut p = paths[u].clone().unwrap();
                    p.push(e);
                    paths[v] = Some(p);
                    queue.push_back(v);
                }
            }
        }
        paths
    }

    pub fn check_path(&self, p: &[DirEdge]) -> Result<()> {
        for &e in p {
            if e.index() >= self.edge_count() {
                return Err(Error::MalformedPath(format!("edge {e:?} not in graph")));
            }
        }
        for (i, w) in p.windows(2).enumerate() {
            if self.term(w[0]) != self.init(w[1]) {
                return Err(Error::MalformedPath(format!(
                    "edges {} and {} are not endpoint-compatible",
                    i,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Unique tight path homotopic rel endpoints.
    pub fn tighten(&self, p: &[DirEdge]) -> Result<Path> {
        self.check_path(p)?;
        Ok(word::reduce(p))
    }

    pub fn is_closed(&self, p: &[DirEdge]) -> bool {
        p.is_empty() || self.init(p[0]) == self.term(p[p.len() - 1])
    }

    /// Cyclically reduced canonical circuit.
    pub fn cyclic_reduce(&self, p: &[DirEdge]) -> Result<Circuit> {
        self.check_path(p)?;
        if !self.is_closed(p) {
            return Err(Error::MalformedPath("circuit is not closed".into()));
        }
        Circuit::from_closed(p)
    }
}

/// A cyclically reduced loop stored in its least rotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Circuit(pub Vec<DirEdge>);

impl Circuit {
    /// Requires `p` to be a closed, endpoint-compatible path.
    pub fn from_closed(p: &[DirEdge]) -> Result<Circuit> {
        let key = word::conjugacy_key(p);
        if key.is_empty() {
            return Err(Error::TrivialCircuit);
        }
        Ok(Circuit(key))
    }

    pub fn edges(&self) -> &[DirEdge] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Circuit {
        Circuit(word::least_rotation(&word::inverse(&self.0)))
    }

    pub fn rotation(&self, i: usize) -> Path {
        let n = self.0.len();
        (0..n).map(|t| self.0[(i + t) % n]).collect()
    }
}

/// A graph together with a homotopy equivalence to the rose.
///
/// `gen_paths[i]` realizes generator `i` as a closed path at `base`;
/// `edge_words[e]` is the image of edge `e` under the homotopy inverse,
/// normalized so that tree edges map to the empty word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedGraph {
    pub graph: Graph,
    pub base: usize,
    pub rank: usize,
    pub tree: Vec<bool>,
    pub gen_paths: Vec<Path>,
    pub edge_words: Vec<Word>,
}

impl MarkedGraph {
    pub fn rose(n: usize) -> Self {
        MarkedGraph {
            graph: Graph::rose(n),
            base: 0,
            rank: n,
            tree: vec![false; n],
            gen_paths: (0..n).map(|i| vec![DirEdge::fwd(i)]).collect(),
            edge_words: (0..n).map(|i| vec![DirEdge::fwd(i)]).collect(),
        }
    }

    /// Build from any homotopy inverse `edge_words`, normalizing and validating.
    pub fn from_parts(graph: Graph, base: usize, gen_paths: Vec<Path>, edge_words: Vec<Word>) -> Result<Self> {
        if edge_words.len() != graph.edge_count() {
            return Err(Error::InvalidInput("one marking word per edge is required".into()));
        }
        if base >= graph.vertex_count {
            return Err(Error::InvalidInput("base vertex out of range".into()));
        }
        let rank = gen_paths.len();
        let mut m = MarkedGraph {
            graph,
            base,
            rank,
            tree: Vec::new(),
            gen_paths: gen_paths.iter().map(|p| word::reduce(p)).collect(),
            edge_words,
        };
        m.normalize()?;
        m.validate()?;
        Ok(m)
    }

    /// Choose a breadth-first tree at the base and gauge the edge words so
    /// that tree edges read as the empty word.
    pub fn normalize(&mut self) -> Result<()> {
        let g = &self.graph;
        let all: Vec<usize> = (0..g.edge_count()).collect();
        let tp = g.tree_paths(&all, self.base);
        if tp.iter().any(|p| p.is_none()) {
            return Err(Error::InvalidInput("graph is not connected".into()));
        }
        let t: Vec<Word> = tp
            .iter()
            .map(|p| {
                let raw: Word = p.as_ref().unwrap().iter().flat_map(|&e| self.word_of(e)).collect();
                word::reduce(&raw)
            })
            .collect();
        let mut tree = vec![false; g.edge_count()];
        for p in tp.iter().flatten() {
            if let Some(&e) = p.last() {
                tree[e.index()] = true;
            }
        }
        let mut words = Vec::with_capacity(g.edge_count());
        for i in 0..g.edge_count() {
            let (u, v) = g.ends[i];
            let raw = word::concat(&[&t[u], &self.edge_words[i], &word::inverse(&t[v])]);
            words.push(word::reduce(&raw));
        }
        self.edge_words = words;
        self.tree = tree;
        Ok(())
    }

    pub fn word_of(&self, e: DirEdge) -> Word {
        let w = &self.edge_words[e.index()];
        if e.is_forward() {
            w.clone()
        } else {
            word::inverse(w)
        }
    }

    /// Reduced word in the standard generators read off a path.
    pub fn express(&self, p: &[DirEdge]) -> Word {
        let raw: Word = p.iter().flat_map(|&e| self.word_of(e)).collect();
        word::reduce(&raw)
    }

    /// Closed tight path at the base realizing a word.
    pub fn realize(&self, w: &[DirEdge]) -> Path {
        let mut raw = Vec::new();
        for &x in w {
            let p = &self.gen_paths[x.index()];
            if x.is_forward() {
                raw.extend_from_slice(p);
            } else {
                raw.extend(word::inverse(p));
            }
        }
        word::reduce(&raw)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        if !g.is_connected() {
            return Err(Error::InvalidInput("marked graph must be connected".into()));
        }
        if g.rank() != self.rank {
            return Err(Error::InvalidInput(format!(
                "graph rank {} differs from marking rank {}",
                g.rank(),
                self.rank
            )));
        }
        let non_tree = self.tree.iter().filter(|&&t| !t).count();
        if non_tree != self.rank {
            return Err(Error::InvalidInput("spanning tree has the wrong size".into()));
        }
        for (i, p) in self.gen_paths.iter().enumerate() {
            g.check_path(p)?;
            let closed_at_base = if p.is_empty() {
                false
            } else {
                g.init(p[0]) == self.base && g.term(p[p.len() - 1]) == self.base
            };
            if !closed_at_base {
                return Err(Error::InvalidInput(format!("generator path {i} is not a nontrivial loop at the base")));
            }
            if self.express(p) != vec![DirEdge::fwd(i)] {
                return Err(Error::InvalidInput(format!("marking does not round-trip on generator {i}")));
            }
        }
        for (i, t) in self.tree.iter().enumerate() {
            if *t && !self.edge_words[i].is_empty() {
                return Err(Error::InvalidInput("tree edge with nonempty marking word".into()));
            }
        }
        Ok(())
    }

    /// Move the base vertex along `path` (from the old base to the new one).
    pub fn rebase(&self, path: &[DirEdge]) -> Result<Self> {
        self.graph.check_path(path)?;
        if let Some(&first) = path.first() {
            if self.graph.init(first) != self.base {
                return Err(Error::MalformedPath("rebase path must start at the base".into()));
            }
        }
        let new_base = path.last().map(|&e| self.graph.term(e)).unwrap_or(self.base);
        let back = word::inverse(path);
        let gens: Vec<Path> = self
            .gen_paths
            .iter()
            .map(|p| word::reduce(&word::concat(&[&back, p, path])))
            .collect();
        let c = self.express(path);
        let words: Vec<Word> = self
            .edge_words
            .iter()
            .map(|w| word::reduce(&word::concat(&[&c, w, &word::inverse(&c)])))
            .collect();
        MarkedGraph::from_parts(self.graph.clone(), new_base, gens, words)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Alphabet;

    fn w(s: &str) -> Word {
        Alphabet::standard(4).parse(s).unwrap()
    }

    #[test]
    fn tighten_examples() {
        let g = Graph::rose(3);
        assert_eq!(g.tighten(&w("aA")).unwrap(), w(""));
        assert_eq!(g.tighten(&w("abBA")).unwrap(), w(""));
        assert_eq!(g.tighten(&w("abBc")).unwrap(), w("ac"));
    }

    #[test]
    fn tighten_rejects_incompatible() {
        let g = Graph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        assert!(matches!(g.tighten(&w("ab")), Err(Error::MalformedPath(_))));
        assert_eq!(g.tighten(&w("aB")).unwrap(), w("aB"));
    }

    #[test]
    fn circuit_examples() {
        let g = Graph::rose(3);
        assert_eq!(g.cyclic_reduce(&w("Abca")).unwrap().0, w("bc"));
        assert_eq!(g.cyclic_reduce(&w("ab")).unwrap().0, w("ab"));
        assert_eq!(g.cyclic_reduce(&w("ba")).unwrap().0, w("ab"));
        assert_eq!(g.cyclic_reduce(&w("abBA")), Err(Error::TrivialCircuit));
    }

    #[test]
    fn rose_marking_is_identity() {
        let m = MarkedGraph::rose(2);
        m.validate().unwrap();
        assert_eq!(m.express(&w("a")), w("a"));
        assert_eq!(m.express(&w("")), w(""));
    }

    /// Two vertices: t from 0 to 1, a loop e1 at 1, e2 from 1 back to 0.
    pub(crate) fn lollipop() -> MarkedGraph {
        let g = Graph::new(2, vec![(0, 1), (1, 1), (1, 0)]).unwrap();
        let gens = vec![w("abA"), w("ac")];
        let words = vec![w(""), w("a"), w("b")];
        MarkedGraph::from_parts(g, 0, gens, words).unwrap()
    }

    #[test]
    fn lollipop_declared_generators() {
        let m = lollipop();
        assert_eq!(m.express(&w("abA")), w("a"));
        assert_eq!(m.express(&w("ac")), w("b"));
        assert_eq!(m.express(&w("abAac")), w("ab"));
    }

    #[test]
    fn theta_graph_marking() {
        let g = Graph::new(2, vec![(0, 1), (0, 1), (0, 1)]).unwrap();
        let gens = vec![w("bA"), w("cA")];
        let words = vec![w(""), w("a"), w("b")];
        let m = MarkedGraph::from_parts(g, 0, gens, words).unwrap();
        assert_eq!(m.express(&w("bA")), w("a"));
        assert_eq!(m.express(&w("bC")), w("aB"));
    }

    #[test]
    fn rebase_keeps_marking_valid() {
        let m = lollipop();
        let moved = m.rebase(&w("a")).unwrap();
        assert_eq!(moved.base, 1);
        moved.validate().unwrap();
        assert_eq!(moved.express(&moved.gen_paths[1]), w("b"));
    }
}

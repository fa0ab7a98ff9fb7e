//! Topological representatives and their dynamics on paths and turns.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::filtration::{self, Stratum, StratumClass};
use crate::graph::{MarkedGraph, Path};
use crate::stallings::Folder;
use crate::word::{self, DirEdge};

/// Default cap on the length of any computed iterate.
pub const DEFAULT_MAX_LEN: usize = 1 << 22;

/// A self-map of a marked graph sending vertices to vertices and each edge to
/// a tight path, together with its maximal invariant filtration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopRep {
    pub graph: MarkedGraph,
    pub vertex_image: Vec<usize>,
    /// Images of forward edges; reverse images are derived.
    pub edge_image: Vec<Path>,
    pub strata: Vec<Stratum>,
    #[serde(skip)]
    legality: OnceLock<Vec<bool>>,
}

impl PartialEq for TopRep {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph && self.vertex_image == other.vertex_image && self.edge_image == other.edge_image
    }
}

/// Unordered pair of directed edges with a common initial vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Turn(pub DirEdge, pub DirEdge);

impl Turn {
    pub fn new(a: DirEdge, b: DirEdge) -> Self {
        if a <= b {
            Turn(a, b)
        } else {
            Turn(b, a)
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.0 == self.1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnClass {
    pub legal: bool,
    /// The turn and its successive images, ending at the first degenerate
    /// turn or the first repeat.
    pub orbit: Vec<Turn>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    Pass,
    Fail(String),
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(self, Check::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumRtt {
    pub stratum: usize,
    pub rtt1: Check,
    pub rtt2: Check,
    pub rtt3: Check,
    pub rtt2_method: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RttReport {
    pub strata: Vec<StratumRtt>,
}

impl RttReport {
    pub fn ok(&self) -> bool {
        self.strata.iter().all(|s| s.rtt1.passed() && s.rtt2.passed() && s.rtt3.passed())
    }
}

impl TopRep {
    /// Validated constructor; images must be tight, nontrivial and compatible
    /// with the vertex map.
    pub fn new(graph: MarkedGraph, vertex_image: Vec<usize>, edge_image: Vec<Path>) -> Result<Self> {
        let f = TopRep::with_trivial_images(graph, vertex_image, edge_image)?;
        if let Some(i) = f.edge_image.iter().position(|p| p.is_empty()) {
            return Err(Error::InvalidInput(format!("edge {i} has a trivial image")));
        }
        Ok(f)
    }

    /// As `new` but allowing edges that map to vertices; used inside moves.
    pub fn with_trivial_images(graph: MarkedGraph, vertex_image: Vec<usize>, edge_image: Vec<Path>) -> Result<Self> {
        let g = &graph.graph;
        if vertex_image.len() != g.vertex_count || edge_image.len() != g.edge_count() {
            return Err(Error::InvalidInput("map tables do not match the graph".into()));
        }
        if vertex_image.iter().any(|&v| v >= g.vertex_count) {
            return Err(Error::InvalidInput("vertex image out of range".into()));
        }
        for (i, img) in edge_image.iter().enumerate() {
            g.check_path(img)?;
            if !word::is_reduced(img) {
                return Err(Error::InvalidInput(format!("image of edge {i} is not tight")));
            }
            let (u, v) = g.ends[i];
            let (s, t) = match (img.first(), img.last()) {
                (Some(&a), Some(&b)) => (g.init(a), g.term(b)),
                _ => (vertex_image[u], vertex_image[u]),
            };
            if s != vertex_image[u] || t != vertex_image[v] {
                return Err(Error::InvalidInput(format!(
                    "image of edge {i} does not join the images of its endpoints"
                )));
            }
        }
        let strata = filtration::build_strata(g.edge_count(), &edge_image, None);
        Ok(TopRep {
            graph,
            vertex_image,
            edge_image,
            strata,
            legality: OnceLock::new(),
        })
    }

    pub fn from_automorphism(phi: &Automorphism) -> Result<Self> {
        TopRep::new(MarkedGraph::rose(phi.rank()), vec![0], phi.images.clone())
    }

    pub fn identity(graph: MarkedGraph) -> Self {
        let vertex_image = (0..graph.graph.vertex_count).collect();
        let edge_image = (0..graph.graph.edge_count()).map(|i| vec![DirEdge::fwd(i)]).collect();
        TopRep::new(graph, vertex_image, edge_image).expect("identity map is valid")
    }

    /// Rebuild the filtration, refining a coarser invariant chain given as a
    /// layer index per edge.
    pub fn with_layers(mut self, user_layer: &[usize]) -> Self {
        self.strata = filtration::build_strata(self.edge_count(), &self.edge_image, Some(user_layer));
        self
    }

    pub fn edge_count(&self) -> usize {
        self.edge_image.len()
    }

    pub fn image(&self, e: DirEdge) -> Path {
        let p = &self.edge_image[e.index()];
        if e.is_forward() {
            p.clone()
        } else {
            word::inverse(p)
        }
    }

    fn push_image(&self, e: DirEdge, out: &mut Path) {
        let p = &self.edge_image[e.index()];
        if e.is_forward() {
            out.extend_from_slice(p);
        } else {
            out.extend(p.iter().rev().map(|x| x.inv()));
        }
    }

    /// Untightened image.
    pub fn apply_raw(&self, p: &[DirEdge]) -> Path {
        let mut out = Vec::new();
        for &e in p {
            self.push_image(e, &mut out);
        }
        out
    }

    /// `f_#(p)`.
    pub fn apply(&self, p: &[DirEdge]) -> Path {
        word::reduce(&self.apply_raw(p))
    }

    /// `f_#^k(p)` with a length cap.
    pub fn iterate(&self, p: &[DirEdge], k: usize, max_len: usize) -> Result<Path> {
        Iterates::new(self, max_len).path(p, k)
    }

    pub fn derivative(&self, e: DirEdge) -> DirEdge {
        let p = &self.edge_image[e.index()];
        assert!(!p.is_empty(), "derivative of an edge with trivial image");
        if e.is_forward() {
            p[0]
        } else {
            p[p.len() - 1].inv()
        }
    }

    pub fn turn_image(&self, t: Turn) -> Turn {
        Turn::new(self.derivative(t.0), self.derivative(t.1))
    }

    /// Walk the orbit of `t` under `Tf` until it degenerates or repeats.
    pub fn classify_turn(&self, t: Turn) -> TurnClass {
        let mut orbit = vec![t];
        let mut seen = HashSet::from([t]);
        let mut cur = t;
        loop {
            if cur.is_degenerate() {
                return TurnClass { legal: false, orbit };
            }
            cur = self.turn_image(cur);
            orbit.push(cur);
            if !seen.insert(cur) {
                return TurnClass { legal: !cur.is_degenerate(), orbit };
            }
        }
    }

    fn legality_table(&self) -> &Vec<bool> {
        self.legality.get_or_init(|| {
            let m = 2 * self.edge_count();
            let mut table = vec![true; m * m];
            if self.edge_image.iter().any(|p| p.is_empty()) {
                return table;
            }
            let g = &self.graph.graph;
            // Fixed point of "illegal iff degenerate or image illegal".
            let mut illegal = vec![false; m * m];
            for s in 0..m {
                illegal[s * m + s] = true;
            }
            let mut changed = true;
            while changed {
                changed = false;
                for a in 0..m {
                    for b in 0..m {
                        if illegal[a * m + b] {
                            continue;
                        }
                        let (ea, eb) = (DirEdge::from_slot(a), DirEdge::from_slot(b));
                        if g.init(ea) != g.init(eb) {
                            continue;
                        }
                        let (x, y) = (self.derivative(ea).slot(), self.derivative(eb).slot());
                        if illegal[x * m + y] {
                            illegal[a * m + b] = true;
                            changed = true;
                        }
                    }
                }
            }
            for i in 0..m * m {
                table[i] = !illegal[i];
            }
            table
        })
    }

    pub fn is_legal_turn(&self, a: DirEdge, b: DirEdge) -> bool {
        let m = 2 * self.edge_count();
        self.legality_table()[a.slot() * m + b.slot()]
    }

    /// Turns taken by a path, as (position of the second edge, turn).
    pub fn turns_of(&self, p: &[DirEdge]) -> Vec<(usize, Turn)> {
        p.windows(2)
            .enumerate()
            .map(|(i, w)| (i + 1, Turn::new(w[0].inv(), w[1])))
            .collect()
    }

    pub fn is_legal_path(&self, p: &[DirEdge]) -> bool {
        p.windows(2).all(|w| self.is_legal_turn(w[0].inv(), w[1]))
    }

    pub fn stratum_of(&self) -> Vec<usize> {
        let mut s = vec![0; self.edge_count()];
        for st in &self.strata {
            for &e in &st.edges {
                s[e] = st.index;
            }
        }
        s
    }

    pub fn in_stratum(&self, e: DirEdge, r: usize) -> bool {
        self.strata[r].contains(e.index())
    }

    /// Positions (index of the second edge) of illegal turns in `H_r`.
    pub fn illegal_turns_in(&self, p: &[DirEdge], r: usize) -> Vec<usize> {
        p.windows(2)
            .enumerate()
            .filter(|(_, w)| {
                self.in_stratum(w[0], r) && self.in_stratum(w[1], r) && !self.is_legal_turn(w[0].inv(), w[1])
            })
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn is_r_legal(&self, p: &[DirEdge], r: usize) -> bool {
        self.illegal_turns_in(p, r).is_empty()
    }

    /// Edges of `G_r`, the union of strata `0..=r`.
    pub fn filtration_edges(&self, r: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.strata[..=r].iter().flat_map(|s| s.edges.iter().copied()).collect();
        v.sort_unstable();
        v
    }

    pub fn eg_strata(&self) -> Vec<usize> {
        self.strata.iter().filter(|s| s.is_eg()).map(|s| s.index).collect()
    }

    /// A sound bounded cancellation constant: the total length of all edge images.
    pub fn bcc_bound(&self) -> usize {
        self.edge_image.iter().map(|p| p.len()).sum()
    }

    /// `f^k` on the same marked graph.
    pub fn power(&self, k: usize, max_len: usize) -> Result<TopRep> {
        let mut it = Iterates::new(self, max_len);
        let mut images = Vec::with_capacity(self.edge_count());
        for i in 0..self.edge_count() {
            images.push(it.edge(DirEdge::fwd(i), k)?);
        }
        let mut vimg: Vec<usize> = (0..self.graph.graph.vertex_count).collect();
        for _ in 0..k {
            vimg = vimg.iter().map(|&v| self.vertex_image[v]).collect();
        }
        TopRep::with_trivial_images(self.graph.clone(), vimg, images)
    }

    /// `self ∘ other` for maps on the same marked graph.
    pub fn compose(&self, other: &TopRep) -> Result<TopRep> {
        let images = other.edge_image.iter().map(|p| self.apply(p)).collect();
        let vimg = other.vertex_image.iter().map(|&v| self.vertex_image[v]).collect();
        TopRep::with_trivial_images(self.graph.clone(), vimg, images)
    }

    /// The automorphism of the free group induced through the marking.
    pub fn outer_class(&self) -> Automorphism {
        let images = self
            .graph
            .gen_paths
            .iter()
            .map(|p| self.graph.express(&self.apply_raw(p)))
            .collect();
        Automorphism {
            alphabet: crate::word::Alphabet::standard(self.graph.rank),
            images,
        }
    }

    pub fn check_rtt(&self) -> RttReport {
        let strata = self
            .eg_strata()
            .into_iter()
            .map(|r| StratumRtt {
                stratum: r,
                rtt1: self.check_rtt1(r),
                rtt2: self.check_rtt2(r),
                rtt3: self.check_rtt3(r),
                rtt2_method: "verified via injectivity reduction".into(),
            })
            .collect();
        RttReport { strata }
    }

    fn check_rtt1(&self, r: usize) -> Check {
        for &i in &self.strata[r].edges {
            for e in [DirEdge::fwd(i), DirEdge::rev(i)] {
                let d = self.derivative(e);
                if !self.in_stratum(d, r) {
                    return Check::Fail(format!("Tf({e:?}) = {d:?} leaves the stratum"));
                }
            }
        }
        Check::Pass
    }

    fn check_rtt3(&self, r: usize) -> Check {
        for &i in &self.strata[r].edges {
            let img = &self.edge_image[i];
            if let Some(&pos) = self.illegal_turns_in(img, r).first() {
                return Check::Fail(format!(
                    "image of edge {i} has an illegal turn {{{:?},{:?}}}",
                    img[pos - 1].inv(),
                    img[pos]
                ));
            }
        }
        let g = &self.graph.graph;
        let hr: Vec<DirEdge> = self.strata[r]
            .edges
            .iter()
            .flat_map(|&i| [DirEdge::fwd(i), DirEdge::rev(i)])
            .collect();
        for &a in &hr {
            for &b in &hr {
                if a < b && g.init(a) == g.init(b) && self.is_legal_turn(a, b) {
                    let t = self.turn_image(Turn::new(a, b));
                    if !self.is_legal_turn(t.0, t.1) || !self.in_stratum(t.0, r) || !self.in_stratum(t.1, r) {
                        return Check::Fail(format!("legal turn {{{a:?},{b:?}}} maps to {t:?}"));
                    }
                }
            }
        }
        Check::Pass
    }

    /// Each component of `G_{r-1}` meeting `H_r` must map injectively on
    /// `π_1` and must not identify two of its `H_r` attaching vertices.
    fn check_rtt2(&self, r: usize) -> Check {
        if r == 0 {
            return Check::Pass;
        }
        let g = &self.graph.graph;
        let lower = self.filtration_edges(r - 1);
        let mut attach = vec![false; g.vertex_count];
        for &i in &self.strata[r].edges {
            let (u, v) = g.ends[i];
            attach[u] = true;
            attach[v] = true;
        }
        for comp in g.components(&lower) {
            let marked: Vec<usize> = comp.iter().copied().filter(|&v| attach[v]).collect();
            if marked.is_empty() {
                continue;
            }
            let in_comp: HashSet<usize> = comp.iter().copied().collect();
            let mut folder = Folder::new();
            let mut id = HashMap::new();
            for (k, &v) in comp.iter().enumerate() {
                let fv = if k == 0 { folder.base } else { folder.add_vertex() };
                id.insert(v, fv);
            }
            // Contract edges with trivial image first.
            let mut alias: HashMap<usize, usize> = HashMap::new();
            let resolve = |alias: &HashMap<usize, usize>, mut v: usize| {
                while let Some(&n) = alias.get(&v) {
                    v = n;
                }
                v
            };
            for &i in &lower {
                let (u, v) = g.ends[i];
                if !in_comp.contains(&u) || !self.edge_image[i].is_empty() {
                    continue;
                }
                let (a, b) = (resolve(&alias, id[&u]), resolve(&alias, id[&v]));
                if a == b {
                    return Check::Fail(format!("loop edge {i} in the lower filtration maps to a point"));
                }
                alias.insert(b, a);
            }
            for &i in &lower {
                let (u, v) = g.ends[i];
                if !in_comp.contains(&u) || self.edge_image[i].is_empty() {
                    continue;
                }
                let img = &self.edge_image[i];
                let mut cur = resolve(&alias, id[&u]);
                let end = resolve(&alias, id[&v]);
                for (k, &x) in img.iter().enumerate() {
                    let next = if k + 1 == img.len() { end } else { folder.add_vertex() };
                    folder.add_edge(cur, x, next, Vec::new());
                    cur = next;
                }
            }
            folder.fold();
            if folder.rank_dropped {
                return Check::Fail("restriction to a lower component is not injective on π1".into());
            }
            let roots: Vec<usize> = marked.iter().map(|v| folder.root(resolve(&alias, id[v]))).collect();
            for a in 0..roots.len() {
                for b in a + 1..roots.len() {
                    if roots[a] == roots[b] {
                        return Check::Fail(format!(
                            "a connecting path between vertices {} and {} tightens to a point",
                            marked[a], marked[b]
                        ));
                    }
                }
            }
        }
        Check::Pass
    }

    /// Transition matrix of stratum `r`.
    pub fn transition_matrix(&self, r: usize) -> &crate::matrix::Matrix {
        &self.strata[r].matrix
    }

    pub fn stratum_class(&self, r: usize) -> StratumClass {
        self.strata[r].class
    }
}

/// Memoized edge iterates for one map.
pub struct Iterates<'a> {
    f: &'a TopRep,
    max_len: usize,
    memo: HashMap<(usize, usize), Path>,
}

impl<'a> Iterates<'a> {
    pub fn new(f: &'a TopRep, max_len: usize) -> Self {
        Iterates {
            f,
            max_len,
            memo: HashMap::new(),
        }
    }

    /// `f_#^k(e)`.
    pub fn edge(&mut self, e: DirEdge, k: usize) -> Result<Path> {
        let fwd = self.forward(e.index(), k)?;
        Ok(if e.is_forward() { fwd } else { word::inverse(&fwd) })
    }

    fn forward(&mut self, i: usize, k: usize) -> Result<Path> {
        if k == 0 {
            return Ok(vec![DirEdge::fwd(i)]);
        }
        if let Some(p) = self.memo.get(&(i, k)) {
            return Ok(p.clone());
        }
        let mut j = (1..k).rev().find(|&j| self.memo.contains_key(&(i, j))).unwrap_or(0);
        let mut cur = if j == 0 {
            vec![DirEdge::fwd(i)]
        } else {
            self.memo[&(i, j)].clone()
        };
        while j < k {
            let raw_len: usize = cur.iter().map(|e| self.f.edge_image[e.index()].len()).sum();
            if raw_len > self.max_len {
                return Err(Error::Budget {
                    what: format!("iterate of edge {i} exceeds {} edges at step {}", self.max_len, j + 1),
                    partial: Some(cur),
                });
            }
            cur = self.f.apply(&cur);
            j += 1;
            self.memo.insert((i, j), cur.clone());
        }
        Ok(cur)
    }

    /// `f_#^k(p)`.
    pub fn path(&mut self, p: &[DirEdge], k: usize) -> Result<Path> {
        let mut out = Vec::new();
        for &e in p {
            let img = self.edge(e, k)?;
            out.extend(img);
            if out.len() > self.max_len {
                out = word::reduce(&out);
                if out.len() > self.max_len {
                    return Err(Error::Budget {
                        what: format!("iterate exceeds {} edges", self.max_len),
                        partial: Some(out),
                    });
                }
            }
        }
        Ok(word::reduce(&out))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::word::{Alphabet, Word};

    pub(crate) fn w(s: &str) -> Word {
        Alphabet::standard(3).parse(s).unwrap()
    }

    pub(crate) fn rose_map(n: usize, images: &[&str]) -> TopRep {
        let a = Alphabet::standard(n);
        let imgs = images.iter().map(|s| a.parse(s).unwrap()).collect();
        TopRep::new(MarkedGraph::rose(n), vec![0], imgs).unwrap()
    }

    pub(crate) fn fib() -> TopRep {
        rose_map(2, &["b", "ab"])
    }

    #[test]
    fn apply_examples() {
        let f = fib();
        assert_eq!(f.apply(&w("a")), w("b"));
        assert_eq!(f.apply(&w("ab")), w("bab"));
        assert_eq!(f.apply(&w("aB")), w("A"));
    }

    #[test]
    fn iterate_examples() {
        let f = fib();
        assert_eq!(f.iterate(&w("a"), 3, 100).unwrap(), w("bab"));
        assert_eq!(f.iterate(&w("a"), 0, 100).unwrap(), w("a"));
        let lens: Vec<usize> = (0..6).map(|k| f.iterate(&w("a"), k, 100).unwrap().len()).collect();
        assert_eq!(lens, vec![1, 1, 2, 3, 5, 8]);
        let err = f.iterate(&w("a"), 30, 50).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn derivative_examples() {
        let f = fib();
        assert_eq!(f.derivative(w("a")[0]), w("b")[0]);
        assert_eq!(f.derivative(w("A")[0]), w("B")[0]);
        assert_eq!(f.derivative(w("B")[0]), w("B")[0]);
    }

    #[test]
    fn turn_examples() {
        let f = fib();
        let t = |s: &str| {
            let p = w(s);
            Turn::new(p[0], p[1])
        };
        assert!(!f.classify_turn(t("AB")).legal);
        assert!(f.classify_turn(t("ab")).legal);
        // A turn made of one edge twice is degenerate, hence illegal.
        assert!(!f.classify_turn(t("aa")).legal);
        // The turn {a, A} is nondegenerate and legal for this map.
        assert!(f.classify_turn(t("aA")).legal);
        for a in DirEdge::all(2) {
            for b in DirEdge::all(2) {
                assert_eq!(f.classify_turn(Turn::new(a, b)).legal, f.is_legal_turn(a, b));
            }
        }
    }

    #[test]
    fn untight_image_rejected() {
        let a = Alphabet::standard(2);
        let r = TopRep::new(MarkedGraph::rose(2), vec![0], vec![a.parse("a").unwrap(), a.parse("aAb").unwrap()]);
        assert!(r.is_err());
    }

    #[test]
    fn fibonacci_is_train_track() {
        let f = fib();
        assert_eq!(f.bcc_bound(), 3);
        let rep = f.check_rtt();
        assert_eq!(rep.strata.len(), 1);
        assert!(rep.ok());
        let id = TopRep::identity(MarkedGraph::rose(2));
        assert!(id.check_rtt().strata.is_empty());
    }

    #[test]
    fn outer_class_of_rose_map() {
        let f = fib();
        let phi = Automorphism::parse("gens: a b\na -> b\nb -> a b").unwrap();
        assert_eq!(f.outer_class(), phi);
    }

    #[test]
    fn power_matches_iterate() {
        let f = fib();
        let g = f.power(2, 1000).unwrap();
        assert_eq!(g.edge_image[0], w("ab"));
        assert_eq!(g.edge_image[1], w("bab"));
    }
}

//! Stallings folding of labeled graphs and the subgroup graphs built from it.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::word::{self, DirEdge, Word};

#[derive(Clone, Debug)]
struct FEdge {
    from: usize,
    to: usize,
    label: DirEdge,
    tag: Word,
    alive: bool,
}

/// Labeled graph under construction. Each edge carries a letter and an
/// auxiliary word `tag` that is transported through folds.
#[derive(Clone, Debug)]
pub struct Folder {
    parent: Vec<usize>,
    edges: Vec<FEdge>,
    pub base: usize,
    /// Set when a fold identified two edges with the same endpoints.
    pub rank_dropped: bool,
}

impl Folder {
    pub fn new() -> Self {
        Folder {
            parent: vec![0],
            edges: Vec::new(),
            base: 0,
            rank_dropped: false,
        }
    }

    pub fn add_vertex(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    /// Representative of the vertex class containing `v` after folding.
    pub fn root(&mut self, v: usize) -> usize {
        self.find(v)
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let n = self.parent[y];
            self.parent[y] = r;
            y = n;
        }
        r
    }

    pub fn add_edge(&mut self, from: usize, label: DirEdge, to: usize, tag: Word) {
        if label.is_forward() {
            self.edges.push(FEdge { from, to, label, tag, alive: true });
        } else {
            self.edges.push(FEdge {
                from: to,
                to: from,
                label: label.inv(),
                tag: word::inverse(&tag),
                alive: true,
            });
        }
    }

    /// Attach a loop at the base reading `w`; the first edge carries `tag`.
    pub fn add_petal(&mut self, w: &[DirEdge], tag: Word) {
        if w.is_empty() {
            return;
        }
        let mut cur = self.base;
        for (i, &x) in w.iter().enumerate() {
            let next = if i + 1 == w.len() { self.base } else { self.add_vertex() };
            let t = if i == 0 { tag.clone() } else { Vec::new() };
            self.add_edge(cur, x, next, t);
            cur = next;
        }
    }

    /// Gauge vertex `v` by `g`: tags into `v` get `·g`, tags out of `v` get `g⁻¹·`.
    fn gauge(&mut self, v: usize, g: &[DirEdge]) {
        if g.is_empty() {
            return;
        }
        let gi = word::inverse(g);
        for i in 0..self.edges.len() {
            if !self.edges[i].alive {
                continue;
            }
            let from = self.find(self.edges[i].from);
            let to = self.find(self.edges[i].to);
            let e = &mut self.edges[i];
            if to == v {
                e.tag = word::mul(&e.tag, g);
            }
            if from == v {
                e.tag = word::mul(&gi, &e.tag);
            }
        }
    }

    /// Fold until no two edges with a common initial vertex share a label.
    pub fn fold(&mut self) {
        loop {
            let mut seen: HashMap<(usize, DirEdge), (usize, bool)> = HashMap::new();
            let mut hit = None;
            'scan: for i in 0..self.edges.len() {
                if !self.edges[i].alive {
                    continue;
                }
                let from = self.find(self.edges[i].from);
                let to = self.find(self.edges[i].to);
                let lab = self.edges[i].label;
                for (v, l, fwd) in [(from, lab, true), (to, lab.inv(), false)] {
                    if let Some(&(j, jf)) = seen.get(&(v, l)) {
                        if j != i {
                            hit = Some((v, (j, jf), (i, fwd)));
                            break 'scan;
                        }
                    } else {
                        seen.insert((v, l), (i, fwd));
                    }
                }
            }
            let Some((_u, (e1, f1), (e2, f2))) = hit else { break };
            self.fold_pair(e1, f1, e2, f2);
        }
    }

    fn end_data(&mut self, e: usize, fwd: bool) -> (usize, Word) {
        let to = if fwd { self.edges[e].to } else { self.edges[e].from };
        let to = self.find(to);
        let tag = if fwd {
            self.edges[e].tag.clone()
        } else {
            word::inverse(&self.edges[e].tag)
        };
        (to, tag)
    }

    fn fold_pair(&mut self, e1: usize, f1: bool, e2: usize, f2: bool) {
        let (mut w1, mut l1) = self.end_data(e1, f1);
        let (mut w2, mut l2) = self.end_data(e2, f2);
        let mut dead = e2;
        let base = self.find(self.base);
        if w2 == base && w1 != base {
            std::mem::swap(&mut w1, &mut w2);
            std::mem::swap(&mut l1, &mut l2);
            dead = e1;
        }
        if w1 != w2 {
            let g = word::mul(&word::inverse(&l2), &l1);
            self.gauge(w2, &g);
            self.parent[w2] = w1;
        } else {
            self.rank_dropped = true;
        }
        self.edges[dead].alive = false;
    }

    /// Freeze into a compact graph; vertices renumbered with the base first.
    pub fn finish(mut self) -> LabeledGraph {
        let base = self.find(self.base);
        let mut id: HashMap<usize, usize> = HashMap::new();
        id.insert(base, 0);
        let mut edges = Vec::new();
        for i in 0..self.edges.len() {
            if !self.edges[i].alive {
                continue;
            }
            let from = self.find(self.edges[i].from);
            let to = self.find(self.edges[i].to);
            let n = id.len();
            let a = *id.entry(from).or_insert(n);
            let n = id.len();
            let b = *id.entry(to).or_insert(n);
            edges.push((a, self.edges[i].label, b, self.edges[i].tag.clone()));
        }
        LabeledGraph {
            vertex_count: id.len().max(1),
            base: 0,
            edges,
        }
    }
}

impl Default for Folder {
    fn default() -> Self {
        Self::new()
    }
}

/// A folded graph; edge labels are positive letters.
#[derive(Clone, Debug)]
pub struct LabeledGraph {
    pub vertex_count: usize,
    pub base: usize,
    pub edges: Vec<(usize, DirEdge, usize, Word)>,
}

/// Folded core graph with basepoint representing a finitely generated subgroup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupGraph {
    pub vertex_count: usize,
    pub base: usize,
    /// `(from, positive letter, to)`.
    pub edges: Vec<(usize, DirEdge, usize)>,
}

impl SubgroupGraph {
    pub fn from_words(words: &[Word]) -> Self {
        let mut f = Folder::new();
        for w in words {
            f.add_petal(&word::reduce(w), Vec::new());
        }
        f.fold();
        let lg = f.finish();
        let mut g = SubgroupGraph {
            vertex_count: lg.vertex_count,
            base: lg.base,
            edges: lg.edges.into_iter().map(|(a, l, b, _)| (a, l, b)).collect(),
        };
        g.trim(true);
        g
    }

    fn adjacency(&self) -> HashMap<(usize, DirEdge), usize> {
        let mut m = HashMap::new();
        for &(a, l, b) in &self.edges {
            m.insert((a, l), b);
            m.insert((b, l.inv()), a);
        }
        m
    }

    pub fn valence(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|&(a, _, b)| usize::from(a == v) + usize::from(b == v))
            .sum()
    }

    /// Remove hanging trees; with `keep_base` the base vertex is never pruned.
    pub fn trim(&mut self, keep_base: bool) {
        loop {
            let mut val = vec![0usize; self.vertex_count];
            for &(a, _, b) in &self.edges {
                val[a] += 1;
                val[b] += 1;
            }
            let before = self.edges.len();
            self.edges.retain(|&(a, _, b)| {
                let hang = |v: usize| val[v] == 1 && !(keep_base && v == self.base);
                !(hang(a) || hang(b))
            });
            if self.edges.len() == before {
                break;
            }
        }
        self.compact();
    }

    fn compact(&mut self) {
        let mut id: HashMap<usize, usize> = HashMap::new();
        let mut order = vec![self.base];
        for &(a, _, b) in &self.edges {
            order.push(a);
            order.push(b);
        }
        for v in order {
            let n = id.len();
            id.entry(v).or_insert(n);
        }
        for e in &mut self.edges {
            e.0 = id[&e.0];
            e.2 = id[&e.2];
        }
        self.base = 0;
        self.vertex_count = id.len();
    }

    pub fn rank(&self) -> usize {
        if self.edges.is_empty() {
            return 0;
        }
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut cycles = 0;
        for &(a, _, b) in &self.edges {
            let (x, y) = (find(&mut parent, a), find(&mut parent, b));
            if x == y {
                cycles += 1;
            } else {
                parent[x] = y;
            }
        }
        cycles
    }

    /// Whether the reduced word reads a loop at the base.
    pub fn contains(&self, w: &[DirEdge]) -> bool {
        let adj = self.adjacency();
        let mut v = self.base;
        for &x in &word::reduce(w) {
            match adj.get(&(v, x)) {
                Some(&n) => v = n,
                None => return false,
            }
        }
        v == self.base
    }

    /// Core graph; the base moves onto the core if it was pruned, which
    /// changes the subgroup only within its conjugacy class.
    pub fn core(&self) -> SubgroupGraph {
        let mut c = self.clone();
        c.trim(false);
        if let Some(&(v, _, _)) = c.edges.first() {
            if !c.edges.iter().any(|&(a, _, b)| a == c.base || b == c.base) {
                c.base = v;
            }
        }
        c.compact();
        c
    }

    /// Whether the cyclic word reads a closed loop somewhere in the core.
    pub fn carries_cyclic(&self, w: &[DirEdge]) -> bool {
        let key = word::conjugacy_key(w);
        if key.is_empty() {
            return false;
        }
        let core = self.core();
        let adj = core.adjacency();
        (0..core.vertex_count).any(|start| {
            let mut v = start;
            for &x in &key {
                match adj.get(&(v, x)) {
                    Some(&n) => v = n,
                    None => return false,
                }
            }
            v == start
        })
    }

    /// Pullback over the rose; the component of the base pair, with the base kept.
    pub fn fiber_product(&self, other: &SubgroupGraph) -> Vec<SubgroupGraph> {
        let mut by_label: BTreeMap<DirEdge, Vec<(usize, usize)>> = BTreeMap::new();
        for &(a, l, b) in &other.edges {
            by_label.entry(l).or_default().push((a, b));
        }
        let m = other.vertex_count;
        let mut edges = Vec::new();
        for &(a, l, b) in &self.edges {
            if let Some(list) = by_label.get(&l) {
                for &(c, d) in list {
                    edges.push((a * m + c, l, b * m + d));
                }
            }
        }
        let total = self.vertex_count * m;
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for &(a, _, b) in &edges {
            let (x, y) = (find(&mut parent, a), find(&mut parent, b));
            if x != y {
                parent[x] = y;
            }
        }
        let mut groups: BTreeMap<usize, Vec<(usize, DirEdge, usize)>> = BTreeMap::new();
        for &(a, l, b) in &edges {
            let r = find(&mut parent, a);
            groups.entry(r).or_default().push((a, l, b));
        }
        groups
            .into_values()
            .map(|es| {
                let base = es[0].0;
                let mut g = SubgroupGraph {
                    vertex_count: total,
                    base,
                    edges: es,
                };
                g.compact();
                g
            })
            .collect()
    }

    /// Canonical encoding of the conjugacy class: the core, traversed from
    /// every vertex, keeping the least serialization.
    pub fn conjugacy_canonical(&self) -> Vec<(usize, i32, usize)> {
        let core = self.core();
        if core.edges.is_empty() {
            return Vec::new();
        }
        let adj = core.adjacency();
        let mut letters: Vec<DirEdge> = core.edges.iter().flat_map(|&(_, l, _)| [l, l.inv()]).collect();
        letters.sort();
        letters.dedup();
        let mut best: Option<Vec<(usize, i32, usize)>> = None;
        for start in 0..core.vertex_count {
            let mut num = vec![usize::MAX; core.vertex_count];
            num[start] = 0;
            let mut next = 1;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &l in &letters {
                    if let Some(&u) = adj.get(&(v, l)) {
                        if num[u] == usize::MAX {
                            num[u] = next;
                            next += 1;
                            queue.push_back(u);
                        }
                    }
                }
            }
            let mut ser: Vec<(usize, i32, usize)> =
                core.edges.iter().map(|&(a, l, b)| (num[a], l.raw(), num[b])).collect();
            ser.sort();
            if best.as_ref().is_none_or(|b| ser < *b) {
                best = Some(ser);
            }
        }
        best.unwrap()
    }

    /// Reduced words generating the subgroup, read along a spanning tree.
    pub fn generators(&self) -> Vec<Word> {
        let adj_list = {
            let mut l: Vec<Vec<(DirEdge, usize)>> = vec![Vec::new(); self.vertex_count];
            for &(a, x, b) in &self.edges {
                l[a].push((x, b));
                l[b].push((x.inv(), a));
            }
            l
        };
        let mut path: Vec<Option<Word>> = vec![None; self.vertex_count];
        path[self.base] = Some(Vec::new());
        let mut tree_edge = vec![false; self.edges.len()];
        let mut queue = VecDeque::from([self.base]);
        let mut used: HashMap<(usize, DirEdge), bool> = HashMap::new();
        while let Some(v) = queue.pop_front() {
            for &(x, u) in &adj_list[v] {
                if path[u].is_none() {
                    let mut p = path[v].clone().unwrap();
                    p.push(x);
                    path[u] = Some(p);
                    used.insert((v, x), true);
                    used.insert((u, x.inv()), true);
                    queue.push_back(u);
                }
            }
        }
        let mut gens = Vec::new();
        for (i, &(a, x, b)) in self.edges.iter().enumerate() {
            if used.contains_key(&(a, x)) {
                tree_edge[i] = true;
                continue;
            }
            if let (Some(pa), Some(pb)) = (&path[a], &path[b]) {
                let w = word::concat(&[pa, &[x], &word::inverse(pb)]);
                gens.push(word::reduce(&w));
            }
        }
        gens
    }
}

/// Invert an automorphism given by generator images, or explain why the
/// images do not form a basis.
pub fn invert_images(images: &[Word]) -> Result<Vec<Word>, String> {
    let n = images.len();
    let mut f = Folder::new();
    for (i, w) in images.iter().enumerate() {
        let w = word::reduce(w);
        if w.is_empty() {
            return Err(format!("image of generator {i} is trivial"));
        }
        f.add_petal(&w, vec![DirEdge::fwd(i)]);
    }
    f.fold();
    if f.rank_dropped {
        return Err("images satisfy a relation".into());
    }
    let lg = f.finish();
    let mut val = vec![0usize; lg.vertex_count];
    for &(a, _, b, _) in &lg.edges {
        val[a] += 1;
        val[b] += 1;
    }
    let mut edges = lg.edges.clone();
    // Prune hairs away from the base, then walk a possible stem from the base.
    loop {
        let before = edges.len();
        let mut val = vec![0usize; lg.vertex_count];
        for &(a, _, b, _) in &edges {
            val[a] += 1;
            val[b] += 1;
        }
        edges.retain(|&(a, _, b, _)| !((val[a] == 1 && a != lg.base) || (val[b] == 1 && b != lg.base)));
        if edges.len() == before {
            break;
        }
    }
    let _ = val;
    let mut stem_letters: Word = Vec::new();
    let mut stem_tags: Word = Vec::new();
    let mut at = lg.base;
    loop {
        let inc: Vec<usize> = (0..edges.len())
            .filter(|&i| edges[i].0 == at || edges[i].2 == at)
            .collect();
        if inc.len() != 1 || edges[inc[0]].0 == edges[inc[0]].2 {
            break;
        }
        let (a, l, b, t) = edges.remove(inc[0]);
        if a == at {
            stem_letters.push(l);
            stem_tags = word::mul(&stem_tags, &t);
            at = b;
        } else {
            stem_letters.push(l.inv());
            stem_tags = word::mul(&stem_tags, &word::inverse(&t));
            at = a;
        }
    }
    let loops: Vec<&(usize, DirEdge, usize, Word)> = edges.iter().collect();
    if loops.len() != n || loops.iter().any(|&&(a, _, b, _)| a != at || b != at) {
        return Err("images do not generate the free group".into());
    }
    // Tags at the core vertex: loop x_j reads L_j, and the stem contributes S.
    let mut lj: Vec<Option<Word>> = vec![None; n];
    for &&(_, l, _, ref t) in &loops {
        if l.index() >= n || lj[l.index()].is_some() {
            return Err("images do not generate the free group".into());
        }
        lj[l.index()] = Some(t.clone());
    }
    let lj: Vec<Word> = lj.into_iter().map(|o| o.unwrap()).collect();
    // A loop at the base reads s·w·s⁻¹ with tag S·Y(w)·S⁻¹, where Y(w) is the
    // product of the L_j along w. Hence φ⁻¹(x_j) = Y(s)⁻¹·S⁻¹·(S·L_j·S⁻¹)·S·Y(s)
    // after noting φ(S·Y(s)·S⁻¹) = s·s·s⁻¹.
    let y = |w: &[DirEdge]| -> Word {
        let mut acc = Vec::new();
        for &x in w {
            let t = &lj[x.index()];
            acc = if x.is_forward() {
                word::mul(&acc, t)
            } else {
                word::mul(&acc, &word::inverse(t))
            };
        }
        acc
    };
    let ys = word::mul(&word::mul(&stem_tags, &y(&stem_letters)), &word::inverse(&stem_tags));
    let pre_s = ys;
    let mut out = Vec::with_capacity(n);
    for t in &lj {
        let inner = word::mul(&word::mul(&stem_tags, t), &word::inverse(&stem_tags));
        let v = word::mul(&word::mul(&word::inverse(&pre_s), &inner), &pre_s);
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Alphabet;

    fn w(s: &str) -> Word {
        Alphabet::standard(4).parse(s).unwrap()
    }

    #[test]
    fn membership() {
        let h = SubgroupGraph::from_words(&[w("aa"), w("b")]);
        assert!(h.contains(&w("aab")));
        assert!(h.contains(&w("baaB")));
        assert!(!h.contains(&w("a")));
        assert_eq!(h.rank(), 2);
    }

    #[test]
    fn folding_collapses_redundant_generators() {
        let h = SubgroupGraph::from_words(&[w("ab"), w("a"), w("b")]);
        assert_eq!(h.vertex_count, 1);
        assert_eq!(h.rank(), 2);
    }

    #[test]
    fn fiber_product_of_disjoint_cyclics_has_no_core() {
        let a = SubgroupGraph::from_words(&[w("a")]);
        let b = SubgroupGraph::from_words(&[w("b")]);
        assert!(a.fiber_product(&b).iter().all(|c| c.core().rank() == 0));
    }

    #[test]
    fn conjugates_share_canonical_form() {
        let a = SubgroupGraph::from_words(&[w("ab"), w("c")]);
        let b = SubgroupGraph::from_words(&[w("cabC"), w("c")]);
        assert_eq!(a.conjugacy_canonical(), b.conjugacy_canonical());
        let c = SubgroupGraph::from_words(&[w("ab"), w("cc")]);
        assert_ne!(a.conjugacy_canonical(), c.conjugacy_canonical());
    }

    #[test]
    fn inversion_of_fibonacci() {
        let inv = invert_images(&[w("b"), w("ab")]).unwrap();
        assert_eq!(inv, vec![w("bA"), w("a")]);
    }

    #[test]
    fn inversion_rejects_non_basis() {
        assert!(invert_images(&[w("aa"), w("b")]).is_err());
        assert!(invert_images(&[w("ab"), w("ab")]).is_err());
    }

    #[test]
    fn generators_regenerate() {
        let h = SubgroupGraph::from_words(&[w("abA"), w("bb"), w("cac")]);
        let again = SubgroupGraph::from_words(&h.generators());
        assert_eq!(h.conjugacy_canonical(), again.conjugacy_canonical());
        for g in h.generators() {
            assert!(h.contains(&g));
        }
    }
}

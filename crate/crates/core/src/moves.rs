//! Elementary moves on topological representatives, each returning the new
//! representative together with a witness pair of graph maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, MarkedGraph, Path};
use crate::map::TopRep;
use crate::word::{self, DirEdge};

/// Tag describing a move; the move log is a list of these.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum MoveKind {
    Subdivide { edge: usize, cut: usize },
    SubdivideFixed { edge: usize },
    Fold { e1: i32, e2: i32 },
    GeneralizedFold { edge: i32, split: usize, sigma: Vec<i32> },
    Collapse { edges: Vec<usize> },
    ValenceOne { vertex: usize },
    ValenceTwo { vertex: usize },
    Slide { edge: usize, alpha: Vec<i32> },
    Sequence { steps: Vec<MoveKind> },
}

/// Graph maps `p: G → G'` and `q: G' → G` with `q ∘ p ≃ id` witnessed by
/// `tracks[u]`, a path from `u` to `q(p(u))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveWitness {
    pub kind: MoveKind,
    pub old_graph: Graph,
    pub new_graph: Graph,
    pub p_edge: Vec<Path>,
    pub p_vertex: Vec<usize>,
    pub q_edge: Vec<Path>,
    pub q_vertex: Vec<usize>,
    pub tracks: Vec<Path>,
}

fn image_under(table: &[Path], p: &[DirEdge]) -> Path {
    let mut out = Vec::new();
    for &e in p {
        let img = &table[e.index()];
        if e.is_forward() {
            out.extend_from_slice(img);
        } else {
            out.extend(img.iter().rev().map(|x| x.inv()));
        }
    }
    word::reduce(&out)
}

fn raw_paths(p: &[i32]) -> Path {
    p.iter().map(|&r| DirEdge::from_raw(r)).collect()
}

fn raws(p: &[DirEdge]) -> Vec<i32> {
    p.iter().map(|e| e.raw()).collect()
}

impl MoveWitness {
    pub fn p(&self, path: &[DirEdge]) -> Path {
        image_under(&self.p_edge, path)
    }

    pub fn q(&self, path: &[DirEdge]) -> Path {
        image_under(&self.q_edge, path)
    }

    /// Both tables are graph maps and `q ∘ p` returns every edge up to the tracks.
    pub fn round_trip_ok(&self) -> bool {
        self.check().is_ok()
    }

    pub fn check(&self) -> Result<()> {
        let (g, h) = (&self.old_graph, &self.new_graph);
        let bad = |m: String| Err(Error::Internal(m));
        for i in 0..g.edge_count() {
            let e = DirEdge::fwd(i);
            let img = &self.p_edge[i];
            if h.check_path(img).is_err() {
                return bad(format!("p({i}) is not a path"));
            }
            let (s, t) = ends_of(h, img, self.p_vertex[g.init(e)]);
            if s != self.p_vertex[g.init(e)] || t != self.p_vertex[g.term(e)] {
                return bad(format!("p({i}) has wrong endpoints"));
            }
        }
        for i in 0..h.edge_count() {
            let e = DirEdge::fwd(i);
            let img = &self.q_edge[i];
            if g.check_path(img).is_err() {
                return bad(format!("q({i}) is not a path"));
            }
            let (s, t) = ends_of(g, img, self.q_vertex[h.init(e)]);
            if s != self.q_vertex[h.init(e)] || t != self.q_vertex[h.term(e)] {
                return bad(format!("q({i}) has wrong endpoints"));
            }
        }
        for u in 0..g.vertex_count {
            let tr = &self.tracks[u];
            if g.check_path(tr).is_err() {
                return bad(format!("track at {u} is not a path"));
            }
            let (s, t) = ends_of(g, tr, u);
            if s != u || t != self.q_vertex[self.p_vertex[u]] {
                return bad(format!("track at {u} has wrong endpoints"));
            }
        }
        for i in 0..g.edge_count() {
            let e = DirEdge::fwd(i);
            let qp = self.q(&self.p(&[e]));
            let loop_ = word::concat(&[&self.tracks[g.init(e)], &qp, &word::inverse(&self.tracks[g.term(e)])]);
            if word::reduce(&loop_) != vec![e] {
                return bad(format!("edge {i} does not round-trip"));
            }
        }
        Ok(())
    }

    /// `next ∘ self`.
    pub fn then(self, next: MoveWitness) -> MoveWitness {
        let p_edge = self.p_edge.iter().map(|p| next.p(p)).collect();
        let p_vertex = self.p_vertex.iter().map(|&v| next.p_vertex[v]).collect();
        let q_edge = next.q_edge.iter().map(|p| self.q(p)).collect();
        let q_vertex = next.q_vertex.iter().map(|&v| self.q_vertex[v]).collect();
        let tracks = (0..self.old_graph.vertex_count)
            .map(|u| {
                let later = self.q(&next.tracks[self.p_vertex[u]]);
                word::reduce(&word::concat(&[&self.tracks[u], &later]))
            })
            .collect();
        let mut steps = match self.kind {
            MoveKind::Sequence { steps } => steps,
            k => vec![k],
        };
        match next.kind {
            MoveKind::Sequence { steps: more } => steps.extend(more),
            k => steps.push(k),
        }
        MoveWitness {
            kind: MoveKind::Sequence { steps },
            old_graph: self.old_graph,
            new_graph: next.new_graph,
            p_edge,
            p_vertex,
            q_edge,
            q_vertex,
            tracks,
        }
    }

    pub fn identity(g: &Graph) -> MoveWitness {
        MoveWitness {
            kind: MoveKind::Sequence { steps: Vec::new() },
            old_graph: g.clone(),
            new_graph: g.clone(),
            p_edge: (0..g.edge_count()).map(|i| vec![DirEdge::fwd(i)]).collect(),
            p_vertex: (0..g.vertex_count).collect(),
            q_edge: (0..g.edge_count()).map(|i| vec![DirEdge::fwd(i)]).collect(),
            q_vertex: (0..g.vertex_count).collect(),
            tracks: vec![Vec::new(); g.vertex_count],
        }
    }
}

fn ends_of(g: &Graph, p: &[DirEdge], default: usize) -> (usize, usize) {
    match (p.first(), p.last()) {
        (Some(&a), Some(&b)) => (g.init(a), g.term(b)),
        _ => (default, default),
    }
}

/// Renumbering after deleting some edges and vertices.
struct Renumber {
    edge: Vec<Option<usize>>,
    vertex: Vec<Option<usize>>,
}

impl Renumber {
    fn new(g: &Graph, dead_edges: &[usize], dead_vertices: &[usize]) -> Self {
        let mut edge = Vec::with_capacity(g.edge_count());
        let mut k = 0;
        for i in 0..g.edge_count() {
            if dead_edges.contains(&i) {
                edge.push(None);
            } else {
                edge.push(Some(k));
                k += 1;
            }
        }
        let mut vertex = Vec::with_capacity(g.vertex_count);
        let mut k = 0;
        for v in 0..g.vertex_count {
            if dead_vertices.contains(&v) {
                vertex.push(None);
            } else {
                vertex.push(Some(k));
                k += 1;
            }
        }
        Renumber { edge, vertex }
    }

    fn dir(&self, e: DirEdge) -> DirEdge {
        let i = self.edge[e.index()].expect("live edge");
        if e.is_forward() {
            DirEdge::fwd(i)
        } else {
            DirEdge::rev(i)
        }
    }

    fn path(&self, p: &[DirEdge]) -> Path {
        p.iter().map(|&e| self.dir(e)).collect()
    }
}

/// Build `q` from tracks: each surviving edge `d` maps to
/// `reverse(track(init d)) · d · track(term d)`.
fn q_from_tracks(g: &Graph, rn: &Renumber, tracks: &[Path], new_edge_count: usize) -> Vec<Path> {
    let mut q = vec![Vec::new(); new_edge_count];
    for i in 0..g.edge_count() {
        if let Some(j) = rn.edge[i] {
            let d = DirEdge::fwd(i);
            q[j] = word::reduce(&word::concat(&[
                &word::inverse(&tracks[g.init(d)]),
                &[d],
                &tracks[g.term(d)],
            ]));
        }
    }
    q
}

/// Push a representative through a witness: `f' = p ∘ f ∘ q` unless explicit
/// images are supplied, with the marking transported alongside.
pub fn transport(f: &TopRep, w: &MoveWitness, explicit: Option<(Vec<usize>, Vec<Path>)>) -> Result<TopRep> {
    w.check()?;
    let (vimg, images) = match explicit {
        Some(x) => x,
        None => {
            let images = w.q_edge.iter().map(|q| w.p(&f.apply_raw(q))).collect();
            let vimg = w.q_vertex.iter().map(|&v| w.p_vertex[f.vertex_image[v]]).collect();
            (vimg, images)
        }
    };
    let old = &f.graph;
    let gens: Vec<Path> = old.gen_paths.iter().map(|p| w.p(p)).collect();
    let base = w.p_vertex[old.base];
    let c = old.express(&w.tracks[old.base]);
    let ci = word::inverse(&c);
    let words = w
        .q_edge
        .iter()
        .map(|q| word::reduce(&word::concat(&[&c, &old.express(q), &ci])))
        .collect();
    let marked = MarkedGraph::from_parts(w.new_graph.clone(), base, gens, words)?;
    TopRep::with_trivial_images(marked, vimg, images)
}

fn subdivision_witness(g: &Graph, i: usize, kind: MoveKind) -> MoveWitness {
    let (u, v) = g.ends[i];
    let w = g.vertex_count;
    let mut ends = g.ends.clone();
    ends[i] = (u, w);
    ends.push((w, v));
    let new_graph = Graph {
        vertex_count: w + 1,
        ends,
    };
    let e2 = g.edge_count();
    let mut p_edge: Vec<Path> = (0..g.edge_count()).map(|k| vec![DirEdge::fwd(k)]).collect();
    p_edge[i] = vec![DirEdge::fwd(i), DirEdge::fwd(e2)];
    let mut q_edge: Vec<Path> = (0..g.edge_count()).map(|k| vec![DirEdge::fwd(k)]).collect();
    q_edge.push(Vec::new());
    let mut q_vertex: Vec<usize> = (0..g.vertex_count).collect();
    q_vertex.push(v);
    MoveWitness {
        kind,
        old_graph: g.clone(),
        new_graph,
        p_edge,
        p_vertex: (0..g.vertex_count).collect(),
        q_edge,
        q_vertex,
        tracks: vec![Vec::new(); g.vertex_count],
    }
}

/// Split edge `i` at the point mapping to the boundary after `cut` edges of its image.
pub fn subdivide(f: &TopRep, i: usize, cut: usize) -> Result<(TopRep, MoveWitness)> {
    let img = &f.edge_image[i];
    if cut == 0 || cut >= img.len() {
        return Err(Error::Precondition(format!(
            "cut {cut} is not an interior vertex preimage of edge {i}"
        )));
    }
    let g = &f.graph.graph;
    let w = subdivision_witness(g, i, MoveKind::Subdivide { edge: i, cut });
    let mut images: Vec<Path> = f.edge_image.iter().map(|p| w.p(p)).collect();
    images[i] = w.p(&img[..cut]);
    images.push(w.p(&img[cut..]));
    let mut vimg = f.vertex_image.clone();
    vimg.push(g.term(img[cut - 1]));
    let f2 = transport(f, &w, Some((vimg, images)))?;
    Ok((f2, w))
}

/// Subdivide an edge with `f(E) = w·E·u` at its interior fixed point.
pub fn subdivide_at_fixed_point(f: &TopRep, i: usize) -> Result<(TopRep, MoveWitness)> {
    let img = &f.edge_image[i];
    let hits: Vec<usize> = (0..img.len()).filter(|&k| img[k] == DirEdge::fwd(i)).collect();
    if hits.len() != 1 || img.iter().filter(|e| e.index() == i).count() != 1 {
        return Err(Error::Precondition(format!("edge {i} does not cross itself exactly once")));
    }
    let k = hits[0];
    let g = &f.graph.graph;
    let w = subdivision_witness(g, i, MoveKind::SubdivideFixed { edge: i });
    let e1 = DirEdge::fwd(i);
    let e2 = DirEdge::fwd(g.edge_count());
    let mut images: Vec<Path> = f.edge_image.iter().map(|p| w.p(p)).collect();
    let mut a = w.p(&img[..k]);
    a.push(e1);
    images[i] = a;
    let mut b = vec![e2];
    b.extend(w.p(&img[k + 1..]));
    images.push(b);
    let mut vimg = f.vertex_image.clone();
    vimg.push(g.vertex_count);
    let f2 = transport(f, &w, Some((vimg, images)))?;
    Ok((f2, w))
}

/// Identify two edges with equal images and a common initial vertex.
fn full_fold_witness(g: &Graph, e1: DirEdge, e2: DirEdge) -> Result<MoveWitness> {
    let (t1, t2) = (g.term(e1), g.term(e2));
    if t1 == t2 {
        return Err(Error::NotFoldable("the fold would identify two edges with common endpoints".into()));
    }
    let dead = e2.index();
    let rn = Renumber::new(g, &[dead], &[t2]);
    let vmap = |v: usize| rn.vertex[if v == t2 { t1 } else { v }].unwrap();
    let ends = (0..g.edge_count())
        .filter(|&i| i != dead)
        .map(|i| (vmap(g.ends[i].0), vmap(g.ends[i].1)))
        .collect();
    let new_graph = Graph {
        vertex_count: g.vertex_count - 1,
        ends,
    };
    let mut p_edge = Vec::with_capacity(g.edge_count());
    for i in 0..g.edge_count() {
        if i == dead {
            let img = rn.dir(e1);
            p_edge.push(vec![if e2.is_forward() { img } else { img.inv() }]);
        } else {
            p_edge.push(vec![rn.dir(DirEdge::fwd(i))]);
        }
    }
    let p_vertex = (0..g.vertex_count).map(vmap).collect();
    let mut tracks = vec![Vec::new(); g.vertex_count];
    tracks[t2] = vec![e2.inv(), e1];
    let q_edge = q_from_tracks(g, &rn, &tracks, new_graph.edge_count());
    let mut q_vertex = vec![0; new_graph.vertex_count];
    for v in 0..g.vertex_count {
        if v != t2 {
            q_vertex[rn.vertex[v].unwrap()] = v;
        }
    }
    Ok(MoveWitness {
        kind: MoveKind::Fold {
            e1: e1.raw(),
            e2: e2.raw(),
        },
        old_graph: g.clone(),
        new_graph,
        p_edge,
        p_vertex,
        q_edge,
        q_vertex,
        tracks,
    })
}

/// The edge that is the initial segment of `e` after edge `e.index()` was
/// subdivided (the new piece was appended as edge `appended`).
fn initial_piece(e: DirEdge, appended: usize) -> DirEdge {
    if e.is_forward() {
        e
    } else {
        DirEdge::rev(appended)
    }
}

fn common_prefix(a: &[DirEdge], b: &[DirEdge]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Fold the maximal initial segments of `e1` and `e2` with equal images.
pub fn stallings_fold(f: &TopRep, e1: DirEdge, e2: DirEdge) -> Result<(TopRep, MoveWitness)> {
    let g = &f.graph.graph;
    if e1 == e2 || e1 == e2.inv() || g.init(e1) != g.init(e2) {
        return Err(Error::NotFoldable("edges must be distinct with a common initial vertex".into()));
    }
    let (i1, i2) = (f.image(e1), f.image(e2));
    let len = common_prefix(&i1, &i2);
    if len == 0 {
        return Err(Error::NotFoldable(format!("images of {e1:?} and {e2:?} start differently")));
    }
    let mut cur = f.clone();
    let mut wit = MoveWitness::identity(g);
    let (mut a, mut b) = (e1, e2);
    if len < i1.len() {
        let cut = if a.is_forward() { len } else { i1.len() - len };
        let appended = cur.edge_count();
        let (nf, w) = subdivide(&cur, a.index(), cut)?;
        a = initial_piece(a, appended);
        cur = nf;
        wit = wit.then(w);
    }
    let i2 = cur.image(b);
    let len = cur.image(a).len();
    if len < i2.len() {
        let cut = if b.is_forward() { len } else { i2.len() - len };
        let appended = cur.edge_count();
        let (nf, w) = subdivide(&cur, b.index(), cut)?;
        b = initial_piece(b, appended);
        cur = nf;
        wit = wit.then(w);
    }
    debug_assert_eq!(cur.image(a), cur.image(b));
    let w = full_fold_witness(&cur.graph.graph, a, b)?;
    let folded = transport(&cur, &w, None)?;
    let wit = wit.then(w);
    let (out, w2) = collapse_pretrivial_forest(&folded)?;
    Ok((out, wit.then(w2)))
}

/// Identify the initial segment of `e2` that maps to the first `split` edges
/// of its image with the path `sigma`.
pub fn generalized_fold(f: &TopRep, e2: DirEdge, split: usize, sigma: &[DirEdge]) -> Result<(TopRep, MoveWitness)> {
    let g = &f.graph.graph;
    let img = f.image(e2);
    if sigma.is_empty() {
        return Err(Error::Precondition("sigma must be nontrivial".into()));
    }
    g.check_path(sigma)?;
    if g.init(sigma[0]) != g.init(e2) {
        return Err(Error::Precondition("sigma must start at the initial vertex of the edge".into()));
    }
    if sigma.iter().any(|e| e.index() == e2.index()) {
        return Err(Error::Precondition("sigma must avoid the folded edge".into()));
    }
    if split == 0 || split > img.len() {
        return Err(Error::Precondition("split must cut the image after at least one edge".into()));
    }
    if f.apply(sigma) != img[..split] {
        return Err(Error::Precondition("f(sigma) differs from the image of the folded segment".into()));
    }
    let kind = MoveKind::GeneralizedFold {
        edge: e2.raw(),
        split,
        sigma: raws(sigma),
    };
    let s = g.term(*sigma.last().unwrap());
    let t = g.term(e2);
    let w = if split < img.len() {
        // e2 becomes an edge from the end of sigma to its old terminal vertex.
        let i = e2.index();
        let mut ends = g.ends.clone();
        ends[i] = if e2.is_forward() { (s, t) } else { (t, s) };
        let new_graph = Graph {
            vertex_count: g.vertex_count,
            ends,
        };
        let mut p_edge: Vec<Path> = (0..g.edge_count()).map(|k| vec![DirEdge::fwd(k)]).collect();
        let mut q_edge = p_edge.clone();
        let along = word::concat(&[sigma, &[e2]]);
        let back = word::concat(&[&word::inverse(sigma), &[e2]]);
        if e2.is_forward() {
            p_edge[i] = along;
            q_edge[i] = back;
        } else {
            p_edge[i] = word::inverse(&along);
            q_edge[i] = word::inverse(&back);
        }
        MoveWitness {
            kind,
            old_graph: g.clone(),
            new_graph,
            p_edge,
            p_vertex: (0..g.vertex_count).collect(),
            q_edge,
            q_vertex: (0..g.vertex_count).collect(),
            tracks: vec![Vec::new(); g.vertex_count],
        }
    } else {
        if s == t {
            return Err(Error::NotFoldable("the fold would identify a loop with a path".into()));
        }
        if sigma.iter().any(|&e| g.init(e) == t || g.term(e) == t) {
            return Err(Error::Precondition("sigma must avoid the vertex being merged".into()));
        }
        let dead = e2.index();
        let rn = Renumber::new(g, &[dead], &[t]);
        let vmap = |v: usize| rn.vertex[if v == t { s } else { v }].unwrap();
        let ends = (0..g.edge_count())
            .filter(|&i| i != dead)
            .map(|i| (vmap(g.ends[i].0), vmap(g.ends[i].1)))
            .collect();
        let new_graph = Graph {
            vertex_count: g.vertex_count - 1,
            ends,
        };
        let mut p_edge = Vec::with_capacity(g.edge_count());
        for i in 0..g.edge_count() {
            if i == dead {
                let img = rn.path(sigma);
                p_edge.push(if e2.is_forward() { img } else { word::inverse(&img) });
            } else {
                p_edge.push(vec![rn.dir(DirEdge::fwd(i))]);
            }
        }
        let mut tracks = vec![Vec::new(); g.vertex_count];
        tracks[t] = word::concat(&[&[e2.inv()], sigma]);
        let q_edge = q_from_tracks(g, &rn, &tracks, new_graph.edge_count());
        let mut q_vertex = vec![0; new_graph.vertex_count];
        for v in 0..g.vertex_count {
            if v != t {
                q_vertex[rn.vertex[v].unwrap()] = v;
            }
        }
        MoveWitness {
            kind,
            old_graph: g.clone(),
            new_graph,
            p_edge,
            p_vertex: (0..g.vertex_count).map(vmap).collect(),
            q_edge,
            q_vertex,
            tracks,
        }
    };
    let out = transport(f, &w, None)?;
    Ok((out, w))
}

/// Edges whose iterates become trivial within `#edges` steps.
pub fn pretrivial_edges(f: &TopRep) -> Vec<usize> {
    let n = f.edge_count();
    let mut out = Vec::new();
    for i in 0..n {
        let mut p = vec![DirEdge::fwd(i)];
        for _ in 0..=n {
            p = f.apply(&p);
            if p.is_empty() || p.len() > 4096 {
                break;
            }
        }
        if p.is_empty() {
            out.push(i);
        }
    }
    out
}

/// Collapse every component of a forest of edges to one vertex.
fn collapse_witness(g: &Graph, forest: &[usize], keep: usize) -> Result<MoveWitness> {
    let comps = g.components(forest);
    if g.rank_of(forest) != 0 {
        return Err(Error::InvalidInput("pre-trivial edges contain a circuit".into()));
    }
    let mut rep: Vec<usize> = (0..g.vertex_count).collect();
    let mut tracks = vec![Vec::new(); g.vertex_count];
    let mut dead_vertices = Vec::new();
    for comp in &comps {
        let r = if comp.contains(&keep) { keep } else { comp[0] };
        let tp = g.tree_paths(forest, r);
        for &v in comp {
            rep[v] = r;
            if v != r {
                dead_vertices.push(v);
                tracks[v] = word::inverse(tp[v].as_ref().expect("component is connected"));
            }
        }
    }
    let rn = Renumber::new(g, forest, &dead_vertices);
    let vmap = |v: usize| rn.vertex[rep[v]].unwrap();
    let ends: Vec<(usize, usize)> = (0..g.edge_count())
        .filter(|i| rn.edge[*i].is_some())
        .map(|i| (vmap(g.ends[i].0), vmap(g.ends[i].1)))
        .collect();
    let new_graph = Graph {
        vertex_count: g.vertex_count - dead_vertices.len(),
        ends,
    };
    let p_edge = (0..g.edge_count())
        .map(|i| match rn.edge[i] {
            Some(j) => vec![DirEdge::fwd(j)],
            None => Vec::new(),
        })
        .collect();
    let q_edge = q_from_tracks(g, &rn, &tracks, new_graph.edge_count());
    let mut q_vertex = vec![0; new_graph.vertex_count];
    for v in 0..g.vertex_count {
        if let Some(k) = rn.vertex[v] {
            q_vertex[k] = v;
        }
    }
    Ok(MoveWitness {
        kind: MoveKind::Collapse { edges: forest.to_vec() },
        old_graph: g.clone(),
        new_graph,
        p_edge,
        p_vertex: (0..g.vertex_count).map(vmap).collect(),
        q_edge,
        q_vertex,
        tracks,
    })
}

/// Collapse the maximal pre-trivial forest, repeating while new pre-trivial
/// edges appear.
pub fn collapse_pretrivial_forest(f: &TopRep) -> Result<(TopRep, MoveWitness)> {
    let mut cur = f.clone();
    let mut wit = MoveWitness::identity(&f.graph.graph);
    for _ in 0..=f.edge_count() {
        let forest = pretrivial_edges(&cur);
        if forest.is_empty() {
            return Ok((cur, wit));
        }
        let w = collapse_witness(&cur.graph.graph, &forest, cur.graph.base)?;
        cur = transport(&cur, &w, None)?;
        wit = wit.then(w);
    }
    Err(Error::Internal("forest collapse did not stabilize".into()))
}

/// Remove a valence-one vertex together with its edge.
pub fn valence_one(f: &TopRep, v: usize) -> Result<(TopRep, MoveWitness)> {
    let g = &f.graph.graph;
    let star = g.star(v);
    if star.len() != 1 || g.term(star[0]) == v {
        return Err(Error::Precondition(format!("vertex {v} does not have valence one")));
    }
    let e = star[0];
    let w_ = g.term(e);
    let rn = Renumber::new(g, &[e.index()], &[v]);
    let vmap = |x: usize| rn.vertex[if x == v { w_ } else { x }].unwrap();
    let ends = (0..g.edge_count())
        .filter(|&i| i != e.index())
        .map(|i| (vmap(g.ends[i].0), vmap(g.ends[i].1)))
        .collect();
    let new_graph = Graph {
        vertex_count: g.vertex_count - 1,
        ends,
    };
    let p_edge = (0..g.edge_count())
        .map(|i| match rn.edge[i] {
            Some(j) => vec![DirEdge::fwd(j)],
            None => Vec::new(),
        })
        .collect();
    let mut tracks = vec![Vec::new(); g.vertex_count];
    tracks[v] = vec![e];
    let q_edge = q_from_tracks(g, &rn, &tracks, new_graph.edge_count());
    let mut q_vertex = vec![0; new_graph.vertex_count];
    for x in 0..g.vertex_count {
        if let Some(k) = rn.vertex[x] {
            q_vertex[k] = x;
        }
    }
    let w = MoveWitness {
        kind: MoveKind::ValenceOne { vertex: v },
        old_graph: g.clone(),
        new_graph,
        p_edge,
        p_vertex: (0..g.vertex_count).map(vmap).collect(),
        q_edge,
        q_vertex,
        tracks,
    };
    Ok((transport(f, &w, None)?, w))
}

/// Remove a valence-two vertex by merging its two edges into one.
pub fn valence_two(f: &TopRep, v: usize) -> Result<(TopRep, MoveWitness)> {
    let g = &f.graph.graph;
    let star = g.star(v);
    if star.len() != 2 || star[0].index() == star[1].index() {
        return Err(Error::Precondition(format!("vertex {v} does not have valence two")));
    }
    // Keep the edge of the higher stratum; the other one is absorbed.
    let strat = f.stratum_of();
    let (ei, ej) = if strat[star[0].index()] >= strat[star[1].index()] {
        (star[0].inv(), star[1])
    } else {
        (star[1].inv(), star[0])
    };
    let keep = ei.index();
    let t = g.term(ej);
    let rn = Renumber::new(g, &[ej.index()], &[v]);
    let mut ends: Vec<(usize, usize)> = Vec::new();
    for i in 0..g.edge_count() {
        if i == ej.index() {
            continue;
        }
        let vm = |x: usize| rn.vertex[x].unwrap();
        if i == keep {
            let (a, b) = (g.init(ei), t);
            ends.push(if ei.is_forward() { (vm(a), vm(b)) } else { (vm(b), vm(a)) });
        } else {
            ends.push((vm(g.ends[i].0), vm(g.ends[i].1)));
        }
    }
    let new_graph = Graph {
        vertex_count: g.vertex_count - 1,
        ends,
    };
    let vmap = |x: usize| rn.vertex[if x == v { t } else { x }].unwrap();
    let p_edge = (0..g.edge_count())
        .map(|i| match rn.edge[i] {
            Some(j) => vec![DirEdge::fwd(j)],
            None => Vec::new(),
        })
        .collect();
    let mut q_edge: Vec<Path> = Vec::with_capacity(new_graph.edge_count());
    for i in 0..g.edge_count() {
        if rn.edge[i].is_none() {
            continue;
        }
        if i == keep {
            let merged = vec![ei, ej];
            q_edge.push(if ei.is_forward() { merged } else { word::inverse(&merged) });
        } else {
            q_edge.push(vec![DirEdge::fwd(i)]);
        }
    }
    let mut tracks = vec![Vec::new(); g.vertex_count];
    tracks[v] = vec![ej];
    let mut q_vertex = vec![0; new_graph.vertex_count];
    for x in 0..g.vertex_count {
        if let Some(k) = rn.vertex[x] {
            q_vertex[k] = x;
        }
    }
    let w = MoveWitness {
        kind: MoveKind::ValenceTwo { vertex: v },
        old_graph: g.clone(),
        new_graph,
        p_edge,
        p_vertex: (0..g.vertex_count).map(vmap).collect(),
        q_edge,
        q_vertex,
        tracks,
    };
    Ok((transport(f, &w, None)?, w))
}

/// Slide the terminal end of the NEG edge `i` along `alpha`.
pub fn slide(f: &TopRep, i: usize, alpha: &[DirEdge]) -> Result<(TopRep, MoveWitness)> {
    let g = &f.graph.graph;
    let e = DirEdge::fwd(i);
    let img = &f.edge_image[i];
    if img.first() != Some(&e) || img[1..].iter().any(|x| x.index() == i) {
        return Err(Error::Precondition(format!("edge {i} is not of the form E·u")));
    }
    let strat = f.stratum_of();
    if alpha.iter().any(|x| strat[x.index()] >= strat[i]) {
        return Err(Error::Precondition("alpha must lie in the lower filtration".into()));
    }
    g.check_path(alpha)?;
    if let Some(&a0) = alpha.first() {
        if g.init(a0) != g.term(e) {
            return Err(Error::Precondition("alpha must start at the terminal vertex of the edge".into()));
        }
    }
    let end = alpha.last().map(|&a| g.term(a)).unwrap_or(g.term(e));
    let mut ends = g.ends.clone();
    ends[i] = (g.init(e), end);
    let new_graph = Graph {
        vertex_count: g.vertex_count,
        ends,
    };
    let mut p_edge: Vec<Path> = (0..g.edge_count()).map(|k| vec![DirEdge::fwd(k)]).collect();
    let mut q_edge = p_edge.clone();
    p_edge[i] = word::concat(&[&[e], &word::inverse(alpha)]);
    q_edge[i] = word::concat(&[&[e], alpha]);
    let w = MoveWitness {
        kind: MoveKind::Slide {
            edge: i,
            alpha: raws(alpha),
        },
        old_graph: g.clone(),
        new_graph,
        p_edge,
        p_vertex: (0..g.vertex_count).collect(),
        q_edge,
        q_vertex: (0..g.vertex_count).collect(),
        tracks: vec![Vec::new(); g.vertex_count],
    };
    Ok((transport(f, &w, None)?, w))
}

/// Replay a slide recorded in a move log.
pub fn replay_slide(f: &TopRep, kind: &MoveKind) -> Result<(TopRep, MoveWitness)> {
    match kind {
        MoveKind::Slide { edge, alpha } => slide(f, *edge, &raw_paths(alpha)),
        _ => Err(Error::Usage("not a slide".into())),
    }
}

/// A map between graphs sending vertices to vertices and edges to paths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMap {
    pub domain: Graph,
    pub codomain: Graph,
    pub vertex_map: Vec<usize>,
    pub edge_map: Vec<Path>,
}

impl GraphMap {
    pub fn validate(&self) -> Result<()> {
        for (i, img) in self.edge_map.iter().enumerate() {
            self.codomain.check_path(img)?;
            let (u, v) = self.domain.ends[i];
            let (s, t) = ends_of(&self.codomain, img, self.vertex_map[u]);
            if s != self.vertex_map[u] || t != self.vertex_map[v] {
                return Err(Error::InvalidInput(format!("image of edge {i} has wrong endpoints")));
            }
        }
        Ok(())
    }

    pub fn image(&self, p: &[DirEdge]) -> Path {
        image_under(&self.edge_map, p)
    }

    pub fn from_rep(f: &TopRep) -> GraphMap {
        GraphMap {
            domain: f.graph.graph.clone(),
            codomain: f.graph.graph.clone(),
            vertex_map: f.vertex_image.clone(),
            edge_map: f.edge_image.clone(),
        }
    }
}

/// One fold of a factorization, as the edge map of the quotient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldStep {
    pub e1: DirEdge,
    pub e2: DirEdge,
    /// Identified two edges with the same endpoints (a loss of rank).
    pub rank_drop: bool,
    pub graph: Graph,
    pub edge_map: Vec<DirEdge>,
    pub vertex_map: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub subdivided: Graph,
    /// Domain edge to path in the subdivided graph.
    pub subdivision: Vec<Path>,
    pub folds: Vec<FoldStep>,
    /// Final graph edge to codomain edge.
    pub theta_edges: Vec<DirEdge>,
    pub theta_vertices: Vec<usize>,
}

impl Factorization {
    /// Push a domain path through every fold and `θ`.
    pub fn recompose(&self, p: &[DirEdge]) -> Path {
        let mut cur = image_under(&self.subdivision, p);
        for s in &self.folds {
            cur = cur
                .iter()
                .map(|&e| if e.is_forward() { s.edge_map[e.index()] } else { s.edge_map[e.index()].inv() })
                .collect();
        }
        let out: Path = cur
            .iter()
            .map(|&e| if e.is_forward() { self.theta_edges[e.index()] } else { self.theta_edges[e.index()].inv() })
            .collect();
        word::reduce(&out)
    }

    pub fn theta_injective_on_edges(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.theta_edges.iter().all(|e| seen.insert(e.index()))
    }

    pub fn rank_drops(&self) -> usize {
        self.folds.iter().filter(|s| s.rank_drop).count()
    }
}

/// Factor a graph map into subdivision, a sequence of folds and an immersion `θ`.
pub fn factor_into_folds(h: &GraphMap) -> Result<Factorization> {
    h.validate()?;
    if h.edge_map.iter().any(|p| p.is_empty() || !word::is_reduced(p)) {
        return Err(Error::Precondition("edge images must be tight and nontrivial".into()));
    }
    // Subdivide so that every edge maps to a single edge.
    let mut ends = Vec::new();
    let mut label: Vec<DirEdge> = Vec::new();
    let mut vlabel: Vec<usize> = h.vertex_map.clone();
    let mut vcount = h.domain.vertex_count;
    let mut subdivision = Vec::new();
    for (i, img) in h.edge_map.iter().enumerate() {
        let (u, v) = h.domain.ends[i];
        let mut path = Vec::new();
        let mut cur = u;
        for (k, &x) in img.iter().enumerate() {
            let next = if k + 1 == img.len() {
                v
            } else {
                vcount += 1;
                vlabel.push(h.codomain.term(x));
                vcount - 1
            };
            path.push(DirEdge::fwd(ends.len()));
            ends.push((cur, next));
            label.push(x);
            cur = next;
        }
        subdivision.push(path);
    }
    let subdivided = Graph::new(vcount, ends)?;
    let mut g = subdivided.clone();
    let mut folds = Vec::new();
    loop {
        let lab = |e: DirEdge| if e.is_forward() { label[e.index()] } else { label[e.index()].inv() };
        let mut pick = None;
        'outer: for e1 in DirEdge::all(g.edge_count()) {
            for e2 in DirEdge::all(g.edge_count()) {
                if e1 < e2 && e1 != e2.inv() && g.init(e1) == g.init(e2) && lab(e1) == lab(e2) {
                    pick = Some((e1, e2));
                    break 'outer;
                }
            }
        }
        let Some((e1, e2)) = pick else { break };
        let (t1, t2) = (g.term(e1), g.term(e2));
        let rank_drop = t1 == t2;
        let dead = e2.index();
        let dead_v: Vec<usize> = if rank_drop { Vec::new() } else { vec![t2] };
        let rn = Renumber::new(&g, &[dead], &dead_v);
        let vmap = |v: usize| rn.vertex[if !rank_drop && v == t2 { t1 } else { v }].unwrap();
        let new_ends: Vec<(usize, usize)> = (0..g.edge_count())
            .filter(|&i| i != dead)
            .map(|i| (vmap(g.ends[i].0), vmap(g.ends[i].1)))
            .collect();
        let edge_map: Vec<DirEdge> = (0..g.edge_count())
            .map(|i| {
                if i == dead {
                    let img = rn.dir(e1);
                    if e2.is_forward() {
                        img
                    } else {
                        img.inv()
                    }
                } else {
                    rn.dir(DirEdge::fwd(i))
                }
            })
            .collect();
        let vertex_map: Vec<usize> = (0..g.vertex_count).map(vmap).collect();
        let mut new_label = vec![DirEdge::fwd(0); new_ends.len()];
        for i in 0..g.edge_count() {
            if i != dead {
                new_label[rn.edge[i].unwrap()] = label[i];
            }
        }
        let mut new_vlabel = vec![0; g.vertex_count - usize::from(!rank_drop)];
        for v in 0..g.vertex_count {
            new_vlabel[vertex_map[v]] = vlabel[v];
        }
        let ng = Graph {
            vertex_count: new_vlabel.len(),
            ends: new_ends,
        };
        folds.push(FoldStep {
            e1,
            e2,
            rank_drop,
            graph: ng.clone(),
            edge_map,
            vertex_map,
        });
        g = ng;
        label = new_label;
        vlabel = new_vlabel;
    }
    let out = Factorization {
        subdivided,
        subdivision,
        folds,
        theta_edges: label,
        theta_vertices: vlabel,
    };
    if out.folds.iter().all(|s| !s.rank_drop) && !covers(&out, &h.codomain) {
        return Err(Error::InvalidInput("the immersion θ is not surjective".into()));
    }
    Ok(out)
}

fn covers(fz: &Factorization, codomain: &Graph) -> bool {
    let mut hit = vec![false; codomain.edge_count()];
    for e in &fz.theta_edges {
        hit[e.index()] = true;
    }
    hit.into_iter().all(|b| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::tests::{fib, rose_map, w};
    use crate::word::Alphabet;

    fn same_outer(a: &TopRep, b: &TopRep) -> bool {
        a.outer_class().outer_eq(&b.outer_class())
    }

    #[test]
    fn subdivide_fibonacci() {
        let f = fib();
        let (g, wit) = subdivide(&f, 1, 1).unwrap();
        assert!(wit.round_trip_ok());
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.edge_image[1], w("a"));
        assert_eq!(g.edge_image[2], w("bc"));
        assert!(same_outer(&f, &g));
        // Interior cuts of a length-one image are rejected.
        assert!(subdivide(&f, 0, 1).is_err());
    }

    #[test]
    fn subdivide_then_merge_round_trip() {
        let f = fib();
        let (g, _) = subdivide(&f, 1, 1).unwrap();
        let (h, wit) = valence_two(&g, 1).unwrap();
        assert!(wit.round_trip_ok());
        assert_eq!(h.edge_count(), 2);
        assert_eq!(h.graph.graph.vertex_count, 1);
        assert!(same_outer(&f, &h));
    }

    #[test]
    fn train_track_has_no_fold() {
        let f = fib();
        assert!(matches!(
            stallings_fold(&f, w("a")[0], w("b")[0]),
            Err(Error::NotFoldable(_))
        ));
    }

    #[test]
    fn fold_partial_segments() {
        // The images share an initial a only.
        let f = rose_map(2, &["ab", "aab"]);
        let (g, wit) = stallings_fold(&f, w("a")[0], w("b")[0]).unwrap();
        assert!(wit.round_trip_ok());
        assert!(same_outer(&f, &g));
    }

    #[test]
    fn full_fold_is_a_rank_drop_on_the_rose() {
        let a = Alphabet::standard(2);
        let h = GraphMap {
            domain: Graph::rose(2),
            codomain: Graph::rose(2),
            vertex_map: vec![0],
            edge_map: vec![a.parse("ab").unwrap(), a.parse("ab").unwrap()],
        };
        let fz = factor_into_folds(&h).unwrap();
        assert!(fz.rank_drops() >= 1);
        assert_eq!(fz.folds[0].graph.edge_count() + 1, fz.subdivided.edge_count());
        for i in 0..2 {
            assert_eq!(fz.recompose(&[DirEdge::fwd(i)]), h.edge_map[i]);
        }
    }

    #[test]
    fn factor_identity_and_fibonacci() {
        let id = GraphMap::from_rep(&TopRep::identity(MarkedGraph::rose(2)));
        let fz = factor_into_folds(&id).unwrap();
        assert!(fz.folds.is_empty());
        let fb = GraphMap::from_rep(&fib());
        let fz = factor_into_folds(&fb).unwrap();
        for i in 0..2 {
            assert_eq!(fz.recompose(&[DirEdge::fwd(i)]), fb.edge_map[i]);
        }
        assert!(fz.theta_injective_on_edges());
    }

    fn w4(s: &str) -> Path {
        Alphabet::standard(4).parse(s).unwrap()
    }

    #[test]
    fn collapse_pretrivial_path() {
        // Edges d and e form a path that maps to a point; a loop hangs on each end.
        let g = Graph::new(3, vec![(0, 0), (0, 1), (1, 2), (2, 2)]).unwrap();
        let words = vec![w("a"), w(""), w(""), w("b")];
        let gens = vec![w4("a"), w4("bcdCB")];
        let m = MarkedGraph::from_parts(g, 0, gens, words).unwrap();
        let f = TopRep::with_trivial_images(m, vec![0, 0, 0], vec![w4("a"), w4(""), w4(""), w4("bcdCB")]).unwrap();
        let (h, wit) = collapse_pretrivial_forest(&f).unwrap();
        assert!(wit.round_trip_ok());
        assert_eq!(h.edge_count(), 2);
        assert_eq!(h.graph.graph.vertex_count, 1);
        assert!(same_outer(&f, &h));
        let (h2, _) = collapse_pretrivial_forest(&h).unwrap();
        assert_eq!(h2, h);
    }

    #[test]
    fn slide_examples() {
        let f = rose_map(3, &["a", "ba", "cb"]);
        let (g, wit) = slide(&f, 2, &w("b")).unwrap();
        assert!(wit.round_trip_ok());
        assert_eq!(g.edge_image[2], w("cba"));
        let (g0, _) = slide(&f, 2, &[]).unwrap();
        assert_eq!(g0.edge_image, f.edge_image);
        let (back, _) = slide(&g, 2, &w("B")).unwrap();
        assert_eq!(back.edge_image[2], w("cb"));
        assert!(same_outer(&f, &g));
        assert!(slide(&f, 1, &w("c")).is_err());
    }

    #[test]
    fn generalized_fold_degenerate_and_errors() {
        let f = rose_map(2, &["ab", "aab"]);
        assert!(generalized_fold(&f, w("b")[0], 1, &[]).is_err());
        assert!(generalized_fold(&f, w("b")[0], 2, &w("a")).is_err());
        let f = rose_map(2, &["ab", "abb"]);
        let (g, wit) = generalized_fold(&f, w("b")[0], 2, &w("a")).unwrap();
        assert!(wit.round_trip_ok());
        assert!(same_outer(&f, &g));
    }

    #[test]
    fn fixed_point_subdivision() {
        let f = rose_map(2, &["a", "aba"]);
        let (g, wit) = subdivide_at_fixed_point(&f, 1).unwrap();
        assert!(wit.round_trip_ok());
        assert!(same_outer(&f, &g));
        let (e1, e2) = (DirEdge::fwd(1), DirEdge::fwd(2));
        assert_eq!(g.edge_image[1], vec![DirEdge::fwd(0), e1]);
        assert_eq!(g.edge_image[2], vec![e2, DirEdge::fwd(0)]);
        assert_eq!(g.vertex_image[1], 1);
    }
}

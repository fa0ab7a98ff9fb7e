//! Splittings of paths and circuits, the set `P_r` of paths with one illegal
//! turn in an exponentially-growing stratum, indivisible Nielsen paths,
//! exceptional paths and the UPG normal-form splitting.
//!
//! A point inside an edge is written as an itinerary: `D_{t+1}` is the
//! segment of `f(D_t)` containing `f^{t+1}(x)`. Itineraries end either at a
//! vertex (the last index is a segment boundary) or in a repeating cycle,
//! which names a periodic point exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::StratumClass;
use crate::graph::Path;
use crate::map::{TopRep, Turn, DEFAULT_MAX_LEN};
use crate::word::{self, Alphabet, DirEdge, Word};

// ---------------------------------------------------------------------------
// Splittings

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctureCert {
    /// Initial vertex of the top NEG edge or terminal vertex of its inverse.
    NegEdge,
    /// An r-legal path in `G_r` splits next to every `H_r` edge.
    Legal,
    /// The adjacent `H_r` edge is `k`-protected.
    Protected { k: usize },
    /// Checked directly up to the recorded depth only.
    Depth,
}

impl JunctureCert {
    fn structural(&self) -> bool {
        !matches!(self, JunctureCert::Depth)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splitting {
    pub pieces: Vec<Path>,
    pub circuit: bool,
    /// Cut positions in the input (cyclic positions for circuits).
    pub junctures: Vec<usize>,
    pub certificates: Vec<JunctureCert>,
    pub depth_verified: usize,
    /// Set when every juncture is guaranteed for all iterates.
    pub structural_certificate: Option<String>,
}

impl Splitting {
    pub fn is_trivial(&self) -> bool {
        self.junctures.is_empty()
    }
}

/// Direct check that `pieces` form a `k`-splitting: every piece has a
/// nontrivial `f_#^k` image and the images concatenate without cancellation
/// (including the wraparound for a circuit).
pub fn is_k_splitting(f: &TopRep, pieces: &[Path], circuit: bool, k: usize) -> Result<bool> {
    let mut images = Vec::with_capacity(pieces.len());
    for p in pieces {
        let mut cur = p.clone();
        for _ in 0..k {
            cur = f.apply(&cur);
            if cur.len() > DEFAULT_MAX_LEN {
                return Err(Error::budget("splitting check exceeds the length cap"));
            }
        }
        if cur.is_empty() {
            return Ok(false);
        }
        images.push(cur);
    }
    let n = images.len();
    let bad = |a: &Path, b: &Path| a[a.len() - 1] == b[0].inv();
    for i in 0..n.saturating_sub(1) {
        if bad(&images[i], &images[i + 1]) {
            return Ok(false);
        }
    }
    if circuit && n > 0 && bad(&images[n - 1], &images[0]) {
        return Ok(false);
    }
    Ok(true)
}

pub fn verify_splitting(f: &TopRep, s: &Splitting, depth: usize) -> Result<bool> {
    if s.junctures.is_empty() {
        return Ok(true);
    }
    for k in 1..=depth {
        if !is_k_splitting(f, &s.pieces, s.circuit, k)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Successive images `f_#^1 .. f_#^depth` of a path.
fn image_chain(f: &TopRep, p: &[DirEdge], depth: usize, max_len: usize) -> Result<Vec<Path>> {
    let mut out = Vec::with_capacity(depth);
    let mut cur = p.to_vec();
    for _ in 0..depth {
        let raw: usize = cur.iter().map(|e| f.edge_image[e.index()].len()).sum();
        if raw > max_len {
            return Err(Error::budget(format!("iterate exceeds {max_len} edges")));
        }
        cur = f.apply(&cur);
        out.push(cur.clone());
    }
    Ok(out)
}

fn pieces_at(sigma: &[DirEdge], cuts: &[usize], circuit: bool) -> Vec<Path> {
    if cuts.is_empty() {
        return vec![sigma.to_vec()];
    }
    if circuit {
        let n = sigma.len();
        (0..cuts.len())
            .map(|t| {
                let a = cuts[t];
                let b = if t + 1 < cuts.len() { cuts[t + 1] } else { cuts[0] + n };
                (a..b).map(|i| sigma[i % n]).collect()
            })
            .collect()
    } else {
        let mut bounds = vec![0];
        bounds.extend_from_slice(cuts);
        bounds.push(sigma.len());
        bounds.windows(2).map(|w| sigma[w[0]..w[1]].to_vec()).collect()
    }
}

fn splits_to_depth(f: &TopRep, pieces: &[Path], circuit: bool, depth: usize, max_len: usize) -> Result<bool> {
    let chains: Vec<Vec<Path>> = pieces
        .iter()
        .map(|p| image_chain(f, p, depth, max_len))
        .collect::<Result<_>>()?;
    let n = pieces.len();
    for k in 0..depth {
        if chains.iter().any(|c| c[k].is_empty()) {
            return Ok(false);
        }
        let bad = |a: &Path, b: &Path| a[a.len() - 1] == b[0].inv();
        for i in 0..n {
            let j = i + 1;
            if j == n && !circuit {
                break;
            }
            if bad(&chains[i][k], &chains[j % n][k]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn top_stratum(f: &TopRep, sigma: &[DirEdge]) -> Option<usize> {
    let s = f.stratum_of();
    sigma.iter().map(|e| s[e.index()]).max()
}

/// The unique edge of a NEG stratum `i` when `f(E) = E·u`.
pub fn neg_edge(f: &TopRep, i: usize) -> Option<(usize, Path)> {
    let st = f.strata.get(i)?;
    if st.class != StratumClass::Neg || st.edges.len() != 1 {
        return None;
    }
    let e = st.edges[0];
    let img = &f.edge_image[e];
    (img.first() == Some(&DirEdge::fwd(e))).then(|| (e, img[1..].to_vec()))
}

/// Least `l` such that `f^l` of every `H_r` edge crosses at least two
/// `H_r` edges.
fn growth_power(f: &TopRep, r: usize) -> Option<usize> {
    let edges = &f.strata[r].edges;
    let mut cur: Vec<Path> = edges.iter().map(|&e| vec![DirEdge::fwd(e)]).collect();
    for l in 1..=64 {
        cur = cur.iter().map(|p| f.apply(p)).collect();
        if cur.iter().any(|p| p.len() > 1 << 16) {
            return None;
        }
        if cur.iter().all(|p| p.iter().filter(|x| f.in_stratum(**x, r)).count() >= 2) {
            return Some(l);
        }
    }
    None
}

/// Whether the edge at position `a` of the path is `k`-protected.
fn protected(f: &TopRep, sigma: &[DirEdge], a: usize, r: usize, k: usize) -> bool {
    if !f.in_stratum(sigma[a], r) {
        return false;
    }
    let hr: Vec<usize> = (0..sigma.len()).filter(|&i| f.in_stratum(sigma[i], r)).collect();
    let pos = hr.iter().position(|&i| i == a).unwrap();
    if pos < k || pos + k >= hr.len() {
        return false;
    }
    let window = &sigma[hr[pos - k]..=hr[pos + k]];
    let s = f.stratum_of();
    window.iter().all(|e| s[e.index()] <= r) && f.is_r_legal(window, r)
}

/// Structural reason a path (not a circuit) splits at position `j`.
fn certify(f: &TopRep, sigma: &[DirEdge], j: usize) -> JunctureCert {
    let n = sigma.len();
    let Some(t) = top_stratum(f, sigma) else {
        return JunctureCert::Depth;
    };
    let (before, after) = (sigma[j - 1], sigma[j]);
    if let Some((e, _)) = neg_edge(f, t) {
        if after == DirEdge::fwd(e) || before == DirEdge::rev(e) {
            return JunctureCert::NegEdge;
        }
    }
    if f.strata[t].is_eg() {
        if f.is_r_legal(sigma, t) && (f.in_stratum(before, t) || f.in_stratum(after, t)) {
            return JunctureCert::Legal;
        }
        if let Some(l) = growth_power(f, t) {
            let k = 2 * l * f.bcc_bound();
            if protected(f, sigma, j - 1, t, k) || (j < n && protected(f, sigma, j, t, k)) {
                return JunctureCert::Protected { k };
            }
        }
    }
    JunctureCert::Depth
}

/// Finest splitting of `sigma` verified to depth `depth`. Candidate cut
/// points are those that split on their own; the full set is then checked
/// together and thinned greedily if needed.
pub fn split_path(f: &TopRep, sigma: &[DirEdge], circuit: bool, depth: usize) -> Result<Splitting> {
    split_path_with(f, sigma, circuit, depth, DEFAULT_MAX_LEN)
}

pub fn split_path_with(f: &TopRep, sigma: &[DirEdge], circuit: bool, depth: usize, max_len: usize) -> Result<Splitting> {
    f.graph.graph.check_path(sigma)?;
    if !word::is_reduced(sigma) || (circuit && !sigma.is_empty() && sigma[0] == sigma[sigma.len() - 1].inv()) {
        return Err(Error::InvalidInput("input must be tight".into()));
    }
    if circuit && !f.graph.graph.is_closed(sigma) {
        return Err(Error::MalformedPath("circuit is not closed".into()));
    }
    let n = sigma.len();
    let range: Vec<usize> = if circuit { (0..n).collect() } else { (1..n).collect() };
    let mut singles = Vec::new();
    for j in range {
        if splits_to_depth(f, &pieces_at(sigma, &[j], circuit), circuit, depth, max_len)? {
            singles.push(j);
        }
    }
    let mut cuts = singles.clone();
    if cuts.len() > 1 && !splits_to_depth(f, &pieces_at(sigma, &cuts, circuit), circuit, depth, max_len)? {
        cuts.clear();
        for &j in &singles {
            let mut trial = cuts.clone();
            trial.push(j);
            if splits_to_depth(f, &pieces_at(sigma, &trial, circuit), circuit, depth, max_len)? {
                cuts = trial;
            }
        }
    }
    // Circuit junctures are only ever certified to the checked depth.
    let certificates: Vec<JunctureCert> = cuts
        .iter()
        .map(|&j| if circuit { JunctureCert::Depth } else { certify(f, sigma, j) })
        .collect();
    let structural_certificate = if !cuts.is_empty() && certificates.iter().all(JunctureCert::structural) {
        let mut tags: Vec<&str> = certificates
            .iter()
            .map(|c| match c {
                JunctureCert::NegEdge => "neg-edge",
                JunctureCert::Legal => "r-legal",
                JunctureCert::Protected { .. } => "protected",
                JunctureCert::Depth => unreachable!(),
            })
            .collect();
        tags.dedup();
        Some(tags.join("+"))
    } else {
        None
    };
    Ok(Splitting {
        pieces: pieces_at(sigma, &cuts, circuit),
        circuit,
        junctures: cuts,
        certificates,
        depth_verified: depth,
        structural_certificate,
    })
}

// ---------------------------------------------------------------------------
// Points inside edges

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// The last prefix index is a segment boundary.
    Vertex,
    /// The itinerary repeats this cycle forever.
    Cycle(Vec<usize>),
}

/// A point in the interior of the directed edge `edge`, named by its
/// itinerary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndPoint {
    pub edge: DirEdge,
    pub prefix: Vec<usize>,
    pub tail: Tail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Point {
    Init,
    Term,
    Inner(EndPoint),
}

fn seg(f: &TopRep, d: DirEdge, i: usize) -> DirEdge {
    let img = &f.edge_image[d.index()];
    if d.is_forward() {
        img[i]
    } else {
        img[img.len() - 1 - i].inv()
    }
}

fn seg_count(f: &TopRep, d: DirEdge) -> usize {
    f.edge_image[d.index()].len()
}

impl EndPoint {
    /// `D_0 .. D_m` along the prefix (and `t` further cycle steps).
    fn edges_along(&self, f: &TopRep, extra: usize) -> Vec<DirEdge> {
        let mut ds = vec![self.edge];
        let m = self.prefix.len();
        let vertex = matches!(self.tail, Tail::Vertex);
        for (t, &i) in self.prefix.iter().enumerate() {
            if vertex && t + 1 == m {
                break;
            }
            ds.push(seg(f, ds[t], i));
        }
        if let Tail::Cycle(c) = &self.tail {
            for t in 0..extra {
                let d = *ds.last().unwrap();
                ds.push(seg(f, d, c[t % c.len()]));
            }
        }
        ds
    }

    pub fn normalize(mut self, f: &TopRep) -> Point {
        loop {
            match self.tail.clone() {
                Tail::Vertex => {
                    let Some(&b) = self.prefix.last() else {
                        return Point::Init;
                    };
                    let ds = self.edges_along(f, 0);
                    let len = seg_count(f, ds[ds.len() - 1]);
                    if b == 0 {
                        self.prefix.pop();
                        continue;
                    }
                    if b >= len {
                        self.prefix.pop();
                        match self.prefix.last_mut() {
                            Some(x) => *x += 1,
                            None => return Point::Term,
                        }
                        continue;
                    }
                    return Point::Inner(self);
                }
                Tail::Cycle(mut c) => {
                    let m = self.prefix.len();
                    let q = c.len();
                    let ds = self.edges_along(f, q);
                    let cyc: Vec<DirEdge> = ds[m..].to_vec();
                    if c.iter().all(|&i| i == 0) {
                        self.tail = Tail::Vertex;
                        if m == 0 {
                            return Point::Init;
                        }
                        continue;
                    }
                    if (0..q).all(|t| c[t] + 1 == seg_count(f, cyc[t])) {
                        self.tail = Tail::Vertex;
                        if m == 0 {
                            return Point::Term;
                        }
                        self.prefix[m - 1] += 1;
                        continue;
                    }
                    if let Some(p) = (1..q).find(|&p| q % p == 0 && cyc[p] == cyc[0] && (0..q).all(|t| c[t] == c[t % p])) {
                        c.truncate(p);
                    }
                    let q = c.len();
                    let mut ds = ds[..=m].to_vec();
                    while let Some(&last) = self.prefix.last() {
                        let mm = self.prefix.len();
                        // D_{m-1} must also be the edge one step before the cycle closes.
                        let mut d = ds[mm];
                        for &i in &c[..q - 1] {
                            d = seg(f, d, i);
                        }
                        if last == c[q - 1] && d == ds[mm - 1] {
                            self.prefix.pop();
                            ds.pop();
                            c.rotate_right(1);
                        } else {
                            break;
                        }
                    }
                    self.tail = Tail::Cycle(c);
                    return Point::Inner(self);
                }
            }
        }
    }

    /// The same point seen in the reversed edge.
    pub fn reverse(&self, f: &TopRep) -> EndPoint {
        let m = self.prefix.len();
        let ds = self.edges_along(f, 0);
        let mut prefix = Vec::with_capacity(m);
        for (t, &i) in self.prefix.iter().enumerate() {
            let len = seg_count(f, ds[t]);
            if t + 1 == m && matches!(self.tail, Tail::Vertex) {
                prefix.push(len - i);
            } else {
                prefix.push(len - 1 - i);
            }
        }
        let tail = match &self.tail {
            Tail::Vertex => Tail::Vertex,
            Tail::Cycle(c) => {
                let cyc = self.edges_along(f, c.len());
                Tail::Cycle(c.iter().enumerate().map(|(t, &i)| seg_count(f, cyc[m + t]) - 1 - i).collect())
            }
        };
        EndPoint {
            edge: self.edge.inv(),
            prefix,
            tail,
        }
    }

    /// `(i0, f(x))`: the number of whole segments of `f(D)` before `f(x)`,
    /// and the image point inside segment `i0`.
    pub fn step(&self, f: &TopRep) -> (usize, Point) {
        match (self.prefix.first(), &self.tail) {
            (Some(&i0), _) => {
                let next = EndPoint {
                    edge: seg(f, self.edge, i0),
                    prefix: self.prefix[1..].to_vec(),
                    tail: self.tail.clone(),
                };
                (i0, next.normalize(f))
            }
            (None, Tail::Cycle(c)) => {
                let mut rot = c.clone();
                rot.rotate_left(1);
                let next = EndPoint {
                    edge: seg(f, self.edge, c[0]),
                    prefix: Vec::new(),
                    tail: Tail::Cycle(rot),
                };
                (c[0], next.normalize(f))
            }
            (None, Tail::Vertex) => unreachable!("normalized points are interior"),
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.prefix.is_empty() && matches!(self.tail, Tail::Cycle(_))
    }

    pub fn describe(&self) -> String {
        let pre: Vec<String> = self.prefix.iter().map(|i| i.to_string()).collect();
        match &self.tail {
            Tail::Vertex => format!("{}|{}", pre.join("."), "v"),
            Tail::Cycle(c) => {
                let cs: Vec<String> = c.iter().map(|i| i.to_string()).collect();
                format!("{}|({})", pre.join("."), cs.join("."))
            }
        }
    }
}

/// One side of a path with an illegal turn, read outward from the turn:
/// whole edges followed by an optional initial segment of `end.edge`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Half {
    pub edges: Path,
    pub end: Option<EndPoint>,
}

impl Half {
    pub fn first(&self) -> Option<DirEdge> {
        self.edges.first().copied().or(self.end.as_ref().map(|p| p.edge))
    }

    pub fn last(&self) -> Option<DirEdge> {
        self.end.as_ref().map(|p| p.edge).or(self.edges.last().copied())
    }

    /// Whole edges followed by the partial edge, if any.
    pub fn elements(&self) -> Vec<DirEdge> {
        let mut v = self.edges.clone();
        v.extend(self.end.as_ref().map(|p| p.edge));
        v
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.end.is_none()
    }

    pub fn apply(&self, f: &TopRep) -> Half {
        let mut full = f.apply_raw(&self.edges);
        let mut end = None;
        if let Some(p) = &self.end {
            let (i0, pt) = p.step(f);
            full.extend((0..i0).map(|i| seg(f, p.edge, i)));
            match pt {
                Point::Init => {}
                Point::Term => full.push(seg(f, p.edge, i0)),
                Point::Inner(e) => end = Some(e),
            }
        }
        let mut full = word::reduce(&full);
        if let Some(e) = &end {
            if full.last() == Some(&e.edge.inv()) {
                full.pop();
                end = Some(e.reverse(f));
            }
        }
        Half { edges: full, end }
    }

    fn hr_count(&self, f: &TopRep, r: usize) -> usize {
        self.elements().iter().filter(|e| f.in_stratum(**e, r)).count()
    }
}

/// `ρ = L̄·R` with the illegal turn at the common initial vertex of `L` and
/// `R`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rho {
    pub left: Half,
    pub right: Half,
}

impl Rho {
    pub fn reversed(&self) -> Rho {
        Rho {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn canonical(&self) -> Rho {
        let r = self.reversed();
        if r < *self {
            r
        } else {
            self.clone()
        }
    }

    pub fn turn(&self) -> Option<Turn> {
        Some(Turn::new(self.left.first()?, self.right.first()?))
    }

    /// The underlying edge path when both ends are vertices.
    pub fn path(&self) -> Option<Path> {
        if self.left.end.is_some() || self.right.end.is_some() {
            return None;
        }
        let mut p = word::inverse(&self.left.edges);
        p.extend_from_slice(&self.right.edges);
        Some(p)
    }

    pub fn hr_count(&self, f: &TopRep, r: usize) -> usize {
        self.left.hr_count(f, r) + self.right.hr_count(f, r)
    }

    /// Crossings of each edge, a partial edge counting once.
    pub fn crossings(&self, edge_count: usize) -> Vec<usize> {
        let mut c = vec![0; edge_count];
        for e in self.left.elements().into_iter().chain(self.right.elements()) {
            c[e.index()] += 1;
        }
        c
    }

    pub fn display(&self, alphabet: &Alphabet) -> String {
        let mut s = String::new();
        if let Some(p) = &self.left.end {
            s.push_str(&format!("({})", alphabet.letter(p.edge.inv())));
        }
        for &e in self.left.edges.iter().rev() {
            s.push_str(&alphabet.letter(e.inv()));
        }
        for &e in &self.right.edges {
            s.push_str(&alphabet.letter(e));
        }
        if let Some(p) = &self.right.end {
            s.push_str(&format!("({})", alphabet.letter(p.edge)));
        }
        s
    }

    /// `f_#(ρ)`, or `None` when the illegal turn disappears.
    pub fn step(&self, f: &TopRep) -> Option<Rho> {
        let mut l = self.left.apply(f);
        let mut r = self.right.apply(f);
        let k = l.edges.iter().zip(&r.edges).take_while(|(a, b)| a == b).count();
        l.edges.drain(..k);
        r.edges.drain(..k);
        for (a, b) in [(&l, &r), (&r, &l)] {
            if a.edges.is_empty() {
                let Some(p) = &a.end else { return None };
                if b.first() == Some(p.edge) {
                    return None;
                }
            }
        }
        Some(Rho { left: l, right: r })
    }

    /// Conditions (i)-(iii) at this iterate, with the `H_r` edge bound `b`.
    pub fn check(&self, f: &TopRep, r: usize, b: usize) -> std::result::Result<(), String> {
        let (Some(l0), Some(r0)) = (self.left.first(), self.right.first()) else {
            return Err("a side is trivial".into());
        };
        if f.graph.graph.init(l0) != f.graph.graph.init(r0) {
            return Err("sides do not meet".into());
        }
        if !(f.in_stratum(l0, r) && f.in_stratum(r0, r)) || f.is_legal_turn(l0, r0) {
            return Err("the turn is not an illegal H_r turn".into());
        }
        let s = f.stratum_of();
        for h in [&self.left, &self.right] {
            let el = h.elements();
            if el.iter().any(|e| s[e.index()] > r) {
                return Err("leaves G_r".into());
            }
            if !f.is_r_legal(&el, r) {
                return Err("more than one illegal H_r turn".into());
            }
            if !f.in_stratum(*el.last().unwrap(), r) {
                return Err("an end edge is not in H_r".into());
            }
        }
        let c = self.hr_count(f, r);
        if c > b {
            return Err(format!("{c} H_r edges exceed the bound {b}"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// The set P_r

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrBudget {
    /// Bound on `H_r` edges in every iterate (condition (iii)).
    pub max_hr_edges: usize,
    /// Iterates over which every element is re-verified.
    pub max_iterates: usize,
    /// Longest periodic itinerary and preimage depth for partial endpoints.
    pub max_refine_depth: usize,
    /// Longest run of lower-stratum edges inside a side.
    pub max_lower_run: usize,
    /// Total work units before the search gives up.
    pub max_work: usize,
}

impl Default for PrBudget {
    fn default() -> Self {
        PrBudget {
            max_hr_edges: 6,
            max_iterates: 30,
            max_refine_depth: 8,
            max_lower_run: 4,
            max_work: 20_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NielsenCandidate {
    pub rho: Rho,
    pub text: String,
    pub turn: Turn,
    /// Steps until the orbit becomes periodic.
    pub preperiod: usize,
    /// Eventual period of the orbit under `f_#`.
    pub period: usize,
    /// Eventual period up to orientation.
    pub unoriented_period: usize,
    pub hr_edges: usize,
    pub crossings: Vec<usize>,
    /// Every `H_r` edge is crossed exactly twice.
    pub crosses_each_twice: bool,
    /// Conjugacy class (cyclically reduced, least rotation) of a closed path.
    pub conjugacy_class: Option<Word>,
}

impl NielsenCandidate {
    pub fn is_periodic(&self) -> bool {
        self.preperiod == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrResult {
    pub stratum: usize,
    /// One representative per orientation pair.
    pub elements: Vec<NielsenCandidate>,
    pub complete: bool,
    pub notes: Vec<String>,
}

impl PrResult {
    pub fn periodic(&self) -> Vec<&NielsenCandidate> {
        self.elements.iter().filter(|c| c.is_periodic()).collect()
    }
}

struct Orbit {
    preperiod: usize,
    period: usize,
    unoriented: usize,
}

/// Iterate `ρ` checking (i)-(iii) at every step up to `T` and detect the
/// eventual period by hashing the iterates.
/// Errors are `(undecided, reason)`: a rejection is final, an undecided
/// orbit ran out of iterates before repeating.
fn orbit(f: &TopRep, r: usize, rho: &Rho, budget: &PrBudget) -> std::result::Result<Orbit, (bool, String)> {
    let mut seen: HashMap<Rho, usize> = HashMap::new();
    let mut seq = vec![rho.clone()];
    let mut cycle: Option<(usize, usize)> = None;
    rho.check(f, r, budget.max_hr_edges).map_err(|e| (false, format!("iterate 0: {e}")))?;
    seen.insert(rho.clone(), 0);
    for k in 1..=budget.max_iterates {
        let next = seq[k - 1].step(f).ok_or_else(|| (false, format!("iterate {k}: the illegal turn vanishes")))?;
        next.check(f, r, budget.max_hr_edges).map_err(|e| (false, format!("iterate {k}: {e}")))?;
        if cycle.is_none() {
            if let Some(&i) = seen.get(&next) {
                cycle = Some((i, k - i));
            }
        }
        seen.entry(next.clone()).or_insert(k);
        seq.push(next);
    }
    let (preperiod, period) = cycle.ok_or((true, "no repeat within the iterate budget".to_string()))?;
    let start = &seq[preperiod];
    let rev = start.reversed();
    let unoriented = (1..=period).find(|&k| seq[preperiod + k] == rev).unwrap_or(period);
    Ok(Orbit {
        preperiod,
        period,
        unoriented,
    })
}

struct Search<'a> {
    f: &'a TopRep,
    r: usize,
    budget: PrBudget,
    work: usize,
    exhausted: bool,
    memo: HashMap<Half, Half>,
}

impl<'a> Search<'a> {
    fn spend(&mut self, n: usize) -> bool {
        self.work += n;
        if self.work > self.budget.max_work {
            self.exhausted = true;
        }
        !self.exhausted
    }

    fn hr_dir_edges(&self) -> Vec<DirEdge> {
        self.f.strata[self.r]
            .edges
            .iter()
            .flat_map(|&e| [DirEdge::fwd(e), DirEdge::rev(e)])
            .collect()
    }

    /// r-legal paths in `G_r` starting with an `H_r` edge, with fewer than
    /// `B` edges in `H_r`.
    fn skeletons(&mut self) -> Vec<Path> {
        let f = self.f;
        let g = &f.graph.graph;
        let strata = f.stratum_of();
        let in_gr: Vec<DirEdge> = DirEdge::all(f.edge_count()).filter(|e| strata[e.index()] <= self.r).collect();
        let cap = self.budget.max_hr_edges.saturating_sub(1);
        let mut out = Vec::new();
        let mut stack: Vec<(Path, usize, usize)> =
            self.hr_dir_edges().into_iter().map(|e| (vec![e], 1, 0)).collect();
        while let Some((p, hr, run)) = stack.pop() {
            if !self.spend(1) {
                break;
            }
            let last = *p.last().unwrap();
            for &e in &in_gr {
                if e == last.inv() || g.init(e) != g.term(last) {
                    continue;
                }
                let h = f.in_stratum(e, self.r);
                let (hr2, run2) = if h { (hr + 1, 0) } else { (hr, run + 1) };
                if hr2 > cap || run2 > self.budget.max_lower_run {
                    continue;
                }
                if h && f.in_stratum(last, self.r) && !f.is_legal_turn(last.inv(), e) {
                    continue;
                }
                let mut q = p.clone();
                q.push(e);
                stack.push((q, hr2, run2));
            }
            out.push(p);
        }
        out.sort();
        out
    }

    /// Interior points of `H_r` edges fixed by `f^p`, found by following all
    /// itineraries of length `p` that return to their starting edge.
    fn periodic_points(&mut self, p: usize) -> Vec<EndPoint> {
        let f = self.f;
        let mut out = BTreeSet::new();
        for d in self.hr_dir_edges() {
            let mut stack = vec![(d, Vec::<usize>::new())];
            while let Some((cur, idx)) = stack.pop() {
                if !self.spend(1) {
                    return out.into_iter().collect();
                }
                if idx.len() == p {
                    if cur == d {
                        let ep = EndPoint {
                            edge: d,
                            prefix: Vec::new(),
                            tail: Tail::Cycle(idx),
                        };
                        if let Point::Inner(e) = ep.normalize(f) {
                            out.insert(e);
                        }
                    }
                    continue;
                }
                for i in 0..seg_count(f, cur) {
                    let nx = seg(f, cur, i);
                    if f.in_stratum(nx, self.r) {
                        let mut v = idx.clone();
                        v.push(i);
                        stack.push((nx, v));
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Attach an ending to a skeleton if the result is a valid side.
    fn make_half(&self, skel: &[DirEdge], end: Option<&EndPoint>) -> Option<Half> {
        let f = self.f;
        let g = &f.graph.graph;
        let r = self.r;
        match end {
            None => {
                let last = *skel.last()?;
                f.in_stratum(last, r).then(|| Half {
                    edges: skel.to_vec(),
                    end: None,
                })
            }
            Some(p) => {
                if !f.in_stratum(p.edge, r) {
                    return None;
                }
                if let Some(&last) = skel.last() {
                    if p.edge == last.inv() || g.init(p.edge) != g.term(last) {
                        return None;
                    }
                    if f.in_stratum(last, r) && !f.is_legal_turn(last.inv(), p.edge) {
                        return None;
                    }
                    let hr = skel.iter().filter(|e| f.in_stratum(**e, r)).count() + 1;
                    if hr + 1 > self.budget.max_hr_edges {
                        return None;
                    }
                }
                Some(Half {
                    edges: skel.to_vec(),
                    end: Some(p.clone()),
                })
            }
        }
    }

    fn image(&mut self, h: &Half) -> Half {
        if let Some(i) = self.memo.get(h) {
            return i.clone();
        }
        let i = h.apply(self.f);
        self.spend(i.edges.len() + 1);
        self.memo.insert(h.clone(), i.clone());
        i
    }

    fn pair_up(&self, groups: impl Iterator<Item = Vec<Half>>) -> Vec<Rho> {
        let f = self.f;
        let mut out = Vec::new();
        for hs in groups {
            for l in &hs {
                for rr in &hs {
                    let (a, b) = (l.first().unwrap(), rr.first().unwrap());
                    if a >= b {
                        continue;
                    }
                    if a == b || !f.in_stratum(a, self.r) || !f.in_stratum(b, self.r) || f.is_legal_turn(a, b) {
                        continue;
                    }
                    let rho = Rho {
                        left: l.clone(),
                        right: rr.clone(),
                    };
                    if rho.hr_count(f, self.r) > self.budget.max_hr_edges {
                        continue;
                    }
                    out.push(rho);
                }
            }
        }
        out
    }

    /// Pairs of sides each of which `f^p` maps to `c` followed by itself.
    /// Sides are matched on a rolling hash of `c`; every pair is re-verified
    /// on `ρ` afterwards.
    fn periodic_candidates(&mut self, skels: &[Path], p: usize) -> Vec<Rho> {
        let f = self.f;
        let points = self.periodic_points(p);
        let longest = skels.iter().map(Vec::len).max().unwrap_or(0);
        // (skeleton index or none, point index or none)
        let mut sides: Vec<(Option<usize>, Option<usize>)> = Vec::new();
        for (i, sk) in skels.iter().enumerate() {
            if self.make_half(sk, None).is_some() && self.fixed_suffix(&Half { edges: sk.clone(), end: None }, p) {
                sides.push((Some(i), None));
            }
        }
        // The image of a side ending at x is f^p(skeleton) followed by the
        // image W·x of the initial segment up to x, with no cancellation in
        // front of W. So the skeleton and W must agree on their overlap.
        let mut w_full: Vec<Option<Path>> = vec![None; points.len()];
        for (j, pt) in points.iter().enumerate() {
            let base = Half {
                edges: Vec::new(),
                end: Some(pt.clone()),
            };
            let mut img = base.clone();
            for _ in 0..p {
                let next = self.image(&img);
                img = self.truncate(&next, longest + 2);
            }
            if self.exhausted {
                return Vec::new();
            }
            if img.end.as_ref() != Some(pt) {
                continue;
            }
            let w = &img.edges;
            let cut = w.iter().filter(|e| f.in_stratum(**e, self.r)).count() >= longest + 1;
            for (i, sk) in skels.iter().enumerate() {
                let fits = if sk.len() <= w.len() { w.ends_with(sk) } else { !cut && sk.ends_with(w) };
                if fits && self.make_half(sk, Some(pt)).is_some() {
                    let h = Half {
                        edges: sk.clone(),
                        end: Some(pt.clone()),
                    };
                    if self.fixed_suffix(&h, p) {
                        sides.push((Some(i), Some(j)));
                    }
                }
            }
            sides.push((None, Some(j)));
            let mut full = base.clone();
            for _ in 0..p {
                full = full.apply(f);
                if !self.spend(full.edges.len() + 1) {
                    return Vec::new();
                }
            }
            w_full[j] = Some(full.edges);
        }
        let mut f_hash: HashMap<usize, (Path, PrefixHash)> = HashMap::new();
        let mut w_hash: HashMap<usize, PrefixHash> = HashMap::new();
        let mut groups: BTreeMap<(usize, usize, u64), Vec<Half>> = BTreeMap::new();
        for (si, pj) in sides {
            let skel: Path = si.map(|i| skels[i].clone()).unwrap_or_default();
            let (fp, hf) = match si {
                Some(i) => {
                    if !f_hash.contains_key(&i) {
                        let mut cur = skels[i].clone();
                        for _ in 0..p {
                            cur = f.apply(&cur);
                            if !self.spend(cur.len() + 1) {
                                return Vec::new();
                            }
                        }
                        let h = PrefixHash::new(&cur);
                        f_hash.insert(i, (cur, h));
                    }
                    f_hash[&i].clone()
                }
                None => (Vec::new(), PrefixHash::new(&[])),
            };
            let (key_len, key_hash, end) = match pj {
                None => {
                    let n = fp.len() - skel.len();
                    (n, hf.prefix(n), None)
                }
                Some(j) => {
                    let w = w_full[j].as_ref().unwrap();
                    let hw = w_hash.entry(j).or_insert_with(|| PrefixHash::new(w));
                    let mut k = 0;
                    while k < fp.len() && k < w.len() && fp[fp.len() - 1 - k] == w[k].inv() {
                        k += 1;
                    }
                    let head = fp.len() - k;
                    let total = head + w.len() - k;
                    let Some(n) = total.checked_sub(skel.len()) else { continue };
                    let hash = if n <= head {
                        hf.prefix(n)
                    } else {
                        PrefixHash::join(hf.prefix(head), hw.sub(k, k + n - head), n - head)
                    };
                    (n, hash, Some(points[j].clone()))
                }
            };
            let h = Half { edges: skel, end };
            let Some(first) = h.first() else { continue };
            let v = f.graph.graph.init(first);
            groups.entry((v, key_len, key_hash)).or_default().push(h);
        }
        self.pair_up(groups.into_values())
    }

    /// Whether `f^p(h)` ends with `h`, computed on suffixes only. Cutting a
    /// side just before an `H_r` edge keeps its image a suffix of the full
    /// image.
    fn fixed_suffix(&mut self, h: &Half, p: usize) -> bool {
        let need = h.edges.len() + 1;
        let mut img = h.clone();
        for _ in 0..p {
            let next = self.image(&img);
            img = self.truncate(&next, need);
            if self.exhausted {
                return false;
            }
        }
        img.end == h.end && img.edges.ends_with(&h.edges)
    }

    /// Shortest suffix starting at an `H_r` edge with at least `need` `H_r`
    /// elements.
    fn truncate(&self, h: &Half, need: usize) -> Half {
        let mut count = usize::from(h.end.is_some());
        for i in (0..h.edges.len()).rev() {
            if self.f.in_stratum(h.edges[i], self.r) {
                count += 1;
                if count >= need {
                    return Half {
                        edges: h.edges[i..].to_vec(),
                        end: h.end.clone(),
                    };
                }
            }
        }
        h.clone()
    }

    /// Points mapped by `f` onto the endpoint of `target`.
    fn preimage_ends(&self, target: &Option<EndPoint>) -> Vec<Option<EndPoint>> {
        let f = self.f;
        let mut out = Vec::new();
        match target {
            None => {
                out.push(None);
                for d in self.hr_dir_edges() {
                    for b in 1..seg_count(f, d) {
                        out.push(Some(EndPoint {
                            edge: d,
                            prefix: vec![b],
                            tail: Tail::Vertex,
                        }));
                    }
                }
            }
            Some(t) => {
                for d in self.hr_dir_edges() {
                    for i in 0..seg_count(f, d) {
                        if seg(f, d, i) != t.edge {
                            continue;
                        }
                        let mut prefix = vec![i];
                        prefix.extend_from_slice(&t.prefix);
                        let ep = EndPoint {
                            edge: d,
                            prefix,
                            tail: t.tail.clone(),
                        };
                        if let Point::Inner(e) = ep.normalize(f) {
                            if e.prefix.len() <= self.budget.max_refine_depth {
                                out.push(Some(e));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Sides `L` with `f(L) = c·target`, keyed by `c` and the turn vertex.
    fn side_preimages(&mut self, skels: &[Path], target: &Half) -> BTreeMap<(Path, usize), Vec<Half>> {
        let f = self.f;
        let mut groups: BTreeMap<(Path, usize), Vec<Half>> = BTreeMap::new();
        for end in self.preimage_ends(&target.end) {
            let mut cands: Vec<Half> = skels.iter().filter_map(|s| self.make_half(s, end.as_ref())).collect();
            if let Some(e) = &end {
                cands.extend(self.make_half(&[], Some(e)));
            }
            for h in cands {
                let img = self.image(&h);
                if self.exhausted {
                    return groups;
                }
                if img.end == target.end && img.edges.ends_with(&target.edges) {
                    let c = img.edges[..img.edges.len() - target.edges.len()].to_vec();
                    let v = f.graph.graph.init(h.first().unwrap());
                    groups.entry((c, v)).or_default().push(h);
                }
            }
        }
        groups
    }

    /// All `ρ` in `P_r` with `f_#(ρ) = target`.
    fn pullback(&mut self, skels: &[Path], target: &Rho) -> Vec<Rho> {
        let f = self.f;
        let ls = self.side_preimages(skels, &target.left);
        let rs = self.side_preimages(skels, &target.right);
        let mut out = Vec::new();
        for (key, lh) in &ls {
            let Some(rh) = rs.get(key) else { continue };
            for l in lh {
                for r in rh {
                    let rho = Rho {
                        left: l.clone(),
                        right: r.clone(),
                    };
                    if rho.check(f, self.r, self.budget.max_hr_edges).is_ok() && rho.step(f).as_ref() == Some(target) {
                        out.push(rho);
                    }
                }
            }
        }
        out
    }
}

const HASH_MOD: u64 = (1 << 61) - 1;
const HASH_BASE: u64 = 0x5851_f42d_4c95_7f2d % HASH_MOD;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % HASH_MOD as u128) as u64
}

/// Polynomial hashes of all prefixes of a path.
#[derive(Clone)]
struct PrefixHash {
    h: Vec<u64>,
    pw: Vec<u64>,
}

impl PrefixHash {
    fn new(p: &[DirEdge]) -> Self {
        let mut h = vec![0u64; p.len() + 1];
        let mut pw = vec![1u64; p.len() + 1];
        for (i, e) in p.iter().enumerate() {
            h[i + 1] = (mulmod(h[i], HASH_BASE) + e.slot() as u64 + 1) % HASH_MOD;
            pw[i + 1] = mulmod(pw[i], HASH_BASE);
        }
        PrefixHash { h, pw }
    }

    fn prefix(&self, n: usize) -> u64 {
        self.h[n]
    }

    fn sub(&self, i: usize, j: usize) -> u64 {
        (self.h[j] + HASH_MOD - mulmod(self.h[i], self.pw[j - i])) % HASH_MOD
    }

    fn join(a: u64, b: u64, b_len: usize) -> u64 {
        let mut pw = 1u64;
        let mut base = HASH_BASE;
        let mut e = b_len;
        while e > 0 {
            if e & 1 == 1 {
                pw = mulmod(pw, base);
            }
            base = mulmod(base, base);
            e >>= 1;
        }
        (mulmod(a, pw) + b) % HASH_MOD
    }
}

fn candidate(f: &TopRep, r: usize, rho: &Rho, o: &Orbit) -> NielsenCandidate {
    let alphabet = Alphabet::standard(f.edge_count());
    let crossings = rho.crossings(f.edge_count());
    let crosses_each_twice = f.strata[r].edges.iter().all(|&e| crossings[e] == 2);
    let conjugacy_class = rho
        .path()
        .filter(|p| !p.is_empty() && f.graph.graph.is_closed(p))
        .map(|p| word::conjugacy_key(&f.graph.express(&p)));
    NielsenCandidate {
        text: rho.display(&alphabet),
        turn: rho.turn().unwrap(),
        preperiod: o.preperiod,
        period: o.period,
        unoriented_period: o.unoriented,
        hr_edges: rho.hr_count(f, r),
        crossings,
        crosses_each_twice,
        conjugacy_class,
        rho: rho.clone(),
    }
}

fn check_stratum(f: &TopRep, r: usize) -> Result<()> {
    if f.strata.get(r).is_none_or(|s| !s.is_eg()) {
        return Err(Error::Usage(format!("stratum {r} is not exponentially growing")));
    }
    let report = f.check_rtt();
    let s = report.strata.iter().find(|s| s.stratum == r).unwrap();
    if !(s.rtt1.passed() && s.rtt2.passed() && s.rtt3.passed()) {
        return Err(Error::Precondition(format!("stratum {r} is not a relative train track stratum")));
    }
    Ok(())
}

/// The finite set `P_r` within the budget: periodic elements come from
/// sides fixed up to a common prefix by `f^p` for `p ≤ d`, and the rest are
/// pulled back level by level from them.
pub fn compute_pr(f: &TopRep, r: usize, budget: &PrBudget) -> Result<PrResult> {
    check_stratum(f, r)?;
    let mut s = Search {
        f,
        r,
        budget: *budget,
        work: 0,
        exhausted: false,
        memo: HashMap::new(),
    };
    let mut notes = Vec::new();
    let mut undecided = false;
    let skels = s.skeletons();
    let mut found: BTreeMap<Rho, NielsenCandidate> = BTreeMap::new();
    let mut frontier: Vec<Rho> = Vec::new();
    for p in 1..=budget.max_refine_depth.max(1) {
        for rho in s.periodic_candidates(&skels, p) {
            let key = rho.canonical();
            if found.contains_key(&key) {
                continue;
            }
            match orbit(f, r, &key, budget) {
                Ok(o) if o.preperiod == 0 => {
                    found.insert(key.clone(), candidate(f, r, &key, &o));
                    frontier.push(key.clone());
                    frontier.push(key.reversed());
                }
                Ok(_) => {}
                Err((u, e)) => {
                    undecided |= u;
                    notes.push(format!("discarded {}: {e}", key.display(&Alphabet::standard(f.edge_count()))));
                }
            }
        }
        if s.exhausted {
            break;
        }
    }
    // Every iterate of a periodic element is periodic.
    let mut k = 0;
    while k < frontier.len() {
        let next = frontier[k].step(f);
        if let Some(n) = next {
            let key = n.canonical();
            if !found.contains_key(&key) {
                match orbit(f, r, &key, budget) {
                    Ok(o) => {
                        found.insert(key.clone(), candidate(f, r, &key, &o));
                        frontier.push(key.clone());
                        frontier.push(key.reversed());
                    }
                    Err((u, _)) => undecided |= u,
                }
            }
        }
        k += 1;
    }
    for _level in 1..=budget.max_iterates {
        if frontier.is_empty() || s.exhausted {
            break;
        }
        let mut next = Vec::new();
        for t in &frontier {
            for rho in s.pullback(&skels, t) {
                let key = rho.canonical();
                if found.contains_key(&key) {
                    continue;
                }
                match orbit(f, r, &key, budget) {
                    Ok(o) => {
                        found.insert(key.clone(), candidate(f, r, &key, &o));
                        next.push(key.clone());
                        next.push(key.reversed());
                    }
                    Err((u, e)) => {
                        undecided |= u;
                        notes.push(format!("pullback rejected: {e}"));
                    }
                }
            }
            if s.exhausted {
                break;
            }
        }
        frontier = next;
    }
    if !frontier.is_empty() && !s.exhausted {
        undecided = true;
        notes.push("preimage levels left unexplored".to_string());
    }
    if undecided {
        notes.push(format!("some orbits did not repeat within {} iterates", budget.max_iterates));
    }
    if s.exhausted {
        notes.push(format!("work budget of {} units exhausted", budget.max_work));
    }
    let mut elements: Vec<NielsenCandidate> = found.into_values().collect();
    elements.sort_by(|a, b| (a.preperiod, a.hr_edges, &a.rho).cmp(&(b.preperiod, b.hr_edges, &b.rho)));
    Ok(PrResult {
        stratum: r,
        elements,
        complete: !s.exhausted && !undecided,
        notes,
    })
}

/// Elements of `P_r` with periodic orbit, one per orientation pair.
pub fn indivisible_nielsen_paths(f: &TopRep, r: usize, budget: &PrBudget) -> Result<(Vec<NielsenCandidate>, bool)> {
    let pr = compute_pr(f, r, budget)?;
    let inps = pr.elements.into_iter().filter(|c| c.is_periodic()).collect();
    Ok((inps, pr.complete))
}

// ---------------------------------------------------------------------------
// Exceptional paths and the UPG splitting

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exceptional {
    /// Stratum of the first edge.
    pub i: usize,
    pub k: usize,
    /// Stratum of the last edge.
    pub j: usize,
    pub tau: Path,
    /// The middle is a power of `τ̄` rather than `τ`.
    pub inverted: bool,
}

/// Least root `τ` with `p = τ^l`.
fn root(p: &[DirEdge]) -> (Path, usize) {
    let n = p.len();
    for d in 1..=n {
        if n % d == 0 && (0..n).all(|t| p[t] == p[t % d]) {
            return (p[..d].to_vec(), n / d);
        }
    }
    (p.to_vec(), 1)
}

fn power_of(p: &[DirEdge], tau: &[DirEdge]) -> Option<usize> {
    if tau.is_empty() || p.len() % tau.len() != 0 {
        return None;
    }
    (0..p.len()).all(|t| p[t] == tau[t % tau.len()]).then(|| p.len() / tau.len())
}

/// A closed Nielsen path that is not a concatenation of two Nielsen paths.
fn is_indivisible_nielsen(f: &TopRep, tau: &[DirEdge]) -> bool {
    if tau.is_empty() || !f.graph.graph.is_closed(tau) || f.apply(tau) != tau {
        return false;
    }
    (1..tau.len()).all(|c| f.apply(&tau[..c]) != tau[..c])
}

pub fn is_exceptional(f: &TopRep, sigma: &[DirEdge]) -> Option<Exceptional> {
    let n = sigma.len();
    if n < 2 || !sigma[0].is_forward() || sigma[n - 1].is_forward() {
        return None;
    }
    let s = f.stratum_of();
    let (i, j) = (s[sigma[0].index()], s[sigma[n - 1].index()]);
    if j > i {
        return None;
    }
    let (_, ui) = neg_edge(f, i)?;
    let (_, uj) = neg_edge(f, j)?;
    if ui.is_empty() || uj.is_empty() {
        return None;
    }
    let (tau, _) = root(&ui);
    if !is_indivisible_nielsen(f, &tau) {
        return None;
    }
    power_of(&uj, &tau)?;
    let mid = &sigma[1..n - 1];
    if mid.is_empty() {
        return Some(Exceptional {
            i,
            k: 0,
            j,
            tau,
            inverted: false,
        });
    }
    if let Some(k) = power_of(mid, &tau) {
        return Some(Exceptional {
            i,
            k,
            j,
            tau,
            inverted: false,
        });
    }
    let inv = word::inverse(&tau);
    power_of(mid, &inv).map(|k| Exceptional {
        i,
        k,
        j,
        tau,
        inverted: true,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgSplit {
    /// Least `m` with the required splitting of `f_#^m(σ)`.
    pub m: Option<usize>,
    pub pieces: Vec<Path>,
    pub exceptional: Vec<bool>,
    pub depth_verified: usize,
}

/// Coarsens a splitting so every piece is a single edge or exceptional.
fn group_pieces(f: &TopRep, pieces: &[Path]) -> Option<(Vec<Path>, Vec<bool>)> {
    let n = pieces.len();
    // best[i]: a grouping of pieces[i..], as (end, exceptional) steps.
    let mut best: Vec<Option<(usize, bool)>> = vec![None; n + 1];
    let mut ok = vec![false; n + 1];
    ok[n] = true;
    for i in (0..n).rev() {
        let mut joined: Path = Vec::new();
        for j in i..n {
            joined.extend_from_slice(&pieces[j]);
            if !ok[j + 1] {
                continue;
            }
            if joined.len() == 1 {
                best[i] = Some((j + 1, false));
            } else if is_exceptional(f, &joined).is_some() {
                best[i] = Some((j + 1, true));
            } else {
                continue;
            }
            ok[i] = true;
            break;
        }
    }
    if !ok[0] {
        return None;
    }
    let (mut out, mut flags, mut i) = (Vec::new(), Vec::new(), 0);
    while i < n {
        let (j, exc) = best[i].unwrap();
        out.push(pieces[i..j].concat());
        flags.push(exc);
        i = j;
    }
    Some((out, flags))
}

/// Least `m ≤ max_m` such that `f_#^m(σ)` splits into single edges and
/// exceptional paths. `m` is `None` when the budget runs out.
pub fn upg_split(f: &TopRep, sigma: &[DirEdge], max_m: usize, depth: usize) -> Result<UpgSplit> {
    let mut cur = word::reduce(sigma);
    for m in 0..=max_m {
        if cur.is_empty() {
            return Ok(UpgSplit {
                m: Some(m),
                pieces: Vec::new(),
                exceptional: Vec::new(),
                depth_verified: depth,
            });
        }
        let sp = split_path(f, &cur, false, depth)?;
        if let Some((pieces, exceptional)) = group_pieces(f, &sp.pieces) {
            return Ok(UpgSplit {
                m: Some(m),
                pieces,
                exceptional,
                depth_verified: depth,
            });
        }
        cur = f.apply(&cur);
    }
    Ok(UpgSplit {
        m: None,
        pieces: vec![cur],
        exceptional: vec![false],
        depth_verified: depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::tests::{fib, rose_map, w};

    fn upg() -> TopRep {
        rose_map(3, &["a", "ba", "cb"])
    }

    fn texts(s: &Splitting) -> Vec<String> {
        let a = Alphabet::standard(3);
        s.pieces.iter().map(|p| a.format(p)).collect()
    }

    #[test]
    fn splitting_examples() {
        let f = upg();
        let s = split_path(&f, &w("cBA"), false, 10).unwrap();
        assert_eq!(texts(&s), ["cB", "A"]);
        assert!(verify_splitting(&f, &s, 10).unwrap());
        let id = rose_map(3, &["a", "b", "c"]);
        let s = split_path(&id, &w("ab"), false, 10).unwrap();
        assert_eq!(texts(&s), ["a", "b"]);
        let s = split_path(&fib(), &w("a"), true, 10).unwrap();
        assert_eq!(s.pieces.len(), 1);
        assert!(s.structural_certificate.is_none());
    }

    #[test]
    fn neg_edge_certificate() {
        let f = upg();
        let s = split_path(&f, &w("bc"), false, 10).unwrap();
        assert_eq!(texts(&s), ["b", "c"]);
        assert_eq!(s.certificates, vec![JunctureCert::NegEdge]);
        assert_eq!(s.structural_certificate.as_deref(), Some("neg-edge"));
    }

    #[test]
    fn legal_certificate_on_fibonacci() {
        let f = fib();
        let s = split_path(&f, &w("ab"), false, 10).unwrap();
        assert_eq!(s.pieces.len(), 2);
        assert_eq!(s.certificates, vec![JunctureCert::Legal]);
    }

    #[test]
    fn exceptional_paths() {
        let f = upg();
        let e = is_exceptional(&f, &w("baB")).unwrap();
        assert_eq!((e.i, e.k, e.j, e.inverted), (1, 1, 1, false));
        assert_eq!(e.tau, w("a"));
        assert!(is_exceptional(&f, &w("bAB")).unwrap().inverted);
        assert!(is_exceptional(&f, &w("ba")).is_none());
        assert!(is_exceptional(&f, &w("bB")).is_some());
        assert!(is_exceptional(&f, &w("cbC")).is_none());
        let s = split_path(&f, &w("baaB"), false, 10).unwrap();
        assert_eq!(s.pieces.len(), 1);
    }

    #[test]
    fn upg_split_examples() {
        let f = upg();
        let s = upg_split(&f, &w("b"), 10, 10).unwrap();
        assert_eq!(s.m, Some(0));
        let s = upg_split(&f, &w("baB"), 10, 10).unwrap();
        assert_eq!((s.m, s.exceptional.clone()), (Some(0), vec![true]));
        let s = upg_split(&f, &w("bA"), 10, 10).unwrap();
        assert_eq!(s.m, Some(1));
        assert_eq!(s.pieces, vec![w("b")]);
    }

    #[test]
    fn endpoint_normal_forms() {
        let f = fib();
        let b = DirEdge::fwd(1);
        // f(b) = ab; the all-last cycle is the terminal vertex.
        let p = EndPoint {
            edge: b,
            prefix: vec![],
            tail: Tail::Cycle(vec![1]),
        };
        assert_eq!(p.normalize(&f), Point::Term);
        let p = EndPoint {
            edge: b,
            prefix: vec![1],
            tail: Tail::Vertex,
        };
        let Point::Inner(x) = p.clone().normalize(&f) else { panic!() };
        assert_eq!(x.reverse(&f).reverse(&f), x);
        assert_eq!(x.step(&f), (1, Point::Init));
        // b -1-> b -0-> a -0-> b is a 3-cycle; the prefix folds into it.
        let q = EndPoint {
            edge: b,
            prefix: vec![1],
            tail: Tail::Cycle(vec![0, 0, 1]),
        };
        let Point::Inner(y) = q.normalize(&f) else { panic!() };
        assert!(y.is_periodic());
        assert_eq!(y.tail, Tail::Cycle(vec![1, 0, 0]));
        assert_eq!(y.reverse(&f).reverse(&f), y);
        let (i0, Point::Inner(z)) = y.step(&f) else { panic!() };
        assert_eq!((i0, z.tail), (1, Tail::Cycle(vec![0, 0, 1])));
    }

    #[test]
    fn fibonacci_nielsen_path() {
        let f = fib();
        let pr = compute_pr(&f, 0, &PrBudget::default()).unwrap();
        assert!(pr.complete, "{:?}", pr.notes);
        let per = pr.periodic();
        assert_eq!(per.len(), 1, "{:?}", per.iter().map(|c| &c.text).collect::<Vec<_>>());
        let inp = per[0];
        assert_eq!(inp.period, 2);
        assert_eq!(inp.unoriented_period, 1);
        assert!(inp.crosses_each_twice);
        let comm = word::conjugacy_key(&w("abAB"));
        let inv = word::conjugacy_key(&w("baBA"));
        let class = inp.conjugacy_class.clone().unwrap();
        assert!(class == comm || class == inv);
        for c in &pr.elements {
            assert!(orbit(&f, 0, &c.rho, &PrBudget::default()).is_ok());
        }
    }

    #[test]
    fn square_has_period_one() {
        let f2 = fib().power(2, DEFAULT_MAX_LEN).unwrap();
        let (inps, complete) = indivisible_nielsen_paths(&f2, 0, &PrBudget::default()).unwrap();
        assert!(complete);
        assert_eq!(inps.len(), 1);
        assert_eq!(inps[0].period, 1);
    }

    #[test]
    fn pr_usage_errors() {
        let id = rose_map(2, &["a", "b"]);
        assert!(matches!(compute_pr(&id, 0, &PrBudget::default()), Err(Error::Usage(_))));
        // A single expanding loop has no illegal turns.
        let g = rose_map(1, &["aa"]);
        let pr = compute_pr(&g, 0, &PrBudget::default()).unwrap();
        assert!(pr.elements.is_empty());
    }
}

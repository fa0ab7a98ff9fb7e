//! Attracting laminations through finite windows: tiles, frequencies,
//! weak attraction, the groupoid `⟨Z, ρ̂_r⟩` and expansion factors.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::filtration::StratumClass;
use crate::graph::Path;
use crate::map::TopRep;
use crate::nielsen::{self, PrBudget};
use crate::train_track::{find_rtt, RttBudget};
use crate::word::{self, DirEdge, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub stratum: usize,
    pub edge: DirEdge,
    pub depth: usize,
    pub path: Path,
}

/// The `k`-tile `f_#^k(E)` of an edge in an EG stratum.
pub fn tile(f: &TopRep, e: DirEdge, k: usize, max_len: usize) -> Result<Tile> {
    let r = f.stratum_of()[e.index()];
    if !f.strata[r].is_eg() {
        return Err(Error::Usage(format!("edge {} is not in an EG stratum", e.index())));
    }
    let path = f.iterate(&[e], k, max_len)?;
    if !f.is_r_legal(&path, r) {
        return Err(Error::Internal(format!("tile of edge {} at depth {k} is not r-legal", e.index())));
    }
    let ends_ok = path.first().is_some_and(|x| f.in_stratum(*x, r)) && path.last().is_some_and(|x| f.in_stratum(*x, r));
    if !ends_ok {
        return Err(Error::Internal(format!("tile of edge {} at depth {k} does not end in H_{r}", e.index())));
    }
    Ok(Tile {
        stratum: r,
        edge: e,
        depth: k,
        path,
    })
}

/// Entry `(i, j)` of `M_r^k` against the number of times the `k`-tile of
/// the `j`-th edge of `H_r` crosses the `i`-th, exactly.
pub fn tile_matrix_check(f: &TopRep, r: usize, k: usize) -> Result<bool> {
    let st = f.strata.get(r).ok_or_else(|| Error::InvalidInput(format!("no stratum {r}")))?;
    if !st.is_eg() {
        return Err(Error::Usage(format!("stratum {r} is not EG")));
    }
    let power = st.matrix.checked_pow(k as u32)?;
    for (j, &ej) in st.edges.iter().enumerate() {
        let t = tile(f, DirEdge::fwd(ej), k, 1 << 24)?;
        for (i, &ei) in st.edges.iter().enumerate() {
            let count = t.path.iter().filter(|x| x.index() == ei).count() as i64;
            if count != power.get(i, j) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Normalized Perron eigenvector of `M_r`, indexed like the edges of `H_r`.
pub fn frequency_vector(f: &TopRep, r: usize) -> Result<Vec<f64>> {
    let st = f.strata.get(r).ok_or_else(|| Error::InvalidInput(format!("no stratum {r}")))?;
    if !st.is_eg() || !st.aperiodic {
        return Err(Error::Usage(format!("stratum {r} is not an aperiodic EG stratum")));
    }
    let p = st.matrix.perron(1e-14).ok_or_else(|| Error::Internal("Perron iteration failed".into()))?;
    let total: f64 = p.vector.iter().sum();
    Ok(p.vector.iter().map(|x| x / total).collect())
}

/// The attracting lamination of an aperiodic EG stratum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LamHandle {
    pub rep: TopRep,
    pub stratum: usize,
}

impl LamHandle {
    pub fn new(rep: TopRep, stratum: usize) -> Result<Self> {
        let st = rep.strata.get(stratum).ok_or_else(|| Error::InvalidInput(format!("no stratum {stratum}")))?;
        if !st.is_eg() {
            return Err(Error::Usage(format!("stratum {stratum} is not EG")));
        }
        if !st.aperiodic {
            return Err(Error::Precondition(format!("stratum {stratum} is not aperiodic")));
        }
        Ok(LamHandle { rep, stratum })
    }

    /// The lamination of the highest EG stratum.
    pub fn topmost(rep: TopRep) -> Result<Self> {
        let r = *rep
            .eg_strata()
            .last()
            .ok_or_else(|| Error::Usage("the representative has no EG stratum".into()))?;
        Self::new(rep, r)
    }

    pub fn lambda(&self) -> f64 {
        self.rep.strata[self.stratum].lambda.unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafWindow {
    pub edge: DirEdge,
    /// `f_#^m(E)` contains `E` with nontrivial paths on both sides.
    pub m: usize,
    pub levels: usize,
    pub path: Path,
    /// Largest depth whose tiles all occur in the window, up to orientation.
    pub tile_depth: usize,
}

fn occurs(hay: &[DirEdge], needle: &[DirEdge]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

fn occurs_either(hay: &[DirEdge], needle: &[DirEdge]) -> bool {
    occurs(hay, needle) || occurs(hay, &word::inverse(needle))
}

/// A window `f_#^{mj}(E)` of a generic leaf with at least `target` edges.
pub fn generic_leaf_window(f: &TopRep, r: usize, target: usize) -> Result<LeafWindow> {
    let st = f.strata.get(r).ok_or_else(|| Error::InvalidInput(format!("no stratum {r}")))?;
    if !st.is_eg() {
        return Err(Error::Usage(format!("stratum {r} is not EG")));
    }
    let max_len = target.saturating_mul(64).max(1 << 16);
    let mut found = None;
    'search: for m in 1..=(4 * st.edges.len() + 6) {
        for &i in &st.edges {
            for e in [DirEdge::fwd(i), DirEdge::rev(i)] {
                let img = f.iterate(&[e], m, max_len)?;
                if img.len() > 2 && img[1..img.len() - 1].contains(&e) {
                    found = Some((e, m));
                    break 'search;
                }
            }
        }
    }
    let (e, m) = found.ok_or_else(|| Error::budget("no edge recurs interiorly in its own iterates"))?;
    let mut path = vec![e];
    let mut levels = 0;
    while path.len() < target {
        let raw: usize = path.iter().map(|x| f.edge_image[x.index()].len()).sum();
        if raw > max_len {
            return Err(Error::budget("generic window exceeds the length cap"));
        }
        for _ in 0..m {
            path = f.apply(&path);
        }
        levels += 1;
    }
    let mut tile_depth = 0;
    for k in 1.. {
        let tiles: Vec<Path> = st.edges.iter().map(|&j| f.iterate(&[DirEdge::fwd(j)], k, max_len)).collect::<Result<_>>()?;
        if tiles.iter().any(|t| 3 * t.len() > path.len()) || !tiles.iter().all(|t| occurs_either(&path, t)) {
            break;
        }
        tile_depth = k;
    }
    Ok(LeafWindow {
        edge: e,
        m,
        levels,
        path,
        tile_depth,
    })
}

/// Share of each `H_r` edge among the `H_r` edges of a path.
pub fn empirical_frequencies(f: &TopRep, r: usize, p: &[DirEdge]) -> Vec<f64> {
    let edges = &f.strata[r].edges;
    let mut counts = vec![0usize; edges.len()];
    for x in p {
        if let Some(k) = edges.iter().position(|&e| e == x.index()) {
            counts[k] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}

// ---------------------------------------------------------------------------
// The groupoid ⟨X, ρ⟩

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    Edge(DirEdge),
    Rho,
    RhoInv,
}

/// Decomposition of a path into edges of `x` and copies of `ρ^{±1}`, or
/// `None` when it is not in the groupoid.
pub fn in_groupoid(sigma: &[DirEdge], x: &[usize], rho: Option<&[DirEdge]>) -> Option<Vec<Piece>> {
    let allowed: HashSet<usize> = x.iter().copied().collect();
    let n = sigma.len();
    let rho_f: Option<Path> = rho.filter(|p| !p.is_empty()).map(|p| p.to_vec());
    let rho_b: Option<Path> = rho_f.as_ref().map(|p| word::inverse(p));
    let mut back: Vec<Option<(usize, Piece)>> = vec![None; n + 1];
    let mut reach = vec![false; n + 1];
    reach[0] = true;
    for i in 0..n {
        if !reach[i] {
            continue;
        }
        if allowed.contains(&sigma[i].index()) && !reach[i + 1] {
            reach[i + 1] = true;
            back[i + 1] = Some((i, Piece::Edge(sigma[i])));
        }
        for (p, piece) in [(&rho_f, Piece::Rho), (&rho_b, Piece::RhoInv)] {
            if let Some(p) = p {
                let j = i + p.len();
                if j <= n && !reach[j] && sigma[i..j] == p[..] {
                    reach[j] = true;
                    back[j] = Some((i, piece));
                }
            }
        }
    }
    if !reach[n] {
        return None;
    }
    let mut pieces = Vec::new();
    let mut at = n;
    while at > 0 {
        let (prev, piece) = back[at].clone().unwrap();
        pieces.push(piece);
        at = prev;
    }
    pieces.reverse();
    Some(pieces)
}

/// Membership of a circuit: some rotation is a closed path in the groupoid.
pub fn in_groupoid_circuit(circuit: &[DirEdge], x: &[usize], rho: Option<&[DirEdge]>) -> Option<(usize, Vec<Piece>)> {
    let n = circuit.len();
    (0..n).find_map(|i| {
        let rot: Path = (0..n).map(|t| circuit[(i + t) % n]).collect();
        in_groupoid(&rot, x, rho).map(|d| (i, d))
    })
}

// ---------------------------------------------------------------------------
// Weak attraction

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttractBudget {
    pub iterations: usize,
    pub split_depth: usize,
    /// Longest iterate handed to the splitting search.
    pub split_len: usize,
    pub max_len: usize,
}

impl Default for AttractBudget {
    fn default() -> Self {
        AttractBudget {
            iterations: 20,
            split_depth: 6,
            split_len: 400,
            max_len: 1 << 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Attraction {
    Attracted { k: usize, method: String },
    NotAttracted { reason: String },
    Unknown { reason: String },
}

/// Sufficient test for `σ` to be weakly attracted at step `k`: an `r`-legal
/// iterate inside `G_r` crossing `H_r`, or a splitting with an `H_r` edge or
/// an `r`-legal piece crossing `H_r`.
fn attraction_step(f: &TopRep, r: usize, p: &[DirEdge], circuit: bool, b: &AttractBudget) -> Result<Option<String>> {
    let s = f.stratum_of();
    let legal_piece = |q: &[DirEdge]| {
        q.iter().any(|x| f.in_stratum(*x, r)) && q.iter().all(|x| s[x.index()] <= r) && f.is_r_legal(q, r)
    };
    let wrap_legal = !circuit || p.len() < 2 || {
        let (a, c) = (p[p.len() - 1], p[0]);
        !(f.in_stratum(a, r) && f.in_stratum(c, r)) || f.is_legal_turn(a.inv(), c)
    };
    if legal_piece(p) && wrap_legal {
        return Ok(Some("r-legal".into()));
    }
    if p.len() > b.split_len {
        return Ok(None);
    }
    let sp = match nielsen::split_path_with(f, p, circuit, b.split_depth, b.max_len) {
        Ok(sp) => sp,
        Err(e) if e.is_budget() => return Ok(None),
        Err(e) => return Err(e),
    };
    if sp.is_trivial() {
        return Ok(None);
    }
    if sp.pieces.iter().any(|q| q.len() == 1 && f.in_stratum(q[0], r)) {
        return Ok(Some(format!("splitting verified to depth {}", b.split_depth)));
    }
    if !circuit && sp.pieces.iter().any(|q| legal_piece(q)) {
        return Ok(Some(format!("r-legal piece, splitting verified to depth {}", b.split_depth)));
    }
    Ok(None)
}

/// Whether some f-invariant union of strata avoiding `H_r` contains `σ`.
fn invariant_subgraph_without(f: &TopRep, r: usize, sigma: &[DirEdge]) -> bool {
    let s = f.stratum_of();
    let mut inside: HashSet<usize> = sigma.iter().map(|x| x.index()).collect();
    loop {
        if inside.iter().any(|&e| s[e] == r) {
            return false;
        }
        let before = inside.len();
        let add: Vec<usize> = inside.iter().flat_map(|&e| f.edge_image[e].iter().map(|x| x.index())).collect();
        inside.extend(add);
        if inside.len() == before {
            return true;
        }
    }
}

/// Three-valued attraction test of a tight path or circuit.
pub fn weakly_attracted(
    lam: &LamHandle,
    sigma: &[DirEdge],
    circuit: bool,
    z: Option<&ZData>,
    budget: &AttractBudget,
) -> Result<Attraction> {
    let f = &lam.rep;
    let r = lam.stratum;
    f.graph.graph.check_path(sigma)?;
    if sigma.is_empty() {
        return Ok(Attraction::NotAttracted { reason: "trivial path".into() });
    }
    if circuit && !f.graph.graph.is_closed(sigma) {
        return Err(Error::MalformedPath("circuit is not closed".into()));
    }
    if invariant_subgraph_without(f, r, sigma) {
        return Ok(Attraction::NotAttracted {
            reason: "carried by an invariant subgraph missing H_r".into(),
        });
    }
    if let Some(z) = z.filter(|z| !z.provisional) {
        let rho = z.rho.as_deref();
        let member = if circuit {
            in_groupoid_circuit(sigma, &z.edges, rho).map(|(_, d)| d)
        } else {
            in_groupoid(sigma, &z.edges, rho)
        };
        if let Some(d) = member {
            return Ok(Attraction::NotAttracted {
                reason: format!("in the groupoid with {} pieces", d.len()),
            });
        }
    }
    let mut cur = if circuit { f.graph.graph.cyclic_reduce(sigma)?.0 } else { word::reduce(sigma) };
    for k in 0..=budget.iterations {
        if let Some(method) = attraction_step(f, r, &cur, circuit, budget)? {
            return Ok(Attraction::Attracted { k, method });
        }
        if k == budget.iterations {
            break;
        }
        let raw: usize = cur.iter().map(|x| f.edge_image[x.index()].len()).sum();
        if raw > budget.max_len {
            return Ok(Attraction::Unknown {
                reason: format!("iterate {k} exceeds {} edges", budget.max_len),
            });
        }
        cur = f.apply(&cur);
        if circuit {
            cur = match f.graph.graph.cyclic_reduce(&cur) {
                Ok(c) => c.0,
                Err(_) => return Ok(Attraction::NotAttracted { reason: "iterate is trivial".into() }),
            };
        }
        if cur.is_empty() {
            return Ok(Attraction::NotAttracted { reason: "iterate is trivial".into() });
        }
    }
    Ok(Attraction::Unknown {
        reason: format!("no attraction witness within {} iterates", budget.iterations),
    })
}

// ---------------------------------------------------------------------------
// The subgraph Z

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZData {
    pub stratum: usize,
    pub edges: Vec<usize>,
    /// `ρ̂_r`: the indivisible periodic Nielsen path of `H_r`, if any.
    pub rho: Option<Path>,
    /// Set when some membership decision was not reached.
    pub provisional: bool,
    /// `f(E) ∈ ⟨Z, ρ̂_r⟩` for every edge `E` of `Z`.
    pub closure_ok: bool,
    pub notes: Vec<String>,
}

fn tile_contains(f: &TopRep, outer: usize, inner: usize, depth: usize) -> Result<bool> {
    let needles: Vec<Path> = f.strata[inner]
        .edges
        .iter()
        .map(|&e| f.iterate(&[DirEdge::fwd(e)], 1, 1 << 16))
        .collect::<Result<_>>()?;
    for &e in &f.strata[outer].edges {
        let t = match f.iterate(&[DirEdge::fwd(e)], depth, 1 << 20) {
            Ok(t) => t,
            Err(err) if err.is_budget() => continue,
            Err(err) => return Err(err),
        };
        if needles.iter().all(|n| occurs_either(&t, n)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `Z` and `ρ̂_r` for the lamination of `H_r`.
pub fn build_z(lam: &LamHandle, pr: &PrBudget, attract: &AttractBudget) -> Result<ZData> {
    let f = &lam.rep;
    let r = lam.stratum;
    let mut notes = Vec::new();
    let mut provisional = false;
    for s in f.eg_strata() {
        if s > r && tile_contains(f, s, r, 6)? {
            return Err(Error::Precondition(format!("the lamination of H_{r} appears inside tiles of H_{s}")));
        }
    }
    let pr_result = nielsen::compute_pr(f, r, pr)?;
    if !pr_result.complete {
        provisional = true;
        notes.push("P_r search incomplete".into());
    }
    let rho = pr_result.periodic().into_iter().find_map(|c| c.rho.path());
    let mut edges = if r == 0 { Vec::new() } else { f.filtration_edges(r - 1) };
    for st in &f.strata[r + 1..] {
        match st.class {
            StratumClass::Zero | StratumClass::Eg => edges.extend(&st.edges),
            StratumClass::Neg => {
                let Some((e, u)) = nielsen::neg_edge(f, st.index) else {
                    provisional = true;
                    notes.push(format!("NEG stratum {} is not of the form E·u", st.index));
                    continue;
                };
                if u.is_empty() || in_groupoid(&u, &edges, rho.as_deref()).is_some() {
                    edges.push(e);
                    continue;
                }
                match weakly_attracted(lam, &u, false, None, attract)? {
                    Attraction::Attracted { .. } => {}
                    Attraction::NotAttracted { .. } => edges.push(e),
                    Attraction::Unknown { reason } => {
                        provisional = true;
                        notes.push(format!("u for edge {e}: {reason}"));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    let closure_ok = edges
        .iter()
        .all(|&e| in_groupoid(&f.edge_image[e], &edges, rho.as_deref()).is_some());
    if !closure_ok {
        notes.push("some edge of Z has an image outside the groupoid".into());
    }
    Ok(ZData {
        stratum: r,
        edges,
        rho,
        provisional,
        closure_ok,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AttractionVerdict {
    Attracted { k: usize, method: String },
    InGroupoid { rotation: usize, pieces: Vec<Piece> },
    GenericNegative,
    Unknown { reason: String },
}

/// Exactly one alternative for a circuit: weakly attracted, or carried by
/// `⟨Z, ρ̂_r⟩`. Generic leaves of the repelling lamination are lines, never
/// circuits.
pub fn classify_trichotomy(lam: &LamHandle, z: &ZData, circuit: &[DirEdge], budget: &AttractBudget) -> Result<AttractionVerdict> {
    let c = lam.rep.graph.graph.cyclic_reduce(circuit)?;
    if let Some((rotation, pieces)) = in_groupoid_circuit(c.edges(), &z.edges, z.rho.as_deref()) {
        if !z.provisional && z.closure_ok {
            return Ok(AttractionVerdict::InGroupoid { rotation, pieces });
        }
    }
    match weakly_attracted(lam, c.edges(), true, None, budget)? {
        Attraction::Attracted { k, method } => Ok(AttractionVerdict::Attracted { k, method }),
        Attraction::NotAttracted { reason } | Attraction::Unknown { reason } => Ok(AttractionVerdict::Unknown { reason }),
    }
}

// ---------------------------------------------------------------------------
// Expansion factors

/// Word read off a path, with the ends trimmed by `margin` letters.
fn leaf_word(lam_rep: &TopRep, p: &[DirEdge], margin: usize) -> Word {
    let w = lam_rep.graph.express(p);
    if w.len() <= 2 * margin {
        return Vec::new();
    }
    w[margin..w.len() - margin].to_vec()
}

/// Central segment of the realization of a word in another marked graph.
fn realize_segment(rep: &TopRep, w: &[DirEdge]) -> Path {
    let p = rep.graph.realize(w);
    let cut = p.len() / 4;
    p[cut..p.len() - cut].to_vec()
}

/// All subpaths of length `ell` of `segment` occur in `window`, up to
/// orientation.
fn subpaths_in(segment: &[DirEdge], window: &[DirEdge], ell: usize) -> bool {
    if segment.len() < ell {
        return false;
    }
    let mut set: HashSet<&[DirEdge]> = HashSet::new();
    for wnd in window.windows(ell) {
        set.insert(wnd);
    }
    let inv = word::inverse(window);
    let mut inv_set: HashSet<Vec<DirEdge>> = HashSet::new();
    for wnd in inv.windows(ell) {
        inv_set.insert(wnd.to_vec());
    }
    segment.windows(ell).all(|s| set.contains(s) || inv_set.contains(s))
}

const WINDOW: usize = 3000;
const SUBPATH: usize = 8;

/// Whether two laminations coincide, judged by two-way containment of leaf
/// segments of length `SUBPATH`.
pub fn same_lamination(a: &LamHandle, b: &LamHandle) -> Result<bool> {
    let wa = generic_leaf_window(&a.rep, a.stratum, WINDOW)?;
    let wb = generic_leaf_window(&b.rep, b.stratum, 4 * WINDOW)?;
    let seg_a = realize_segment(&b.rep, &leaf_word(&a.rep, &wa.path, 0));
    let seg_b = realize_segment(&a.rep, &leaf_word(&b.rep, &wb.path, 0));
    let wa_long = generic_leaf_window(&a.rep, a.stratum, 4 * WINDOW)?;
    Ok(subpaths_in(&seg_a, &wb.path, SUBPATH) && subpaths_in(&seg_b[..seg_b.len().min(WINDOW)], &wa_long.path, SUBPATH))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    Forward { stratum: usize },
    Inverse { stratum: usize },
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFactor {
    pub mu: f64,
    pub log_mu: f64,
    pub carrier: Carrier,
    pub lambda: f64,
}

fn carrying_stratum(psi: &Automorphism, lam: &LamHandle, budget: &RttBudget) -> Result<Option<(usize, f64)>> {
    let out = find_rtt(psi, None, budget)?;
    if !out.complete {
        return Err(Error::budget(format!("no train track found: {}", out.diagnostics.join("; "))));
    }
    let (rep, s) = crate::train_track::make_eg_aperiodic(&out.rep, 1 << 16)?;
    for r in rep.eg_strata() {
        let cand = LamHandle::new(rep.clone(), r)?;
        if same_lamination(lam, &cand)? {
            let lambda = rep.strata[r].lambda.unwrap_or(1.0).powf(1.0 / s as f64);
            return Ok(Some((r, lambda)));
        }
    }
    Ok(None)
}

/// Stretch factor of `Ψ` on the lamination, `1/λ'` when the lamination
/// belongs to `Ψ^{-1}`, and exactly `1` when it belongs to neither.
pub fn expansion_factor(psi: &Automorphism, lam: &LamHandle, budget: &RttBudget) -> Result<ExpansionFactor> {
    if psi.rank() != lam.rep.graph.rank {
        return Err(Error::InvalidInput("rank mismatch".into()));
    }
    if let Some((stratum, lambda)) = carrying_stratum(psi, lam, budget)? {
        return Ok(ExpansionFactor {
            mu: lambda,
            log_mu: lambda.ln(),
            carrier: Carrier::Forward { stratum },
            lambda,
        });
    }
    if let Some((stratum, lambda)) = carrying_stratum(&psi.inverse(), lam, budget)? {
        return Ok(ExpansionFactor {
            mu: 1.0 / lambda,
            log_mu: -lambda.ln(),
            carrier: Carrier::Inverse { stratum },
            lambda,
        });
    }
    Ok(ExpansionFactor {
        mu: 1.0,
        log_mu: 0.0,
        carrier: Carrier::Neither,
        lambda: 1.0,
    })
}

/// `log μ` for each lamination in turn.
pub fn pf_values(psi: &Automorphism, lams: &[LamHandle], budget: &RttBudget) -> Result<Vec<f64>> {
    lams.iter().map(|l| expansion_factor(psi, l, budget).map(|e| e.log_mu)).collect()
}

// ---------------------------------------------------------------------------
// Ping-pong

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    /// Which image of which lamination was tested, e.g. `ψ(Λ+)`.
    pub source: String,
    /// `Λ+` under `O` or `Λ-` under `O^{-1}`.
    pub target: String,
    pub iterations: usize,
    pub tile_length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum PingPong {
    Certificate { width: usize, legs: Vec<Leg> },
    Unknown { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PingPongBudget {
    pub width: usize,
    pub iterations: usize,
}

impl Default for PingPongBudget {
    fn default() -> Self {
        PingPongBudget { width: 64, iterations: 40 }
    }
}

fn topmost_lamination(phi: &Automorphism, budget: &RttBudget) -> Result<LamHandle> {
    let out = find_rtt(phi, None, budget)?;
    if !out.complete {
        return Err(Error::budget("no train track found"));
    }
    let (rep, _) = crate::train_track::make_eg_aperiodic(&out.rep, 1 << 16)?;
    LamHandle::topmost(rep)
}

/// Iterates until the image of a segment contains a tile of length at least
/// `width`.
fn attracts_window(lam: &LamHandle, w: &[DirEdge], pp: &PingPongBudget) -> Result<Option<(usize, usize)>> {
    let f = &lam.rep;
    let r = lam.stratum;
    let mut tiles: Vec<Path> = Vec::new();
    for &e in &f.strata[r].edges {
        let mut k = 0;
        loop {
            let t = f.iterate(&[DirEdge::fwd(e)], k, 1 << 20)?;
            if t.len() >= pp.width {
                tiles.push(t);
                break;
            }
            k += 1;
        }
    }
    let mut cur = realize_segment(f, w);
    for k in 0..=pp.iterations {
        if let Some(t) = tiles.iter().find(|t| occurs_either(&cur, t)) {
            return Ok(Some((k, t.len())));
        }
        // Ends of a finite segment are unreliable; trim to keep growth bounded.
        cur = f.apply(&cur);
        if cur.len() > 1 << 16 {
            let c = cur.len() / 2;
            cur = cur[c - (1 << 14)..c + (1 << 14)].to_vec();
        }
    }
    Ok(None)
}

/// Budgeted search for evidence that `⟨O^N, ψ O^N ψ^{-1}⟩` is free of
/// rank two: images of generic leaves of `Λ±` under `ψ^{±1}` are attracted
/// to `Λ+` by `O` and to `Λ-` by `O^{-1}`. Never claims the negative.
pub fn free_rank2_certificate(o: &Automorphism, psi: &Automorphism, budget: &RttBudget, pp: &PingPongBudget) -> Result<PingPong> {
    let plus = topmost_lamination(o, budget)?;
    let minus = topmost_lamination(&o.inverse(), budget)?;
    let psi_inv = psi.inverse();
    let window_word = |lam: &LamHandle| -> Result<Word> {
        let w = generic_leaf_window(&lam.rep, lam.stratum, 4 * pp.width.max(64))?;
        Ok(leaf_word(&lam.rep, &w.path, 0))
    };
    let wp = window_word(&plus)?;
    let wm = window_word(&minus)?;
    let mut legs = Vec::new();
    for (map, mname) in [(psi, "ψ"), (&psi_inv, "ψ⁻¹")] {
        for (w, lname, home) in [(&wp, "Λ+", &plus), (&wm, "Λ-", &minus)] {
            let image = map.apply(w);
            let m = image.len() / 4;
            let image = image[m..image.len() - m].to_vec();
            let seg = realize_segment(&home.rep, &image);
            let home_window = generic_leaf_window(&home.rep, home.stratum, 8 * w.len())?;
            if subpaths_in(&seg, &home_window.path, SUBPATH) {
                return Ok(PingPong::Unknown {
                    reason: format!("{mname}({lname}) looks like {lname}; the laminations are not moved"),
                });
            }
            for (target, tname) in [(&plus, "Λ+ under O"), (&minus, "Λ- under O⁻¹")] {
                match attracts_window(target, &image, pp)? {
                    Some((k, len)) => legs.push(Leg {
                        source: format!("{mname}({lname})"),
                        target: tname.into(),
                        iterations: k,
                        tile_length: len,
                    }),
                    None => {
                        return Ok(PingPong::Unknown {
                            reason: format!("{mname}({lname}) not attracted to {tname} within {} iterations", pp.iterations),
                        })
                    }
                }
            }
        }
    }
    Ok(PingPong::Certificate { width: pp.width, legs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::tests::{fib, w};

    fn fib_lam() -> LamHandle {
        LamHandle::topmost(fib()).unwrap()
    }

    #[test]
    fn tiles_of_fibonacci() {
        let f = fib();
        assert_eq!(tile(&f, w("a")[0], 0, 100).unwrap().path, w("a"));
        assert_eq!(tile(&f, w("a")[0], 3, 100).unwrap().path, w("bab"));
        assert_eq!(tile(&f, w("b")[0], 2, 100).unwrap().path, w("bab"));
        for k in 0..=12 {
            assert!(tile_matrix_check(&f, 0, k).unwrap());
        }
        let m5 = f.strata[0].matrix.checked_pow(5).unwrap();
        assert_eq!(m5.rows(), vec![vec![3, 5], vec![5, 8]]);
    }

    #[test]
    fn frequencies() {
        let v = frequency_vector(&fib(), 0).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((v[0] - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!((v[1] - 1.0 / phi).abs() < 1e-12);
        let sym = crate::map::tests::rose_map(2, &["ab", "ba"]);
        let v = frequency_vector(&sym, 0).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
        let single = crate::map::tests::rose_map(1, &["aa"]);
        assert_eq!(frequency_vector(&single, 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn generic_windows() {
        let f = fib();
        let win = generic_leaf_window(&f, 0, 1000).unwrap();
        assert!(win.path.len() >= 1000);
        assert!(win.m <= 6);
        assert!(win.tile_depth >= 1);
        let img = f.iterate(&[win.edge], win.m, 100).unwrap();
        assert!(img[1..img.len() - 1].contains(&win.edge));
        let freq = empirical_frequencies(&f, 0, &win.path);
        let v = frequency_vector(&f, 0).unwrap();
        assert!(freq.iter().zip(&v).all(|(a, b)| (a - b).abs() < 0.02));
        let id = crate::map::tests::rose_map(2, &["a", "b"]);
        assert!(matches!(generic_leaf_window(&id, 0, 10), Err(Error::Usage(_))));
    }

    #[test]
    fn groupoid_membership() {
        let rho = w("abAB");
        assert_eq!(in_groupoid(&w("ab"), &[0, 1], None).unwrap().len(), 2);
        assert!(in_groupoid(&w("ab"), &[0], None).is_none());
        assert_eq!(in_groupoid(&rho, &[], Some(&rho)).unwrap(), vec![Piece::Rho]);
        let d = in_groupoid(&w("cabABC"), &[2], Some(&rho)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[1], Piece::Rho);
        assert_eq!(in_groupoid(&w("baBA"), &[], Some(&rho)).unwrap(), vec![Piece::RhoInv]);
        assert!(in_groupoid_circuit(&w("bABa"), &[], Some(&rho)).is_some());
    }

    #[test]
    fn attraction_on_fibonacci() {
        let lam = fib_lam();
        let z = build_z(&lam, &PrBudget::default(), &AttractBudget::default()).unwrap();
        assert!(z.edges.is_empty());
        assert!(z.closure_ok && !z.provisional);
        let rho = z.rho.clone().unwrap();
        assert_eq!(word::conjugacy_key(&rho).len(), 4);
        let b = AttractBudget::default();
        assert!(matches!(weakly_attracted(&lam, &w("a"), true, None, &b).unwrap(), Attraction::Attracted { .. }));
        assert!(matches!(
            classify_trichotomy(&lam, &z, &w("ab"), &b).unwrap(),
            AttractionVerdict::Attracted { .. }
        ));
        assert!(matches!(
            classify_trichotomy(&lam, &z, &w("abAB"), &b).unwrap(),
            AttractionVerdict::InGroupoid { .. }
        ));
        assert!(matches!(
            weakly_attracted(&lam, &w("abAB"), true, Some(&z), &b).unwrap(),
            Attraction::NotAttracted { .. }
        ));
        let id = crate::map::tests::rose_map(2, &["a", "b"]);
        assert!(matches!(LamHandle::topmost(id), Err(Error::Usage(_))));
    }

    #[test]
    fn expansion_factors() {
        let lam = fib_lam();
        let b = RttBudget::default();
        let phi = Automorphism::parse("gens: a b\na -> b\nb -> a b").unwrap();
        let e1 = expansion_factor(&phi, &lam, &b).unwrap();
        assert!((e1.mu - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
        let e2 = expansion_factor(&phi.power(2), &lam, &b).unwrap();
        assert!((e2.log_mu - 2.0 * e1.log_mu).abs() < 1e-6);
        let e0 = expansion_factor(&Automorphism::identity(2), &lam, &b).unwrap();
        assert_eq!(e0.mu, 1.0);
        let einv = expansion_factor(&phi.inverse(), &lam, &b).unwrap();
        assert!(matches!(einv.carrier, Carrier::Inverse { .. }));
        assert!((einv.log_mu + e1.log_mu).abs() < 1e-6);
    }

    #[test]
    fn ping_pong() {
        let b = RttBudget::default();
        let pp = PingPongBudget::default();
        let o = Automorphism::parse("gens: a b\na -> b\nb -> a b").unwrap();
        assert!(matches!(free_rank2_certificate(&o, &o, &b, &pp).unwrap(), PingPong::Unknown { .. }));
        assert!(matches!(
            free_rank2_certificate(&o, &Automorphism::identity(2), &b, &pp).unwrap(),
            PingPong::Unknown { .. }
        ));
        let swap = Automorphism::parse("gens: a b\na -> b\nb -> a").unwrap();
        let cert = free_rank2_certificate(&o, &swap, &b, &pp).unwrap();
        assert!(matches!(cert, PingPong::Certificate { ref legs, .. } if legs.len() == 8), "{cert:?}");
    }
}

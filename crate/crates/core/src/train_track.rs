//! Drivers producing relative train track maps and improved relative train
//! track maps, with a clause-by-clause verifier.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::filtration::{aperiodic_exponent, StratumClass};
use crate::free_factor::{ffs_from_subgraph, FreeFactorSystem};
use crate::graph::Path;
use crate::map::{Check, TopRep, Turn};
use crate::matrix::lcm;
use crate::moves::{self, MoveKind, MoveWitness};
use crate::nielsen::{self, NielsenCandidate, PrBudget};
use crate::word::{self, DirEdge};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RttBudget {
    pub max_moves: usize,
    /// Longest edge image tolerated during the search.
    pub max_len: usize,
    /// Cap on the iterate exponent chosen by the improvement driver.
    pub max_iterate: usize,
    pub pr: PrBudget,
    /// Longest middle segment of the basic paths tested for ne-(iii).
    pub basic_len: usize,
    pub basic_iterations: usize,
    pub split_depth: usize,
    /// Cap on the number of H_r edges in subsets tested for reducedness.
    pub reduced_subsets: usize,
}

impl Default for RttBudget {
    fn default() -> Self {
        RttBudget {
            max_moves: 400,
            max_len: 1 << 14,
            max_iterate: 12,
            pr: PrBudget::default(),
            basic_len: 6,
            basic_iterations: 20,
            split_depth: 10,
            reduced_subsets: 12,
        }
    }
}

/// Result of a driver run: the representative reached, the moves that
/// produced it and whether every required property was established.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RttOutcome {
    pub rep: TopRep,
    pub log: Vec<MoveKind>,
    #[serde(skip)]
    pub witnesses: Vec<MoveWitness>,
    pub complete: bool,
    pub diagnostics: Vec<String>,
    /// Filtration element realizing the requested free factor system.
    pub ffs_stratum: Option<usize>,
}

fn eg_lambdas(f: &TopRep) -> Vec<f64> {
    let mut v: Vec<f64> = f.eg_strata().iter().filter_map(|&r| f.strata[r].lambda).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

fn lambdas_not_larger(new: &[f64], old: &[f64]) -> bool {
    for (a, b) in new.iter().zip(old) {
        if *a > b + 1e-9 {
            return false;
        }
        if *a < b - 1e-9 {
            return true;
        }
    }
    new.len() <= old.len() || old.iter().zip(new).all(|(a, b)| (a - b).abs() < 1e-9)
}

pub fn same_eigenvalues(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-7 * x.abs().max(1.0))
}

/// Apply a logged move.
pub fn apply_move(f: &TopRep, kind: &MoveKind) -> Result<(TopRep, MoveWitness)> {
    let d = DirEdge::from_raw;
    match kind {
        MoveKind::Subdivide { edge, cut } => moves::subdivide(f, *edge, *cut),
        MoveKind::SubdivideFixed { edge } => moves::subdivide_at_fixed_point(f, *edge),
        MoveKind::Fold { e1, e2 } => moves::stallings_fold(f, d(*e1), d(*e2)),
        MoveKind::GeneralizedFold { edge, split, sigma } => {
            let s: Path = sigma.iter().map(|&x| d(x)).collect();
            moves::generalized_fold(f, d(*edge), *split, &s)
        }
        MoveKind::Collapse { .. } => moves::collapse_pretrivial_forest(f),
        MoveKind::ValenceOne { vertex } => moves::valence_one(f, *vertex),
        MoveKind::ValenceTwo { vertex } => moves::valence_two(f, *vertex),
        MoveKind::Slide { .. } => moves::replay_slide(f, kind),
        MoveKind::Sequence { steps } => {
            let mut cur = f.clone();
            let mut wit = MoveWitness::identity(&f.graph.graph);
            for s in steps {
                let (next, w) = apply_move(&cur, s)?;
                cur = next;
                wit = wit.then(w);
            }
            Ok((cur, wit))
        }
    }
}

/// Replay a move log from a starting representative.
pub fn replay(start: &TopRep, log: &[MoveKind]) -> Result<TopRep> {
    let mut cur = start.clone();
    for k in log {
        cur = apply_move(&cur, k)?.0;
    }
    Ok(cur)
}

struct Driver {
    cur: TopRep,
    layers: Option<Vec<usize>>,
    log: Vec<MoveKind>,
    witnesses: Vec<MoveWitness>,
    diagnostics: Vec<String>,
    seen: HashSet<(Vec<(usize, usize)>, Vec<Path>)>,
}

impl Driver {
    fn new(f: TopRep, layers: Option<Vec<usize>>) -> Self {
        let cur = match &layers {
            Some(l) => f.with_layers(l),
            None => f,
        };
        Driver {
            cur,
            layers,
            log: Vec::new(),
            witnesses: Vec::new(),
            diagnostics: Vec::new(),
            seen: HashSet::new(),
        }
    }

    /// Carry each new edge's layer as the least layer of an old edge whose
    /// image crosses it.
    fn push_layers(&mut self, w: &MoveWitness) {
        let Some(old) = &self.layers else { return };
        let top = old.iter().copied().max().unwrap_or(0);
        let mut new = vec![usize::MAX; w.new_graph.edge_count()];
        for (i, p) in w.p_edge.iter().enumerate() {
            for e in p {
                new[e.index()] = new[e.index()].min(old[i]);
            }
        }
        for x in &mut new {
            if *x == usize::MAX {
                *x = top;
            }
        }
        self.layers = Some(new);
    }

    fn accept(&mut self, kind: MoveKind, next: TopRep, w: MoveWitness) {
        self.push_layers(&w);
        self.cur = match &self.layers {
            Some(l) => next.with_layers(l),
            None => next,
        };
        self.log.push(kind);
        self.witnesses.push(w);
    }

    fn key(&self) -> (Vec<(usize, usize)>, Vec<Path>) {
        (self.cur.graph.graph.ends.clone(), self.cur.edge_image.clone())
    }

    /// Pretrivial forests, valence-one vertices and valence-two vertices
    /// whose removal does not raise an eigenvalue.
    fn tidy(&mut self) -> Result<()> {
        for _ in 0..4 * (self.cur.edge_count() + 4) {
            let forest = moves::pretrivial_edges(&self.cur);
            if !forest.is_empty() {
                let (n, w) = moves::collapse_pretrivial_forest(&self.cur)?;
                self.accept(MoveKind::Collapse { edges: forest }, n, w);
                continue;
            }
            let g = &self.cur.graph.graph;
            if let Some(v) = (0..g.vertex_count).find(|&v| g.valence(v) == 1) {
                let (n, w) = moves::valence_one(&self.cur, v)?;
                self.accept(MoveKind::ValenceOne { vertex: v }, n, w);
                continue;
            }
            let old = eg_lambdas(&self.cur);
            let mut done = false;
            for v in 0..g.vertex_count {
                let star = g.star(v);
                if star.len() != 2 || star[0].index() == star[1].index() {
                    continue;
                }
                if let Ok((n, w)) = moves::valence_two(&self.cur, v) {
                    if lambdas_not_larger(&eg_lambdas(&n), &old) && n.edge_image.iter().all(|p| !p.is_empty()) {
                        self.accept(MoveKind::ValenceTwo { vertex: v }, n, w);
                        done = true;
                        break;
                    }
                }
            }
            if !done {
                return Ok(());
            }
        }
        Ok(())
    }

    /// A path `σ ⊂ G_{r-1}` from `start` with `f_#(σ) = target`.
    fn lower_preimage(&self, r: usize, start: usize, target: &[DirEdge]) -> Option<Path> {
        let f = &self.cur;
        let g = &f.graph.graph;
        let lower = f.filtration_edges(r - 1);
        let allowed: HashSet<usize> = lower.iter().copied().collect();
        let max_len = 2 * target.len() + 4;
        let mut queue: VecDeque<Path> = VecDeque::from([Vec::new()]);
        let mut visited = 0usize;
        while let Some(p) = queue.pop_front() {
            visited += 1;
            if visited > 200_000 {
                return None;
            }
            if !p.is_empty() && f.apply(&p) == target {
                return Some(p);
            }
            if p.len() >= max_len {
                continue;
            }
            let at = p.last().map(|&e| g.term(e)).unwrap_or(start);
            for e in g.star(at) {
                if !allowed.contains(&e.index()) || p.last() == Some(&e.inv()) {
                    continue;
                }
                let mut q = p.clone();
                q.push(e);
                queue.push_back(q);
            }
        }
        None
    }

    fn fix_rtt1(&mut self, r: usize) -> Result<bool> {
        let f = &self.cur;
        let g = &f.graph.graph;
        for &i in &f.strata[r].edges.clone() {
            for d in [DirEdge::fwd(i), DirEdge::rev(i)] {
                let img = f.image(d);
                let split = img.iter().take_while(|x| !f.in_stratum(**x, r)).count();
                if split == 0 || split == img.len() || r == 0 {
                    continue;
                }
                let Some(sigma) = self.lower_preimage(r, g.init(d), &img[..split]) else {
                    self.diagnostics.push(format!("no lower preimage for the initial segment of f({d:?})"));
                    continue;
                };
                let kind = MoveKind::GeneralizedFold {
                    edge: d.raw(),
                    split,
                    sigma: sigma.iter().map(|e| e.raw()).collect(),
                };
                if let Ok((n, w)) = moves::generalized_fold(&self.cur, d, split, &sigma) {
                    self.accept(kind, n, w);
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Fold at the last nondegenerate turn in the orbit of an illegal turn
    /// found in the image of an `H_r` edge.
    fn fix_rtt3(&mut self, r: usize) -> Result<bool> {
        let f = &self.cur;
        for &i in &f.strata[r].edges {
            let img = &f.edge_image[i];
            for pos in f.illegal_turns_in(img, r) {
                let (mut a, mut b) = (img[pos - 1].inv(), img[pos]);
                let mut seen = HashSet::new();
                loop {
                    let (na, nb) = (f.derivative(a), f.derivative(b));
                    if na == nb || !seen.insert(Turn::new(a, b)) {
                        break;
                    }
                    a = na;
                    b = nb;
                }
                if f.derivative(a) != f.derivative(b) {
                    continue;
                }
                if a == b.inv() {
                    let len = f.edge_image[a.index()].len();
                    if len < 2 {
                        continue;
                    }
                    let cut = len / 2;
                    let (n, w) = moves::subdivide(&self.cur, a.index(), cut)?;
                    self.accept(MoveKind::Subdivide { edge: a.index(), cut }, n, w);
                    return Ok(true);
                }
                match moves::stallings_fold(&self.cur, a, b) {
                    Ok((n, w)) => {
                        self.accept(MoveKind::Fold { e1: a.raw(), e2: b.raw() }, n, w);
                        return Ok(true);
                    }
                    Err(e) => self.diagnostics.push(format!("fold of {a:?},{b:?} failed: {e}")),
                }
            }
        }
        Ok(false)
    }

    fn run(&mut self, budget: &RttBudget) -> Result<bool> {
        while self.log.len() < budget.max_moves {
            self.tidy()?;
            if self.cur.edge_image.iter().any(|p| p.len() > budget.max_len) {
                self.diagnostics.push("edge images exceeded the length budget".into());
                return Ok(false);
            }
            if !self.seen.insert(self.key()) {
                self.diagnostics.push("the search revisited a representative".into());
                return Ok(false);
            }
            let report = self.cur.check_rtt();
            if report.ok() {
                return Ok(true);
            }
            let bad = report
                .strata
                .iter()
                .find(|s| !(s.rtt1.passed() && s.rtt2.passed() && s.rtt3.passed()))
                .unwrap()
                .clone();
            let r = bad.stratum;
            let progressed = if !bad.rtt1.passed() {
                self.fix_rtt1(r)?
            } else if !bad.rtt3.passed() {
                self.fix_rtt3(r)?
            } else {
                false
            };
            if !progressed {
                let why = [("RTT-1", &bad.rtt1), ("RTT-2", &bad.rtt2), ("RTT-3", &bad.rtt3)]
                    .iter()
                    .filter_map(|(n, c)| match c {
                        Check::Fail(m) => Some(format!("{n}: {m}")),
                        Check::Pass => None,
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                self.diagnostics.push(format!("no move repairs stratum {r}: {why}"));
                return Ok(false);
            }
        }
        self.diagnostics.push("move budget exhausted".into());
        Ok(false)
    }
}

/// Layer per rose petal putting the petals of the system first.
fn rose_layers(phi: &Automorphism, ffs: &FreeFactorSystem) -> Result<Vec<usize>> {
    let n = phi.rank();
    let mut layer = vec![1; n];
    for c in &ffs.components {
        let letters: Vec<usize> = {
            let mut v: Vec<usize> = c.edges.iter().map(|e| e.1.index()).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let single = FreeFactorSystem::from_letter_sets(&[letters.clone()]);
        if !single.same_as(&FreeFactorSystem {
            components: vec![c.clone()],
            certified: false,
        }) {
            return Err(Error::Usage(
                "the free factor system must be spanned by standard generators up to conjugacy".into(),
            ));
        }
        for l in letters {
            if layer[l] == 0 {
                return Err(Error::Usage("components of the free factor system overlap".into()));
            }
            layer[l] = 0;
        }
    }
    Ok(layer)
}

fn realizing_stratum(f: &TopRep, ffs: &FreeFactorSystem) -> Option<usize> {
    (0..f.strata.len()).find(|&r| ffs_from_subgraph(&f.graph, &f.filtration_edges(r)).same_as(ffs))
}

/// Search for a relative train track map representing `phi`, starting from
/// the rose. The log replays from `TopRep::from_automorphism(phi)`.
pub fn find_rtt(phi: &Automorphism, ffs: Option<&FreeFactorSystem>, budget: &RttBudget) -> Result<RttOutcome> {
    let start = TopRep::from_automorphism(phi)?;
    let layers = match ffs {
        Some(system) => {
            if !system.image(&phi.images).same_as(system) {
                return Err(Error::Precondition("the free factor system is not invariant".into()));
            }
            Some(rose_layers(phi, system)?)
        }
        None => None,
    };
    let mut d = Driver::new(start, layers);
    let ok = d.run(budget)?;
    let ffs_stratum = ffs.and_then(|s| realizing_stratum(&d.cur, s));
    let mut complete = ok;
    if ffs.is_some() && ffs_stratum.is_none() {
        d.diagnostics.push("no filtration element realizes the free factor system".into());
        complete = false;
    }
    Ok(RttOutcome {
        rep: d.cur,
        log: d.log,
        witnesses: d.witnesses,
        complete,
        diagnostics: d.diagnostics,
        ffs_stratum,
    })
}

/// Pass to the power making every EG stratum aperiodic.
pub fn make_eg_aperiodic(f: &TopRep, max_len: usize) -> Result<(TopRep, usize)> {
    let s = aperiodic_exponent(&f.strata);
    Ok((if s == 1 { f.clone() } else { f.power(s, max_len)? }, s))
}

// ---------------------------------------------------------------------------
// Nielsen folds

/// Fold determined by an indivisible Nielsen path with vertex endpoints at
/// its illegal turn: the improper fold when the two edges at the turn have
/// equal images, the extended fold otherwise.
pub fn nielsen_fold(f: &TopRep, r: usize, rho: &NielsenCandidate) -> Result<(TopRep, MoveKind, MoveWitness)> {
    let (l, rt) = (&rho.rho.left, &rho.rho.right);
    let (Some(&e1), Some(&e2)) = (l.edges.first(), rt.edges.first()) else {
        return Err(Error::NotFoldable("an edge at the illegal turn is partial".into()));
    };
    let (i1, i2) = (f.image(e1), f.image(e2));
    if i1 == i2 {
        let (n, w) = moves::stallings_fold(f, e1, e2)?;
        return Ok((n, MoveKind::Fold { e1: e1.raw(), e2: e2.raw() }, w));
    }
    let (short, long, side) = if i2.starts_with(&i1) {
        (e1, e2, l)
    } else if i1.starts_with(&i2) {
        (e2, e1, rt)
    } else {
        return Err(Error::NotFoldable("neither image is an initial segment of the other".into()));
    };
    let mut sigma = vec![short];
    sigma.extend(side.edges[1..].iter().take_while(|x| !f.in_stratum(**x, r)));
    let img = f.image(long);
    let head = f.apply(&sigma);
    if !img.starts_with(&head) || head.len() >= img.len() {
        return Err(Error::NotFoldable("the extended segment does not fit the longer image".into()));
    }
    let (n, w) = moves::generalized_fold(f, long, head.len(), &sigma)?;
    let kind = MoveKind::GeneralizedFold {
        edge: long.raw(),
        split: head.len(),
        sigma: sigma.iter().map(|e| e.raw()).collect(),
    };
    Ok((n, kind, w))
}

// ---------------------------------------------------------------------------
// Improvement

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail(String),
    Unknown(String),
}

impl Status {
    pub fn is_pass(&self) -> bool {
        matches!(self, Status::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Status::Fail(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub stratum: Option<usize>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovedReport {
    pub clauses: Vec<Clause>,
}

impl ImprovedReport {
    pub fn get(&self, name: &str) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| c.name == name).collect()
    }

    pub fn failures(&self) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| c.status.is_fail()).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.status.is_pass())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImproveOutcome {
    pub rep: TopRep,
    /// Exponent of the iterate represented by `rep`.
    pub iterate: usize,
    /// Moves applied to the iterate, replayable from its power map.
    pub log: Vec<MoveKind>,
    #[serde(skip)]
    pub witnesses: Vec<MoveWitness>,
    pub report: ImprovedReport,
    /// EG eigenvalues of the result equal those of the input raised to the iterate.
    pub eigenvalues_preserved: bool,
    pub diagnostics: Vec<String>,
}

fn vertex_period(f: &TopRep, v: usize) -> Option<usize> {
    let mut x = f.vertex_image[v];
    for p in 1..=f.graph.graph.vertex_count {
        if x == v {
            return Some(p);
        }
        x = f.vertex_image[x];
    }
    None
}

fn is_fixed(f: &TopRep, v: usize) -> bool {
    f.vertex_image[v] == v
}

/// Slide terminal ends of NEG edges to fixed vertices and subdivide NEG
/// edges at interior fixed points.
fn neg_pass(d: &mut Driver) -> Result<()> {
    for _ in 0..4 * (d.cur.edge_count() + 2) {
        let f = &d.cur;
        let g = &f.graph.graph;
        let mut acted = false;
        for r in 0..f.strata.len() {
            let st = &f.strata[r];
            if st.class != StratumClass::Neg || st.edges.len() != 1 {
                continue;
            }
            let i = st.edges[0];
            let img = &f.edge_image[i];
            let e = DirEdge::fwd(i);
            let crosses = img.iter().filter(|x| x.index() == i).count();
            if crosses == 1 && img.first() != Some(&e) && img.last() != Some(&e.inv()) && img.contains(&e) {
                let (n, w) = moves::subdivide_at_fixed_point(f, i)?;
                d.accept(MoveKind::SubdivideFixed { edge: i }, n, w);
                acted = true;
                break;
            }
            if img.first() == Some(&e) && !is_fixed(f, g.term(e)) && r > 0 {
                let lower = f.filtration_edges(r - 1);
                let tp = g.tree_paths(&lower, g.term(e));
                let target = (0..g.vertex_count).find(|&v| is_fixed(f, v) && tp[v].as_ref().is_some_and(|p| !p.is_empty()));
                if let Some(v) = target {
                    let alpha = tp[v].clone().unwrap();
                    if let Ok((n, w)) = moves::slide(f, i, &alpha) {
                        let kind = MoveKind::Slide {
                            edge: i,
                            alpha: alpha.iter().map(|x| x.raw()).collect(),
                        };
                        d.accept(kind, n, w);
                        acted = true;
                        break;
                    }
                }
            }
        }
        if !acted {
            return Ok(());
        }
    }
    Ok(())
}

fn inp_measure(f: &TopRep, budget: &PrBudget) -> Option<(usize, usize)> {
    let mut edges = 0;
    let mut count = 0;
    for r in f.eg_strata() {
        edges += f.strata[r].edges.len();
        let (inps, complete) = nielsen::indivisible_nielsen_paths(f, r, budget).ok()?;
        if !complete {
            return None;
        }
        count += distinct_inps(&inps).len();
    }
    Some((edges, count))
}

/// Periodic elements up to orientation.
fn distinct_inps(inps: &[NielsenCandidate]) -> Vec<&NielsenCandidate> {
    let mut seen = HashSet::new();
    inps.iter().filter(|c| seen.insert(c.rho.canonical())).collect()
}

/// Best-effort improvement. The report is the contract.
pub fn improve_rtt(f: &TopRep, budget: &RttBudget) -> Result<ImproveOutcome> {
    if !f.check_rtt().ok() {
        return Err(Error::Precondition("input is not a relative train track map".into()));
    }
    let mut diagnostics = Vec::new();
    let mut s = aperiodic_exponent(&f.strata);
    for v in 0..f.graph.graph.vertex_count {
        if let Some(p) = vertex_period(f, v) {
            s = lcm(s, p);
        }
    }
    for r in f.eg_strata() {
        match nielsen::indivisible_nielsen_paths(f, r, &budget.pr) {
            Ok((inps, _)) => {
                for c in inps {
                    s = lcm(s, c.period.max(1));
                }
            }
            Err(e) => diagnostics.push(format!("P_{r}: {e}")),
        }
    }
    if s > budget.max_iterate {
        diagnostics.push(format!("required iterate {s} exceeds the cap {}", budget.max_iterate));
        s = aperiodic_exponent(&f.strata).min(budget.max_iterate).max(1);
    }
    let base = if s == 1 { f.clone() } else { f.power(s, budget.max_len.max(1 << 16))? };
    let target: Vec<f64> = eg_lambdas(f).iter().map(|l| l.powi(s as i32)).collect();
    let mut d = Driver::new(base, None);
    if !d.cur.check_rtt().ok() && !d.run(budget)? {
        diagnostics.push("the iterate could not be restored to a relative train track map".into());
    }
    neg_pass(&mut d)?;
    d.tidy()?;
    if !d.cur.check_rtt().ok() {
        d.run(budget)?;
    }
    // Nielsen folding while eg-(i) fails, kept only if the measure drops.
    for r in d.cur.eg_strata() {
        let Ok((inps, complete)) = nielsen::indivisible_nielsen_paths(&d.cur, r, &budget.pr) else {
            continue;
        };
        let distinct = distinct_inps(&inps);
        let bad_turn = distinct.iter().any(|c| c.rho.left.last() == c.rho.right.last());
        if !complete || (distinct.len() <= 1 && !bad_turn) {
            continue;
        }
        let Some(before) = inp_measure(&d.cur, &budget.pr) else { continue };
        let mut trial = Driver::new(d.cur.clone(), None);
        for _ in 0..8 {
            let Ok((inps, _)) = nielsen::indivisible_nielsen_paths(&trial.cur, r, &budget.pr) else {
                break;
            };
            let Some(rho) = inps.first() else { break };
            let Ok((n, kind, w)) = nielsen_fold(&trial.cur, r, rho) else {
                break;
            };
            trial.accept(kind, n, w);
            if !trial.cur.check_rtt().ok() && !trial.run(budget)? {
                break;
            }
            if inp_measure(&trial.cur, &budget.pr).is_some_and(|m| m < before)
                && same_eigenvalues(&eg_lambdas(&trial.cur), &eg_lambdas(&d.cur))
            {
                for (k, w) in trial.log.drain(..).zip(trial.witnesses.drain(..)) {
                    d.log.push(k);
                    d.witnesses.push(w);
                }
                d.cur = trial.cur.clone();
                break;
            }
        }
    }
    let eigenvalues_preserved = same_eigenvalues(&eg_lambdas(&d.cur), &target);
    let report = verify_improved(&d.cur, None, budget);
    diagnostics.append(&mut d.diagnostics);
    Ok(ImproveOutcome {
        rep: d.cur,
        iterate: s,
        log: d.log,
        witnesses: d.witnesses,
        report,
        eigenvalues_preserved,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// Verification

fn clause(name: &str, stratum: Option<usize>, status: Status) -> Clause {
    Clause {
        name: name.into(),
        stratum,
        status,
        note: None,
    }
}

/// Vertices in noncontractible components of the subgraph.
fn noncontractible_vertices(f: &TopRep, edges: &[usize]) -> HashSet<usize> {
    let g = &f.graph.graph;
    let mut out = HashSet::new();
    for comp in g.components(edges) {
        let set: HashSet<usize> = comp.iter().copied().collect();
        let ce: Vec<usize> = edges.iter().copied().filter(|&e| set.contains(&g.ends[e].0)).collect();
        if !ce.is_empty() && g.rank_of(&ce) > 0 {
            out.extend(comp);
        }
    }
    out
}

fn check_vertices(f: &TopRep) -> Status {
    let g = &f.graph.graph;
    for v in 0..g.vertex_count {
        if !is_fixed(f, f.vertex_image[v]) {
            return Status::Fail(format!("f(v{v}) = v{} is not fixed", f.vertex_image[v]));
        }
    }
    for st in &f.strata {
        for &i in &st.edges {
            let (u, v) = g.ends[i];
            match st.class {
                StratumClass::Neg => {
                    for x in [u, v] {
                        if !is_fixed(f, x) {
                            return Status::Fail(format!("endpoint v{x} of NEG edge {i} is not fixed"));
                        }
                    }
                }
                StratumClass::Eg if st.index > 0 => {
                    let nc = noncontractible_vertices(f, &f.filtration_edges(st.index - 1));
                    for x in [u, v] {
                        if nc.contains(&x) && !is_fixed(f, x) {
                            return Status::Fail(format!("endpoint v{x} of EG edge {i} lies in a lower core and is not fixed"));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    Status::Pass
}

fn contractible_components_are_zero(f: &TopRep) -> Status {
    let g = &f.graph.graph;
    for st in &f.strata {
        let gi = f.filtration_edges(st.index);
        let mut contractible: Vec<usize> = Vec::new();
        for comp in g.components(&gi) {
            let set: HashSet<usize> = comp.iter().copied().collect();
            let ce: Vec<usize> = gi.iter().copied().filter(|&e| set.contains(&g.ends[e].0)).collect();
            if g.rank_of(&ce) == 0 {
                contractible.extend(ce);
            }
        }
        contractible.sort_unstable();
        let zero = st.class == StratumClass::Zero;
        if zero && contractible != st.edges {
            return Status::Fail(format!("zero stratum {} is not the union of contractible components", st.index));
        }
        if !zero && !contractible.is_empty() && contractible == st.edges {
            return Status::Fail(format!("stratum {} is contractible but not zero", st.index));
        }
    }
    Status::Pass
}

fn zero_clauses(f: &TopRep, out: &mut Vec<Clause>) {
    let g = &f.graph.graph;
    for st in &f.strata {
        if st.class != StratumClass::Zero {
            continue;
        }
        let i = st.index;
        let next = f.strata.get(i + 1);
        out.push(clause(
            "z-(i)",
            Some(i),
            if next.is_some_and(|n| n.is_eg()) {
                Status::Pass
            } else {
                Status::Fail(format!("stratum {} above zero stratum {i} is not EG", i + 1))
            },
        ));
        let mut immersion = Status::Pass;
        'outer: for &a in &st.edges {
            for &b in &st.edges {
                for da in [DirEdge::fwd(a), DirEdge::rev(a)] {
                    for db in [DirEdge::fwd(b), DirEdge::rev(b)] {
                        if da < db && g.init(da) == g.init(db) && f.derivative(da) == f.derivative(db) {
                            immersion = Status::Fail(format!("turn {{{da:?},{db:?}}} is degenerate under f"));
                            break 'outer;
                        }
                    }
                }
            }
        }
        out.push(clause("z-(ii)", Some(i), immersion));
        let mut z3 = Status::Pass;
        if let Some(n) = next {
            let gi1 = f.filtration_edges(i + 1);
            for &e in &st.edges {
                for v in [g.ends[e].0, g.ends[e].1] {
                    let val: usize = gi1
                        .iter()
                        .map(|&x| usize::from(g.ends[x].0 == v) + usize::from(g.ends[x].1 == v))
                        .sum();
                    let touches = n.edges.iter().any(|&x| g.ends[x].0 == v || g.ends[x].1 == v);
                    if val < 3 && !touches {
                        z3 = Status::Fail(format!("vertex v{v} of zero stratum {i} has low valence"));
                    }
                }
            }
        }
        out.push(clause("z-(iii)", Some(i), z3));
    }
}

/// Basic paths `Eγ`, `γĒ`, `EγĒ` with `|γ| ≤ len`, `γ ⊂ G_{i-1}` tight.
fn basic_paths(f: &TopRep, i: usize, e: usize, len: usize) -> Vec<Path> {
    let g = &f.graph.graph;
    let lower: HashSet<usize> = if i == 0 { HashSet::new() } else { f.filtration_edges(i - 1).into_iter().collect() };
    let ef = DirEdge::fwd(e);
    let mut gammas: Vec<Path> = vec![Vec::new()];
    let mut frontier: Vec<Path> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for p in &frontier {
            let at = p.last().map(|&x| g.term(x)).unwrap_or(g.term(ef));
            for x in g.star(at) {
                if lower.contains(&x.index()) && p.last() != Some(&x.inv()) {
                    let mut q = p.clone();
                    q.push(x);
                    next.push(q);
                }
            }
        }
        gammas.extend(next.iter().cloned());
        frontier = next;
    }
    let mut out = Vec::new();
    for gm in &gammas {
        let mut a = vec![ef];
        a.extend(gm);
        out.push(a.clone());
        let end = gm.last().map(|&x| g.term(x)).unwrap_or(g.term(ef));
        if end == g.term(ef) {
            a.push(ef.inv());
            if word::is_reduced(&a) {
                out.push(a);
            }
        }
    }
    let mut seen = HashSet::new();
    out.into_iter()
        .flat_map(|p| {
            let inv = word::inverse(&p);
            [p, inv]
        })
        .filter(|p| word::is_reduced(p) && seen.insert(p.clone()))
        .collect()
}

fn ne_iii(f: &TopRep, i: usize, e: usize, u_nielsen: bool, budget: &RttBudget) -> Result<Status> {
    let ef = DirEdge::fwd(e);
    let mut unresolved = 0usize;
    let mut example = None;
    for sigma in basic_paths(f, i, e, budget.basic_len) {
        let sp = nielsen::split_path(f, &sigma, false, budget.split_depth)?;
        let has_edge = |pieces: &[Path]| pieces.iter().any(|p| p == &vec![ef] || p == &vec![ef.inv()]);
        if has_edge(&sp.pieces) {
            continue;
        }
        if !sp.is_trivial() {
            continue;
        }
        let mut cur = sigma.clone();
        let mut resolved = false;
        for _ in 0..=budget.basic_iterations {
            let sp = nielsen::split_path(f, &cur, false, budget.split_depth)?;
            if has_edge(&sp.pieces) || (u_nielsen && nielsen::is_exceptional(f, &cur).is_some_and(|x| x.i == i)) {
                resolved = true;
                break;
            }
            cur = f.apply(&cur);
            if cur.len() > budget.max_len {
                break;
            }
        }
        if !resolved {
            unresolved += 1;
            example.get_or_insert(sigma);
        }
    }
    Ok(if unresolved == 0 {
        Status::Pass
    } else {
        Status::Unknown(format!(
            "{unresolved} basic paths unresolved within {} iterations, e.g. {:?}",
            budget.basic_iterations,
            example.unwrap()
        ))
    })
}

fn neg_clauses(f: &TopRep, budget: &RttBudget, out: &mut Vec<Clause>) -> Result<()> {
    let g = &f.graph.graph;
    for st in &f.strata {
        if st.class != StratumClass::Neg {
            continue;
        }
        let i = st.index;
        if st.edges.len() != 1 {
            out.push(clause("ne-(i)", Some(i), Status::Fail(format!("stratum {i} has {} edges", st.edges.len()))));
            continue;
        }
        out.push(clause("ne-(i)", Some(i), Status::Pass));
        let e = st.edges[0];
        let ef = DirEdge::fwd(e);
        let img = &f.edge_image[e];
        let lower: HashSet<usize> = if i == 0 { HashSet::new() } else { f.filtration_edges(i - 1).into_iter().collect() };
        let ne2 = if img.first() != Some(&ef) {
            Status::Fail(format!("f(E{e}) does not begin with E{e}"))
        } else {
            let u = &img[1..];
            let base = g.term(ef);
            if !u.iter().all(|x| lower.contains(&x.index())) {
                Status::Fail(format!("u for edge {e} leaves the lower filtration"))
            } else if !(u.is_empty() || g.is_closed(u)) {
                Status::Fail(format!("u for edge {e} is not closed"))
            } else if !is_fixed(f, base) {
                Status::Fail(format!("basepoint v{base} of u for edge {e} is not fixed"))
            } else {
                Status::Pass
            }
        };
        let ok2 = ne2.is_pass();
        out.push(clause("ne-(ii)", Some(i), ne2));
        let ne3 = if ok2 {
            let u = &img[1..];
            let u_nielsen = !u.is_empty() && f.apply(u) == u;
            ne_iii(f, i, e, u_nielsen, budget)?
        } else {
            Status::Unknown("ne-(ii) does not hold".into())
        };
        let mut c = clause("ne-(iii)", Some(i), ne3);
        c.note = Some(format!(
            "basic paths with |γ| ≤ {} within {} iterations",
            budget.basic_len, budget.basic_iterations
        ));
        out.push(c);
    }
    Ok(())
}

fn eg_clauses(f: &TopRep, budget: &RttBudget, out: &mut Vec<Clause>) {
    for r in f.eg_strata() {
        let pr = match nielsen::compute_pr(f, r, &budget.pr) {
            Ok(p) => p,
            Err(e) => {
                for n in ["eg-(i)", "eg-(ii)", "eg-(iii)", "period-one"] {
                    out.push(clause(n, Some(r), Status::Unknown(e.to_string())));
                }
                continue;
            }
        };
        let periodic: Vec<NielsenCandidate> = pr.periodic().into_iter().cloned().collect();
        let distinct = distinct_inps(&periodic);
        let incomplete = || Status::Unknown("P_r search did not complete within budget".into());
        let p1 = if let Some(c) = periodic.iter().find(|c| c.period > 1) {
            Status::Fail(format!("{} has period {}", c.text, c.period))
        } else if pr.complete {
            Status::Pass
        } else {
            incomplete()
        };
        out.push(clause("period-one", Some(r), p1));
        let e1 = if distinct.len() > 1 {
            Status::Fail(format!("{} indivisible Nielsen paths", distinct.len()))
        } else if let Some(c) = distinct.iter().find(|c| c.rho.left.last() == c.rho.right.last()) {
            Status::Fail(format!("{} and its inverse start with the same edge", c.text))
        } else if pr.complete {
            Status::Pass
        } else {
            incomplete()
        };
        out.push(clause("eg-(i)", Some(r), e1));
        let hr = &f.strata[r].edges;
        let geometric_predicate = distinct.iter().any(|c| hr.iter().all(|&e| c.crossings[e] == 2));
        let e2 = if distinct.is_empty() {
            if pr.complete {
                Status::Pass
            } else {
                incomplete()
            }
        } else if distinct.iter().all(|c| hr.iter().any(|&e| c.crossings[e] == 1)) {
            Status::Pass
        } else if geometric_predicate {
            Status::Unknown("an indivisible Nielsen path crosses every stratum edge twice; the stratum may be geometric".into())
        } else {
            Status::Fail("an indivisible Nielsen path crosses no stratum edge exactly once".into())
        };
        out.push(clause("eg-(ii)", Some(r), e2));
        let e3 = if geometric_predicate {
            Status::Unknown("geometric predicate fires; the surface condition is not decided".into())
        } else if pr.complete {
            Status::Pass
        } else {
            incomplete()
        };
        let mut c = clause("eg-(iii)", Some(r), e3);
        c.note = Some("vacuous unless the stratum is geometric".into());
        out.push(c);
    }
}

/// Invariant subgraphs strictly between `G_{r-1}` and `G_r` realizing a
/// system strictly between theirs.
fn reduced_clause(f: &TopRep, budget: &RttBudget) -> Status {
    for r in f.eg_strata() {
        let hr = &f.strata[r].edges;
        if hr.len() > budget.reduced_subsets {
            return Status::Unknown(format!("stratum {r} has too many edges for subset search"));
        }
        let lower = if r == 0 { Vec::new() } else { f.filtration_edges(r - 1) };
        let bottom = ffs_from_subgraph(&f.graph, &lower);
        let top = ffs_from_subgraph(&f.graph, &f.filtration_edges(r));
        let stratum_of = f.stratum_of();
        for mask in 1..(1u64 << hr.len()) - 1 {
            let chosen: Vec<usize> = (0..hr.len()).filter(|b| mask >> b & 1 == 1).map(|b| hr[b]).collect();
            let inside: HashSet<usize> = chosen.iter().copied().collect();
            let invariant = chosen.iter().all(|&e| {
                f.edge_image[e]
                    .iter()
                    .all(|x| inside.contains(&x.index()) || stratum_of[x.index()] < r)
            });
            if !invariant {
                continue;
            }
            let mut k = lower.clone();
            k.extend(&chosen);
            let mid = ffs_from_subgraph(&f.graph, &k);
            if !mid.same_as(&bottom) && !mid.same_as(&top) {
                return Status::Fail(format!("invariant subgraph with H_{r} edges {chosen:?} realizes an intermediate system"));
            }
        }
    }
    Status::Pass
}

/// Per-clause verification of the improved relative train track properties.
pub fn verify_improved(f: &TopRep, ffs: Option<&FreeFactorSystem>, budget: &RttBudget) -> ImprovedReport {
    let mut out = Vec::new();
    let rtt = f.check_rtt();
    out.push(clause(
        "rtt",
        None,
        if rtt.ok() {
            Status::Pass
        } else {
            Status::Fail(format!("{:?}", rtt.strata.iter().find(|s| !(s.rtt1.passed() && s.rtt2.passed() && s.rtt3.passed()))))
        },
    ));
    let aperiodic = f.strata.iter().filter(|s| s.is_eg()).find(|s| !s.aperiodic);
    out.push(clause(
        "eg-aperiodic",
        None,
        match aperiodic {
            Some(s) => Status::Fail(format!("stratum {} has period {:?}", s.index, s.period)),
            None => Status::Pass,
        },
    ));
    if let Some(system) = ffs {
        out.push(clause(
            "free-factor-system",
            None,
            match realizing_stratum(f, system) {
                Some(_) => Status::Pass,
                None => Status::Fail("no filtration element realizes the system".into()),
            },
        ));
    }
    let mut red = clause("reduced", None, reduced_clause(f, budget));
    red.note = Some("checked against invariant subgraph-realizable systems only".into());
    out.push(red);
    out.push(clause("vertices", None, check_vertices(f)));
    out.push(clause("zero-strata", None, contractible_components_are_zero(f)));
    zero_clauses(f, &mut out);
    if let Err(e) = neg_clauses(f, budget, &mut out) {
        out.push(clause("ne-(iii)", None, Status::Unknown(e.to_string())));
    }
    eg_clauses(f, budget, &mut out);
    ImprovedReport { clauses: out }
}

//! Invariant filtrations, strata and their transition matrices.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::graph::Path;
use crate::matrix::{lcm, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StratumClass {
    Zero,
    #[serde(rename = "NEG")]
    Neg,
    #[serde(rename = "EG")]
    Eg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub index: usize,
    pub edges: Vec<usize>,
    pub class: StratumClass,
    pub matrix: Matrix,
    pub irreducible: bool,
    pub aperiodic: bool,
    pub period: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_bounds: Option<(f64, f64)>,
}

impl Stratum {
    pub fn is_eg(&self) -> bool {
        self.class == StratumClass::Eg
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.edges.binary_search(&edge).is_ok()
    }
}

/// Orientation-blind crossing counts: entry `(i, j)` is the number of times
/// the image of edge `j` crosses edge `i`.
pub fn full_matrix(edge_count: usize, images: &[Path]) -> Matrix {
    let mut m = Matrix::zero(edge_count);
    for (j, img) in images.iter().enumerate() {
        for e in img {
            let i = e.index();
            m.set(i, j, m.get(i, j) + 1);
        }
    }
    m
}

pub fn submatrix(m: &Matrix, edges: &[usize]) -> Matrix {
    let k = edges.len();
    let mut s = Matrix::zero(k);
    for (a, &i) in edges.iter().enumerate() {
        for (b, &j) in edges.iter().enumerate() {
            s.set(a, b, m.get(i, j));
        }
    }
    s
}

/// Classification of a square nonnegative matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixClass {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub period: Option<usize>,
    pub class: StratumClass,
    pub lambda: Option<f64>,
    pub lambda_bounds: Option<(f64, f64)>,
}

pub fn classify_matrix(m: &Matrix) -> MatrixClass {
    let irreducible = m.is_irreducible();
    let period = m.period();
    let class = if m.is_zero() {
        StratumClass::Zero
    } else if irreducible && m.is_permutation() {
        StratumClass::Neg
    } else {
        StratumClass::Eg
    };
    let perron = if class == StratumClass::Zero {
        None
    } else {
        m.perron(1e-12)
    };
    MatrixClass {
        irreducible,
        aperiodic: period == Some(1),
        period,
        class,
        lambda: match class {
            StratumClass::Zero => None,
            StratumClass::Neg => Some(1.0),
            StratumClass::Eg => perron.as_ref().map(|p| p.lambda),
        },
        lambda_bounds: perron.map(|p| (p.lower, p.upper)),
    }
}

/// Maximal filtration: strongly connected components of the crossing digraph
/// in an order where every image lies in the current or an earlier stratum.
/// `user_layer[e]` (when given) ranks edges of a coarser invariant chain.
pub fn build_strata(edge_count: usize, images: &[Path], user_layer: Option<&[usize]>) -> Vec<Stratum> {
    let full = full_matrix(edge_count, images);
    let mut dg: DiGraph<usize, ()> = DiGraph::new();
    let nodes: Vec<_> = (0..edge_count).map(|i| dg.add_node(i)).collect();
    for j in 0..edge_count {
        for i in 0..edge_count {
            if full.get(i, j) > 0 {
                dg.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&dg)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| dg[n]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    comps.sort_by_key(|c| c[0]);
    let mut comp_of = vec![0; edge_count];
    for (k, c) in comps.iter().enumerate() {
        for &e in c {
            comp_of[e] = k;
        }
    }
    // Component a must precede b when b's images cross a.
    let k = comps.len();
    let mut deps = vec![0usize; k];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); k];
    for j in 0..edge_count {
        for i in 0..edge_count {
            let (a, b) = (comp_of[i], comp_of[j]);
            if full.get(i, j) > 0 && a != b && !users[a].contains(&b) {
                users[a].push(b);
                deps[b] += 1;
            }
        }
    }
    let key = |c: usize| {
        let layer = user_layer.map(|l| comps[c].iter().map(|&e| l[e]).max().unwrap_or(0)).unwrap_or(0);
        (layer, comps[c][0])
    };
    let mut heap: BinaryHeap<Reverse<((usize, usize), usize)>> = BinaryHeap::new();
    for c in 0..k {
        if deps[c] == 0 {
            heap.push(Reverse((key(c), c)));
        }
    }
    let mut order = Vec::with_capacity(k);
    while let Some(Reverse((_, c))) = heap.pop() {
        order.push(c);
        for &b in &users[c] {
            deps[b] -= 1;
            if deps[b] == 0 {
                heap.push(Reverse((key(b), b)));
            }
        }
    }
    order
        .into_iter()
        .enumerate()
        .map(|(index, c)| {
            let edges = comps[c].clone();
            let matrix = submatrix(&full, &edges);
            let mc = classify_matrix(&matrix);
            Stratum {
                index,
                edges,
                class: mc.class,
                matrix,
                irreducible: mc.irreducible,
                aperiodic: mc.aperiodic,
                period: mc.period,
                lambda: mc.lambda,
                lambda_bounds: mc.lambda_bounds,
            }
        })
        .collect()
}

/// Exponent making every EG stratum aperiodic: the lcm of their periods.
pub fn aperiodic_exponent(strata: &[Stratum]) -> usize {
    strata
        .iter()
        .filter(|s| s.is_eg())
        .filter_map(|s| s.period)
        .fold(1, lcm)
}

//! Abelianization, unipotence and polynomial growth.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::automorphism::Automorphism;
use crate::error::{Error, Result};
use crate::filtration::StratumClass;
use crate::graph::Path;
use crate::map::TopRep;
use crate::matrix::{big_det, big_identity, big_mul, Matrix};
use crate::moves;
use crate::word::{DirEdge, Word};

/// Column `j` holds the signed generator counts of the image of generator `j`.
pub fn abelianize(phi: &Automorphism) -> Result<Matrix> {
    let n = phi.rank();
    let mut m = Matrix::zero(n);
    for (j, img) in phi.images.iter().enumerate() {
        for e in img {
            let d = if e.is_forward() { 1 } else { -1 };
            m.set(e.index(), j, m.get(e.index(), j) + d);
        }
    }
    let det = big_det(&m.to_big());
    if det.abs() != BigInt::one() {
        return Err(Error::NotAutomorphism(format!("abelianization has determinant {det}")));
    }
    Ok(m)
}

pub fn abelianize_rep(f: &TopRep) -> Result<Matrix> {
    abelianize(&f.outer_class())
}

/// Exact test `(M − I)^n = 0`.
pub fn is_unipotent(m: &Matrix) -> bool {
    let n = m.n;
    let mut d = m.to_big();
    for (i, row) in d.iter_mut().enumerate() {
        row[i] -= BigInt::one();
    }
    let mut acc = big_identity(n);
    for _ in 0..n {
        acc = big_mul(&acc, &d);
    }
    acc.iter().flatten().all(|x| x.is_zero())
}

/// Whether `M ≡ I` modulo 3.
pub fn mod3_trivial(m: &Matrix) -> bool {
    (0..m.n).all(|i| (0..m.n).all(|j| (m.get(i, j) - i64::from(i == j)).rem_euclid(3) == 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub pg: bool,
    pub upg: bool,
    pub lambda_max: Option<f64>,
    pub eg_strata: Vec<usize>,
    pub abelian_matrix: Vec<Vec<i64>>,
    pub unipotent: bool,
    pub mod3_trivial: bool,
    /// PG together with a trivial mod-3 image forces UPG.
    pub mod3_agrees: bool,
}

pub fn classify_growth(f: &TopRep) -> Result<GrowthReport> {
    let report = f.check_rtt();
    if !report.ok() {
        return Err(Error::Precondition("representative is not a relative train track map".into()));
    }
    let eg = f.eg_strata();
    let m = abelianize_rep(f)?;
    let pg = eg.is_empty();
    let unipotent = is_unipotent(&m);
    let m3 = mod3_trivial(&m);
    let upg = pg && unipotent;
    let lambda_max = eg
        .iter()
        .filter_map(|&r| f.strata[r].lambda)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))));
    Ok(GrowthReport {
        pg,
        upg,
        lambda_max,
        eg_strata: eg,
        abelian_matrix: m.rows(),
        unipotent,
        mod3_trivial: m3,
        mod3_agrees: !(pg && m3) || upg,
    })
}

/// Remove valence-one vertices and pretrivial forests until neither applies.
pub fn normalize_pg(f: &TopRep) -> Result<(TopRep, Vec<moves::MoveWitness>)> {
    let mut cur = f.clone();
    let mut log = Vec::new();
    loop {
        if !moves::pretrivial_edges(&cur).is_empty() {
            let (next, w) = moves::collapse_pretrivial_forest(&cur)?;
            cur = next;
            log.push(w);
            continue;
        }
        let g = &cur.graph.graph;
        let Some(v) = (0..g.vertex_count).find(|&v| g.valence(v) == 1) else {
            break;
        };
        let (next, w) = moves::valence_one(&cur, v)?;
        cur = next;
        log.push(w);
    }
    Ok((cur, log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgBasis {
    pub tree: Vec<usize>,
    /// Non-tree edges, one basis element each.
    pub edges: Vec<usize>,
    pub circuits: Vec<Path>,
    pub matrix: Vec<Vec<i64>>,
    pub diagonal: Vec<i64>,
    pub upg: bool,
}

/// Basis of embedded circuits, one per edge outside a tree chosen greedily
/// in stratum order, and the action of `f` on it.
pub fn pg_basis(f: &TopRep) -> Result<(TopRep, PgBasis)> {
    if !f.eg_strata().is_empty() {
        return Err(Error::Usage("a PG basis needs a representative without EG strata".into()));
    }
    let (g0, _) = normalize_pg(f)?;
    if g0.strata.iter().any(|s| s.class == StratumClass::Zero) {
        return Err(Error::Precondition("zero strata remain after normalization".into()));
    }
    let g = &g0.graph.graph;
    let mut parent: Vec<usize> = (0..g.vertex_count).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut tree = Vec::new();
    let mut others = Vec::new();
    for s in &g0.strata {
        for &i in &s.edges {
            let (u, v) = g.ends[i];
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a] = b;
                tree.push(i);
            } else {
                others.push(i);
            }
        }
    }
    let circuits: Vec<Path> = others
        .iter()
        .map(|&i| {
            let (u, v) = g.ends[i];
            let tp = g.tree_paths(&tree, v);
            let mut c = vec![DirEdge::fwd(i)];
            c.extend(tp[u].clone().expect("tree spans the graph"));
            c
        })
        .collect();
    let slot: Vec<Option<usize>> = (0..g.edge_count()).map(|e| others.iter().position(|&o| o == e)).collect();
    let k = others.len();
    let mut matrix = vec![vec![0i64; k]; k];
    for (j, c) in circuits.iter().enumerate() {
        let img: Word = g0.apply(c);
        for e in img {
            if let Some(i) = slot[e.index()] {
                matrix[i][j] += if e.is_forward() { 1 } else { -1 };
            }
        }
    }
    let diagonal: Vec<i64> = (0..k).map(|i| matrix[i][i]).collect();
    let upg = diagonal.iter().all(|&d| d == 1);
    Ok((
        g0,
        PgBasis {
            tree,
            edges: others,
            circuits,
            matrix,
            diagonal,
            upg,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aut(text: &str) -> Automorphism {
        Automorphism::parse(text).unwrap()
    }

    #[test]
    fn abelian_matrices() {
        let m = abelianize(&aut("gens: a b\na -> b\nb -> a b")).unwrap();
        assert_eq!(m, Matrix::from_rows(&[vec![0, 1], vec![1, 1]]));
        assert!(!is_unipotent(&m));
        let u = abelianize(&aut("gens: a b c\na -> a\nb -> b a\nc -> c b")).unwrap();
        assert_eq!(u, Matrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]));
        assert!(is_unipotent(&u));
        assert!(is_unipotent(&abelianize(&Automorphism::identity(3)).unwrap()));
    }

    #[test]
    fn homomorphism_on_composition() {
        let f = aut("gens: a b c\na -> b\nb -> c\nc -> a b");
        let g = aut("gens: a b c\na -> a c\nb -> B\nc -> c");
        let lhs = abelianize(&f.compose(&g)).unwrap();
        let rhs = abelianize(&f).unwrap().checked_mul(&abelianize(&g).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn growth_classes() {
        let fib = TopRep::from_automorphism(&aut("gens: a b\na -> b\nb -> a b")).unwrap();
        let r = classify_growth(&fib).unwrap();
        assert!(!r.pg && !r.upg);
        assert!((r.lambda_max.unwrap() - 1.618_033_988_7).abs() < 1e-9);
        let upg = TopRep::from_automorphism(&aut("gens: a b c\na -> a\nb -> b a\nc -> c b")).unwrap();
        let r = classify_growth(&upg).unwrap();
        assert!(r.pg && r.upg && r.mod3_agrees);
        let id = TopRep::from_automorphism(&Automorphism::identity(2)).unwrap();
        assert!(classify_growth(&id).unwrap().upg);
        let swap = TopRep::from_automorphism(&aut("gens: a b\na -> b\nb -> a")).unwrap();
        let r = classify_growth(&swap).unwrap();
        assert!(r.pg && !r.upg && !r.mod3_trivial);
    }

    #[test]
    fn pg_bases() {
        let id = TopRep::from_automorphism(&Automorphism::identity(2)).unwrap();
        let (_, b) = pg_basis(&id).unwrap();
        assert_eq!(b.matrix, vec![vec![1, 0], vec![0, 1]]);
        let upg = TopRep::from_automorphism(&aut("gens: a b c\na -> a\nb -> b a\nc -> c b")).unwrap();
        let (_, b) = pg_basis(&upg).unwrap();
        assert_eq!(b.diagonal, vec![1, 1, 1]);
        assert!(b.upg);
        let swap = TopRep::from_automorphism(&aut("gens: a b\na -> b\nb -> a")).unwrap();
        let (_, b) = pg_basis(&swap).unwrap();
        assert!(b.diagonal.iter().all(|d| (-1..=1).contains(d)));
        assert!(!b.upg);
        let fib = TopRep::from_automorphism(&aut("gens: a b\na -> b\nb -> a b")).unwrap();
        assert!(matches!(pg_basis(&fib), Err(Error::Usage(_))));
    }
}

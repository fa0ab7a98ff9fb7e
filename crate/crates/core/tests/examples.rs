//! Worked examples on the standard fixtures, each against a hand computation
//! or a separately coded check.

use outfn::filtration::{classify_matrix, full_matrix, StratumClass};
use outfn::fixtures;
use outfn::free_factor::{meet, Complexity, FreeFactorSystem};
use outfn::graph::{Graph, MarkedGraph};
use outfn::growth::{abelianize, classify_growth, is_unipotent, pg_basis};
use outfn::lamination::{
    build_z, classify_trichotomy, expansion_factor, free_rank2_certificate, frequency_vector, in_groupoid, tile, weakly_attracted,
    AttractBudget, Attraction, AttractionVerdict, LamHandle, Piece, PingPong, PingPongBudget,
};
use outfn::map::Turn;
use outfn::matrix::Matrix;
use outfn::moves::{factor_into_folds, slide, stallings_fold, subdivide, GraphMap};
use outfn::nielsen::{compute_pr, is_exceptional, split_path, upg_split, PrBudget};
use outfn::train_track::{find_rtt, improve_rtt, make_eg_aperiodic, RttBudget};
use outfn::word::{self, Alphabet, DirEdge, Word};
use outfn::{Automorphism, TopRep};

fn w(rank: usize, s: &str) -> Word {
    Alphabet::standard(rank).parse(s).unwrap()
}

fn rose(phi: &Automorphism) -> TopRep {
    TopRep::from_automorphism(phi).unwrap()
}

fn rose_map(rank: usize, images: &[&str]) -> TopRep {
    rose(&Automorphism::from_standard(images.iter().map(|s| w(rank, s)).collect()).unwrap())
}

fn fib() -> TopRep {
    rose(&fixtures::fib())
}

fn upg() -> TopRep {
    rose(&fixtures::upg())
}

#[test]
fn theta_graph_marking() {
    // Vertices 0, 1; t: 0 → 1 is the tree, e1 and e2 are loops at 1.
    let g = Graph::new(2, vec![(0, 1), (1, 1), (1, 1)]).unwrap();
    let t = DirEdge::fwd(0);
    let (e1, e2) = (DirEdge::fwd(1), DirEdge::fwd(2));
    let m = MarkedGraph::from_parts(g, 0, vec![vec![t, e1, t.inv()], vec![t, e2, t.inv()]], vec![vec![], w(2, "a"), w(2, "b")]).unwrap();
    assert_eq!(m.express(&[t, e1, t.inv()]), w(2, "a"));
    assert_eq!(m.express(&[t, e2, e1.inv(), t.inv()]), w(2, "bA"));
    assert_eq!(m.realize(&w(2, "ab")), vec![t, e1, e2, t.inv()]);
}

#[test]
fn fibonacci_images() {
    let f = fib();
    assert_eq!(f.apply(&w(2, "aB")), w(2, "A"));
    let mut lengths = Vec::new();
    for k in 0..8 {
        lengths.push(f.iterate(&w(2, "a"), k, 1000).unwrap().len());
    }
    assert_eq!(lengths, [1, 1, 2, 3, 5, 8, 13, 21]);
    assert_eq!(f.iterate(&w(2, "a"), 3, 100).unwrap(), w(2, "bab"));
    let (a, b) = (DirEdge::fwd(0), DirEdge::fwd(1));
    assert_eq!(f.derivative(a), b);
    assert_eq!(f.derivative(a.inv()), b.inv());
    // f(B) = BA.
    assert_eq!(f.derivative(b.inv()), b.inv());
}

#[test]
fn fibonacci_turns() {
    let f = fib();
    let (a, b) = (DirEdge::fwd(0), DirEdge::fwd(1));
    assert!(!f.is_legal_turn(a.inv(), b.inv()));
    assert!(f.is_legal_turn(a, b));
    let orbit = f.classify_turn(Turn::new(a, b)).orbit;
    assert!(orbit.iter().all(|t| !t.is_degenerate()));
    for (x, y) in [(a, b), (a, b.inv()), (b, a.inv())] {
        assert!(f.is_legal_turn(x, y));
        let t = f.turn_image(Turn::new(x, y));
        assert!(f.is_legal_turn(t.0, t.1));
    }
    assert!(f.check_rtt().ok());
}

#[test]
fn fibonacci_cancellation_exhaustive() {
    let f = fib();
    assert_eq!(f.bcc_bound(), 3);
    // All reduced p, q of length ≤ 4 with pq reduced, so |pq| ≤ 8.
    let mut words: Vec<Word> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..4 {
        let mut next = Vec::new();
        for x in &words {
            for e in DirEdge::all(2) {
                if x.last() == Some(&e.inv()) {
                    continue;
                }
                let mut y = x.clone();
                y.push(e);
                next.push(y);
            }
        }
        all.extend(next.iter().cloned());
        words = next;
    }
    let mut worst = 0;
    for p in &all {
        for q in &all {
            if p.last() == Some(&q[0].inv()) {
                continue;
            }
            let (fp, fq) = (f.apply(p), f.apply(q));
            let (_, c) = word::mul_counting(&fp, &fq);
            worst = worst.max(c);
        }
    }
    assert!(worst <= 3, "{worst}");
}

#[test]
fn filtrations_and_matrices() {
    let f = fib();
    assert_eq!(f.strata.len(), 1);
    assert_eq!(f.strata[0].edges, vec![0, 1]);
    assert_eq!(full_matrix(2, &f.edge_image).rows(), vec![vec![0, 1], vec![1, 1]]);
    let c = classify_matrix(&Matrix::from_rows(&[vec![0, 1], vec![1, 1]]));
    assert!(c.irreducible && c.aperiodic);
    assert_eq!(c.class, StratumClass::Eg);
    // Positive root of x² − x − 1 by bisection.
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if mid * mid - mid - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((c.lambda.unwrap() - lo).abs() < 1e-9);
    let u = upg();
    let classes: Vec<_> = u.strata.iter().map(|s| (s.edges.clone(), s.class)).collect();
    assert_eq!(classes, vec![(vec![0], StratumClass::Neg), (vec![1], StratumClass::Neg), (vec![2], StratumClass::Neg)]);
    let (g, s) = make_eg_aperiodic(&f, 1 << 10).unwrap();
    assert_eq!(s, 1);
    assert_eq!(g.edge_image, f.edge_image);
}

#[test]
fn folds_and_slides() {
    let f = fib();
    assert!(stallings_fold(&f, DirEdge::fwd(0), DirEdge::fwd(1)).is_err());
    let h = rose_map(2, &["ab", "b"]);
    let g = GraphMap::from_rep(&h);
    let fz = factor_into_folds(&g).unwrap();
    for i in 0..2 {
        assert_eq!(fz.recompose(&[DirEdge::fwd(i)]), h.edge_image[i]);
    }
    // a ↦ ab, b ↦ ab as a graph map: folding a with b loses an edge.
    let m = GraphMap {
        domain: Graph::rose(2),
        codomain: Graph::rose(2),
        vertex_map: vec![0],
        edge_map: vec![w(2, "ab"), w(2, "ab")],
    };
    let fz = factor_into_folds(&m).unwrap();
    assert_eq!(fz.recompose(&[DirEdge::fwd(1)]), w(2, "ab"));
    assert!(fz.rank_drops() >= 1);
    // ψ_upg, sliding c along b: u' = B·b·ba = ba.
    let (s, wit) = slide(&upg(), 2, &w(3, "b")).unwrap();
    assert!(wit.round_trip_ok());
    assert_eq!(s.edge_image[2][1..].to_vec(), word::reduce(&w(3, "Bbba")));
    let (sub, wit) = subdivide(&f, 1, 1).unwrap();
    assert!(wit.round_trip_ok());
    assert_eq!(sub.edge_count(), 3);
    assert!(sub.outer_class().outer_eq(&f.outer_class()));
}

#[test]
fn train_track_fixtures() {
    let out = find_rtt(&fixtures::fib(), None, &RttBudget::default()).unwrap();
    assert!(out.log.is_empty());
    assert_eq!(out.rep.edge_image, fib().edge_image);
    let out = find_rtt(&fixtures::upg(), None, &RttBudget::default()).unwrap();
    assert!(out.rep.strata.iter().all(|s| s.class == StratumClass::Neg));
    let imp = improve_rtt(&out.rep, &RttBudget::default()).unwrap();
    for name in ["ne-(i)", "ne-(ii)", "ne-(iii)"] {
        for c in imp.report.clauses.iter().filter(|c| c.name == name) {
            assert!(c.status.is_pass(), "{name}: {:?}", c.status);
        }
    }
    // Each u_i is a closed path at the fixed vertex.
    for (i, img) in out.rep.edge_image.iter().enumerate().skip(1) {
        let u = &img[1..];
        assert!(!u.is_empty() && u.iter().all(|x| x.index() < i));
    }
}

#[test]
fn splittings() {
    let u = upg();
    let s = split_path(&u, &w(3, "cBA"), false, 10).unwrap();
    assert_eq!(s.pieces, vec![w(3, "cB"), w(3, "A")]);
    for k in 0..=10 {
        let images: Vec<Word> = s.pieces.iter().map(|p| u.iterate(p, k, 1 << 12).unwrap()).collect();
        let joined: Word = images.concat();
        assert!(word::is_reduced(&joined));
        assert_eq!(joined, u.iterate(&w(3, "cBA"), k, 1 << 12).unwrap());
    }
    let s = split_path(&fib(), &w(2, "a"), true, 10).unwrap();
    assert_eq!(s.pieces.len(), 1);
}

#[test]
fn nielsen_paths_of_fibonacci() {
    let f = fib();
    let pr = compute_pr(&f, 0, &PrBudget::default()).unwrap();
    let periodic = pr.periodic();
    assert_eq!(periodic.len(), 1);
    let inp = periodic[0];
    assert!(2 % inp.period == 0);
    let path = inp.rho.path().unwrap();
    for e in 0..2 {
        assert_eq!(path.iter().filter(|x| x.index() == e).count(), 2);
    }
    // Its iterate under f² is itself.
    let f2 = f.power(2, 1 << 10).unwrap();
    assert_eq!(f2.apply(&path), path);
    let pr2 = compute_pr(&f2, 0, &PrBudget::default()).unwrap();
    assert!(pr2.periodic().iter().all(|c| c.period == 1));
}

#[test]
fn exceptional_paths_and_upg_splitting() {
    let u = upg();
    let e = is_exceptional(&u, &w(3, "baB")).unwrap();
    assert_eq!((e.i, e.k, e.j, e.tau.clone(), e.inverted), (1, 1, 1, w(3, "a"), false));
    assert!(is_exceptional(&u, &w(3, "bAB")).unwrap().inverted);
    let s = upg_split(&u, &w(3, "baB"), 10, 10).unwrap();
    assert_eq!((s.m, s.exceptional), (Some(0), vec![true]));
    let s = upg_split(&u, &w(3, "bA"), 20, 10).unwrap();
    let m = s.m.unwrap();
    assert!(m <= 10 * 2);
    assert_eq!(s.pieces.concat(), u.iterate(&w(3, "bA"), m, 1 << 10).unwrap());
}

#[test]
fn tiles_and_frequencies() {
    let f = fib();
    assert_eq!(tile(&f, DirEdge::fwd(0), 3, 100).unwrap().path, w(2, "bab"));
    assert_eq!(tile(&f, DirEdge::fwd(1), 2, 100).unwrap().path, w(2, "bab"));
    let t = tile(&f, DirEdge::fwd(1), 1, 100).unwrap().path;
    assert_eq!((t.iter().filter(|x| x.index() == 0).count(), t.iter().filter(|x| x.index() == 1).count()), (1, 1));
    let v = frequency_vector(&f, 0).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((v[0] - 1.0 / (phi * phi)).abs() < 1e-9 && (v[1] - 1.0 / phi).abs() < 1e-9);
}

#[test]
fn attraction_on_fibonacci() {
    let lam = LamHandle::topmost(fib()).unwrap();
    let b = AttractBudget::default();
    let z = build_z(&lam, &PrBudget::default(), &b).unwrap();
    assert!(z.edges.is_empty());
    let rho = z.rho.clone().unwrap();
    assert_eq!(word::least_rotation(&rho), word::least_rotation(&w(2, "baBA")));
    for c in ["a", "ab"] {
        assert!(matches!(weakly_attracted(&lam, &w(2, c), true, None, &b).unwrap(), Attraction::Attracted { .. }));
        assert!(matches!(classify_trichotomy(&lam, &z, &w(2, c), &b).unwrap(), AttractionVerdict::Attracted { .. }));
    }
    assert!(matches!(classify_trichotomy(&lam, &z, &rho, &b).unwrap(), AttractionVerdict::InGroupoid { .. }));
    assert!(!matches!(weakly_attracted(&lam, &rho, true, Some(&z), &b).unwrap(), Attraction::Attracted { .. }));
}

#[test]
fn nonattracting_edges_above_an_eg_stratum() {
    // c ↦ c·baBA: the suffix is the Nielsen loop of the EG stratum below.
    let f = rose_map(3, &["b", "ab", "cbaBA"]);
    let r = f.eg_strata()[0];
    let lam = LamHandle::new(f.clone(), r).unwrap();
    let z = build_z(&lam, &PrBudget::default(), &AttractBudget::default()).unwrap();
    assert!(z.edges.contains(&2), "{:?}", z.notes);
    let rho = z.rho.clone().unwrap();
    let c = DirEdge::fwd(2);
    let sigma = word::concat(&[&[c], &rho, &[c.inv()]]);
    assert_eq!(in_groupoid(&sigma, &z.edges, Some(&rho)).unwrap(), vec![Piece::Edge(c), Piece::Rho, Piece::Edge(c.inv())]);
}

#[test]
fn expansion_factors_and_pingpong() {
    let lam = LamHandle::topmost(fib()).unwrap();
    let b = RttBudget::default();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let e1 = expansion_factor(&fixtures::fib(), &lam, &b).unwrap();
    assert!((e1.mu - phi).abs() < 1e-9);
    let e2 = expansion_factor(&fixtures::fib().power(2), &lam, &b).unwrap();
    assert!((e2.mu - phi * phi).abs() < 1e-9);
    let twist = Automorphism::from_standard(vec![w(2, "ab"), w(2, "b")]).unwrap();
    let pp = PingPongBudget { width: 64, iterations: 40 };
    assert!(matches!(free_rank2_certificate(&fixtures::fib(), &twist, &b, &pp).unwrap(), PingPong::Certificate { .. }));
}

#[test]
fn growth_fixtures() {
    let m = abelianize(&fixtures::fib()).unwrap();
    assert_eq!(m.rows(), vec![vec![0, 1], vec![1, 1]]);
    let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0);
    assert_eq!(det, -1);
    assert!(!is_unipotent(&m));
    let mu = abelianize(&fixtures::upg()).unwrap();
    assert_eq!(mu.rows(), vec![vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]);
    assert!(is_unipotent(&mu));
    let g = classify_growth(&fib()).unwrap();
    assert!(!g.pg);
    let g = classify_growth(&upg()).unwrap();
    assert!(g.pg && g.upg);
    let (_, basis) = pg_basis(&upg()).unwrap();
    assert_eq!(basis.diagonal, vec![1, 1, 1]);
    let swap = find_rtt(&Automorphism::from_standard(vec![w(2, "b"), w(2, "a")]).unwrap(), None, &RttBudget::default()).unwrap();
    let (_, basis) = pg_basis(&swap.rep).unwrap();
    assert!(basis.diagonal.iter().any(|&d| d == 0 || d == -1));
    assert!(!basis.upg);
}

#[test]
fn free_factor_examples() {
    assert!(Complexity::new(vec![5, 3, 3, 1]) > Complexity::new(vec![4, 4, 4, 4, 4]));
    assert!(Complexity::new(vec![4]) > Complexity::new(vec![]));
    let sys = |rank: usize, lists: &[&[&str]]| {
        FreeFactorSystem::from_generators(&lists.iter().map(|l| l.iter().map(|s| w(rank, s)).collect()).collect::<Vec<Vec<Word>>>())
    };
    assert!(meet(&sys(2, &[&["a"]]), &sys(2, &[&["b"]])).is_trivial());
    let m = meet(&sys(3, &[&["a", "b"]]), &sys(3, &[&["b", "c"]]));
    assert!(m.same_as(&sys(3, &[&["b"]])));
    let f = sys(2, &[&["a", "b"]]);
    assert!(f.carries(&w(2, "aba")) && f.carries(&w(2, "ab")));
    let g = sys(3, &[&["ab"]]);
    assert!(g.carries(&w(3, "abab")) && g.carries(&w(3, "ba")) && !g.carries(&w(3, "a")) && !g.carries(&w(3, "aba")));
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use outfn::filtration::classify_matrix;
use outfn::fixtures;
use outfn::free_factor::{meet, FreeFactorSystem};
use outfn::graph::{Graph, MarkedGraph};
use outfn::growth::{abelianize, classify_growth, pg_basis};
use outfn::lamination::{in_groupoid, LamHandle};
use outfn::map::Turn;
use outfn::matrix::Matrix;
use outfn::nielsen::{is_exceptional, split_path};
use outfn::train_track::{find_rtt, improve_rtt, RttBudget};
use outfn::word::{self, Alphabet, DirEdge, Word};
use outfn::{Automorphism, TopRep};

fn letter(rank: usize) -> impl Strategy<Value = DirEdge> {
    (0..rank, any::<bool>()).prop_map(|(i, f)| if f { DirEdge::fwd(i) } else { DirEdge::rev(i) })
}

fn raw_word(rank: usize, max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(letter(rank), 0..=max)
}

fn random_auto(seed: u64, rank: usize) -> Automorphism {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fixtures::random_automorphism(&mut rng, rank, 5, 8)
}

fn rtt(phi: &Automorphism) -> TopRep {
    find_rtt(phi, None, &RttBudget::default()).unwrap().rep
}

fn w(rank: usize, s: &str) -> Word {
    Alphabet::standard(rank).parse(s).unwrap()
}

fn nonneg_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=4).prop_flat_map(|n| prop::collection::vec(0i64..=3, n * n).prop_map(move |v| {
        Matrix::from_rows(&v.chunks(n).map(|r| r.to_vec()).collect::<Vec<_>>())
    }))
}

/// A unipotent lower-triangular automorphism of `F_3` possibly composed with
/// an inversion of a generator.
fn pg_auto(p: i32, q: i32, r: i32, flip: bool) -> Automorphism {
    let pow = |x: DirEdge, k: i32| -> Word {
        let l = if k >= 0 { x } else { x.inv() };
        vec![l; k.unsigned_abs() as usize]
    };
    let a = DirEdge::fwd(0);
    let b = DirEdge::fwd(1);
    let c = DirEdge::fwd(2);
    let mut ib = vec![b];
    ib.extend(pow(a, p));
    let mut ic = vec![c];
    ic.extend(pow(b, q));
    ic.extend(pow(a, r));
    let ia = if flip { vec![a.inv()] } else { vec![a] };
    Automorphism::from_standard(vec![ia, word::reduce(&ib), word::reduce(&ic)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tighten_is_idempotent(p in raw_word(3, 20)) {
        let g = Graph::rose(3);
        let t = g.tighten(&p).unwrap();
        prop_assert_eq!(g.tighten(&t).unwrap(), t.clone());
        prop_assert!(word::is_reduced(&t));
    }

    #[test]
    fn realize_then_express(seed in any::<u64>(), x in raw_word(2, 12)) {
        let f = rtt(&random_auto(seed, 2));
        let g: &MarkedGraph = &f.graph;
        prop_assert_eq!(g.express(&g.realize(&x)), word::reduce(&x));
    }

    #[test]
    fn cyclic_reduction_ignores_rotation(x in raw_word(3, 14), k in 0usize..14) {
        let g = Graph::rose(3);
        let x = word::reduce(&x);
        prop_assume!(!x.is_empty());
        let k = k % x.len();
        let rotated: Word = x[k..].iter().chain(&x[..k]).copied().collect();
        let a = g.cyclic_reduce(&x).unwrap();
        let b = g.cyclic_reduce(&rotated).unwrap();
        prop_assert_eq!(word::least_rotation(a.edges()), word::least_rotation(b.edges()));
    }

    #[test]
    fn images_of_concatenations(seed in any::<u64>(), p in raw_word(2, 10), q in raw_word(2, 10)) {
        let f = TopRep::from_automorphism(&random_auto(seed, 2)).unwrap();
        let (p, q) = (word::reduce(&p), word::reduce(&q));
        let pq = word::concat(&[&p, &q]);
        let joined = word::concat(&[&f.apply(&p), &f.apply(&q)]);
        prop_assert_eq!(f.apply(&pq), f.graph.graph.tighten(&joined).unwrap());
    }

    #[test]
    fn turn_legality_is_stable(seed in any::<u64>(), a in letter(3), b in letter(3)) {
        let f = rtt(&random_auto(seed, 3));
        let n = f.edge_count();
        let (a, b) = (DirEdge::from_raw(a.raw().signum() * (a.index() % n + 1) as i32),
                      DirEdge::from_raw(b.raw().signum() * (b.index() % n + 1) as i32));
        let g = &f.graph.graph;
        prop_assume!(g.init(a) == g.init(b));
        prop_assume!(f.edge_image.iter().all(|p| !p.is_empty()));
        let t = Turn::new(a, b);
        let image = f.turn_image(t);
        prop_assert_eq!(f.is_legal_turn(a, b), !t.is_degenerate() && f.is_legal_turn(image.0, image.1));
        prop_assert_eq!(f.classify_turn(t).legal, f.is_legal_turn(a, b));
    }

    #[test]
    fn collatz_wielandt_bounds(m in nonneg_matrix(), x in prop::collection::vec(0.1f64..10.0, 4)) {
        prop_assume!(m.is_irreducible());
        let p = m.perron(1e-12).unwrap();
        prop_assert!(p.lower <= p.lambda + 1e-9 && p.lambda <= p.upper + 1e-9);
        let n = m.n;
        let ratios: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.get(i, j) as f64 * x[j]).sum::<f64>() / x[i]).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        prop_assert!(lo <= p.lambda + 1e-6 && p.lambda <= hi + 1e-6);
    }

    #[test]
    fn classification_is_transpose_invariant(m in nonneg_matrix()) {
        let a = classify_matrix(&m);
        let b = classify_matrix(&m.transpose());
        prop_assert_eq!(a.class, b.class);
        prop_assert_eq!(a.irreducible, b.irreducible);
        prop_assert_eq!(a.period, b.period);
        match (a.lambda, b.lambda) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-6),
            (x, y) => prop_assert_eq!(x, y),
        }
    }

    #[test]
    fn abelianization_is_a_homomorphism(s in any::<u64>(), t in any::<u64>()) {
        let (phi, psi) = (random_auto(s, 3), random_auto(t, 3));
        let lhs = abelianize(&phi.compose(&psi)).unwrap();
        let rhs = abelianize(&phi).unwrap().checked_mul(&abelianize(&psi).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn carrying_is_conjugation_invariant(k in 0usize..10, c in raw_word(3, 4), x in raw_word(3, 6)) {
        let f = &fixtures::ffs_fixtures()[k];
        let c = word::reduce(&c);
        let ci = word::inverse(&c);
        let inner: Vec<Word> = (0..3).map(|i| word::concat(&[&c, &[DirEdge::fwd(i)], &ci])).map(|v| word::reduce(&v)).collect();
        let g = f.image(&inner);
        prop_assert!(g.same_as(f));
        let conj = word::reduce(&word::concat(&[&c, &x, &ci]));
        prop_assert_eq!(f.carries(&x), g.carries(&conj));
    }

    #[test]
    fn meets_lower_complexity(i in 0usize..10, j in 0usize..10, c in raw_word(3, 3)) {
        let sys = fixtures::ffs_fixtures();
        let c = word::reduce(&c);
        let ci = word::inverse(&c);
        let inner: Vec<Word> = (0..3).map(|t| word::reduce(&word::concat(&[&c, &[DirEdge::fwd(t)], &ci]))).collect();
        let (a, b): (&FreeFactorSystem, FreeFactorSystem) = (&sys[i], sys[j].image(&inner));
        let m = meet(a, &b);
        if !m.same_as(a) {
            prop_assert!(m.complexity() < a.complexity());
        }
        prop_assert!(meet(&m, a).same_as(&m));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relative_train_tracks_respect_their_input(seed in any::<u64>(), rank in 2usize..=3) {
        let phi = random_auto(seed, rank);
        let out = find_rtt(&phi, None, &RttBudget::default()).unwrap();
        prop_assert!(out.rep.outer_class().outer_eq(&phi));
        for wit in &out.witnesses {
            prop_assert!(wit.check().is_ok(), "{:?}", wit.kind);
        }
        let f = &out.rep;
        let layer = f.stratum_of();
        for (e, img) in f.edge_image.iter().enumerate() {
            prop_assert!(img.iter().all(|x| layer[x.index()] <= layer[e]));
        }
        if out.complete {
            prop_assert!(f.check_rtt().ok());
            let g = classify_growth(f).unwrap();
            prop_assert!(g.mod3_agrees);
        }
    }

    #[test]
    fn improvement_keeps_eigenvalues(seed in any::<u64>()) {
        let phi = random_auto(seed, 2);
        let out = find_rtt(&phi, None, &RttBudget::default()).unwrap();
        prop_assume!(out.complete);
        let imp = improve_rtt(&out.rep, &RttBudget::default()).unwrap();
        prop_assert!(imp.eigenvalues_preserved);
        let mut before: Vec<f64> = out.rep.eg_strata().iter().map(|&r| out.rep.strata[r].lambda.unwrap().powi(imp.iterate as i32)).collect();
        let mut after: Vec<f64> = imp.rep.eg_strata().iter().map(|&r| imp.rep.strata[r].lambda.unwrap()).collect();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        prop_assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-6 * x.max(1.0));
        }
        prop_assert!(imp.rep.outer_class().outer_eq(&phi.power(imp.iterate as i64)));
    }

    #[test]
    fn pg_basis_diagonal(p in -3i32..=3, q in -3i32..=3, r in -3i32..=3, flip in any::<bool>()) {
        let phi = pg_auto(p, q, r, flip);
        let f = rtt(&phi);
        let g = classify_growth(&f).unwrap();
        prop_assert!(g.pg);
        prop_assert_eq!(g.upg, !flip);
        let (_, basis) = pg_basis(&f).unwrap();
        prop_assert!(basis.diagonal.iter().all(|d| (-1..=1).contains(d)));
        if g.pg && g.mod3_trivial {
            prop_assert!(g.upg);
        }
    }

    #[test]
    fn exceptional_paths_do_not_split(p in 1usize..=3, q in 1usize..=3, k in 0usize..=5, inverted in any::<bool>(), lower in any::<bool>()) {
        // a ↦ a, b ↦ b a^p, c ↦ c a^q.
        let a = DirEdge::fwd(0);
        let mut ib = vec![DirEdge::fwd(1)];
        ib.extend(vec![a; p]);
        let mut ic = vec![DirEdge::fwd(2)];
        ic.extend(vec![a; q]);
        let f = TopRep::from_automorphism(&Automorphism::from_standard(vec![vec![a], ib, ic]).unwrap()).unwrap();
        let tau = if inverted { a.inv() } else { a };
        let last = if lower { DirEdge::rev(1) } else { DirEdge::rev(2) };
        let mut sigma = vec![DirEdge::fwd(2)];
        sigma.extend(vec![tau; k]);
        sigma.push(last);
        prop_assume!(k > 0 || lower);
        prop_assert!(is_exceptional(&f, &sigma).is_some());
        let s = split_path(&f, &sigma, false, 8).unwrap();
        prop_assert_eq!(s.pieces.len(), 1);
    }

    #[test]
    fn groupoid_is_invariant(exps in prop::collection::vec(-3i32..=3, 1..4)) {
        let lam = LamHandle::topmost(TopRep::from_automorphism(&fixtures::fib()).unwrap()).unwrap();
        let f = &lam.rep;
        let rho = w(2, "baBA");
        let mut sigma = Vec::new();
        for e in exps {
            let piece = if e >= 0 { rho.clone() } else { word::inverse(&rho) };
            for _ in 0..e.unsigned_abs() {
                sigma = word::mul(&sigma, &piece);
            }
        }
        prop_assume!(!sigma.is_empty());
        prop_assert!(in_groupoid(&sigma, &[], Some(&rho)).is_some());
        prop_assert!(in_groupoid(&f.apply(&sigma), &[], Some(&rho)).is_some());
    }
}

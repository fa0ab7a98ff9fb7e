//! Standard examples and seeded random inputs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::automorphism::Automorphism;
use crate::free_factor::FreeFactorSystem;
use crate::graph::{Graph, Path};
use crate::word::{self, Alphabet, DirEdge, Word};

/// `a ↦ b, b ↦ ab`.
pub fn fib() -> Automorphism {
    Automorphism::parse("gens: a b\na -> b\nb -> a b").unwrap()
}

/// `a ↦ a, b ↦ ba, c ↦ cb`.
pub fn upg() -> Automorphism {
    Automorphism::parse("gens: a b c\na -> a\nb -> b a\nc -> c b").unwrap()
}

/// `a ↦ b, b ↦ c, c ↦ ab`.
pub fn rank3_eg() -> Automorphism {
    Automorphism::parse("gens: a b c\na -> b\nb -> c\nc -> a b").unwrap()
}

/// `fib` followed by conjugation by `a`; not a train track on the rose.
pub fn fib_twisted() -> Automorphism {
    Automorphism::parse("gens: a b\na -> a b A\nb -> a a b A").unwrap()
}

pub const NAMES: [&str; 5] = ["fib", "upg", "rank3", "fib-twisted", "identity"];

pub fn named(name: &str) -> Option<Automorphism> {
    match name {
        "fib" => Some(fib()),
        "upg" => Some(upg()),
        "rank3" => Some(rank3_eg()),
        "fib-twisted" => Some(fib_twisted()),
        "identity" => Some(Automorphism::identity(2)),
        _ => None,
    }
}

/// Ten free factor systems of `F_3`.
pub fn ffs_fixtures() -> Vec<FreeFactorSystem> {
    let al = Alphabet::standard(3);
    let sys = |lists: &[&[&str]]| {
        FreeFactorSystem::from_generators(
            &lists
                .iter()
                .map(|l| l.iter().map(|s| al.parse(s).unwrap()).collect())
                .collect::<Vec<Vec<Word>>>(),
        )
    };
    vec![
        sys(&[&["a"]]),
        sys(&[&["b"]]),
        sys(&[&["a", "b"]]),
        sys(&[&["b", "c"]]),
        sys(&[&["a"], &["b"]]),
        sys(&[&["ab", "c"]]),
        sys(&[&["a"], &["c"]]),
        sys(&[&["cbC", "a"]]),
        sys(&[&["ac"]]),
        sys(&[&["a", "b", "c"]]),
    ]
}

/// A product of random elementary Nielsen moves whose images stay within
/// `max_len` letters.
pub fn random_automorphism<R: Rng>(rng: &mut R, rank: usize, max_len: usize, steps: usize) -> Automorphism {
    let mut images: Vec<Word> = (0..rank).map(|i| vec![DirEdge::fwd(i)]).collect();
    for _ in 0..steps {
        let mut next = images.clone();
        let i = rng.gen_range(0..rank);
        match rng.gen_range(0..4) {
            0 if rank > 1 => {
                let mut j = rng.gen_range(0..rank - 1);
                if j >= i {
                    j += 1;
                }
                let y = if rng.gen() { images[j].clone() } else { word::inverse(&images[j]) };
                next[i] = if rng.gen() { word::mul(&images[i], &y) } else { word::mul(&y, &images[i]) };
            }
            1 => next[i] = word::inverse(&images[i]),
            2 if rank > 1 => next.swap(i, (i + 1) % rank),
            _ => {
                let mut perm: Vec<usize> = (0..rank).collect();
                perm.shuffle(rng);
                next = perm.iter().map(|&p| images[p].clone()).collect();
            }
        }
        if next.iter().all(|w| w.len() <= max_len) {
            images = next;
        }
    }
    Automorphism::from_standard(images).expect("products of Nielsen moves are automorphisms")
}

/// `random_automorphism` driven by a seeded generator.
pub fn seeded_automorphism(seed: u64, rank: usize, max_len: usize, steps: usize) -> Automorphism {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    random_automorphism(&mut rng, rank, max_len, steps)
}

/// A random tight path of the given length, or shorter if it gets stuck.
pub fn random_tight_path<R: Rng>(rng: &mut R, g: &Graph, len: usize) -> Path {
    let n = g.edge_count();
    if n == 0 || len == 0 {
        return Vec::new();
    }
    let first = if rng.gen() { DirEdge::fwd(rng.gen_range(0..n)) } else { DirEdge::rev(rng.gen_range(0..n)) };
    let mut p = vec![first];
    while p.len() < len {
        let last = *p.last().unwrap();
        let choices: Vec<DirEdge> = g.star(g.term(last)).into_iter().filter(|&e| e != last.inv()).collect();
        let Some(&e) = choices.choose(rng) else { break };
        p.push(e);
    }
    p
}

/// All cyclically reduced words of length `1..=max_len`, one per conjugacy
/// class.
pub fn circuits_up_to(rank: usize, max_len: usize) -> Vec<Word> {
    let mut out = std::collections::BTreeSet::new();
    let mut frontier: Vec<Word> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for e in DirEdge::all(rank) {
                if w.last() == Some(&e.inv()) {
                    continue;
                }
                let mut v = w.clone();
                v.push(e);
                if v[0] != e.inv() {
                    out.insert(word::least_rotation(&v));
                }
                next.push(v);
            }
        }
        frontier = next;
    }
    out.into_iter().collect()
}

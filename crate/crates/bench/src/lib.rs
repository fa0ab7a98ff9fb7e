//! Inputs shared by the criterion benches.

use outfn::fixtures;
use outfn::word::{Alphabet, Word};
use outfn::{Automorphism, TopRep};

pub fn rose(phi: &Automorphism) -> TopRep {
    TopRep::from_automorphism(phi).expect("fixture is an automorphism")
}

pub fn word(rank: usize, s: &str) -> Word {
    Alphabet::standard(rank).parse(s).expect("valid word")
}

/// Named fixtures run by every bench group.
pub fn named() -> Vec<(&'static str, Automorphism)> {
    vec![("fib", fixtures::fib()), ("rank3", fixtures::rank3_eg()), ("upg", fixtures::upg()), ("fib-twisted", fixtures::fib_twisted())]
}

pub fn seeded(n: u64) -> Vec<Automorphism> {
    (0..n).map(|s| fixtures::seeded_automorphism(s, 3, 4, 6)).collect()
}

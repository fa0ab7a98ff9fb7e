use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use outfn::lamination::generic_leaf_window;
use outfn::nielsen::{compute_pr, upg_split, PrBudget};
use outfn::train_track::{find_rtt, RttBudget};
use outfn_bench::{named, rose, seeded, word};

fn train_tracks(c: &mut Criterion) {
    let mut g = c.benchmark_group("find_rtt");
    for (name, phi) in named() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &phi, |b, phi| b.iter(|| find_rtt(black_box(phi), None, &RttBudget::default())));
    }
    let random = seeded(8);
    g.bench_function("seeded-8", |b| {
        b.iter(|| random.iter().filter(|phi| find_rtt(phi, None, &RttBudget::default()).is_ok()).count())
    });
    g.finish();
}

fn nielsen(c: &mut Criterion) {
    let mut g = c.benchmark_group("compute_pr");
    for (name, phi) in named() {
        let Ok(out) = find_rtt(&phi, None, &RttBudget::default()) else { continue };
        let f = out.rep;
        let top = f.strata.len() - 1;
        g.bench_function(name, |b| b.iter(|| compute_pr(black_box(&f), top, &PrBudget::default())));
    }
    g.finish();
    let f = rose(&outfn::fixtures::upg());
    let sigma = word(3, "cBAbaBcA");
    c.bench_function("upg_split", |b| b.iter(|| upg_split(black_box(&f), &sigma, 40, 10)));
}

fn leaves(c: &mut Criterion) {
    let mut g = c.benchmark_group("generic_leaf_window");
    for (name, phi) in [("fib", outfn::fixtures::fib()), ("rank3", outfn::fixtures::rank3_eg())] {
        let f = rose(&phi);
        for target in [100, 1000] {
            g.bench_with_input(BenchmarkId::new(name, target), &target, |b, &t| b.iter(|| generic_leaf_window(black_box(&f), 0, t)));
        }
    }
    g.finish();
}

criterion_group!(benches, train_tracks, nielsen, leaves);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nlhawkes::estimate::{estimate_sigma2, TruncationPolicy};
use nlhawkes::fclt::uniform_grid;
use nlhawkes::lil::build_eta;
use nlhawkes::model::History;
use nlhawkes::simulate::simulate;
use nlhawkes_bench::{linear_counts, linear_lil_sequence, linear_model, power_law_model};
use std::hint::black_box;

fn thinning(c: &mut Criterion) {
    let mut group = c.benchmark_group("thinning");
    for (name, model) in [("exponential", linear_model()), ("power-law", power_law_model())] {
        let horizon = 1000.0;
        group.bench_function(BenchmarkId::new(name, horizon), |b| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                simulate(&model, &History::empty(), horizon, seed).unwrap()
            })
        });
    }
    group.finish();
}

fn sigma2(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_sigma2");
    for horizon in [10_000, 100_000] {
        let counts = linear_counts(horizon, 4);
        let policy = TruncationPolicy::for_model(&linear_model());
        group.throughput(Throughput::Elements(4 * horizon as u64));
        group.bench_with_input(BenchmarkId::from_parameter(horizon), &counts, |b, counts| {
            b.iter(|| estimate_sigma2(black_box(counts), policy).unwrap())
        });
    }
    group.finish();
}

fn eta(c: &mut Criterion) {
    let seq = linear_lil_sequence(100_000);
    let grid = uniform_grid(101);
    c.bench_function("build_eta/100000", |b| b.iter(|| build_eta(&seq, black_box(100_000), &grid).unwrap()));
}

criterion_group!(benches, thinning, sigma2, eta);
criterion_main!(benches);

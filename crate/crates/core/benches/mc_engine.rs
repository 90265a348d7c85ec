//! Block engine (rayon when the `parallel` feature is on) against the same
//! blocks run one after another on the calling thread.
//!
//! Run `cargo bench -p finpop` and `cargo bench -p finpop --no-default-features`
//! to compare the two builds of the engine as well.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finpop::sampling::{block_rng, block_sizes, mc_tail, EventEvaluator, Outcome, Sampler, Statistic};
use finpop::{Design, Population};

const REPS: u64 = 20_000;
const SEED: u64 = 1;

fn sequential_hits(pop: &Population, d: &Design, stat: Statistic, workers: usize) -> u64 {
    let eval = EventEvaluator::new(pop, d, stat).unwrap();
    let values = pop.values();
    let mut buf = vec![0.0; d.n];
    let mut hits = 0;
    for (j, &size) in block_sizes(REPS, workers).iter().enumerate() {
        let mut rng = block_rng(SEED, j);
        let mut sampler = Sampler::new(d.big_n, d.n).unwrap();
        for _ in 0..size {
            for (slot, &i) in buf.iter_mut().zip(sampler.draw(&mut rng)) {
                *slot = values[i];
            }
            hits += u64::from(eval.eval(&buf) == Outcome::Hit);
        }
    }
    hits
}

fn engine_vs_sequential(c: &mut Criterion) {
    let pop = Population::power_family(1000, 1.0).unwrap();
    let d = Design::new(1000, 250).unwrap();
    let stat = Statistic::T { x: 2.0 };

    let mut group = c.benchmark_group("t_tail_n250");
    group.sample_size(10);
    for workers in [1usize, 4, 8] {
        let engine = mc_tail(&pop, &d, stat, REPS, SEED, workers).unwrap();
        let seq = sequential_hits(&pop, &d, stat, workers);
        assert_eq!((engine.p_hat * REPS as f64).round() as u64, seq);

        group.bench_with_input(BenchmarkId::new("engine", workers), &workers, |b, &w| {
            b.iter(|| mc_tail(&pop, &d, stat, black_box(REPS), SEED, w).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", workers), &workers, |b, &w| {
            b.iter(|| sequential_hits(&pop, &d, stat, black_box(w)))
        });
    }
    group.finish();
}

criterion_group!(benches, engine_vs_sequential);
criterion_main!(benches);

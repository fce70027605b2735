use std::hint::black_box;
use std::time::Duration;

use cliquedep::bipartite::{canonical_form, restore};
use cliquedep::oracle::{enumerate_decomposable, random_state};
use cliquedep::par::ExecMode;
use cliquedep::sampler::{
    acceptance, kernel_row, proposal_prob, run_batched, step_outcome, ChainConfig, ChainState, CheckProfile,
};
use cliquedep::RepresentationState;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn worked() -> RepresentationState {
    restore(include_str!("../fixtures/worked.state")).unwrap()
}

fn config(exec: ExecMode) -> ChainConfig {
    ChainConfig {
        check: CheckProfile::Fast,
        trace_capacity: 0,
        exec,
        ..Default::default()
    }
}

/// A fixed non-trivial proposal x → y from the worked example.
fn proposed_pair() -> (RepresentationState, RepresentationState) {
    let x = worked();
    let cfg = config(ExecMode::Sequential);
    for step in 0.. {
        if let Some(y) = step_outcome(&x, 7, step, &cfg).unwrap().next {
            if canonical_form(&y) != canonical_form(&x) {
                return (x, y);
            }
        }
    }
    unreachable!()
}

fn proposals(c: &mut Criterion) {
    let (x, y) = proposed_pair();
    let cy = canonical_form(&y);
    let mut group = c.benchmark_group("proposal");
    for (name, mode) in MODES {
        let cfg = config(mode);
        group.bench_function(BenchmarkId::new("reverse_prob", name), |b| {
            b.iter(|| proposal_prob(black_box(&y), &canonical_form(&x), &cfg.affinity, mode).unwrap())
        });
        group.bench_function(BenchmarkId::new("forward_prob", name), |b| {
            b.iter(|| proposal_prob(black_box(&x), &cy, &cfg.affinity, mode).unwrap())
        });
        group.bench_function(BenchmarkId::new("acceptance", name), |b| {
            b.iter(|| acceptance(black_box(&x), black_box(&y), &cfg).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let st = random_state(5, 40, 3).unwrap();
    let mut group = c.benchmark_group("kernel_row");
    for (name, mode) in MODES {
        let cfg = config(mode);
        group.bench_function(name, |b| b.iter(|| kernel_row(black_box(&st), &cfg).unwrap()));
    }
    group.finish();
}

fn census(c: &mut Criterion) {
    let mut group = c.benchmark_group("census_n5");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| enumerate_decomposable(black_box(5), mode).unwrap()));
    }
    group.finish();
}

fn chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("chain_200_steps");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = config(mode);
        for window in [2usize, 8] {
            group.bench_function(BenchmarkId::new(name, format!("window{window}")), |b| {
                b.iter(|| {
                    let mut chain = ChainState::new(worked(), 1, 0);
                    run_batched(&mut chain, &cfg, 200, window).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().measurement_time(Duration::from_secs(3)).warm_up_time(Duration::from_secs(1));
    targets = proposals, kernel, census, chain
}
criterion_main!(benches);

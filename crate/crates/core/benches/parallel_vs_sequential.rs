//! Parallel core vs. a single worker on the desk preset.
//!
//! With the default `parallel` feature each workload is measured on the global
//! rayon pool and inside a one-thread pool. Built with `--no-default-features`
//! only the plain sequential path exists and is measured alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use szc::experiment;
use szc::ir::IrGrid;
use szc::metrics;
use szc::room::{self, Preset};
use szc::sicer::{self, Antialias};
use szc::vast::{self, Design, DesignConfig};

struct Fixture {
    preset: Preset,
    bright: IrGrid,
    dark: IrGrid,
    cfg: DesignConfig,
}

fn fixture() -> Fixture {
    let preset = room::desk_preset();
    let (bright, dark) = room::simulate_array(&preset.room, &preset.array).unwrap();
    let cfg = DesignConfig::new(preset.filter_len_j, preset.mu, 64, preset.virtual_source_index());
    Fixture { preset, bright, dark, cfg }
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("parallel", None), ("one_thread", Some(single))]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn run<R>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<R>(_: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn benches(c: &mut Criterion) {
    let fx = fixture();
    let shifted = fx.preset.room.with_sound_speed(353.0);
    let design = Design::new(&fx.bright, &fx.dark, &fx.cfg).unwrap();
    let ranks = experiment::rank_sweep(design.lj(), 100);
    let bank = design.filter(64).unwrap();

    let mut g = c.benchmark_group("desk");
    g.sample_size(10);
    for (name, pool) in &modes() {
        g.bench_function(BenchmarkId::new("simulate", name), |b| {
            b.iter(|| run(pool, || room::simulate_array(black_box(&shifted), &fx.preset.array).unwrap()))
        });
        g.bench_function(BenchmarkId::new("sicer_grid", name), |b| {
            b.iter(|| run(pool, || sicer::sicer_grid(black_box(&fx.bright), 353.0, Antialias::Auto).unwrap()))
        });
        g.bench_function(BenchmarkId::new("correlations", name), |b| {
            b.iter(|| run(pool, || vast::correlations(black_box(&fx.bright), &fx.dark, &fx.cfg).unwrap()))
        });
        g.bench_function(BenchmarkId::new("rank_sweep", name), |b| {
            b.iter(|| run(pool, || design.filters(black_box(&ranks)).unwrap()))
        });
        g.bench_function(BenchmarkId::new("evaluate", name), |b| {
            b.iter(|| run(pool, || metrics::evaluate(&fx.bright, &fx.dark, black_box(&bank), None, None).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use pyrofront_bench::{canonical, greedy_game, options, tracker};
use pyrofront_core::runner::run;
use pyrofront_core::{level_cells, lip, step, LatticeKind, LevelSpec, ProtectionOrder, StrategySpec};

fn engine_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine_step");
    for r in [30i64, 120] {
        let scenario = canonical(2, 2, r);
        let game = greedy_game(&scenario, 20);
        let empty = ProtectionOrder::empty();
        group.bench_with_input(BenchmarkId::from_parameter(r), &game, |b, game| {
            b.iter(|| step(game, &empty, &scenario.config).expect("empty order"));
        });
    }
    group.finish();
}

fn fronts_advance(c: &mut Criterion) {
    let scenario = canonical(2, 2, 60);
    let before = greedy_game(&scenario, 10);
    let after = greedy_game(&scenario, 11);
    let mut base = tracker(&scenario, &pyrofront_core::new_game(&scenario.config).unwrap());
    for t in 1..=10 {
        base.advance(&greedy_game(&scenario, t)).unwrap();
    }
    assert_eq!(base.t(), before.t());
    c.bench_function("fronts_advance", |b| {
        b.iter_batched(|| base.clone(), |mut tr| tr.advance(&after).unwrap(), BatchSize::SmallInput);
    });
}

fn monitored_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_40_steps");
    group.sample_size(10);
    let scenario = canonical(2, 2, 40);
    let strategy = StrategySpec::new("random").with_param("seed", 1);
    for monitor in [false, true] {
        group.bench_with_input(BenchmarkId::new("monitor", monitor), &monitor, |b, &m| {
            b.iter(|| run(&scenario, &strategy, &options(40, m)).unwrap());
        });
    }
    group.finish();
}

fn lattice(c: &mut Criterion) {
    let v: Vec<i64> = (0..64).map(|k| (k * 37 % 11) as i64).collect();
    c.bench_function("lip_64", |b| b.iter(|| lip(&v)));
    let kind = LatticeKind::new(1, 1).unwrap();
    c.bench_function("level_cells_1000", |b| b.iter(|| level_cells(LevelSpec::new(0, 500, 500, 500, 1), kind)));
}

criterion_group!(benches, engine_step, fronts_advance, monitored_run, lattice);
criterion_main!(benches);

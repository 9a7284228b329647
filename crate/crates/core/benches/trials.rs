use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use teamfp_core::dynamics::{DynamicsConfig, OpponentMode};
use teamfp_core::game::TeamStructure;
use teamfp_core::gamegen::{random_zsptg, DEFAULT_RANGE};
use teamfp_core::trials::{run_trials, TrialPlan};

fn trials(c: &mut Criterion) {
    let game = random_zsptg(&TeamStructure::uniform(2, 4, 2).unwrap(), DEFAULT_RANGE, false, 0).unwrap();
    let config = DynamicsConfig { iterations: 5_000, stride: 500, ..Default::default() };
    let mut group = c.benchmark_group("team_fp_trials");
    group.sample_size(10);
    for n in [4usize, 16] {
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| run_trials(&game, &config, &OpponentMode::SelfPlay, TrialPlan::sequential(n)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| run_trials(&game, &config, &OpponentMode::SelfPlay, TrialPlan::new(n)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);

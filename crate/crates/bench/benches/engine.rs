use std::hint::black_box;

use banditbias::bounds::{bound_bregman_stopping, c_r};
use banditbias::policies::{bundle, ChooserSpec, RewinderSpec, SamplerSpec, StopperSpec};
use banditbias::protocol::run_episode;
use banditbias::{ArmSpec, Family, LogPartition, PsiFamily};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn episodes(c: &mut Criterion) {
    let arms = vec![
        ArmSpec::new(Family::Gaussian { mean: 0.0, sd: 1.0 }).unwrap(),
        ArmSpec::new(Family::Gaussian { mean: 0.2, sd: 1.0 }).unwrap(),
    ];
    let mut group = c.benchmark_group("run_episode");
    for t in [100u64, 10_000] {
        let b = bundle(
            &SamplerSpec::EpsilonGreedy { epsilon: 0.1 },
            &StopperSpec::Fixed { t },
            &ChooserSpec::BestEmpirical,
            &RewinderSpec::ArgmaxMean,
            10,
            t,
            1.0,
        )
        .unwrap();
        let mut seed = 0u64;
        group.bench_with_input(BenchmarkId::new("epsilon-greedy", t), &b, |bench, b| {
            bench.iter(|| {
                seed += 1;
                run_episode(&arms, b, seed).unwrap()
            })
        });
    }
    group.finish();
}

fn conjugates(c: &mut Criterion) {
    let families = [
        ("sub-gaussian", PsiFamily::SubGaussian { sigma: 1.0 }),
        ("bernstein", PsiFamily::Bernstein { sigma: 1.0, b: 0.5 }),
        ("bernoulli", PsiFamily::Bernoulli { mu: 0.3 }),
        (
            "exp-family",
            PsiFamily::ExpFamily {
                partition: LogPartition::Bernoulli,
                theta: 0.0,
            },
        ),
    ];
    let mut group = c.benchmark_group("conjugate");
    for (name, f) in &families {
        group.bench_function(*name, |b| b.iter(|| f.conjugate(black_box(0.4)).unwrap()));
    }
    group.finish();
}

fn constants(c: &mut Criterion) {
    c.bench_function("c_r", |b| b.iter(|| c_r(black_box(3.0)).unwrap()));
    let counts: Vec<f64> = (1..=1_000).map(|i| 10.0 + i as f64).collect();
    c.bench_function("bound_bregman_stopping", |b| {
        b.iter(|| {
            bound_bregman_stopping(
                black_box(500.0),
                |r| (counts.iter().map(|n| n.powf(-r)).sum::<f64>() / counts.len() as f64).powf(-1.0 / r),
                10.0,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, episodes, conjugates, constants);
criterion_main!(benches);

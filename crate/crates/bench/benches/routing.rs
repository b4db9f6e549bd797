use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use obroute::eval::demand::{demands, DemandKind};
use obroute::eval::opt::{opt_congestion, OptConfig};
use obroute::generators::{hypercube, random_regular};
use obroute::packet::{route_permutation, PermutationDemand, SimulationConfig};
use obroute::paths::build_sample_space;
use obroute::splittable::{compute_policy, PolicyOptions};
use obroute::{lazify_if_needed, SeedTree};

fn splittable_policy(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_policy");
    group.sample_size(10);
    for n in [8usize, 16, 24] {
        let g = random_regular(n, 4, 1).unwrap();
        let (walk, profile) = lazify_if_needed(&g).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                compute_policy(black_box(&walk), profile.k, PolicyOptions::default()).unwrap()
            })
        });
    }
    group.finish();
}

fn sample_space(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_sample_space");
    group.sample_size(10);
    for (name, g) in [
        ("Q4", hypercube(4).unwrap()),
        ("RR(16,4)", random_regular(16, 4, 1).unwrap()),
    ] {
        let (walk, profile) = lazify_if_needed(&g).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| build_sample_space(&walk, &profile, black_box(7)).unwrap())
        });
    }
    group.finish();
}

fn packet_simulation(c: &mut Criterion) {
    let g = hypercube(4).unwrap();
    let sigma = PermutationDemand::random(16, &SeedTree::new(3), 0);
    let config = SimulationConfig {
        per_direction: false,
        record_trace: false,
    };
    c.bench_function("route_permutation/Q4", |b| {
        b.iter(|| route_permutation(&g, black_box(&sigma), 5, config).unwrap())
    });
}

fn opt_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("opt_congestion");
    group.sample_size(10);
    for n in [10usize, 16] {
        let g = random_regular(n, 3, 2).unwrap();
        let d = demands(
            &g,
            &DemandKind::Random {
                seed: 1,
                density: 0.5,
            },
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| opt_congestion(&g, black_box(&d), &OptConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    splittable_policy,
    sample_space,
    packet_simulation,
    opt_lp
);
criterion_main!(benches);

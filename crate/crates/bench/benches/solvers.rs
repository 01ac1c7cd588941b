use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nfpe_bench::{dirac_run, gaussian, porous_medium};
use nfpe_core::particles::{self, SdeConfig};
use nfpe_core::resolvent::solve_resolvent;
use nfpe_core::semigroup::{evolve, EvolveConfig};
use nfpe_core::{GridSpec, ResolventConfig};

fn resolvent(c: &mut Criterion) {
    let mut group = c.benchmark_group("resolvent");
    let profile = porous_medium();
    for (d, n) in [(1, 1024), (2, 64), (3, 24)] {
        let grid = GridSpec::new(d, 3.0, n).unwrap();
        let f = gaussian(grid, 0.3);
        let cfg = ResolventConfig::with_lambda(0.01);
        group.bench_with_input(BenchmarkId::new("porous_medium", format!("{d}d_n{n}")), &f, |b, f| {
            b.iter(|| solve_resolvent(f, &profile, &cfg).unwrap())
        });
    }
    group.finish();
}

fn semigroup(c: &mut Criterion) {
    let grid = GridSpec::new(1, 4.0, 1024).unwrap();
    let u0 = gaussian(grid, 0.2);
    let profile = porous_medium();
    let cfg = EvolveConfig::new(0.1, 0.005, vec![0.1]);
    c.bench_function("evolve/porous_medium_1d_n1024_20_steps", |b| b.iter(|| evolve(&u0, &profile, &cfg).unwrap()));
}

fn particle_simulation(c: &mut Criterion) {
    let (mu, traj) = dirac_run(256, 0.1, 0.005);
    let profile = porous_medium();
    let sde = SdeConfig { dt: 0.005, t_final: 0.1, compare_times: vec![0.1], ..Default::default() };
    c.bench_function("particles/porous_medium_1d_10k", |b| {
        b.iter(|| particles::simulate(&mu, &traj, &profile, &sde, 10_000, 3).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = resolvent, semigroup, particle_simulation
}
criterion_main!(benches);

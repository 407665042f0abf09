//! Default thread pool versus a single-thread pool on the parallel hot paths.
//!
//! With `--no-default-features` both variants run the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quantumness::extremal::{find_king, thomson};
use quantumness::husimi::{PlaneGrid, SphereGrid};
use quantumness::measures::{wehrl_cv, wehrl_spin_quadrature};
use quantumness::states::{make_cat, random_spin_state, CatPhase, DEFAULT_CUTOFF_TOL};
use quantumness::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", single), ("parallel", default)]
}

fn quadrature(c: &mut Criterion) {
    let spin = random_spin_state(40, &mut ChaCha8Rng::seed_from_u64(1));
    let sphere = SphereGrid::for_spin(40).doubled();
    let cat = make_cat(Complex64::new(3.0, 1.0), CatPhase::Even, DEFAULT_CUTOFF_TOL).unwrap();
    let plane = PlaneGrid::for_state(&cat);
    let mut group = c.benchmark_group("quadrature");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("wehrl_spin_2S40", name), |b| {
            b.iter(|| pool.install(|| wehrl_spin_quadrature(&spin, &sphere).unwrap()))
        });
        group.bench_function(BenchmarkId::new("wehrl_cv_cat", name), |b| b.iter(|| pool.install(|| wehrl_cv(&cat, &plane).unwrap())));
    }
    group.finish();
}

fn restarts(c: &mut Criterion) {
    let mut group = c.benchmark_group("restarts");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("king_6_3", name), |b| b.iter(|| pool.install(|| find_king(6, 3, 16, 5).unwrap())));
        group.bench_function(BenchmarkId::new("thomson_12", name), |b| b.iter(|| pool.install(|| thomson(12, 1.0, 16, 5).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, quadrature, restarts);
criterion_main!(benches);

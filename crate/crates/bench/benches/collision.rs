use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fgboltz::gpc::{build_s_tensor, gpc_collision_rhs, GpcField};
use fgboltz::spectral::random_hermitian;
use fgboltz::{collision_rhs, precompute_weights, Domain, KernelSpec, QuadratureRule, RandomFactor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(n: usize) -> (Domain, KernelSpec, QuadratureRule) {
    let domain = Domain::from_support(2, 7.3, None, n).unwrap();
    let kernel = KernelSpec::maxwell(2, domain.radius);
    let quad = QuadratureRule::for_domain(&domain, 4).unwrap();
    (domain, kernel, quad)
}

fn weights(c: &mut Criterion) {
    let mut g = c.benchmark_group("precompute_weights");
    g.sample_size(10);
    for n in [4, 8, 12] {
        let (domain, kernel, quad) = setup(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| precompute_weights(&kernel, &domain, &quad).unwrap())
        });
    }
    g.finish();
}

fn rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("collision_rhs");
    for n in [8, 12, 16] {
        let (domain, kernel, quad) = setup(n);
        let table = precompute_weights(&kernel, &domain, &quad).unwrap();
        let f = random_hermitian(domain, &mut ChaCha8Rng::seed_from_u64(1), 0.2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| collision_rhs(&table, &f).unwrap())
        });
    }
    g.finish();
}

fn gpc_rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("gpc_collision_rhs");
    g.sample_size(10);
    let (domain, kernel, quad) = setup(8);
    let table = precompute_weights(&kernel, &domain, &quad).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in [2, 4] {
        let s = build_s_tensor(&RandomFactor::Affine { eps: 0.5 }, k, &quad).unwrap();
        let modes = (0..=k).map(|_| random_hermitian(domain, &mut rng, 0.2)).collect();
        let f = GpcField::new(modes).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| gpc_collision_rhs(&table, &s, &f).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, weights, rhs, gpc_rhs);
criterion_main!(benches);

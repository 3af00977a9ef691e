use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use free_corona::corona::fixture;
use free_corona::haar::{twirl_mc_with, BlockOperator};
use free_corona::linalg::complex_gaussian;
use free_corona::ncdomain::{sample_domain_with, DomainSpec, SamplerConfig};
use free_corona::par::Exec;
use free_corona::realize::{realize, verify_realization, RealizeConfig, VerifyConfig};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_twirl(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (p, q, n) = (3, 3, 5);
    let w = BlockOperator::new(complex_gaussian(p * n, q * n, &mut rng), p, q, n).unwrap();
    let mut g = c.benchmark_group("twirl_mc_10k");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| twirl_mc_with(black_box(&w), 10_000, 7, None, exec))
        });
    }
    g.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let spec = DomainSpec::polydisc(2);
    let mut g = c.benchmark_group("sample_domain_200");
    for (name, exec) in STRATEGIES {
        let cfg = SamplerConfig { exec, ..SamplerConfig::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_domain_with(black_box(&spec), 4, 200, 3, &cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_verify(c: &mut Criterion) {
    let fx = fixture("bidisc-ab", 16).unwrap();
    let points: Vec<_> = [1, 1, 2, 2, 3, 3]
        .iter()
        .enumerate()
        .map(|(i, &n)| sample_domain_with(&fx.spec, n, 1, 10 + i as u64, &SamplerConfig::default()).unwrap().remove(0))
        .collect();
    let holdout: Vec<_> = (0..50)
        .map(|i| {
            sample_domain_with(&fx.spec, 1 + i % 4, 1, 100 + i as u64, &SamplerConfig::default()).unwrap().remove(0)
        })
        .collect();
    let cert = fx.cert.certificate(&points);
    let real = realize(&fx.spec, &fx.a, &fx.b, &cert, &points, &RealizeConfig::default()).unwrap();
    let f = real.function();
    let mut g = c.benchmark_group("verify_50_probes");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        let cfg = VerifyConfig { seed: 0, exec };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_realization(black_box(&f), &holdout, &fx.a, &fx.b, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_twirl, bench_sampling, bench_verify);
criterion_main!(benches);

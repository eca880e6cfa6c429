use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use decopath::experiments::FieldSpec;
use decopath::fastslow::{dynamics_endpoints, limit_endpoints, Driver, DriverSpec, EnsembleConfig, LimitKind};
use decopath::par::Exec;
use decopath::SolveConfig;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn pm(v0: Vec<f64>) -> Driver {
    Driver::new(&DriverSpec::Pm { gamma: 2.0 / 3.0, v0 }).unwrap()
}

fn ensemble(n: usize, m: usize) -> EnsembleConfig {
    EnsembleConfig {
        n,
        m,
        seed: 1,
        burn_in: 1000,
        xi: vec![0.0],
        k: 200,
    }
}

fn dynamics(c: &mut Criterion) {
    let driver = pm(vec![1.0]);
    let vf = FieldSpec::Identity { dim: 1 }.build().unwrap();
    let mut g = c.benchmark_group("dynamics_endpoints");
    g.sample_size(10);
    for n in [1_000, 10_000] {
        let cfg = ensemble(n, 64);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &cfg, |b, cfg| {
                b.iter(|| black_box(dynamics_endpoints(&driver, &vf, cfg, exec).unwrap()))
            });
        }
    }
    g.finish();
}

fn limit(c: &mut Criterion) {
    let solve = SolveConfig::default();
    let mut g = c.benchmark_group("limit_endpoints");
    g.sample_size(10);
    for (field, spec, v0) in [
        ("identity", FieldSpec::Identity { dim: 1 }, vec![1.0]),
        ("nonmarcus", FieldSpec::Nonmarcus, vec![1.0, -0.5]),
    ] {
        let law = pm(v0).limit(200).unwrap();
        let vf = spec.build().unwrap();
        let cfg = EnsembleConfig {
            xi: vec![0.0; vf.state_dim()],
            ..ensemble(0, 64)
        };
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, field), &cfg, |b, cfg| {
                b.iter(|| black_box(limit_endpoints(&law, &vf, cfg, LimitKind::Decorated, &solve, exec).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, dynamics, limit);
criterion_main!(benches);

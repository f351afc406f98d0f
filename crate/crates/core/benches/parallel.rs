use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::Rng;

use lipdiff_core::func::{catalog_get, check_inverse_pair, InverseCheckOptions};
use lipdiff_core::karcher::{karcher_mean_batch, SpdMatrix};
use lipdiff_core::par::Exec;
use lipdiff_core::regularity::{lipschitz_estimate, LipschitzOptions};
use lipdiff_core::rng;

const MODES: [Exec; 2] = [Exec::Sequential, Exec::Parallel];

fn random_spd<R: Rng>(r: &mut R, d: usize) -> SpdMatrix {
    let b = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    SpdMatrix::new(&b * b.transpose() + DMatrix::identity(d, d) * 0.5).unwrap()
}

fn inverse_check(c: &mut Criterion) {
    let pair = catalog_get("shear").unwrap().into_pair().unwrap();
    let mut group = c.benchmark_group("inverse_check");
    for exec in MODES {
        let opts = InverseCheckOptions { samples: 20_000, exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| check_inverse_pair(&pair, &opts).unwrap())
        });
    }
    group.finish();
}

fn lipschitz(c: &mut Criterion) {
    let fixed = vec![SpdMatrix::identity(3), SpdMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap()];
    let f = catalog_get_with_fixed(fixed);
    let y = SpdMatrix::identity(3).to_coords();
    let mut group = c.benchmark_group("lipschitz_karcher_f");
    group.sample_size(10);
    for exec in MODES {
        let opts = LipschitzOptions { pairs_per_radius: 100, exec, ..LipschitzOptions::new(vec![1e-2, 1e-4]) };
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| lipschitz_estimate(&f, &y, &opts).unwrap())
        });
    }
    group.finish();
}

fn catalog_get_with_fixed(fixed: Vec<SpdMatrix>) -> lipdiff_core::func::EvaluableMap {
    use lipdiff_core::func::{catalog_get_with, CatalogParams, Side};
    let params = CatalogParams { fixed: Some(fixed), ..Default::default() };
    catalog_get_with("karcher-pair", &params).unwrap().into_map(Side::F)
}

fn karcher_batch(c: &mut Criterion) {
    let mut r = rng::rng(7);
    let problems: Vec<Vec<SpdMatrix>> = (0..50)
        .map(|i| {
            let d = 2 + i % 5;
            vec![random_spd(&mut r, d), random_spd(&mut r, d)]
        })
        .collect();
    let mut group = c.benchmark_group("karcher_mean_batch");
    for exec in MODES {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| karcher_mean_batch(&problems, 1e-12, 500, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, inverse_check, lipschitz, karcher_batch);
criterion_main!(benches);

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use homog_core::kp_model::{wholeline_band_function, WholeLineKP};
use homog_core::mmatrix::m1;
use homog_core::nystrom::estimate_norms;
use homog_core::spectra::{find_roots, DispersionRelation, RelationKind};
use homog_core::{make_cell, spectral_point, Quasimomentum};
use num_complex::Complex64;

fn kernels(c: &mut Criterion) {
    let cell = make_cell(1.0, 1.0, 0.25, 0.5, 0.0625).unwrap();
    let q = Quasimomentum::from_tau(PI / 2.0, 0.0625);
    let sp = spectral_point(Complex64::new(-1.0, 0.0));

    c.bench_function("m1", |b| b.iter(|| m1(black_box(&sp), &q, &cell).unwrap()));
    c.bench_function("limit_roots_k20", |b| {
        let rel = DispersionRelation::new(RelationKind::LimitCc, cell, 1.0);
        b.iter(|| find_roots(black_box(&rel), (0.1, 20.0)).unwrap())
    });
    c.bench_function("fibre_roots_k20", |b| {
        let rel = DispersionRelation::new(RelationKind::FibreDetM1, cell, 1.0);
        b.iter(|| find_roots(black_box(&rel), (0.1, 20.0)).unwrap())
    });
    c.bench_function("wholeline_bands_z100", |b| {
        let kp = WholeLineKP::from_cell(&cell);
        b.iter(|| wholeline_band_function(black_box(&kp), (0.0, 100.0)).unwrap())
    });
    let mut g = c.benchmark_group("norms");
    g.sample_size(10);
    for m in [16, 48] {
        g.bench_function(format!("estimate_norms_m{m}"), |b| b.iter(|| estimate_norms(black_box(&sp), &q, &cell, m).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);

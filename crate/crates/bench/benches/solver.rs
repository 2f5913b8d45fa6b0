use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use awsim_core::acquisition::Interrogator;
use awsim_core::dataset::{regenerate_record, DatasetSpec, Range, Ranges};
use awsim_core::grid::{laplacian_into, Grid, ScalarField};
use awsim_core::media::{constant_medium, MediumSpec, Preset};
use awsim_core::solver::{Boundary, SimConfig, Solver, WaveState};
use awsim_core::source::{SourceSpec, Wavelet};

fn bench_laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian");
    for n in [128usize, 256, 512] {
        let g = Grid::with_spacing(&[n, n], 1.0).unwrap();
        let u = ScalarField::from_fn(g, |p| (0.05 * p[0]).sin() * (0.03 * p[1]).cos());
        let mut out = vec![0.0; g.len()];
        group.bench_with_input(BenchmarkId::new("2d", n), &n, |b, _| {
            b.iter(|| laplacian_into(&g, black_box(u.values()), &mut out))
        });
    }
    let g = Grid::with_spacing(&[64, 64, 64], 1.0).unwrap();
    let u = ScalarField::from_fn(g, |p| p[0] * p[1] - p[2]);
    let mut out = vec![0.0; g.len()];
    group.bench_function("3d/64", |b| b.iter(|| laplacian_into(&g, black_box(u.values()), &mut out)));
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let g = Grid::with_spacing(&[256, 256], 5.0).unwrap();
    let medium = constant_medium(&g, 2000.0).unwrap();
    let source = SourceSpec {
        epicenter: vec![0.0, 0.0],
        amplitude: 1.0,
        kernel_radius: 10.0,
        wavelet: Wavelet::ricker(10.0),
    };
    let cfg = SimConfig::new(1.0);
    let mut solver = Solver::new(&g, &medium, &source, &cfg).unwrap();
    let mut state = WaveState::quiescent(g);
    c.bench_function("step/256x256 sponge", |b| b.iter(|| solver.step(&mut state).unwrap()));
}

fn bench_record(c: &mut Criterion) {
    let grid = Grid::with_spacing(&[64, 64], 50.0).unwrap();
    let mut sim = SimConfig::new(2.5);
    sim.boundary = Boundary::Sponge { width: 8, strength: 3.0 };
    let spec = DatasetSpec {
        split: "bench".into(),
        count: 1,
        master_seed: 1,
        grid,
        medium: MediumSpec {
            preset: Preset::Marmousi { seed: 7 },
            modulation: None,
            fields: BTreeMap::new(),
        },
        source: SourceSpec {
            epicenter: vec![0.0, 0.0],
            amplitude: 1.0,
            kernel_radius: 150.0,
            wavelet: Wavelet::ricker(5.0),
        },
        sim,
        rate: 100.0,
        interrogators: vec![
            Interrogator::new("west", &[-800.0, 0.0]),
            Interrogator::new("east", &[800.0, 0.0]),
        ],
        ranges: Ranges {
            epicenter: Some(vec![Range::new(-1000.0, 1000.0); 2]),
            amplitude: None,
            peak_frequency: None,
        },
        epicenter_margin: 0.0,
    };
    let mut group = c.benchmark_group("dataset");
    group.sample_size(20);
    group.bench_function("record/64x64 2.5s", |b| b.iter(|| regenerate_record(black_box(&spec), 0).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_laplacian, bench_step, bench_record);
criterion_main!(benches);

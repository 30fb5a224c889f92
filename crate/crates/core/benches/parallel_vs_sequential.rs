//! Batch workloads on the full rayon pool against a one-thread pool.
//!
//! Built without the `parallel` feature both variants run the sequential
//! fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;
use tactile_cs::basis::{BasisKind, SparseBasis};
use tactile_cs::frame::{add_sensor_noise, SensorNoiseModel};
use tactile_cs::learning::{dagsvm_train, GramMatrix, ObservationDataset};
use tactile_cs::linop::LinearOperator;
use tactile_cs::measurement::SbheOperator;
use tactile_cs::recon::{calibrate_stepsize, reconstruct_independent, ReconstructionConfig, SensingOperator};
use tactile_cs::sim::{
    catalog, generate_observations, run_trajectory, PerturbationGrid, TaxelArraySpec, TrajectorySpec,
};

fn pools() -> [(&'static str, ThreadPool); 2] {
    let build = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    [("parallel", build(0)), ("sequential", build(1))]
}

fn observations() -> ObservationDataset {
    let array = TaxelArraySpec::new(32, 256.0).unwrap();
    let grid = PerturbationGrid {
        row_offsets_mm: vec![0.0, 4.0, 8.0],
        col_offsets_mm: vec![0.0, 4.0, 8.0],
        yaw_deg: vec![0.0, 20.0, 40.0],
    };
    let traj = TrajectorySpec {
        descent_depth_mm: 3.0,
        ..TrajectorySpec::default()
    };
    generate_observations(
        &array,
        &catalog(2.0).unwrap(),
        &grid,
        &traj,
        &SensorNoiseModel::with_seed(1),
    )
    .unwrap()
}

fn reconstruction(c: &mut Criterion) {
    let array = TaxelArraySpec::new(32, 128.0).unwrap();
    let ball = tactile_cs::sim::catalog_object("golf_ball", 2.0).unwrap();
    let traj = TrajectorySpec {
        steps: 256,
        ..TrajectorySpec::default()
    };
    let noise = SensorNoiseModel::with_seed(7);
    let frames: Vec<_> = run_trajectory(&array, &ball, &traj)
        .unwrap()
        .iter()
        .map(|f| add_sensor_noise(f, &noise))
        .collect();
    let phi = SbheOperator::new(1024, 256, 32, 11).unwrap();
    let ys: Vec<Vec<f64>> = frames.iter().map(|f| phi.apply(f.forces()).unwrap()).collect();
    let basis = SparseBasis::new(BasisKind::Haar2, 32).unwrap();
    let l = calibrate_stepsize(&SensingOperator::new(&phi, &basis).unwrap()).unwrap();
    let cfg = ReconstructionConfig::new(0.01, 20, l).unwrap();

    let mut group = c.benchmark_group("reconstruct_independent");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, ys.len()), |b| {
            b.iter(|| pool.install(|| reconstruct_independent(&ys, &phi, &basis, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn learning(c: &mut Criterion) {
    let data = observations();
    let phi = SbheOperator::new(1024, 64, 32, 3).unwrap();
    let compressed = data.compress(&phi).unwrap();

    let mut group = c.benchmark_group("learning");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("gram", name), |b| {
            b.iter(|| pool.install(|| GramMatrix::new(&data)))
        });
        group.bench_function(BenchmarkId::new("compress", name), |b| {
            b.iter(|| pool.install(|| data.compress(&phi).unwrap()))
        });
        group.bench_function(BenchmarkId::new("dagsvm_train", name), |b| {
            b.iter(|| pool.install(|| dagsvm_train(&compressed, 1.0).unwrap()))
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("observations", name), |b| {
            b.iter(|| pool.install(observations))
        });
    }
    group.finish();
}

criterion_group!(benches, reconstruction, learning, simulation);
criterion_main!(benches);

use tactile_cs::basis::{BasisKind, SparseBasis};
use tactile_cs::frame::{add_sensor_noise, psnr, SensorNoiseModel};
use tactile_cs::learning::{accuracy, cross_validate, dagsvm_classify_traced};
use tactile_cs::linop::LinearOperator;
use tactile_cs::measurement::{MeasurementOperator, SbheOperator, SeparableOperator};
use tactile_cs::recon::{calibrate_stepsize, stream_reconstruct, ReconstructionConfig, SensingOperator};
use tactile_cs::sim::{
    catalog_object, generate_observations, run_trajectory, PerturbationGrid, TaxelArraySpec, TrajectorySpec,
};
use tactile_cs::{tacf, FORCE_MAX};

fn short_press() -> TrajectorySpec {
    TrajectorySpec {
        steps: 400,
        ..TrajectorySpec::default()
    }
}

#[test]
fn simulate_compress_reconstruct() {
    let array = TaxelArraySpec::new(32, 128.0).unwrap();
    let ball = catalog_object("golf_ball", 2.0).unwrap();
    let truth = run_trajectory(&array, &ball, &short_press()).unwrap();
    assert_eq!(truth.len(), 400);
    assert!(truth.iter().all(|f| f.in_range(FORCE_MAX)));
    assert!(truth.last().unwrap().max_force() > 0.0);

    let noise = SensorNoiseModel::with_seed(3);
    let sensor: Vec<_> = truth.iter().map(|f| add_sensor_noise(f, &noise)).collect();
    let phi = SbheOperator::new(1024, 256, 32, 11).unwrap();
    let ys: Vec<Vec<f64>> = sensor.iter().map(|f| phi.apply(f.forces()).unwrap()).collect();
    let basis = SparseBasis::new(BasisKind::Haar2, 32).unwrap();
    let l = calibrate_stepsize(&SensingOperator::new(&phi, &basis).unwrap()).unwrap();
    let cfg = ReconstructionConfig::new(0.01, 20, l).unwrap();
    let out = stream_reconstruct(&ys, &phi, &basis, &cfg, Some(&truth)).unwrap();
    assert_eq!(out.frames.len(), 400);
    let touching: Vec<usize> = (0..400).filter(|&i| truth[i].max_force() > 0.0).collect();
    let recon: f64 = touching.iter().map(|&i| out.records[i].psnr_db.unwrap()).sum::<f64>() / touching.len() as f64;
    let raw: f64 = touching
        .iter()
        .map(|&i| psnr(&sensor[i], &truth[i], FORCE_MAX).unwrap())
        .sum::<f64>()
        / touching.len() as f64;
    assert!(recon > raw - 0.5, "recon {recon} sensor {raw}");

    let bytes = tacf::encode_sequence(&out.frames);
    assert_eq!(tacf::decode_sequence(&bytes).unwrap(), out.frames);
}

#[test]
fn operator_headers_regenerate_the_same_operator() {
    let x: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64 * 1e-3).collect();
    let ops = [
        MeasurementOperator::Sbhe(SbheOperator::new(256, 64, 16, 5).unwrap()),
        MeasurementOperator::Separable(SeparableOperator::for_measurements(16, 64, 5).unwrap()),
    ];
    for op in ops {
        let header = op.header().unwrap();
        let json = serde_json::to_string(&header).unwrap();
        let back = MeasurementOperator::from_header(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(op.apply(&x).unwrap(), back.apply(&x).unwrap());
    }
}

#[test]
fn compressed_observations_classify() {
    let array = TaxelArraySpec::new(16, 256.0).unwrap();
    let objects: Vec<_> = ["golf_ball", "cup", "clamp", "granola_box"]
        .iter()
        .map(|n| catalog_object(n, 2.0).unwrap())
        .collect();
    let grid = PerturbationGrid {
        row_offsets_mm: vec![0.0, 4.0, 8.0],
        col_offsets_mm: vec![0.0, 4.0],
        yaw_deg: vec![0.0, 15.0],
    };
    let traj = TrajectorySpec {
        descent_depth_mm: 3.0,
        ..TrajectorySpec::default()
    };
    let raw = generate_observations(&array, &objects, &grid, &traj, &SensorNoiseModel::with_seed(1)).unwrap();
    assert_eq!(raw.len(), 48);
    assert_eq!(raw.perturbation_count(), 12);
    let phi = SbheOperator::new(256, 32, 32, 2).unwrap();
    let data = raw.compress(&phi).unwrap();
    assert_eq!(data.feature_dim, 32);
    let cv = cross_validate(&data, &[0.1, 1.0, 10.0, 100.0], 0.5, 0.25, 4).unwrap();
    assert_eq!(cv.model.pairs.len(), 6);
    let (_, _, test) = cv.split.observation_indices(&data);
    assert_eq!(test.len(), 12);
    assert!(accuracy(&cv.model, &data, &test).unwrap() >= 50.0);
    for o in &data.observations {
        assert_eq!(dagsvm_classify_traced(&cv.model, &o.features).unwrap().evaluations, 3);
    }
}

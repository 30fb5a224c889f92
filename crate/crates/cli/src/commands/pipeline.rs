use tactile_cs::basis::SparseBasis;
use tactile_cs::frame::{add_sensor_noise, SensorNoiseModel};
use tactile_cs::linop::LinearOperator;
use tactile_cs::measurement::MeasurementOperator;
use tactile_cs::recon::{calibrate_stepsize, stream_reconstruct, ReconstructionConfig, SensingOperator};
use tactile_cs::rng::derive_seed;
use tactile_cs::sim::{generate_observations, run_trajectory};
use tactile_cs::{par, tacf, TactileFrame};

use super::{in_object, load_objects, mean, scene_objects, Report};
use crate::config::{measurements_for_ratio, OperatorKind, RunConfig, SceneConfig};
use crate::error::{CliError, Result};
use crate::files::{read_frames, write_observations, MeasurementFile};
use crate::output::{fmt_f, OutputDir};

pub struct SimulatedObject {
    pub label: String,
    pub truth: Vec<TactileFrame>,
    pub sensor: Vec<TactileFrame>,
}

/// True and sensor trajectories for every object in `scene`. Noise for
/// object `i` is keyed by `(noise seed, i)`.
pub fn simulate_scene(cfg: &RunConfig, scene: &SceneConfig) -> Result<Vec<SimulatedObject>> {
    let array = cfg.array(&scene.array)?;
    let objects = scene_objects(scene)?;
    let noise = cfg.noise(scene.noise_sigma);
    noise.validate()?;
    objects
        .iter()
        .enumerate()
        .map(|(i, obj)| {
            let truth = run_trajectory(&array, obj, &scene.trajectory).map_err(in_object(&obj.label))?;
            let model = SensorNoiseModel {
                seed: derive_seed(noise.seed, &[i as u64]),
                ..noise
            };
            let sensor = par::map_slice(&truth, |f| add_sensor_noise(f, &model));
            Ok(SimulatedObject {
                label: obj.label.clone(),
                truth,
                sensor,
            })
        })
        .collect()
}

/// Write `<object>.true.tacf` and `<object>.sensor.tacf` per object.
pub fn simulate(cfg: &RunConfig) -> Result<Report> {
    let sims = simulate_scene(cfg, &cfg.simulate)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut lines = Vec::new();
    for s in &sims {
        out.write(&format!("{}.true.tacf", s.label), &tacf::encode_sequence(&s.truth))?;
        out.write(&format!("{}.sensor.tacf", s.label), &tacf::encode_sequence(&s.sensor))?;
        let contact = s.truth.iter().filter(|f| f.max_force() > 0.0).count();
        lines.push(format!("{}: {} frames, {} in contact", s.label, s.truth.len(), contact));
    }
    Ok(Report {
        manifest: out.finish("simulate", cfg)?,
        lines,
    })
}

/// One noisy frame per (object, perturbation), written as
/// `observations.tacf`, an index `observations.csv` and a dataset manifest
/// `observations.json`.
pub fn observe(cfg: &RunConfig) -> Result<Report> {
    let oc = &cfg.observe;
    let array = cfg.array(&oc.array)?;
    let objects = load_objects(&oc.objects, &[], oc.fill_spacing_mm)?;
    let dataset = generate_observations(
        &array,
        &objects,
        &oc.perturbations,
        &oc.trajectory,
        &cfg.noise(oc.noise_sigma),
    )?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let perturbations: Vec<_> = (0..oc.perturbations.len()).map(|k| oc.perturbations.get(k)).collect();
    write_observations(&mut out, "observations", &dataset, array.side, &perturbations)?;
    let lines = vec![format!(
        "{} observations: {} objects x {} perturbations, {} taxels",
        dataset.len(),
        dataset.num_classes(),
        oc.perturbations.len(),
        dataset.feature_dim
    )];
    Ok(Report {
        manifest: out.finish("observe", cfg)?,
        lines,
    })
}

/// Compress a frame sequence into a measurement file.
pub fn measure(cfg: &RunConfig) -> Result<Report> {
    let mc = &cfg.measure;
    let frames = read_frames(&mc.input)?;
    let side = frames
        .first()
        .map(|f| f.side())
        .ok_or_else(|| CliError::data(&mc.input, "no frames"))?;
    if frames.iter().any(|f| f.side() != side) {
        return Err(CliError::data(&mc.input, "frames change size"));
    }
    let n = side * side;
    let m = match mc.m {
        Some(m) => m,
        None => measurements_for_ratio(n, mc.ratio)?,
    };
    let op = mc
        .operator
        .build(n, m, mc.block_size, cfg.operator_seed(&[n as u64, m as u64]))?;
    let header = op.header().expect("seeded operators have headers");
    let measurements = par::try_map_range(frames.len(), |i| op.apply(frames[i].forces()))?;
    let file = MeasurementFile {
        operator: header,
        side,
        timestamps_ms: frames.iter().map(|f| f.timestamp_ms).collect(),
        measurements,
    };
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let name = mc.output.to_string_lossy().into_owned();
    out.write_json(&name, &file)?;
    out.write_json("wiring.json", &op.wiring_report())?;
    let lines = vec![format!(
        "{} frames, {} operator, {} -> {} measurements ({:.2}:1)",
        frames.len(),
        op.kind_name(),
        n,
        op.rows(),
        n as f64 / op.rows() as f64
    )];
    Ok(Report {
        manifest: out.finish("measure", cfg)?,
        lines,
    })
}

/// Reconstruct a measurement file frame by frame.
pub fn reconstruct(cfg: &RunConfig) -> Result<Report> {
    let rc = &cfg.reconstruct;
    let file = MeasurementFile::read(&rc.input)?;
    let op = file.operator()?;
    if op.cols() != file.side * file.side {
        return Err(CliError::data(&rc.input, "operator size does not match the frame side"));
    }
    if let Some(bad) = file.measurements.iter().position(|y| y.len() != op.rows()) {
        return Err(CliError::data(
            &rc.input,
            format!("measurement {bad} has the wrong length"),
        ));
    }
    let truth = match &rc.truth {
        Some(p) => {
            let t = read_frames(p)?;
            if t.len() != file.measurements.len() || t.iter().any(|f| f.side() != file.side) {
                return Err(CliError::data(p, "truth frames do not match the measurements"));
            }
            Some(t)
        }
        None => None,
    };
    let kind = match op {
        MeasurementOperator::Sbhe(_) => OperatorKind::Sbhe,
        MeasurementOperator::Separable(_) => OperatorKind::Separable,
    };
    let basis = SparseBasis::new(rc.basis, file.side)?;
    let l = calibrate_stepsize(&SensingOperator::new(&op, &basis)?)?;
    let mut config = ReconstructionConfig::new(rc.lambda.unwrap_or(kind.default_lambda()), rc.iterations, l)?;
    config.warm_start = rc.warm_start;
    let mut result = stream_reconstruct(&file.measurements, &op, &basis, &config, truth.as_deref())?;
    for (f, &ts) in result.frames.iter_mut().zip(&file.timestamps_ms) {
        f.timestamp_ms = ts;
    }
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.frame_index.to_string(),
                r.iterations.to_string(),
                fmt_f(r.wall_ms),
                r.psnr_db.map(fmt_f).unwrap_or_default(),
            ]
        })
        .collect();
    let stem = rc.output.to_string_lossy().into_owned();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write(&format!("{stem}.tacf"), &tacf::encode_sequence(&result.frames))?;
    out.write_csv(
        &format!("{stem}.csv"),
        &["frame_index", "iterations", "wall_ms", "psnr_db"],
        &rows,
    )?;
    let walls: Vec<f64> = result.records.iter().map(|r| r.wall_ms).collect();
    let mut lines = vec![format!(
        "{} frames, lambda {}, L {:.4}, mean {:.3} ms/frame",
        rows.len(),
        config.lambda,
        l,
        mean(&walls)
    )];
    if truth.is_some() {
        let finite: Vec<f64> = result
            .records
            .iter()
            .filter_map(|r| r.psnr_db)
            .filter(|p| p.is_finite())
            .collect();
        lines.push(format!(
            "mean PSNR {:.3} dB over {} frames ({} exact)",
            mean(&finite),
            finite.len(),
            rows.len() - finite.len()
        ));
    }
    Ok(Report {
        manifest: out.finish("reconstruct", cfg)?,
        lines,
    })
}

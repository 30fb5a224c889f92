use tactile_cs::basis::{BasisKind, SparseBasis};
use tactile_cs::frame::{psnr, FORCE_MAX};
use tactile_cs::linop::LinearOperator;
use tactile_cs::measurement::MeasurementOperator;
use tactile_cs::par;
use tactile_cs::recon::{calibrate_stepsize, stream_reconstruct, ReconstructionConfig, SensingOperator};

use super::pipeline::{simulate_scene, SimulatedObject};
use super::{mean, min_max, Report};
use crate::config::{measurements_for_ratio, OperatorKind, RunConfig};
use crate::error::Result;
use crate::output::{fmt_f, OutputDir};

/// One cell of the acquisition sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionRow {
    pub object: String,
    pub operator: OperatorKind,
    pub basis: BasisKind,
    pub m: usize,
    pub ratio: f64,
    pub iterations: usize,
    pub lambda: f64,
    /// Over frames with finite PSNR; frames reconstructed exactly are
    /// counted in `exact_frames`.
    pub recon_mean_psnr: f64,
    pub recon_min_psnr: f64,
    pub recon_max_psnr: f64,
    pub exact_frames: usize,
    /// Share of frames where the reconstruction beats the sensor frame.
    pub better_pct: f64,
    pub sensor_mean_psnr: f64,
    pub sensor_min_psnr: f64,
    pub sensor_max_psnr: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub object: String,
    pub operator: OperatorKind,
    pub basis: BasisKind,
    pub m: usize,
    pub lambda: f64,
    pub recon_mean_psnr: f64,
    pub better_pct: f64,
}

struct Cell {
    object: usize,
    kind: OperatorKind,
    basis: BasisKind,
    ratio: f64,
}

struct StreamScore {
    psnr: Vec<f64>,
    wall_ms: Vec<f64>,
}

fn score(
    sim: &SimulatedObject,
    op: &MeasurementOperator,
    ys: &[Vec<f64>],
    basis: &SparseBasis,
    config: &ReconstructionConfig,
) -> Result<StreamScore> {
    let out = stream_reconstruct(ys, op, basis, config, Some(&sim.truth))?;
    Ok(StreamScore {
        psnr: out.records.iter().map(|r| r.psnr_db.unwrap_or(f64::NAN)).collect(),
        wall_ms: out.records.iter().map(|r| r.wall_ms).collect(),
    })
}

fn better_pct(recon: &[f64], sensor: &[f64]) -> f64 {
    let wins = recon.iter().zip(sensor).filter(|(r, s)| r > s).count();
    100.0 * wins as f64 / recon.len().max(1) as f64
}

fn finite(v: &[f64]) -> Vec<f64> {
    v.iter().copied().filter(|p| p.is_finite()).collect()
}

/// Reconstruct every (object, operator, basis, ratio, iterations) cell and
/// write `acquisition.csv`, `acquisition_timing.csv` and, when a weight
/// search is configured, `lambda_search.csv`.
pub fn bench_acquisition(cfg: &RunConfig) -> Result<(Report, Vec<AcquisitionRow>, Vec<LambdaRow>)> {
    let ac = &cfg.acquisition;
    let sims = simulate_scene(cfg, &ac.scene)?;
    for &lambda in [ac.lambda_sbhe, ac.lambda_separable].iter().chain(&ac.lambda_search) {
        for &it in &ac.iterations {
            ReconstructionConfig::new(lambda, it, 1.0)?;
        }
    }
    let sensor_psnr: Vec<Vec<f64>> = sims
        .iter()
        .map(|s| {
            s.sensor
                .iter()
                .zip(&s.truth)
                .map(|(x, t)| psnr(x, t, FORCE_MAX))
                .collect::<tactile_cs::Result<Vec<f64>>>()
        })
        .collect::<tactile_cs::Result<_>>()?;

    let mut cells = Vec::new();
    for object in 0..sims.len() {
        for &kind in &ac.operators {
            for &basis in &ac.bases {
                for &ratio in &ac.ratios {
                    cells.push(Cell {
                        object,
                        kind,
                        basis,
                        ratio,
                    });
                }
            }
        }
    }
    let per_cell = par::try_map_range(cells.len(), |ci| -> Result<(Vec<AcquisitionRow>, Vec<LambdaRow>)> {
        let c = &cells[ci];
        let sim = &sims[c.object];
        let side = sim.truth.first().map_or(0, |f| f.side());
        let n = side * side;
        let m = measurements_for_ratio(n, c.ratio)?;
        let op = c
            .kind
            .build(n, m, ac.block_size, cfg.operator_seed(&[n as u64, m as u64]))?;
        let basis = SparseBasis::new(c.basis, side)?;
        let l = calibrate_stepsize(&SensingOperator::new(&op, &basis)?)?;
        let ys = par::try_map_range(sim.sensor.len(), |i| op.apply(sim.sensor[i].forces()))?;
        let sp = &sensor_psnr[c.object];
        let (s_lo, s_hi) = min_max(sp);
        let mut rows = Vec::new();
        for &it in &ac.iterations {
            let mut config = ReconstructionConfig::new(ac.lambda(c.kind), it, l)?;
            config.warm_start = ac.warm_start;
            let s = score(sim, &op, &ys, &basis, &config)?;
            let fin = finite(&s.psnr);
            let (lo, hi) = min_max(&fin);
            rows.push(AcquisitionRow {
                object: sim.label.clone(),
                operator: c.kind,
                basis: c.basis,
                m: op.rows(),
                ratio: c.ratio,
                iterations: it,
                lambda: config.lambda,
                recon_mean_psnr: mean(&fin),
                recon_min_psnr: lo,
                recon_max_psnr: hi,
                exact_frames: s.psnr.len() - fin.len(),
                better_pct: better_pct(&s.psnr, sp),
                sensor_mean_psnr: mean(sp),
                sensor_min_psnr: s_lo,
                sensor_max_psnr: s_hi,
                mean_wall_ms: mean(&s.wall_ms),
            });
        }
        let mut lambdas = Vec::new();
        if let Some(&it) = ac.iterations.first() {
            for &lambda in &ac.lambda_search {
                let mut config = ReconstructionConfig::new(lambda, it, l)?;
                config.warm_start = ac.warm_start;
                let s = score(sim, &op, &ys, &basis, &config)?;
                lambdas.push(LambdaRow {
                    object: sim.label.clone(),
                    operator: c.kind,
                    basis: c.basis,
                    m: op.rows(),
                    lambda,
                    recon_mean_psnr: mean(&finite(&s.psnr)),
                    better_pct: better_pct(&s.psnr, sp),
                });
            }
        }
        Ok((rows, lambdas))
    })?;
    let (rows, lambdas): (Vec<_>, Vec<_>) = per_cell.into_iter().unzip();
    let rows: Vec<AcquisitionRow> = rows.into_iter().flatten().collect();
    let lambdas: Vec<LambdaRow> = lambdas.into_iter().flatten().collect();

    let mut out = OutputDir::create(&cfg.output_dir)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.object.clone(),
                r.operator.name().into(),
                r.basis.name().into(),
                r.m.to_string(),
                fmt_f(r.ratio),
                r.iterations.to_string(),
                fmt_f(r.lambda),
                fmt_f(r.recon_mean_psnr),
                fmt_f(r.recon_min_psnr),
                fmt_f(r.recon_max_psnr),
                r.exact_frames.to_string(),
                fmt_f(r.better_pct),
                fmt_f(r.sensor_mean_psnr),
                fmt_f(r.sensor_min_psnr),
                fmt_f(r.sensor_max_psnr),
            ]
        })
        .collect();
    out.write_csv(
        "acquisition.csv",
        &[
            "object",
            "operator",
            "basis",
            "m",
            "ratio",
            "iterations",
            "lambda",
            "recon_mean_psnr_db",
            "recon_min_psnr_db",
            "recon_max_psnr_db",
            "exact_frames",
            "frames_better_pct",
            "sensor_mean_psnr_db",
            "sensor_min_psnr_db",
            "sensor_max_psnr_db",
        ],
        &table,
    )?;
    let timing: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.object.clone(),
                r.operator.name().into(),
                r.basis.name().into(),
                r.m.to_string(),
                r.iterations.to_string(),
                fmt_f(r.mean_wall_ms),
                fmt_f(1e3 / r.mean_wall_ms),
            ]
        })
        .collect();
    out.write_csv(
        "acquisition_timing.csv",
        &[
            "object",
            "operator",
            "basis",
            "m",
            "iterations",
            "mean_wall_ms",
            "frames_per_s",
        ],
        &timing,
    )?;
    if !lambdas.is_empty() {
        let t: Vec<Vec<String>> = lambdas
            .iter()
            .map(|r| {
                vec![
                    r.object.clone(),
                    r.operator.name().into(),
                    r.basis.name().into(),
                    r.m.to_string(),
                    fmt_f(r.lambda),
                    fmt_f(r.recon_mean_psnr),
                    fmt_f(r.better_pct),
                ]
            })
            .collect();
        out.write_csv(
            "lambda_search.csv",
            &[
                "object",
                "operator",
                "basis",
                "m",
                "lambda",
                "recon_mean_psnr_db",
                "frames_better_pct",
            ],
            &t,
        )?;
    }
    out.write("acquisition.gp", ACQUISITION_GNUPLOT.as_bytes())?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "{:<12} {:<9} {:<6} m={:<5} it={:<3} recon {:7.3} dB  sensor {:7.3} dB  better {:5.1}%  {:.3} ms/frame",
                r.object,
                r.operator.name(),
                r.basis.name(),
                r.m,
                r.iterations,
                r.recon_mean_psnr,
                r.sensor_mean_psnr,
                r.better_pct,
                r.mean_wall_ms
            )
        })
        .collect();
    let report = Report {
        manifest: out.finish("bench-acquisition", cfg)?,
        lines,
    };
    Ok((report, rows, lambdas))
}

const ACQUISITION_GNUPLOT: &str = r#"# gnuplot acquisition.gp
set datafile separator ','
set terminal pngcairo size 900,600
set output 'acquisition.png'
set xlabel 'measurements m'
set ylabel 'mean PSNR (dB)'
set key outside
iters = 20
plot 'acquisition.csv' every ::1 using ($6 == iters ? $4 : 1/0):8 with points pt 7 title 'reconstruction', \
     'acquisition.csv' every ::1 using ($6 == iters ? $4 : 1/0):13 with points pt 6 title 'sensor'
"#;

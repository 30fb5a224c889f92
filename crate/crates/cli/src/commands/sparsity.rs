use tactile_cs::basis::{self, BasisKind};
use tactile_cs::frame::FORCE_MAX;
use tactile_cs::TactileFrame;

use super::pipeline::simulate_scene;
use super::Report;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{fmt_f, OutputDir};

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityRow {
    pub object: String,
    pub basis: BasisKind,
    pub mean: f64,
    pub max: usize,
    pub frames: usize,
}

/// Peak force of `frames` mapped to the top of the taxel range.
pub fn scale_to_range(frames: &[TactileFrame]) -> tactile_cs::Result<Vec<TactileFrame>> {
    let peak = frames.iter().map(|f| f.max_force()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(frames.to_vec());
    }
    frames
        .iter()
        .map(|f| {
            TactileFrame::new(
                f.side(),
                f.forces().iter().map(|v| v * FORCE_MAX / peak).collect(),
                f.timestamp_ms,
            )
        })
        .collect()
}

/// Mean and max approximate sparsity of each object's true trajectory in
/// each basis; writes `sparsity.csv`.
pub fn sparsity_table(cfg: &RunConfig) -> Result<(Report, Vec<SparsityRow>)> {
    let sc = &cfg.sparsity;
    if !(sc.tau >= 0.0) {
        return Err(CliError::Config(format!("tau must be >= 0, got {}", sc.tau)));
    }
    let sims = simulate_scene(cfg, &sc.scene)?;
    let mut rows = Vec::new();
    for s in &sims {
        let frames = if sc.scale_to_range {
            scale_to_range(&s.truth)?
        } else {
            s.truth.clone()
        };
        for st in basis::sparsity_table(&frames, &sc.bases, sc.tau)? {
            rows.push(SparsityRow {
                object: s.label.clone(),
                basis: st.basis,
                mean: st.mean,
                max: st.max,
                frames: frames.len(),
            });
        }
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.object.clone(),
                r.basis.name().into(),
                fmt_f(r.mean),
                r.max.to_string(),
                r.frames.to_string(),
            ]
        })
        .collect();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv(
        "sparsity.csv",
        &["object", "basis", "mean_k", "max_k", "frames"],
        &table,
    )?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "{:<12} {:<6} mean {:8.2}  max {}",
                r.object,
                r.basis.name(),
                r.mean,
                r.max
            )
        })
        .collect();
    Ok((
        Report {
            manifest: out.finish("sparsity-table", cfg)?,
            lines,
        },
        rows,
    ))
}

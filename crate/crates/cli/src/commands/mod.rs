//! One function per CLI verb. Each takes the resolved [`RunConfig`],
//! writes its artifacts under `output_dir` and returns a [`Report`].

mod acquisition;
mod classification;
mod learn;
mod pipeline;
mod rip;
mod sparsity;

use std::path::PathBuf;

use tactile_cs::sim::{catalog_object, SphereUnionObject};

use crate::config::SceneConfig;
use crate::error::{CliError, Result};
use crate::output::Manifest;

pub use acquisition::{bench_acquisition, AcquisitionRow, LambdaRow};
pub use classification::{bench_classification, ClassificationReport, SignalRow, TrainingRow};
pub use learn::{classify, train};
pub use pipeline::{measure, observe, reconstruct, simulate, simulate_scene, SimulatedObject};
pub use rip::{rip_report, RipRow};
pub use sparsity::{sparsity_table, SparsityRow};

#[derive(Debug, Clone)]
pub struct Report {
    pub manifest: Manifest,
    /// Human-readable summary for stdout.
    pub lines: Vec<String>,
}

/// Load catalog objects by name, then any object files.
pub(crate) fn load_objects(names: &[String], files: &[PathBuf], fill_spacing: f64) -> Result<Vec<SphereUnionObject>> {
    let mut objects = Vec::with_capacity(names.len() + files.len());
    for name in names {
        objects
            .push(catalog_object(name, fill_spacing).map_err(|e| CliError::Config(format!("object {name:?}: {e}")))?);
    }
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| CliError::io(f, e))?;
        objects.push(SphereUnionObject::from_json(&text).map_err(|e| CliError::data(f, e))?);
    }
    if objects.is_empty() {
        return Err(CliError::Config("no objects configured".into()));
    }
    Ok(objects)
}

pub(crate) fn scene_objects(scene: &SceneConfig) -> Result<Vec<SphereUnionObject>> {
    load_objects(&scene.objects, &scene.object_files, scene.fill_spacing_mm)
}

/// Attach object context to a core error without changing its class.
pub(crate) fn in_object(label: &str) -> impl Fn(tactile_cs::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Config(m) => CliError::Config(format!("object {label:?}: {m}")),
        CliError::Data(m) => CliError::Data(format!("object {label:?}: {m}")),
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

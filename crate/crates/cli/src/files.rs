//! On-disk formats shared between commands.
//!
//! * frame sequences: `TACF` records
//! * measurement streams: JSON with the operator header and one vector per
//!   frame
//! * observation sets: a `TACF` file of frames, a CSV index with the
//!   label and perturbation of each record and a JSON manifest
//! * trained models: JSON with the operator header and the pairwise SVMs

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tactile_cs::learning::{DagSvmModel, ObservationDataset};
use tactile_cs::measurement::{MeasurementOperator, OperatorHeader};
use tactile_cs::sim::Perturbation;
use tactile_cs::{tacf, TactileFrame};

use crate::error::{CliError, Result};
use crate::output::{read_bytes, OutputDir};

pub fn read_frames(path: &Path) -> Result<Vec<TactileFrame>> {
    let bytes = read_bytes(path)?;
    tacf::decode_sequence(&bytes).map_err(|e| CliError::data(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub operator: OperatorHeader,
    pub side: usize,
    pub timestamps_ms: Vec<u64>,
    pub measurements: Vec<Vec<f64>>,
}

impl MeasurementFile {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let file: Self = serde_json::from_slice(&bytes).map_err(|e| CliError::data(path, e))?;
        if file.timestamps_ms.len() != file.measurements.len() {
            return Err(CliError::data(path, "timestamp and measurement counts differ"));
        }
        Ok(file)
    }

    pub fn operator(&self) -> Result<MeasurementOperator> {
        Ok(MeasurementOperator::from_header(&self.operator)?)
    }
}

pub fn observation_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("tacf"), stem.with_extension("csv"))
}

/// Write `dataset` (raw frames of side `side`) as `<name>.tacf` and
/// `<name>.csv`.
pub fn write_observations(
    out: &mut OutputDir,
    name: &str,
    dataset: &ObservationDataset,
    side: usize,
    perturbations: &[Perturbation],
) -> Result<()> {
    let frames: Vec<TactileFrame> = dataset
        .observations
        .iter()
        .enumerate()
        .map(|(i, o)| TactileFrame::new(side, o.features.clone(), i as u64))
        .collect::<tactile_cs::Result<_>>()?;
    out.write(&format!("{name}.tacf"), &tacf::encode_sequence(&frames))?;
    let rows: Vec<Vec<String>> = dataset
        .observations
        .iter()
        .enumerate()
        .map(|(i, o)| {
            vec![
                i.to_string(),
                o.label.to_string(),
                dataset.class_names[o.label].clone(),
                o.perturbation.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        &format!("{name}.csv"),
        &["observation", "label", "class", "perturbation"],
        &rows,
    )?;
    out.write_json(
        &format!("{name}.json"),
        &DatasetManifest {
            frames: format!("{name}.tacf"),
            index: format!("{name}.csv"),
            side,
            class_names: dataset.class_names.clone(),
            observations: dataset.len(),
            perturbations: perturbations.to_vec(),
        },
    )?;
    Ok(())
}

/// JSON companion to an observation set: file names, classes and the
/// perturbation behind each perturbation index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub frames: String,
    pub index: String,
    pub side: usize,
    pub class_names: Vec<String>,
    pub observations: usize,
    pub perturbations: Vec<Perturbation>,
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    observation: usize,
    label: usize,
    class: String,
    perturbation: usize,
}

/// Load an observation set written by [`write_observations`]; returns the
/// dataset and the frame side.
pub fn read_observations(stem: &Path) -> Result<(ObservationDataset, usize)> {
    let (tacf_path, csv_path) = observation_paths(stem);
    let frames = read_frames(&tacf_path)?;
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| CliError::data(&csv_path, e))?;
    let mut rows = Vec::new();
    for r in reader.deserialize::<IndexRow>() {
        rows.push(r.map_err(|e| CliError::data(&csv_path, e))?);
    }
    if rows.len() != frames.len() {
        return Err(CliError::data(
            &csv_path,
            format!("{} index rows for {} frames", rows.len(), frames.len()),
        ));
    }
    let side = frames
        .first()
        .map(|f| f.side())
        .ok_or_else(|| CliError::data(&tacf_path, "no observations"))?;
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    for r in &rows {
        if let Some(prev) = names.insert(r.label, r.class.clone()) {
            if prev != r.class {
                return Err(CliError::data(
                    &csv_path,
                    format!("label {} names both {prev} and {}", r.label, r.class),
                ));
            }
        }
    }
    let count = names.keys().next_back().map_or(0, |k| k + 1);
    if names.len() != count {
        return Err(CliError::data(&csv_path, "labels are not contiguous from 0"));
    }
    let mut dataset = ObservationDataset::new(names.into_values().collect(), side * side)
        .map_err(|e| CliError::data(&csv_path, e))?;
    for (i, (r, f)) in rows.iter().zip(frames).enumerate() {
        if r.observation != i || f.side() != side {
            return Err(CliError::data(
                &csv_path,
                format!("record {i} is out of order or resized"),
            ));
        }
        dataset
            .push(f.into_forces(), r.label, r.perturbation)
            .map_err(|e| CliError::data(&tacf_path, e))?;
    }
    Ok((dataset, side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    /// Operator applied to raw frames before classification.
    pub operator: Option<OperatorHeader>,
    pub input_dim: usize,
    pub c: f64,
    pub model: DagSvmModel,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let file: Self = serde_json::from_slice(&bytes).map_err(|e| CliError::data(path, e))?;
        file.model.validate().map_err(|e| CliError::data(path, e))?;
        Ok(file)
    }
}

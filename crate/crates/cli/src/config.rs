//! Run configuration: one JSON document with a section per command.
//!
//! Every field has a default, so `{}` is a valid config. Flags override
//! individual fields through dotted paths (`acquisition.ratios=[4]`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tactile_cs::basis::BasisKind;
use tactile_cs::frame::SensorNoiseModel;
use tactile_cs::learning::default_c_grid;
use tactile_cs::measurement::{MeasurementOperator, SbheOperator, SeparableOperator, DEFAULT_BLOCK_SIZE};
use tactile_cs::recon::{DEFAULT_ITERATIONS, DEFAULT_LAMBDA_SBHE, DEFAULT_LAMBDA_SEPARABLE};
use tactile_cs::rng::derive_seed;
use tactile_cs::sim::{PerturbationGrid, TaxelArraySpec, TrajectorySpec, CATALOG, DEFAULT_FILL_SPACING_MM};

use crate::error::{CliError, Result};

/// Seed streams split off the global seed.
pub mod stream {
    pub const NOISE: u64 = 1;
    pub const OPERATOR: u64 = 2;
    pub const SPLIT: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Use a 64x64 array over 256 mm wherever an array is simulated.
    pub large_array: bool,
    pub simulate: SceneConfig,
    pub observe: ObserveConfig,
    pub measure: MeasureConfig,
    pub reconstruct: ReconstructConfig,
    pub acquisition: AcquisitionConfig,
    pub classification: ClassificationConfig,
    pub rip: RipConfig,
    pub sparsity: SparsityConfig,
    pub train: TrainConfig,
    pub classify: ClassifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            large_array: false,
            simulate: SceneConfig::default(),
            observe: ObserveConfig::default(),
            measure: MeasureConfig::default(),
            reconstruct: ReconstructConfig::default(),
            acquisition: AcquisitionConfig::default(),
            classification: ClassificationConfig::default(),
            rip: RipConfig::default(),
            sparsity: SparsityConfig::default(),
            train: TrainConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Load `path` (or defaults when `None`), then apply `key=value`
    /// overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn noise(&self, sigma: f64) -> SensorNoiseModel {
        SensorNoiseModel {
            sigma,
            seed: derive_seed(self.seed, &[stream::NOISE]),
            ..SensorNoiseModel::default()
        }
    }

    pub fn operator_seed(&self, coords: &[u64]) -> u64 {
        let mut c = vec![stream::OPERATOR];
        c.extend_from_slice(coords);
        derive_seed(self.seed, &c)
    }

    pub fn split_seed(&self, split: usize) -> u64 {
        derive_seed(self.seed, &[stream::SPLIT, split as u64])
    }

    pub fn array(&self, a: &ArrayConfig) -> Result<TaxelArraySpec> {
        let a = if self.large_array {
            ArrayConfig {
                side: 64,
                extent_mm: 256.0,
            }
        } else {
            *a
        };
        Ok(TaxelArraySpec::new(a.side, a.extent_mm)?)
    }
}

/// Set `path` (dot separated) in `root` to `value`, parsed as JSON when it
/// parses and as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path '{path}'")));
    }
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override '{path}' descends into a non-object")))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override '{path}' descends into a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), parsed);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub side: usize,
    pub extent_mm: f64,
}

impl ArrayConfig {
    /// 4 mm pitch, matching the taxel spacing of the full-size array.
    pub const DESK: ArrayConfig = ArrayConfig {
        side: 32,
        extent_mm: 128.0,
    };
    pub const WIDE: ArrayConfig = ArrayConfig {
        side: 32,
        extent_mm: 256.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Sbhe,
    Separable,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Sbhe => "sbhe",
            OperatorKind::Separable => "separable",
        }
    }

    pub fn default_lambda(self) -> f64 {
        match self {
            OperatorKind::Sbhe => DEFAULT_LAMBDA_SBHE,
            OperatorKind::Separable => DEFAULT_LAMBDA_SEPARABLE,
        }
    }

    pub fn build(self, n: usize, m: usize, block_size: usize, seed: u64) -> Result<MeasurementOperator> {
        Ok(match self {
            OperatorKind::Sbhe => MeasurementOperator::Sbhe(SbheOperator::new(n, m, block_size.min(n), seed)?),
            OperatorKind::Separable => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(CliError::Config(format!(
                        "separable operator needs a square array, n = {n}"
                    )));
                }
                MeasurementOperator::Separable(SeparableOperator::for_measurements(side, m, seed)?)
            }
        })
    }
}

/// `round(n / ratio)`, at least 1.
pub fn measurements_for_ratio(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(CliError::Config(format!("compression ratio must be >= 1, got {ratio}")));
    }
    Ok(((n as f64 / ratio).round() as usize).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub array: ArrayConfig,
    pub objects: Vec<String>,
    pub fill_spacing_mm: f64,
    pub trajectory: TrajectorySpec,
    pub noise_sigma: f64,
    /// Optional union-of-spheres JSON files simulated after the catalog
    /// objects.
    pub object_files: Vec<PathBuf>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::DESK,
            objects: vec!["golf_ball".into()],
            fill_spacing_mm: DEFAULT_FILL_SPACING_MM,
            trajectory: TrajectorySpec::default(),
            noise_sigma: SensorNoiseModel::default().sigma,
            object_files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserveConfig {
    pub array: ArrayConfig,
    pub objects: Vec<String>,
    pub fill_spacing_mm: f64,
    pub trajectory: TrajectorySpec,
    pub noise_sigma: f64,
    pub perturbations: PerturbationGrid,
}

/// Press depth for classification touches; deeper than the acquisition
/// default so coarse pitches still see several taxels in contact.
pub const OBSERVE_DESCENT_MM: f64 = 3.0;

impl Default for ObserveConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::WIDE,
            objects: CATALOG.iter().map(|s| s.to_string()).collect(),
            fill_spacing_mm: DEFAULT_FILL_SPACING_MM,
            trajectory: TrajectorySpec {
                descent_depth_mm: OBSERVE_DESCENT_MM,
                ..TrajectorySpec::default()
            },
            noise_sigma: SensorNoiseModel::default().sigma,
            perturbations: PerturbationGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub input: PathBuf,
    pub operator: OperatorKind,
    /// Measurement count; derived from `ratio` when absent.
    pub m: Option<usize>,
    pub ratio: f64,
    pub block_size: usize,
    pub output: PathBuf,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("out/golf_ball.sensor.tacf"),
            operator: OperatorKind::Sbhe,
            m: None,
            ratio: 4.0,
            block_size: DEFAULT_BLOCK_SIZE,
            output: PathBuf::from("measurements.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub input: PathBuf,
    /// True frames for PSNR; optional.
    pub truth: Option<PathBuf>,
    pub basis: BasisKind,
    /// Defaults to the operator kind's standard weight.
    pub lambda: Option<f64>,
    pub iterations: usize,
    pub warm_start: bool,
    pub output: PathBuf,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("out/measurements.json"),
            truth: None,
            basis: BasisKind::Haar2,
            lambda: None,
            iterations: DEFAULT_ITERATIONS,
            warm_start: true,
            output: PathBuf::from("reconstruction"),
        }
    }
}

/// Weights for 4 mm pitch desk-scale frames, whose peak forces sit near
/// the middle of the taxel range.
pub const DESK_LAMBDA_SBHE: f64 = 0.01;
pub const DESK_LAMBDA_SEPARABLE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub scene: SceneConfig,
    pub operators: Vec<OperatorKind>,
    pub bases: Vec<BasisKind>,
    pub ratios: Vec<f64>,
    pub iterations: Vec<usize>,
    pub block_size: usize,
    pub lambda_sbhe: f64,
    pub lambda_separable: f64,
    pub warm_start: bool,
    /// When non-empty, also score each weight here at the first iteration
    /// count and write `lambda_search.csv`.
    pub lambda_search: Vec<f64>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                objects: ["golf_ball", "granola_box", "cup", "clamp"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                ..SceneConfig::default()
            },
            operators: vec![OperatorKind::Sbhe, OperatorKind::Separable],
            bases: vec![BasisKind::Haar2],
            ratios: vec![3.0, 4.0, 5.0],
            iterations: vec![20, 10, 5],
            block_size: DEFAULT_BLOCK_SIZE,
            lambda_sbhe: DESK_LAMBDA_SBHE,
            lambda_separable: DESK_LAMBDA_SEPARABLE,
            warm_start: true,
            lambda_search: Vec::new(),
        }
    }
}

impl AcquisitionConfig {
    pub fn lambda(&self, kind: OperatorKind) -> f64 {
        match kind {
            OperatorKind::Sbhe => self.lambda_sbhe,
            OperatorKind::Separable => self.lambda_separable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingFraction {
    pub dev: f64,
    pub val: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    pub observe: ObserveConfig,
    pub signal_sizes: Vec<usize>,
    pub operators: Vec<OperatorKind>,
    pub block_size: usize,
    /// Raw-frame baselines from arrays with this many taxels over the same
    /// extent; a size equal to the full taxel count uses the full array.
    pub coarse_sizes: Vec<usize>,
    pub splits: usize,
    pub dev_fraction: f64,
    pub val_fraction: f64,
    pub c_grid: Vec<f64>,
    /// Training-size sweep; empty skips it.
    pub training_fractions: Vec<TrainingFraction>,
    pub training_signal_size: usize,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        let tf = |dev, val| TrainingFraction { dev, val };
        Self {
            observe: ObserveConfig::default(),
            signal_sizes: vec![1024, 256, 64, 16, 4, 1],
            operators: vec![OperatorKind::Sbhe, OperatorKind::Separable],
            block_size: DEFAULT_BLOCK_SIZE,
            coarse_sizes: vec![1024, 256, 64, 16, 4, 1],
            splits: 10,
            dev_fraction: 0.4,
            val_fraction: 0.2,
            c_grid: default_c_grid(),
            training_fractions: vec![
                tf(0.4, 0.2),
                tf(0.2, 0.05),
                tf(0.1, 0.03),
                tf(0.06, 0.02),
                tf(0.02, 0.0033),
                tf(0.0066, 0.0033),
            ],
            training_signal_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RipConfig {
    pub side: usize,
    pub m: usize,
    pub block_size: usize,
    pub ks: Vec<usize>,
    pub bases: Vec<BasisKind>,
}

impl Default for RipConfig {
    fn default() -> Self {
        Self {
            side: 4,
            m: 10,
            block_size: 4,
            ks: vec![1, 2, 3],
            bases: vec![BasisKind::Haar2, BasisKind::Dct2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsityConfig {
    pub scene: SceneConfig,
    pub bases: Vec<BasisKind>,
    pub tau: f64,
    /// Scale each trajectory so its peak force equals the top of the taxel
    /// range.
    pub scale_to_range: bool,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self {
            scene: AcquisitionConfig::default().scene,
            bases: BasisKind::ALL.to_vec(),
            tau: 0.001,
            scale_to_range: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Observation frames written by `observe`.
    pub observations: PathBuf,
    /// Compress with this operator before training; raw frames when absent.
    pub operator: Option<OperatorKind>,
    pub m: usize,
    pub block_size: usize,
    pub dev_fraction: f64,
    pub val_fraction: f64,
    pub c_grid: Vec<f64>,
    pub output: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            observations: PathBuf::from("out/observations"),
            operator: Some(OperatorKind::Sbhe),
            m: 16,
            block_size: DEFAULT_BLOCK_SIZE,
            dev_fraction: 0.4,
            val_fraction: 0.2,
            c_grid: default_c_grid(),
            output: PathBuf::from("model.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub model: PathBuf,
    pub observations: PathBuf,
    pub output: PathBuf,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            model: PathBuf::from("out/model.json"),
            observations: PathBuf::from("out/observations"),
            output: PathBuf::from("predictions"),
        }
    }
}

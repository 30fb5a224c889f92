use tactile_cs::learning::{accuracy, confusion_matrix, cross_validate, dagsvm_classify_traced};
use tactile_cs::measurement::MeasurementOperator;
use tactile_cs::par;

use super::Report;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::files::{read_observations, ModelFile};
use crate::output::{fmt_f, OutputDir};

/// Cross-validate a DAGSVM on an observation set (optionally compressed)
/// and write the model plus `train_report.csv`.
pub fn train(cfg: &RunConfig) -> Result<Report> {
    let tc = &cfg.train;
    let (raw, _) = read_observations(&tc.observations)?;
    let n = raw.feature_dim;
    let (dataset, header) = match tc.operator {
        Some(kind) => {
            let op = kind.build(n, tc.m, tc.block_size, cfg.operator_seed(&[n as u64, tc.m as u64, 0]))?;
            (raw.compress(&op)?, op.header())
        }
        None => (raw, None),
    };
    let cv = cross_validate(
        &dataset,
        &tc.c_grid,
        tc.dev_fraction,
        tc.val_fraction,
        cfg.split_seed(0),
    )?;
    let (dev, val, test) = cv.split.observation_indices(&dataset);
    let test_acc = if test.is_empty() {
        f64::NAN
    } else {
        accuracy(&cv.model, &dataset, &test)?
    };
    let model = ModelFile {
        operator: header,
        input_dim: n,
        c: cv.c,
        model: cv.model,
    };
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_json(&tc.output.to_string_lossy(), &model)?;
    out.write_csv(
        "train_report.csv",
        &[
            "c",
            "validation_accuracy_pct",
            "test_accuracy_pct",
            "dev_observations",
            "val_observations",
            "test_observations",
            "binary_models",
        ],
        &[vec![
            fmt_f(cv.c),
            fmt_f(cv.validation_accuracy),
            fmt_f(test_acc),
            dev.len().to_string(),
            val.len().to_string(),
            test.len().to_string(),
            model.model.pairs.len().to_string(),
        ]],
    )?;
    let lines = vec![format!(
        "{} classes, {} features, C = {}, validation {:.2}%, test {:.2}%, {} binary SVMs",
        dataset.num_classes(),
        dataset.feature_dim,
        cv.c,
        cv.validation_accuracy,
        test_acc,
        model.model.pairs.len()
    )];
    Ok(Report {
        manifest: out.finish("train", cfg)?,
        lines,
    })
}

/// Classify every observation with a trained model; writes
/// `<output>.csv` (one row per observation) and `<output>_confusion.csv`.
pub fn classify(cfg: &RunConfig) -> Result<Report> {
    let cc = &cfg.classify;
    let model = ModelFile::read(&cc.model)?;
    let (raw, _) = read_observations(&cc.observations)?;
    if raw.feature_dim != model.input_dim {
        return Err(CliError::Data(format!(
            "model expects {} taxels, observations have {}",
            model.input_dim, raw.feature_dim
        )));
    }
    if raw.class_names != model.model.class_names {
        return Err(CliError::Data("observation classes differ from the model's".into()));
    }
    let dataset = match &model.operator {
        Some(h) => raw.compress(&MeasurementOperator::from_header(h)?)?,
        None => raw,
    };
    let traces = par::try_map_range(dataset.len(), |i| {
        dagsvm_classify_traced(&model.model, &dataset.observations[i].features)
    })?;
    let rows: Vec<Vec<String>> = dataset
        .observations
        .iter()
        .zip(&traces)
        .enumerate()
        .map(|(i, (o, t))| {
            vec![
                i.to_string(),
                dataset.class_names[o.label].clone(),
                dataset.class_names[t.label].clone(),
                t.evaluations.to_string(),
            ]
        })
        .collect();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let acc = accuracy(&model.model, &dataset, &all)?;
    let cm = confusion_matrix(&model.model, &dataset, &all)?;
    let mut header = vec!["actual".to_string()];
    header.extend(dataset.class_names.iter().cloned());
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let cm_rows: Vec<Vec<String>> = cm
        .iter()
        .enumerate()
        .map(|(a, r)| {
            std::iter::once(dataset.class_names[a].clone())
                .chain(r.iter().map(|&x| fmt_f(x)))
                .collect()
        })
        .collect();
    let stem = cc.output.to_string_lossy().into_owned();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv(
        &format!("{stem}.csv"),
        &["observation", "actual", "predicted", "evaluations"],
        &rows,
    )?;
    out.write_csv(&format!("{stem}_confusion.csv"), &h, &cm_rows)?;
    let lines = vec![format!("{} observations, accuracy {:.2}%", dataset.len(), acc)];
    Ok(Report {
        manifest: out.finish("classify", cfg)?,
        lines,
    })
}

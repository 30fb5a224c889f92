use tactile_cs::learning::{
    accuracy, confusion_matrix, cross_validate_with_gram, split_perturbations, GramMatrix, ObservationDataset,
};
use tactile_cs::sim::{generate_observations, TaxelArraySpec};

use super::{load_objects, mean, min_max, Report};
use crate::config::{ClassificationConfig, OperatorKind, RunConfig, TrainingFraction};
use crate::error::{CliError, Result};
use crate::output::{fmt_f, OutputDir};

/// Accuracy samples for one (signal source, signal size) over all splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRow {
    /// `compressed`, `sensor` or `random`.
    pub kind: &'static str,
    pub operator: Option<OperatorKind>,
    pub signal_size: usize,
    /// Percent, one per split.
    pub accuracies: Vec<f64>,
    pub chosen_c: Vec<f64>,
}

impl SignalRow {
    pub fn mean(&self) -> f64 {
        mean(&self.accuracies)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub kind: &'static str,
    pub operator: Option<OperatorKind>,
    pub signal_size: usize,
    pub fraction: TrainingFraction,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub report: Report,
    pub signal: Vec<SignalRow>,
    pub training: Vec<TrainingRow>,
}

struct Variant {
    kind: &'static str,
    operator: Option<OperatorKind>,
    size: usize,
    dataset: ObservationDataset,
    in_signal: bool,
    in_training: bool,
    confusion: bool,
}

fn operator_label(op: Option<OperatorKind>) -> &'static str {
    op.map_or("none", OperatorKind::name)
}

fn exact_sqrt(s: usize) -> Option<usize> {
    let r = (s as f64).sqrt().round() as usize;
    (r * r == s).then_some(r)
}

fn build_variants(cfg: &RunConfig, cc: &ClassificationConfig) -> Result<Vec<Variant>> {
    let oc = &cc.observe;
    let array = cfg.array(&oc.array)?;
    let n = array.side * array.side;
    let objects = load_objects(&oc.objects, &[], oc.fill_spacing_mm)?;
    let noise = cfg.noise(oc.noise_sigma);
    let full = generate_observations(&array, &objects, &oc.perturbations, &oc.trajectory, &noise)?;
    let ts = cc.training_signal_size;
    let mut variants = Vec::new();

    let mut sizes: Vec<usize> = cc.signal_sizes.clone();
    if !cc.training_fractions.is_empty() && !sizes.contains(&ts) {
        sizes.push(ts);
    }
    for (oi, &kind) in cc.operators.iter().enumerate() {
        for &s in &sizes {
            if s == 0 || s > n {
                return Err(CliError::Config(format!("signal size {s} outside 1..={n}")));
            }
            let op = kind.build(n, s, cc.block_size, cfg.operator_seed(&[n as u64, s as u64, oi as u64]))?;
            variants.push(Variant {
                kind: "compressed",
                operator: Some(kind),
                size: s,
                dataset: full.compress(&op)?,
                in_signal: cc.signal_sizes.contains(&s),
                in_training: s == ts,
                confusion: s == ts,
            });
        }
    }
    for &s in &cc.coarse_sizes {
        let side = exact_sqrt(s)
            .filter(|&r| r <= array.side)
            .ok_or_else(|| CliError::Config(format!("coarse size {s} is not a square up to {n}")))?;
        if s == n {
            continue;
        }
        let coarse = TaxelArraySpec {
            pose: array.pose,
            ..TaxelArraySpec::new(side, array.extent_mm)?
        };
        variants.push(Variant {
            kind: "sensor",
            operator: None,
            size: s,
            dataset: generate_observations(&coarse, &objects, &oc.perturbations, &oc.trajectory, &noise)?,
            in_signal: true,
            in_training: s == ts,
            confusion: false,
        });
    }
    // The full array doubles as the largest sensor baseline and as the
    // reference for the training-size sweep.
    let full_in_signal = cc.coarse_sizes.contains(&n);
    if full_in_signal || !cc.training_fractions.is_empty() {
        variants.push(Variant {
            kind: "sensor",
            operator: None,
            size: n,
            dataset: full,
            in_signal: full_in_signal,
            in_training: true,
            confusion: true,
        });
    }
    Ok(variants)
}

/// Signal-size and training-size sweeps of DAGSVM accuracy, averaged over
/// seeded perturbation splits. Writes `signal_size.csv`,
/// `signal_size_splits.csv`, `training_size.csv`, confusion matrices and a
/// gnuplot script.
pub fn bench_classification(cfg: &RunConfig) -> Result<ClassificationReport> {
    let cc = &cfg.classification;
    if cc.splits == 0 {
        return Err(CliError::Config("need at least one split".into()));
    }
    if cc.c_grid.is_empty() || cc.c_grid.iter().any(|c| !(*c > 0.0)) {
        return Err(CliError::Config("C grid must be non-empty and positive".into()));
    }
    let count = cc.observe.perturbations.len();
    let main_splits = (0..cc.splits)
        .map(|s| split_perturbations(count, cc.dev_fraction, cc.val_fraction, cfg.split_seed(s)))
        .collect::<tactile_cs::Result<Vec<_>>>()?;
    let training_splits = cc
        .training_fractions
        .iter()
        .map(|f| {
            (0..cc.splits)
                .map(|s| split_perturbations(count, f.dev, f.val, cfg.split_seed(s)))
                .collect::<tactile_cs::Result<Vec<_>>>()
        })
        .collect::<tactile_cs::Result<Vec<_>>>()?;

    let variants = build_variants(cfg, cc)?;
    let classes = variants.first().map_or(0, |v| v.dataset.num_classes());
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut signal = Vec::new();
    let mut training = Vec::new();
    let mut split_rows = Vec::new();

    for v in &variants {
        let gram = GramMatrix::new(&v.dataset);
        if v.in_signal {
            let mut row = SignalRow {
                kind: v.kind,
                operator: v.operator,
                signal_size: v.size,
                accuracies: Vec::new(),
                chosen_c: Vec::new(),
            };
            for (si, split) in main_splits.iter().enumerate() {
                let (_, _, test) = split.observation_indices(&v.dataset);
                let cv = cross_validate_with_gram(&v.dataset, &gram, &cc.c_grid, split.clone())?;
                let acc = accuracy(&cv.model, &v.dataset, &test)?;
                if si == 0 && v.confusion {
                    let cm = confusion_matrix(&cv.model, &v.dataset, &test)?;
                    let mut header = vec!["actual".to_string()];
                    header.extend(v.dataset.class_names.iter().cloned());
                    let rows: Vec<Vec<String>> = cm
                        .iter()
                        .enumerate()
                        .map(|(a, r)| {
                            std::iter::once(v.dataset.class_names[a].clone())
                                .chain(r.iter().map(|&x| fmt_f(x)))
                                .collect()
                        })
                        .collect();
                    let h: Vec<&str> = header.iter().map(String::as_str).collect();
                    out.write_csv(
                        &format!("confusion_{}_{}_{}.csv", v.kind, operator_label(v.operator), v.size),
                        &h,
                        &rows,
                    )?;
                }
                split_rows.push(vec![
                    v.kind.to_string(),
                    operator_label(v.operator).to_string(),
                    v.size.to_string(),
                    si.to_string(),
                    fmt_f(cv.c),
                    fmt_f(acc),
                ]);
                row.accuracies.push(acc);
                row.chosen_c.push(cv.c);
            }
            signal.push(row);
        }
        if v.in_training {
            for (fraction, splits) in cc.training_fractions.iter().zip(&training_splits) {
                let mut accs = Vec::new();
                for split in splits {
                    let (_, _, test) = split.observation_indices(&v.dataset);
                    let cv = cross_validate_with_gram(&v.dataset, &gram, &cc.c_grid, split.clone())?;
                    accs.push(accuracy(&cv.model, &v.dataset, &test)?);
                }
                training.push(TrainingRow {
                    kind: v.kind,
                    operator: v.operator,
                    signal_size: v.size,
                    fraction: *fraction,
                    accuracies: accs,
                });
            }
        }
    }
    if classes > 0 {
        for &s in &cc.signal_sizes {
            signal.push(SignalRow {
                kind: "random",
                operator: None,
                signal_size: s,
                accuracies: vec![100.0 / classes as f64],
                chosen_c: Vec::new(),
            });
        }
    }

    let summary = |accs: &[f64]| {
        let (lo, hi) = min_max(accs);
        [accs.len().to_string(), fmt_f(mean(accs)), fmt_f(lo), fmt_f(hi)]
    };
    let rows: Vec<Vec<String>> = signal
        .iter()
        .map(|r| {
            let mut row = vec![
                r.kind.to_string(),
                operator_label(r.operator).into(),
                r.signal_size.to_string(),
            ];
            row.extend(summary(&r.accuracies));
            row
        })
        .collect();
    out.write_csv(
        "signal_size.csv",
        &[
            "kind",
            "operator",
            "signal_size",
            "splits",
            "mean_accuracy_pct",
            "min_accuracy_pct",
            "max_accuracy_pct",
        ],
        &rows,
    )?;
    out.write_csv(
        "signal_size_splits.csv",
        &["kind", "operator", "signal_size", "split", "c", "accuracy_pct"],
        &split_rows,
    )?;
    if !training.is_empty() {
        let rows: Vec<Vec<String>> = training
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.kind.to_string(),
                    operator_label(r.operator).into(),
                    r.signal_size.to_string(),
                    fmt_f(r.fraction.dev),
                    fmt_f(r.fraction.val),
                ];
                row.extend(summary(&r.accuracies));
                row
            })
            .collect();
        out.write_csv(
            "training_size.csv",
            &[
                "kind",
                "operator",
                "signal_size",
                "dev_fraction",
                "val_fraction",
                "splits",
                "mean_accuracy_pct",
                "min_accuracy_pct",
                "max_accuracy_pct",
            ],
            &rows,
        )?;
    }
    out.write("classification.gp", CLASSIFICATION_GNUPLOT.as_bytes())?;
    let lines = signal
        .iter()
        .map(|r| {
            format!(
                "{:<10} {:<9} size {:<5} accuracy {:6.2}%",
                r.kind,
                operator_label(r.operator),
                r.signal_size,
                r.mean()
            )
        })
        .collect();
    Ok(ClassificationReport {
        report: Report {
            manifest: out.finish("bench-classification", cfg)?,
            lines,
        },
        signal,
        training,
    })
}

const CLASSIFICATION_GNUPLOT: &str = r#"# gnuplot classification.gp
set datafile separator ','
set terminal pngcairo size 900,600
set output 'signal_size.png'
set logscale x 2
set xlabel 'signal size'
set ylabel 'accuracy (%)'
set yrange [0:100]
set key bottom right
plot 'signal_size.csv' every ::1 using (strcol(1) eq 'compressed' && strcol(2) eq 'sbhe' ? $3 : 1/0):5 with linespoints title 'compressed (sbhe)', \
     'signal_size.csv' every ::1 using (strcol(1) eq 'compressed' && strcol(2) eq 'separable' ? $3 : 1/0):5 with linespoints title 'compressed (separable)', \
     'signal_size.csv' every ::1 using (strcol(1) eq 'sensor' ? $3 : 1/0):5 with linespoints title 'sensor', \
     'signal_size.csv' every ::1 using (strcol(1) eq 'random' ? $3 : 1/0):5 with lines dashtype 2 title 'random guess'
"#;

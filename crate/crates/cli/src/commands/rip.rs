use tactile_cs::basis::SparseBasis;
use tactile_cs::linop::{DenseOperator, LinearOperator};
use tactile_cs::measurement::{mutual_coherence, rip_delta_bruteforce};
use tactile_cs::recon::SensingOperator;

use super::Report;
use crate::config::{OperatorKind, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{fmt_f, OutputDir};

#[derive(Debug, Clone, PartialEq)]
pub struct RipRow {
    pub case: String,
    pub operator: String,
    pub basis: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    /// Scaled mutual coherence with the basis; empty for the reference
    /// cases.
    pub coherence: Option<f64>,
}

impl RipRow {
    pub fn verdict(&self) -> String {
        if self.delta >= 1.0 {
            format!("fails {}-RIP", self.k)
        } else {
            "ok".into()
        }
    }
}

fn dense(op: &dyn LinearOperator) -> Result<DenseOperator> {
    Ok(DenseOperator::new(op.rows(), op.cols(), op.to_dense())?)
}

/// Brute-force restricted isometry constants for small seeded operators
/// composed with each basis, plus two reference rows: the identity
/// (delta 0) and an operator with a duplicated column (delta >= 1 at k = 2).
pub fn rip_report(cfg: &RunConfig) -> Result<(Report, Vec<RipRow>)> {
    let rc = &cfg.rip;
    let n = rc.side * rc.side;
    if rc.ks.iter().any(|&k| k == 0 || k > n) {
        return Err(CliError::Config(format!("k must lie in 1..={n}")));
    }
    let mut rows = Vec::new();
    let mut push = |case: &str, operator: &str, basis: &str, a: &DenseOperator, coherence: Option<f64>| -> Result<()> {
        for &k in &rc.ks {
            rows.push(RipRow {
                case: case.into(),
                operator: operator.into(),
                basis: basis.into(),
                m: a.rows(),
                n: a.cols(),
                k,
                delta: rip_delta_bruteforce(a, k)?,
                coherence,
            });
        }
        Ok(())
    };

    push("identity", "identity", "pixel", &DenseOperator::identity(n), None)?;

    for kind in [OperatorKind::Sbhe, OperatorKind::Separable] {
        let op = kind.build(n, rc.m, rc.block_size, cfg.operator_seed(&[n as u64, rc.m as u64]))?;
        push("seeded", kind.name(), "pixel", &dense(&op)?, None)?;
        for &b in &rc.bases {
            let basis = SparseBasis::new(b, rc.side)?;
            let a = SensingOperator::new(&op, &basis)?;
            let mu = mutual_coherence(&op, &basis)?;
            push("seeded", kind.name(), b.name(), &dense(&a)?, Some(mu))?;
        }
        if kind == OperatorKind::Sbhe {
            let mut data = op.to_dense();
            for r in 0..op.rows() {
                data[r * n + 1] = data[r * n];
            }
            let dup = DenseOperator::new(op.rows(), n, data)?;
            push("duplicated_column", kind.name(), "pixel", &dup, None)?;
        }
    }

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.case.clone(),
                r.operator.clone(),
                r.basis.clone(),
                r.m.to_string(),
                r.n.to_string(),
                r.k.to_string(),
                fmt_f(r.delta),
                r.coherence.map(fmt_f).unwrap_or_default(),
                r.verdict(),
            ]
        })
        .collect();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv(
        "rip.csv",
        &[
            "case",
            "operator",
            "basis",
            "m",
            "n",
            "k",
            "delta",
            "coherence",
            "verdict",
        ],
        &table,
    )?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "{:<17} {:<9} {:<6} {}x{} k={} delta {:.4}  {}",
                r.case,
                r.operator,
                r.basis,
                r.m,
                r.n,
                r.k,
                r.delta,
                r.verdict()
            )
        })
        .collect();
    Ok((
        Report {
            manifest: out.finish("rip-report", cfg)?,
            lines,
        },
        rows,
    ))
}

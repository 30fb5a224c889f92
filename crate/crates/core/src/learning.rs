//! Linear soft-margin SVMs, pairwise DAG multi-class classification, and
//! cross-validated model selection on (compressed) observations.
//!
//! Binary problems are solved in the dual with sequential minimal
//! optimization on a precomputed Gram matrix, using second-order working
//! set selection. The bias is unregularized, so each step moves a pair of
//! multipliers along the equality constraint.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linop::{dot, LinearOperator};
use crate::{par, rng};

pub const KKT_TOLERANCE: f64 = 1e-6;
const TAU: f64 = 1e-12;

/// Default C grid: `2^-5, 2^-3, ..., 2^9`.
pub fn default_c_grid() -> Vec<f64> {
    (-5..=9).step_by(2).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub features: Vec<f64>,
    pub label: usize,
    /// Index into the perturbation grid the observation was taken at.
    pub perturbation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationDataset {
    pub class_names: Vec<String>,
    pub feature_dim: usize,
    pub observations: Vec<Observation>,
}

impl ObservationDataset {
    pub fn new(class_names: Vec<String>, feature_dim: usize) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::InvalidParameter("dataset needs at least one class".into()));
        }
        Ok(Self {
            class_names,
            feature_dim,
            observations: Vec::new(),
        })
    }

    pub fn push(&mut self, features: Vec<f64>, label: usize, perturbation: usize) -> Result<()> {
        check_len(self.feature_dim, features.len())?;
        if label >= self.class_names.len() {
            return Err(Error::InvalidParameter(format!(
                "label {label} out of range for {} classes",
                self.class_names.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.observations.push(Observation {
            features,
            label,
            perturbation,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// One more than the largest perturbation index.
    pub fn perturbation_count(&self) -> usize {
        self.observations.iter().map(|o| o.perturbation + 1).max().unwrap_or(0)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.label).collect()
    }

    /// Apply `op` to every feature vector, e.g. a measurement operator.
    pub fn compress(&self, op: &dyn LinearOperator) -> Result<Self> {
        check_len(op.cols(), self.feature_dim)?;
        let feats = par::try_map_range(self.len(), |i| op.apply(&self.observations[i].features))?;
        Ok(Self {
            class_names: self.class_names.clone(),
            feature_dim: op.rows(),
            observations: self
                .observations
                .iter()
                .zip(feats)
                .map(|(o, features)| Observation {
                    features,
                    label: o.label,
                    perturbation: o.perturbation,
                })
                .collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for o in &self.observations {
            check_len(self.feature_dim, o.features.len())?;
            if o.label >= self.class_names.len() {
                return Err(Error::InvalidParameter(format!("label {} out of range", o.label)));
            }
        }
        Ok(())
    }
}

/// Dense symmetric Gram matrix `K[i][j] = <x_i, x_j>` over a dataset.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn new(dataset: &ObservationDataset) -> Self {
        let feats: Vec<&[f64]> = dataset.observations.iter().map(|o| o.features.as_slice()).collect();
        Self::from_rows(&feats)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        par::for_each_row_mut(&mut data, n.max(1), |i, row| {
            for j in 0..=i {
                row[j] = dot(rows[i], rows[j]);
            }
        });
        for i in 0..n {
            for j in i + 1..n {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Dense sub-matrix over `idx`, row-major.
    pub fn subset(&self, idx: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out.extend(idx.iter().map(|&j| row[j]));
        }
        out
    }
}

/// Result of the dual solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// `0.5 a^T Q a - sum(a)`, the minimized dual objective.
    pub dual_objective: f64,
}

/// SMO on `min 0.5 a^T Q a - e^T a` with `0 <= a <= C`, `y^T a = 0`, where
/// `Q[i][j] = y_i y_j K[i][j]` and `kernel` is row-major `n x n`.
///
/// Stops when the maximal KKT violation drops below `tol`. `alpha0`, if
/// given, must be feasible.
pub fn smo_solve(kernel: &[f64], y: &[f64], c: f64, alpha0: Option<Vec<f64>>, tol: f64) -> Result<DualSolution> {
    let n = y.len();
    check_len(n * n, kernel.len())?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("C must be > 0, got {c}")));
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = match alpha0 {
        Some(a) => {
            check_len(n, a.len())?;
            a
        }
        None => vec![0.0; n],
    };
    // G = Q a - e
    let mut grad = vec![-1.0; n];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj != 0.0 {
            for (i, g) in grad.iter_mut().enumerate() {
                *g += y[i] * y[j] * k(i, j) * aj;
            }
        }
    }
    let qd: Vec<f64> = (0..n).map(|i| k(i, i)).collect();
    let max_iter = 10_000_000usize.max(100 * n);
    let mut iter = 0;
    loop {
        // working set: i maximizes -y G over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut wi = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                wi = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut wj = usize::MAX;
        let mut best = f64::INFINITY;
        if wi != usize::MAX {
            for t in 0..n {
                let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let v = y[t] * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let diff = gmax + v;
                if diff > 0.0 {
                    let mut quad = qd[wi] + qd[t] - 2.0 * k(wi, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(diff * diff) / quad;
                    if obj <= best {
                        best = obj;
                        wj = t;
                    }
                }
            }
        }
        if gmax + gmax2 < tol || wj == usize::MAX {
            break;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence(max_iter));
        }
        let (i, j) = (wi, wj);
        let (oi, oj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - oi, alpha[j] - oj);
        let (yi_di, yj_dj) = (y[i] * di, y[j] * dj);
        let (ri, rj) = (&kernel[i * n..(i + 1) * n], &kernel[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += y[t] * (ri[t] * yi_di + rj[t] * yj_dj);
        }
    }
    // bias from free multipliers, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum += yg;
            free += 1;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    let dual_objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    Ok(DualSolution {
        alpha,
        bias: -rho,
        iterations: iter,
        dual_objective,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Indices (into the training data) with non-zero multipliers.
    pub support_vectors: Vec<usize>,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// `0.5 ||w||^2 + C sum(hinge)` over the given data.
    pub fn primal_objective(&self, xs: &[&[f64]], labels: &[f64]) -> f64 {
        let hinge: f64 = xs
            .iter()
            .zip(labels)
            .map(|(x, l)| (1.0 - l * self.decision(x)).max(0.0))
            .sum();
        0.5 * dot(&self.weights, &self.weights) + self.c * hinge
    }
}

fn binary_labels(labels: &[f64]) -> Result<()> {
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::InvalidParameter("binary labels must be +1 or -1".into()));
    }
    Ok(())
}

fn model_from_dual(xs: &[&[f64]], y: &[f64], c: f64, sol: &DualSolution) -> LinearSvmModel {
    let dim = xs.first().map_or(0, |x| x.len());
    let mut w = vec![0.0; dim];
    let mut svs = Vec::new();
    for (i, (&a, x)) in sol.alpha.iter().zip(xs).enumerate() {
        if a > 0.0 {
            svs.push(i);
            for (wk, xk) in w.iter_mut().zip(*x) {
                *wk += a * y[i] * xk;
            }
        }
    }
    LinearSvmModel {
        weights: w,
        bias: sol.bias,
        c,
        support_vectors: svs,
    }
}

/// Train a soft-margin linear SVM. Labels are `+1` / `-1`.
pub fn svm_train(xs: &[&[f64]], labels: &[f64], c: f64) -> Result<LinearSvmModel> {
    check_len(xs.len(), labels.len())?;
    binary_labels(labels)?;
    if let Some(first) = xs.first() {
        for x in xs {
            check_len(first.len(), x.len())?;
        }
    }
    let gram = GramMatrix::from_rows(xs);
    let sol = smo_solve(&gram.data, labels, c, None, KKT_TOLERANCE)?;
    Ok(model_from_dual(xs, labels, c, &sol))
}

/// `(label, decision value)`; a zero decision value predicts `+1`.
pub fn svm_predict(model: &LinearSvmModel, x: &[f64]) -> Result<(i8, f64)> {
    check_len(model.weights.len(), x.len())?;
    let v = model.decision(x);
    Ok((if v >= 0.0 { 1 } else { -1 }, v))
}

/// Mean of `max(0, 1 - l (w^T x + b))`.
pub fn hinge_loss(model: &LinearSvmModel, xs: &[&[f64]], labels: &[f64]) -> Result<f64> {
    check_len(xs.len(), labels.len())?;
    if xs.is_empty() {
        return Err(Error::InvalidParameter("hinge loss of empty data".into()));
    }
    let mut total = 0.0;
    for (x, l) in xs.iter().zip(labels) {
        let (_, v) = svm_predict(model, x)?;
        total += (1.0 - l * v).max(0.0);
    }
    Ok(total / xs.len() as f64)
}

/// Pairwise model for classes `a < b`; `b` is the `+1` side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub a: usize,
    pub b: usize,
    pub model: LinearSvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagSvmModel {
    pub class_names: Vec<String>,
    /// All pairs `a < b`, ordered lexicographically.
    pub pairs: Vec<PairModel>,
}

pub fn pair_index(a: usize, b: usize, m: usize) -> usize {
    debug_assert!(a < b && b < m);
    a * m - a * (a + 1) / 2 + (b - a - 1)
}

/// Outcome of one DAG classification with its evaluation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DagTrace {
    pub label: usize,
    pub evaluations: usize,
    pub eliminated: Vec<usize>,
}

impl DagSvmModel {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.model.weights.len())
    }

    pub fn pair(&self, a: usize, b: usize) -> &PairModel {
        &self.pairs[pair_index(a, b, self.num_classes())]
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_classes();
        if m < 2 || self.pairs.len() != m * (m - 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "{} classes need {} pair models, found {}",
                m,
                m * m.saturating_sub(1) / 2,
                self.pairs.len()
            )));
        }
        let d = self.feature_dim();
        for (k, p) in self.pairs.iter().enumerate() {
            if p.a >= p.b || p.b >= m || pair_index(p.a, p.b, m) != k {
                return Err(Error::InvalidParameter(format!("pair model {k} is out of order")));
            }
            check_len(d, p.model.weights.len())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Tournament over the surviving extreme classes; exactly `M - 1`
/// evaluations.
pub fn dagsvm_classify_traced(model: &DagSvmModel, x: &[f64]) -> Result<DagTrace> {
    check_len(model.feature_dim(), x.len())?;
    let (mut lo, mut hi) = (0, model.num_classes() - 1);
    let mut evaluations = 0;
    let mut eliminated = Vec::with_capacity(hi);
    while lo < hi {
        let p = model.pair(lo, hi);
        evaluations += 1;
        if p.model.decision(x) >= 0.0 {
            eliminated.push(lo);
            lo += 1;
        } else {
            eliminated.push(hi);
            hi -= 1;
        }
    }
    Ok(DagTrace {
        label: lo,
        evaluations,
        eliminated,
    })
}

pub fn dagsvm_classify(model: &DagSvmModel, x: &[f64]) -> Result<usize> {
    Ok(dagsvm_classify_traced(model, x)?.label)
}

fn class_members(dataset: &ObservationDataset, idx: &[usize]) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); dataset.num_classes()];
    for &i in idx {
        by_class[dataset.observations[i].label].push(i);
    }
    by_class
}

/// Train every pair on the observations `idx` for each C in ascending
/// `c_grid`, warm-starting each C from the previous multipliers. Returns
/// `models[c][pair]`.
pub fn train_pairs_over_grid(
    dataset: &ObservationDataset,
    gram: &GramMatrix,
    idx: &[usize],
    c_grid: &[f64],
) -> Result<Vec<Vec<PairModel>>> {
    let m = dataset.num_classes();
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    if c_grid.is_empty() || c_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "C grid must be non-empty and strictly ascending".into(),
        ));
    }
    check_len(dataset.len(), gram.len())?;
    let by_class = class_members(dataset, idx);
    if let Some(k) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(dataset.class_names[k].clone()));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let per_pair = par::try_map_range(pairs.len(), |p| {
        let (a, b) = pairs[p];
        let members: Vec<usize> = by_class[a].iter().chain(&by_class[b]).copied().collect();
        let y: Vec<f64> = members
            .iter()
            .map(|&i| if dataset.observations[i].label == b { 1.0 } else { -1.0 })
            .collect();
        let xs: Vec<&[f64]> = members
            .iter()
            .map(|&i| dataset.observations[i].features.as_slice())
            .collect();
        let kernel = gram.subset(&members);
        let mut alpha: Option<Vec<f64>> = None;
        let mut prev_c = 0.0;
        let mut out = Vec::with_capacity(c_grid.len());
        for &c in c_grid {
            let start = alpha.take().map(|a| a.into_iter().map(|v| v * c / prev_c).collect());
            let sol = smo_solve(&kernel, &y, c, start, KKT_TOLERANCE)?;
            let mut model = model_from_dual(&xs, &y, c, &sol);
            model.support_vectors = model.support_vectors.iter().map(|&k| members[k]).collect();
            out.push(PairModel { a, b, model });
            alpha = Some(sol.alpha);
            prev_c = c;
        }
        Ok::<_, Error>(out)
    })?;
    Ok((0..c_grid.len())
        .map(|ci| per_pair.iter().map(|v| v[ci].clone()).collect())
        .collect())
}

/// One binary SVM per unordered class pair.
pub fn dagsvm_train(dataset: &ObservationDataset, c: f64) -> Result<DagSvmModel> {
    dataset.validate()?;
    let gram = GramMatrix::new(dataset);
    let all: Vec<usize> = (0..dataset.len()).collect();
    dagsvm_train_with_gram(dataset, &gram, &all, c)
}

pub fn dagsvm_train_with_gram(
    dataset: &ObservationDataset,
    gram: &GramMatrix,
    idx: &[usize],
    c: f64,
) -> Result<DagSvmModel> {
    let mut models = train_pairs_over_grid(dataset, gram, idx, &[c])?;
    Ok(DagSvmModel {
        class_names: dataset.class_names.clone(),
        pairs: models.pop().unwrap_or_default(),
    })
}

/// Perturbation indices assigned to development, validation and test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub dev: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Observation indices per part: `(dev, val, test)`.
    pub fn observation_indices(&self, dataset: &ObservationDataset) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let p = dataset.perturbation_count();
        let mut part = vec![3u8; p];
        for (tag, set) in [(0u8, &self.dev), (1, &self.val), (2, &self.test)] {
            for &k in set {
                if k < p {
                    part[k] = tag;
                }
            }
        }
        let (mut d, mut v, mut t) = (Vec::new(), Vec::new(), Vec::new());
        for (i, o) in dataset.observations.iter().enumerate() {
            match part[o.perturbation] {
                0 => d.push(i),
                1 => v.push(i),
                2 => t.push(i),
                _ => {}
            }
        }
        (d, v, t)
    }
}

/// Shuffle perturbations with `seed` and cut `round(fraction * count)` for
/// development and validation; the rest is the test set.
pub fn split_perturbations(count: usize, dev_fraction: f64, val_fraction: f64, seed: u64) -> Result<Split> {
    let ok = |f: f64| f > 0.0 && f <= 1.0;
    if !ok(dev_fraction) || !ok(val_fraction) || dev_fraction + val_fraction > 1.0 + 1e-12 {
        return Err(Error::DegenerateSplit(format!(
            "fractions dev {dev_fraction}, val {val_fraction} must be positive with sum <= 1"
        )));
    }
    let n_dev = (dev_fraction * count as f64).round() as usize;
    let n_val = (val_fraction * count as f64).round() as usize;
    if n_dev == 0 || n_val == 0 || n_dev + n_val > count {
        return Err(Error::DegenerateSplit(format!(
            "{count} perturbations give {n_dev} development and {n_val} validation"
        )));
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng::rng_for(seed, &[0x5017]));
    let mut dev = order[..n_dev].to_vec();
    let mut val = order[n_dev..n_dev + n_val].to_vec();
    let mut test = order[n_dev + n_val..].to_vec();
    dev.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { dev, val, test })
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub model: DagSvmModel,
    pub c: f64,
    pub validation_accuracy: f64,
    pub split: Split,
}

pub fn accuracy(model: &DagSvmModel, dataset: &ObservationDataset, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::InvalidParameter("accuracy of an empty set".into()));
    }
    let hits = par::try_map_range(idx.len(), |k| {
        let o = &dataset.observations[idx[k]];
        Ok::<_, Error>((dagsvm_classify(model, &o.features)? == o.label) as usize)
    })?;
    Ok(100.0 * hits.iter().sum::<usize>() as f64 / idx.len() as f64)
}

/// Pick C on the validation set, then retrain on development plus
/// validation. Ties go to the smaller C.
pub fn cross_validate(
    dataset: &ObservationDataset,
    c_grid: &[f64],
    dev_fraction: f64,
    val_fraction: f64,
    split_seed: u64,
) -> Result<CvOutcome> {
    dataset.validate()?;
    let split = split_perturbations(dataset.perturbation_count(), dev_fraction, val_fraction, split_seed)?;
    let gram = GramMatrix::new(dataset);
    cross_validate_with_gram(dataset, &gram, c_grid, split)
}

pub fn cross_validate_with_gram(
    dataset: &ObservationDataset,
    gram: &GramMatrix,
    c_grid: &[f64],
    split: Split,
) -> Result<CvOutcome> {
    let mut grid = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (dev, val, _) = split.observation_indices(dataset);
    if dev.is_empty() || val.is_empty() {
        return Err(Error::DegenerateSplit("development or validation set is empty".into()));
    }
    let per_c = train_pairs_over_grid(dataset, gram, &dev, &grid)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (ci, pairs) in per_c.into_iter().enumerate() {
        let model = DagSvmModel {
            class_names: dataset.class_names.clone(),
            pairs,
        };
        let acc = accuracy(&model, dataset, &val)?;
        if acc > best.0 {
            best = (acc, ci);
        }
    }
    let c = grid[best.1];
    let mut train: Vec<usize> = dev.into_iter().chain(val).collect();
    train.sort_unstable();
    let model = dagsvm_train_with_gram(dataset, gram, &train, c)?;
    Ok(CvOutcome {
        model,
        c,
        validation_accuracy: best.0,
        split,
    })
}

/// Row-normalized confusion matrix in percent: entry `(actual, predicted)`.
/// Rows of classes absent from `idx` are all zero.
pub fn confusion_matrix(model: &DagSvmModel, dataset: &ObservationDataset, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    if idx.is_empty() {
        return Err(Error::InvalidParameter("confusion matrix of an empty set".into()));
    }
    let m = model.num_classes();
    let preds = par::try_map_range(idx.len(), |k| {
        dagsvm_classify(model, &dataset.observations[idx[k]].features)
    })?;
    let mut counts = vec![vec![0usize; m]; m];
    for (&i, p) in idx.iter().zip(preds) {
        counts[dataset.observations[i].label][p] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.into_iter()
                .map(|v| {
                    if total == 0 {
                        0.0
                    } else {
                        100.0 * v as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect())
}

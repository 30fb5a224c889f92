//! Basis pursuit denoising by FISTA, with warm starts across a frame stream.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::SparseBasis;
use crate::error::{check_len, Error, Result};
use crate::frame::{psnr, TactileFrame, FORCE_MAX};
use crate::linop::{combinations, dot, norm2, DenseOperator, LinearOperator};
use crate::rng;

pub const DEFAULT_LAMBDA_SBHE: f64 = 0.1;
pub const DEFAULT_LAMBDA_SEPARABLE: f64 = 1.0;
pub const DEFAULT_ITERATIONS: usize = 20;
pub const ITERATION_PRESETS: [usize; 3] = [20, 10, 5];

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 10_000;
const POWER_SEED: u64 = 0x9e37_79b9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub lambda: f64,
    pub iterations: usize,
    /// Lipschitz constant of the data-term gradient, `2 * lambda_max(A^T A)`.
    pub stepsize_l: f64,
    pub warm_start: bool,
}

impl ReconstructionConfig {
    pub fn new(lambda: f64, iterations: usize, stepsize_l: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            iterations,
            stepsize_l,
            warm_start: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cold(mut self) -> Self {
        self.warm_start = false;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.stepsize_l > 0.0) || !self.stepsize_l.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stepsize L must be > 0, got {}",
                self.stepsize_l
            )));
        }
        Ok(())
    }
}

/// Solver state threaded through a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionState {
    estimate: Vec<f64>,
    aux: Vec<f64>,
    t: f64,
}

impl ReconstructionState {
    pub fn new(p: usize) -> Self {
        Self {
            estimate: vec![0.0; p],
            aux: vec![0.0; p],
            t: 1.0,
        }
    }

    pub fn reset(&mut self) {
        self.estimate.iter_mut().for_each(|v| *v = 0.0);
        self.aux.iter_mut().for_each(|v| *v = 0.0);
        self.t = 1.0;
    }

    /// Keep the estimate but drop accumulated momentum.
    pub fn restart_momentum(&mut self) {
        self.aux.copy_from_slice(&self.estimate);
        self.t = 1.0;
    }

    pub fn len(&self) -> usize {
        self.estimate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimate.is_empty()
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    pub fn momentum(&self) -> f64 {
        self.t
    }
}

/// The composed operator `A = Phi Psi` acting on basis coefficients.
pub struct SensingOperator<'a> {
    phi: &'a dyn LinearOperator,
    basis: &'a SparseBasis,
}

impl<'a> SensingOperator<'a> {
    pub fn new(phi: &'a dyn LinearOperator, basis: &'a SparseBasis) -> Result<Self> {
        check_len(phi.cols(), basis.len())?;
        Ok(Self { phi, basis })
    }
}

impl LinearOperator for SensingOperator<'_> {
    fn rows(&self) -> usize {
        self.phi.rows()
    }

    fn cols(&self) -> usize {
        self.basis.len()
    }

    fn apply_into(&self, s: &[f64], out: &mut [f64]) {
        let mut x = s.to_vec();
        self.basis.synthesize_in_place(&mut x);
        self.phi.apply_into(&x, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.phi.adjoint_into(y, out);
        self.basis.analyze_in_place(out);
    }
}

/// `2 * lambda_max(A^T A)` by power iteration from a fixed seeded start.
pub fn calibrate_stepsize(a: &dyn LinearOperator) -> Result<f64> {
    let p = a.cols();
    if p == 0 || a.rows() == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let mut rng = rng::rng_from(POWER_SEED);
    let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; p];
    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITER {
        a.apply_into(&v, &mut av);
        a.adjoint_into(&av, &mut w);
        let lam = norm2(&w);
        if !lam.is_finite() {
            return Err(Error::NonFinite);
        }
        if lam == 0.0 {
            return Err(Error::InvalidParameter("operator annihilates the start vector".into()));
        }
        if (lam - prev).abs() <= POWER_TOL * lam {
            return Ok(2.0 * lam);
        }
        prev = lam;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / lam;
        }
    }
    Err(Error::NoConvergence(POWER_MAX_ITER))
}

pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `0.5 ||A s - y||^2 + lambda ||s||_1`.
pub fn bpdn_objective(a: &dyn LinearOperator, y: &[f64], s: &[f64], lambda: f64) -> Result<f64> {
    let r = a.apply(s)?;
    check_len(r.len(), y.len())?;
    let fit: f64 = r.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * fit + lambda * s.iter().map(|v| v.abs()).sum::<f64>())
}

/// Run exactly `config.iterations` FISTA steps on the BPDN objective.
///
/// With `warm_start` the iteration continues from `state`; otherwise the
/// state is reset first. Returns the new coefficient estimate, which is also
/// left in `state`.
pub fn fista_bpdn(
    y: &[f64],
    a: &dyn LinearOperator,
    config: &ReconstructionConfig,
    state: &mut ReconstructionState,
) -> Result<Vec<f64>> {
    config.validate()?;
    let (m, p) = (a.rows(), a.cols());
    check_len(m, y.len())?;
    check_len(p, state.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !config.warm_start {
        state.reset();
    }
    let step = 1.0 / config.stepsize_l;
    let tau = config.lambda * step;
    let mut resid = vec![0.0; m];
    let mut grad = vec![0.0; p];
    let mut prev = vec![0.0; p];
    for _ in 0..config.iterations {
        a.apply_into(&state.aux, &mut resid);
        for (r, yi) in resid.iter_mut().zip(y) {
            *r -= yi;
        }
        a.adjoint_into(&resid, &mut grad);
        std::mem::swap(&mut prev, &mut state.estimate);
        for ((x, z), g) in state.estimate.iter_mut().zip(&state.aux).zip(&grad) {
            *x = soft_threshold(z - step * g, tau);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * state.t * state.t).sqrt());
        let beta = (state.t - 1.0) / t_next;
        for ((z, x), xp) in state.aux.iter_mut().zip(&state.estimate).zip(&prev) {
            *z = x + beta * (x - xp);
        }
        state.t = t_next;
    }
    if state.estimate.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(state.estimate.clone())
}

/// Recover one frame: FISTA in the basis, synthesize, clamp negatives to 0.
pub fn reconstruct_frame(
    y: &[f64],
    phi: &dyn LinearOperator,
    basis: &SparseBasis,
    config: &ReconstructionConfig,
    state: &mut ReconstructionState,
    timestamp_ms: u64,
) -> Result<TactileFrame> {
    let a = SensingOperator::new(phi, basis)?;
    let mut x = fista_bpdn(y, &a, config, state)?;
    basis.synthesize_in_place(&mut x);
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    TactileFrame::new(basis.side(), x, timestamp_ms)
}

/// One row of the per-frame timing/quality report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub iterations: usize,
    pub wall_ms: f64,
    pub psnr_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StreamOutput {
    pub frames: Vec<TactileFrame>,
    pub records: Vec<FrameRecord>,
}

impl StreamOutput {
    pub fn mean_psnr(&self) -> Option<f64> {
        let vals: Vec<f64> = self.records.iter().filter_map(|r| r.psnr_db).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn mean_wall_ms(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.wall_ms).sum::<f64>() / self.records.len() as f64
    }
}

/// Reconstruct a sequence of measurement vectors in order, threading the
/// solver state. `truth`, when given, must be aligned with `measurements`
/// and is used for the PSNR column. Timestamps come from `truth` or are the
/// frame index.
pub fn stream_reconstruct(
    measurements: &[Vec<f64>],
    phi: &dyn LinearOperator,
    basis: &SparseBasis,
    config: &ReconstructionConfig,
    truth: Option<&[TactileFrame]>,
) -> Result<StreamOutput> {
    if let Some(t) = truth {
        check_len(measurements.len(), t.len())?;
    }
    let mut state = ReconstructionState::new(basis.len());
    let mut frames = Vec::with_capacity(measurements.len());
    let mut records = Vec::with_capacity(measurements.len());
    for (i, y) in measurements.iter().enumerate() {
        let ts = truth.map_or(i as u64, |t| t[i].timestamp_ms);
        let start = Instant::now();
        state.restart_momentum();
        let frame = reconstruct_frame(y, phi, basis, config, &mut state, ts)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let psnr_db = match truth {
            Some(t) => Some(psnr(&frame, &t[i], FORCE_MAX)?),
            None => None,
        };
        records.push(FrameRecord {
            frame_index: i,
            iterations: config.iterations,
            wall_ms,
            psnr_db,
        });
        frames.push(frame);
    }
    Ok(StreamOutput { frames, records })
}

/// Reconstruct frames independently (cold start), in parallel when enabled.
pub fn reconstruct_independent(
    measurements: &[Vec<f64>],
    phi: &dyn LinearOperator,
    basis: &SparseBasis,
    config: &ReconstructionConfig,
) -> Result<Vec<TactileFrame>> {
    let cfg = config.cold();
    crate::par::try_map_range(measurements.len(), |i| {
        let mut state = ReconstructionState::new(basis.len());
        reconstruct_frame(&measurements[i], phi, basis, &cfg, &mut state, i as u64)
    })
}

pub const L0_MAX_COLUMNS: usize = 20;
pub const L0_MAX_SPARSITY: usize = 3;
const L0_EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct L0Solution {
    pub coeffs: Vec<f64>,
    pub support: Vec<usize>,
    pub residual: f64,
}

/// Exhaustive sparsest solution of `A s = y` over supports of size
/// `0..=k_max`.
///
/// Returns the first support (by size, then lexicographically) whose
/// least-squares residual is at most `1e-9`, or the minimum-residual
/// support of size `k_max` when none fits exactly.
pub fn l0_oracle(y: &[f64], a: &DenseOperator, k_max: usize) -> Result<L0Solution> {
    let (m, p) = (a.rows(), a.cols());
    if p > L0_MAX_COLUMNS {
        return Err(Error::TooLarge {
            size: p,
            limit: L0_MAX_COLUMNS,
        });
    }
    if k_max > L0_MAX_SPARSITY {
        return Err(Error::TooLarge {
            size: k_max,
            limit: L0_MAX_SPARSITY,
        });
    }
    check_len(m, y.len())?;
    let ynorm = norm2(y);
    if ynorm <= L0_EXACT_TOL {
        return Ok(L0Solution {
            coeffs: vec![0.0; p],
            support: Vec::new(),
            residual: ynorm,
        });
    }
    let yv = DVector::from_column_slice(y);
    let mut best: Option<L0Solution> = None;
    for k in 1..=k_max.min(p) {
        for support in combinations(p, k) {
            let sub = DMatrix::from_fn(m, k, |i, j| a.get(i, support[j]));
            let Ok(sol) = sub.clone().svd(true, true).solve(&yv, 1e-12) else {
                continue;
            };
            let residual = (&sub * &sol - &yv).norm();
            let mut coeffs = vec![0.0; p];
            for (j, &c) in support.iter().enumerate() {
                coeffs[c] = sol[j];
            }
            let cand = L0Solution {
                coeffs,
                support,
                residual,
            };
            if residual <= L0_EXACT_TOL {
                return Ok(cand);
            }
            if k == k_max && best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(cand);
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("k_max must be >= 1 for a non-zero y".into()))
}

/// Indices whose magnitude exceeds `tol`.
pub fn support_of(s: &[f64], tol: f64) -> Vec<usize> {
    s.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(i, _)| i)
        .collect()
}

// Used by the objective checks below and the acceptance harness.
#[doc(hidden)]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[doc(hidden)]
pub fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use crate::measurement::SbheOperator;
    use rand::Rng;

    fn cfg(lambda: f64, iterations: usize, l: f64) -> ReconstructionConfig {
        ReconstructionConfig::new(lambda, iterations, l).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ReconstructionConfig::new(-1.0, 20, 1.0).is_err());
        assert!(ReconstructionConfig::new(0.1, 0, 1.0).is_err());
        assert!(ReconstructionConfig::new(0.1, 20, 0.0).is_err());
    }

    #[test]
    fn stepsize_examples() {
        let d = DenseOperator::diagonal(&[1.0, 2.0]);
        assert!((calibrate_stepsize(&d).unwrap() - 8.0).abs() < 1e-4);
        let id = DenseOperator::identity(5);
        assert!((calibrate_stepsize(&id).unwrap() - 2.0).abs() < 1e-12);
        let phi = SbheOperator::new(256, 256, 32, 3).unwrap();
        let basis = SparseBasis::new(BasisKind::Haar2, 16).unwrap();
        let a = SensingOperator::new(&phi, &basis).unwrap();
        assert!((calibrate_stepsize(&a).unwrap() - 64.0).abs() < 1e-6);
        let zero = DenseOperator::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(calibrate_stepsize(&zero).is_err());
    }

    #[test]
    fn identity_examples() {
        let id = DenseOperator::identity(2);
        let mut st = ReconstructionState::new(2);
        let s = fista_bpdn(&[2.0, 0.5], &id, &cfg(1.0, 200, 2.0), &mut st).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-10 && s[1].abs() < 1e-12);
        let mut st = ReconstructionState::new(2);
        let s = fista_bpdn(&[2.0, -0.5], &id, &cfg(0.0, 200, 2.0), &mut st).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-10 && (s[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn input_errors() {
        let id = DenseOperator::identity(2);
        let mut st = ReconstructionState::new(2);
        let c = cfg(0.1, 5, 2.0);
        assert!(fista_bpdn(&[1.0], &id, &c, &mut st).is_err());
        assert!(matches!(
            fista_bpdn(&[f64::NAN, 0.0], &id, &c, &mut st),
            Err(Error::NonFinite)
        ));
        let mut wrong = ReconstructionState::new(3);
        assert!(fista_bpdn(&[1.0, 0.0], &id, &c, &mut wrong).is_err());
    }

    #[test]
    fn orthonormal_converges_to_shrinkage() {
        let mut rng = crate::rng::rng_from(5);
        let basis = SparseBasis::new(BasisKind::D4, 8).unwrap();
        let y: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.3;
        let mut st = ReconstructionState::new(64);
        let s = fista_bpdn(&y, &basis, &cfg(lambda, 300, 2.0), &mut st).unwrap();
        let aty = basis.adjoint(&y).unwrap();
        for (si, a) in s.iter().zip(&aty) {
            assert!((si - soft_threshold(*a, lambda)).abs() < 1e-8);
        }
    }

    fn random_problem(seed: u64) -> (DenseOperator, Vec<f64>) {
        let mut rng = crate::rng::rng_from(seed);
        let (m, p) = (8, 14);
        let data = (0..m * p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseOperator::new(m, p, data).unwrap();
        let y = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        (a, y)
    }

    #[test]
    fn objective_bound_holds() {
        for seed in 0..20 {
            let (a, y) = random_problem(seed);
            let lambda = 0.05;
            let l = calibrate_stepsize(&a).unwrap();
            let mut st = ReconstructionState::new(14);
            let s_star = fista_bpdn(&y, &a, &cfg(lambda, 10_000, l), &mut st).unwrap();
            let f_star = bpdn_objective(&a, &y, &s_star, lambda).unwrap();
            for kappa in [1usize, 5, 20, 100] {
                let mut st = ReconstructionState::new(14);
                let s = fista_bpdn(&y, &a, &cfg(lambda, kappa, l), &mut st).unwrap();
                let f = bpdn_objective(&a, &y, &s, lambda).unwrap();
                let bound = 2.0 * l * sq_norm(&s_star) / ((kappa + 1) as f64).powi(2);
                assert!(f - f_star <= bound + 1e-12, "seed {seed} kappa {kappa}");
            }
        }
    }

    #[test]
    fn warm_start_split_matches_long_run() {
        for seed in 0..5 {
            let (a, y) = random_problem(100 + seed);
            let l = calibrate_stepsize(&a).unwrap();
            let c = cfg(0.05, 7, l);
            let mut st = ReconstructionState::new(14);
            fista_bpdn(&y, &a, &c, &mut st).unwrap();
            let twice = fista_bpdn(&y, &a, &c, &mut st).unwrap();
            let mut st = ReconstructionState::new(14);
            let long = fista_bpdn(&y, &a, &c.with_iterations(14), &mut st).unwrap();
            let f_twice = bpdn_objective(&a, &y, &twice, 0.05).unwrap();
            let f_long = bpdn_objective(&a, &y, &long, 0.05).unwrap();
            assert!(f_twice <= f_long + 1e-12);
        }
    }

    #[test]
    fn cold_start_is_independent_of_history() {
        let (a, y) = random_problem(7);
        let (_, y2) = random_problem(8);
        let c = cfg(0.05, 10, calibrate_stepsize(&a).unwrap()).cold();
        let mut st = ReconstructionState::new(14);
        let first = fista_bpdn(&y, &a, &c, &mut st).unwrap();
        fista_bpdn(&y2, &a, &c, &mut st).unwrap();
        let again = fista_bpdn(&y, &a, &c, &mut st).unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn zero_measurement_gives_zero_frame() {
        let phi = SbheOperator::new(64, 16, 8, 1).unwrap();
        let basis = SparseBasis::new(BasisKind::Haar2, 8).unwrap();
        let a = SensingOperator::new(&phi, &basis).unwrap();
        let c = cfg(0.1, 20, calibrate_stepsize(&a).unwrap());
        let mut st = ReconstructionState::new(64);
        let f = reconstruct_frame(&[0.0; 16], &phi, &basis, &c, &mut st, 3).unwrap();
        assert!(f.forces().iter().all(|&v| v == 0.0));
        assert_eq!(f.timestamp_ms, 3);
    }

    #[test]
    fn frames_are_non_negative_and_stream_refines() {
        let mut rng = crate::rng::rng_from(12);
        let phi = SbheOperator::new(256, 96, 16, 4).unwrap();
        let basis = SparseBasis::new(BasisKind::Haar2, 16).unwrap();
        let a = SensingOperator::new(&phi, &basis).unwrap();
        let c = cfg(1e-3, 5, calibrate_stepsize(&a).unwrap());
        let mut x = vec![0.0; 256];
        for _ in 0..12 {
            x[rng.random_range(0..256)] = rng.random_range(0.001..0.02);
        }
        let truth = TactileFrame::new(16, x.clone(), 0).unwrap();
        let y = phi.apply(&x).unwrap();
        let ys = vec![y; 6];
        let truths: Vec<_> = (0..6).map(|t| TactileFrame::new(16, x.clone(), t).unwrap()).collect();
        let out = stream_reconstruct(&ys, &phi, &basis, &c, Some(&truths)).unwrap();
        assert!(out.frames.iter().all(|f| f.forces().iter().all(|&v| v >= 0.0)));
        let p: Vec<f64> = out.records.iter().map(|r| r.psnr_db.unwrap()).collect();
        for w in p.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{p:?}");
        }
        let cold = reconstruct_independent(&ys, &phi, &basis, &c).unwrap();
        let mut st = ReconstructionState::new(256);
        let single = reconstruct_frame(&ys[0], &phi, &basis, &c.cold(), &mut st, 0).unwrap();
        assert!(cold.iter().all(|f| f.forces() == single.forces()));
        assert!(psnr(&single, &truth, FORCE_MAX).unwrap().is_finite());
    }

    #[test]
    fn l0_examples() {
        let mut rng = crate::rng::rng_from(31);
        let data = (0..10 * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseOperator::new(10, 16, data).unwrap();
        let zero = l0_oracle(&[0.0; 10], &a, 2).unwrap();
        assert!(zero.support.is_empty() && zero.coeffs.iter().all(|&v| v == 0.0));
        let col = a.column(6);
        let one = l0_oracle(&col, &a, 2).unwrap();
        assert_eq!(one.support, vec![6]);
        assert!((one.coeffs[6] - 1.0).abs() < 1e-9);
        let mut s = vec![0.0; 16];
        s[2] = 1.5;
        s[11] = -0.75;
        let y = a.apply(&s).unwrap();
        let two = l0_oracle(&y, &a, 3).unwrap();
        assert_eq!(two.support, vec![2, 11]);
        assert!(distance(&two.coeffs, &s) < 1e-9);
        // no other 2-support fits exactly
        let exact = combinations(16, 2)
            .into_iter()
            .filter(|sup| {
                let sub = DMatrix::from_fn(10, 2, |i, j| a.get(i, sup[j]));
                let yv = DVector::from_column_slice(&y);
                let sol = sub.clone().svd(true, true).solve(&yv, 1e-12).unwrap();
                (&sub * sol - yv).norm() <= 1e-9
            })
            .count();
        assert_eq!(exact, 1);
        let big = DenseOperator::new(1, 21, vec![1.0; 21]).unwrap();
        assert!(l0_oracle(&[1.0], &big, 1).is_err());
        assert!(l0_oracle(&y, &a, 4).is_err());
    }

    #[test]
    fn deterministic_bits() {
        let (a, y) = random_problem(9);
        let c = cfg(0.05, 30, calibrate_stepsize(&a).unwrap());
        let run = || {
            let mut st = ReconstructionState::new(14);
            fista_bpdn(&y, &a, &c, &mut st)
                .unwrap()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}

//! Compressive measurement operators with ±1 entries.
//!
//! * [`SbheOperator`]: scrambled block Hadamard ensemble `Q_m W P_n`. The
//!   taxels are split by a random permutation into disjoint groups of `B`;
//!   each group is mixed by a `B x B` Sylvester-Hadamard block and a random
//!   subset of the `n` mixed rows is kept.
//! * [`SeparableOperator`]: `Y = Phi1^T X Phi2`, where both factors are
//!   column subsets of one seeded, column-scrambled and row-sign-flipped
//!   Sylvester-Hadamard matrix.
//!
//! Neither operator is ever densified on the hot path. Operators are
//! regenerated from their [`OperatorHeader`] (kind, sizes, seed).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::SparseBasis;
use crate::error::{Error, Result};
use crate::linop::{combinations, DenseOperator, LinearOperator};
use crate::rng;

pub const DEFAULT_BLOCK_SIZE: usize = 32;

/// In-place unnormalized Walsh-Hadamard transform in natural (Sylvester)
/// order: `H[a][c] = (-1)^popcount(a & c)`.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let a = data[j];
                let b = data[j + h];
                data[j] = a + b;
                data[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Entry `(a, c)` of the Sylvester-Hadamard matrix.
pub fn hadamard_entry(a: usize, c: usize) -> i8 {
    if (a & c).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn hadamard_matrix(size: usize) -> Vec<Vec<i8>> {
    (0..size)
        .map(|a| (0..size).map(|c| hadamard_entry(a, c)).collect())
        .collect()
}

/// Scrambled block Hadamard ensemble `Phi = Q_m W P_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbheOperator {
    n: usize,
    m: usize,
    block: usize,
    /// `(P_n x)_i = x[perm[i]]`.
    perm: Vec<usize>,
    /// Kept rows of `W P_n`, ascending.
    rows: Vec<usize>,
    seed: Option<u64>,
    /// `(block index, first, last)` ranges into `rows`.
    block_ranges: Vec<(usize, usize, usize)>,
}

impl SbheOperator {
    pub fn new(n: usize, m: usize, block: usize, seed: u64) -> Result<Self> {
        Self::validate(n, m, block)?;
        let mut rng = rng::rng_for(seed, &[0x5b4e]);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut rows = index::sample(&mut rng, n, m).into_vec();
        rows.sort_unstable();
        let mut op = Self::from_parts(n, block, perm, rows)?;
        op.seed = Some(seed);
        Ok(op)
    }

    /// Build from an explicit permutation and row subset.
    pub fn from_parts(n: usize, block: usize, perm: Vec<usize>, mut rows: Vec<usize>) -> Result<Self> {
        let m = rows.len();
        Self::validate(n, m, block)?;
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: perm.len(),
            });
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("column order is not a permutation".into()));
            }
        }
        rows.sort_unstable();
        if rows.windows(2).any(|w| w[0] == w[1]) || rows.last().is_some_and(|&r| r >= n) {
            return Err(Error::InvalidParameter(
                "row subset must be distinct indices below n".into(),
            ));
        }
        let mut block_ranges = Vec::new();
        let mut start = 0;
        while start < rows.len() {
            let g = rows[start] / block;
            let mut end = start;
            while end < rows.len() && rows[end] / block == g {
                end += 1;
            }
            block_ranges.push((g, start, end));
            start = end;
        }
        Ok(Self {
            n,
            m,
            block,
            perm,
            rows,
            seed: None,
            block_ranges,
        })
    }

    fn validate(n: usize, m: usize, block: usize) -> Result<()> {
        if block == 0 || !block.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "block size must be a power of two, got {block}"
            )));
        }
        if n == 0 || !n.is_multiple_of(block) {
            return Err(Error::InvalidParameter(format!(
                "block size {block} does not divide n = {n}"
            )));
        }
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= m <= n, got m = {m}, n = {n}"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn block_size(&self) -> usize {
        self.block
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
    pub fn selected_rows(&self) -> &[usize] {
        &self.rows
    }

    /// Non-zero entries of measurement row `r` as `(taxel, ±1)`.
    pub fn row_support(&self, r: usize) -> Vec<(usize, i8)> {
        let row = self.rows[r];
        let g = row / self.block;
        let a = row % self.block;
        (0..self.block)
            .map(|c| (self.perm[g * self.block + c], hadamard_entry(a, c)))
            .collect()
    }

    /// Dense `m x n` matrix of ±1/0 entries.
    pub fn to_dense_i8(&self) -> Vec<Vec<i8>> {
        (0..self.m)
            .map(|r| {
                let mut row = vec![0i8; self.n];
                for (j, v) in self.row_support(r) {
                    row[j] = v;
                }
                row
            })
            .collect()
    }

    pub fn wiring_report(&self) -> WiringReport {
        let groups = (0..self.n / self.block)
            .map(|g| {
                let mut taxels = self.perm[g * self.block..(g + 1) * self.block].to_vec();
                taxels.sort_unstable();
                let measurements = self
                    .block_ranges
                    .iter()
                    .find(|(b, _, _)| *b == g)
                    .map_or(0, |(_, s, e)| e - s);
                MeasurementGroup { taxels, measurements }
            })
            .collect();
        WiringReport {
            kind: "sbhe".into(),
            n: self.n,
            m: self.m,
            groups,
            combining_stage_outputs: None,
        }
    }
}

impl LinearOperator for SbheOperator {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let b = self.block;
        let mut buf = vec![0.0; b];
        for &(g, s, e) in &self.block_ranges {
            for (c, v) in buf.iter_mut().enumerate() {
                *v = x[self.perm[g * b + c]];
            }
            fwht(&mut buf);
            for r in s..e {
                out[r] = buf[self.rows[r] - g * b];
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let b = self.block;
        let mut buf = vec![0.0; b];
        for &(g, s, e) in &self.block_ranges {
            buf.iter_mut().for_each(|v| *v = 0.0);
            for r in s..e {
                buf[self.rows[r] - g * b] = y[r];
            }
            fwht(&mut buf);
            for (c, v) in buf.iter().enumerate() {
                out[self.perm[g * b + c]] = *v;
            }
        }
    }
}

/// Separable operator `vec(Phi1^T X Phi2)` on row-major `side x side` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableOperator {
    side: usize,
    m1: usize,
    m2: usize,
    seed: u64,
    /// Underlying orthogonal ±1 matrix, row-major `side x side`.
    base: Vec<i8>,
    cols1: Vec<usize>,
    cols2: Vec<usize>,
    /// `side x m1`, row-major.
    phi1: Vec<f64>,
    /// `side x m2`, row-major.
    phi2: Vec<f64>,
}

impl SeparableOperator {
    pub fn new(side: usize, m1: usize, m2: usize, seed: u64) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "separable side must be a power of two, got {side}"
            )));
        }
        if m1 == 0 || m2 == 0 || m1 > side || m2 > side {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= m1, m2 <= {side}, got {m1} x {m2}"
            )));
        }
        let mut rng = rng::rng_for(seed, &[0x5e9a]);
        let mut colperm: Vec<usize> = (0..side).collect();
        colperm.shuffle(&mut rng);
        let signs: Vec<i8> = (0..side).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let base: Vec<i8> = (0..side * side)
            .map(|k| {
                let (i, j) = (k / side, k % side);
                signs[i] * hadamard_entry(i, colperm[j])
            })
            .collect();
        let mut pick = |m: usize| {
            let mut c = index::sample(&mut rng, side, m).into_vec();
            c.sort_unstable();
            c
        };
        let cols1 = pick(m1);
        let cols2 = pick(m2);
        let gather = |cols: &[usize]| -> Vec<f64> {
            let mut out = vec![0.0; side * cols.len()];
            for i in 0..side {
                for (a, &c) in cols.iter().enumerate() {
                    out[i * cols.len() + a] = base[i * side + c] as f64;
                }
            }
            out
        };
        let phi1 = gather(&cols1);
        let phi2 = gather(&cols2);
        Ok(Self {
            side,
            m1,
            m2,
            seed,
            base,
            cols1,
            cols2,
            phi1,
            phi2,
        })
    }

    /// Pick `m1 x m2 <= m` as close to square as the side allows.
    pub fn for_measurements(side: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > side * side {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= m <= {}, got {m}",
                side * side
            )));
        }
        let m1 = ((m as f64).sqrt().ceil() as usize).clamp(1, side);
        let m2 = (m / m1).clamp(1, side);
        Self::new(side, m1, m2, seed)
    }

    pub fn side(&self) -> usize {
        self.side
    }
    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn m2(&self) -> usize {
        self.m2
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The full orthogonal ±1 matrix `N` (row-major) the factors are cut from.
    pub fn base_matrix(&self) -> &[i8] {
        &self.base
    }

    pub fn phi1(&self) -> &[f64] {
        &self.phi1
    }

    pub fn phi2(&self) -> &[f64] {
        &self.phi2
    }

    pub fn selected_columns(&self) -> (&[usize], &[usize]) {
        (&self.cols1, &self.cols2)
    }

    pub fn wiring_report(&self) -> WiringReport {
        let groups = (0..self.side)
            .map(|r| MeasurementGroup {
                taxels: (r * self.side..(r + 1) * self.side).collect(),
                measurements: self.m2,
            })
            .collect();
        WiringReport {
            kind: "separable".into(),
            n: self.side * self.side,
            m: self.m1 * self.m2,
            groups,
            combining_stage_outputs: Some(self.m1 * self.m2),
        }
    }
}

impl LinearOperator for SeparableOperator {
    fn rows(&self) -> usize {
        self.m1 * self.m2
    }

    fn cols(&self) -> usize {
        self.side * self.side
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (s, m1, m2) = (self.side, self.m1, self.m2);
        // T = X Phi2  (s x m2)
        let mut t = vec![0.0; s * m2];
        for i in 0..s {
            let xrow = &x[i * s..(i + 1) * s];
            let trow = &mut t[i * m2..(i + 1) * m2];
            for (j, &xij) in xrow.iter().enumerate() {
                if xij == 0.0 {
                    continue;
                }
                for (tv, p) in trow.iter_mut().zip(&self.phi2[j * m2..(j + 1) * m2]) {
                    *tv += xij * p;
                }
            }
        }
        // Y = Phi1^T T  (m1 x m2)
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..s {
            let trow = &t[i * m2..(i + 1) * m2];
            for a in 0..m1 {
                let p = self.phi1[i * m1 + a];
                for (o, tv) in out[a * m2..(a + 1) * m2].iter_mut().zip(trow) {
                    *o += p * tv;
                }
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (s, m1, m2) = (self.side, self.m1, self.m2);
        // U = Phi1 Y  (s x m2)
        let mut u = vec![0.0; s * m2];
        for i in 0..s {
            let urow = &mut u[i * m2..(i + 1) * m2];
            for a in 0..m1 {
                let p = self.phi1[i * m1 + a];
                for (uv, yv) in urow.iter_mut().zip(&y[a * m2..(a + 1) * m2]) {
                    *uv += p * yv;
                }
            }
        }
        // X = U Phi2^T  (s x s)
        for i in 0..s {
            let urow = &u[i * m2..(i + 1) * m2];
            for j in 0..s {
                out[i * s + j] = urow
                    .iter()
                    .zip(&self.phi2[j * m2..(j + 1) * m2])
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
    }
}

/// Serialized form of an operator; matrices are regenerated from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorHeader {
    Sbhe {
        n: usize,
        m: usize,
        block_size: usize,
        seed: u64,
    },
    Separable {
        n: usize,
        m1: usize,
        m2: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    Sbhe(SbheOperator),
    Separable(SeparableOperator),
}

impl MeasurementOperator {
    pub fn from_header(h: &OperatorHeader) -> Result<Self> {
        match *h {
            OperatorHeader::Sbhe { n, m, block_size, seed } => {
                Ok(Self::Sbhe(SbheOperator::new(n, m, block_size, seed)?))
            }
            OperatorHeader::Separable { n, m1, m2, seed } => {
                let side = exact_side(n)?;
                Ok(Self::Separable(SeparableOperator::new(side, m1, m2, seed)?))
            }
        }
    }

    /// Header for a seeded operator; `None` for hand-built SBHE instances.
    pub fn header(&self) -> Option<OperatorHeader> {
        match self {
            Self::Sbhe(op) => op.seed.map(|seed| OperatorHeader::Sbhe {
                n: op.n,
                m: op.m,
                block_size: op.block,
                seed,
            }),
            Self::Separable(op) => Some(OperatorHeader::Separable {
                n: op.side * op.side,
                m1: op.m1,
                m2: op.m2,
                seed: op.seed,
            }),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Sbhe(_) => "sbhe",
            Self::Separable(_) => "separable",
        }
    }

    pub fn wiring_report(&self) -> WiringReport {
        match self {
            Self::Sbhe(op) => op.wiring_report(),
            Self::Separable(op) => op.wiring_report(),
        }
    }

    fn inner(&self) -> &dyn LinearOperator {
        match self {
            Self::Sbhe(op) => op,
            Self::Separable(op) => op,
        }
    }
}

impl LinearOperator for MeasurementOperator {
    fn rows(&self) -> usize {
        self.inner().rows()
    }
    fn cols(&self) -> usize {
        self.inner().cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner().apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inner().adjoint_into(y, out)
    }
}

pub(crate) fn exact_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidParameter(format!("n = {n} is not a perfect square")));
    }
    Ok(side)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementGroup {
    pub taxels: Vec<usize>,
    pub measurements: usize,
}

/// Which taxels are summed together, and how many measurements each
/// group produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiringReport {
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub groups: Vec<MeasurementGroup>,
    /// Separable operators only: outputs of the column-combining stage.
    pub combining_stage_outputs: Option<usize>,
}

/// Largest normalized inner product between measurement rows and basis
/// atoms, scaled by `sqrt(n)` (1 = maximally incoherent, `sqrt(n)` =
/// coherent).
pub fn mutual_coherence(op: &dyn LinearOperator, basis: &SparseBasis) -> Result<f64> {
    let (m, n) = (op.rows(), op.cols());
    crate::error::check_len(basis.len(), n)?;
    let mut e = vec![0.0; m];
    let mut row = vec![0.0; n];
    let mut best: f64 = 0.0;
    for i in 0..m {
        e[i] = 1.0;
        op.adjoint_into(&e, &mut row);
        e[i] = 0.0;
        let norm = crate::linop::norm2(&row);
        if norm == 0.0 {
            continue;
        }
        basis.analyze_in_place(&mut row);
        let peak = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        best = best.max(peak / norm);
    }
    Ok(best * (n as f64).sqrt())
}

/// Exhaustive restricted isometry constant over all `k`-column supports of
/// the column-normalized matrix. Exponential; refuses more than
/// [`RIP_MAX_COLUMNS`] columns.
pub fn rip_delta_bruteforce(a: &DenseOperator, k: usize) -> Result<f64> {
    let p = a.cols();
    if p > RIP_MAX_COLUMNS {
        return Err(Error::TooLarge {
            size: p,
            limit: RIP_MAX_COLUMNS,
        });
    }
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= {p}, got {k}")));
    }
    let mut a = a.clone();
    a.normalize_columns();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| a.column(j)).collect();
    let supports = combinations(p, k);
    let deltas = crate::par::map_slice(&supports, |support| {
        let gram = DMatrix::from_fn(k, k, |i, j| crate::linop::dot(&cols[support[i]], &cols[support[j]]));
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (1.0 - lo).max(hi - 1.0)
    });
    Ok(deltas.into_iter().fold(0.0, f64::max))
}

pub const RIP_MAX_COLUMNS: usize = 20;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use crate::linop::dot;
    use rand::Rng;
    use std::collections::HashMap;

    // Dense product of row-major matrices, used as the independent oracle.
    fn dense_mul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = (0..k).map(|t| a[i * k + t] * b[t * n + j]).sum();
            }
        }
        out
    }

    #[test]
    fn sylvester_base_case() {
        assert_eq!(hadamard_matrix(2), vec![vec![1, 1], vec![1, -1]]);
        let mut v = [3.0, 5.0];
        fwht(&mut v);
        assert_eq!(v, [8.0, -2.0]);
    }

    #[test]
    fn fwht_matches_matrix() {
        let h = hadamard_matrix(8);
        let x: Vec<f64> = (0..8).map(|i| (i * i) as f64 - 3.0).collect();
        let mut y = x.clone();
        fwht(&mut y);
        for a in 0..8 {
            let want: f64 = (0..8).map(|c| h[a][c] as f64 * x[c]).sum();
            assert_eq!(y[a], want);
        }
    }

    #[test]
    fn sbhe_parameter_errors() {
        assert!(SbheOperator::new(100, 10, 32, 0).is_err());
        assert!(SbheOperator::new(64, 65, 32, 0).is_err());
        assert!(SbheOperator::new(64, 0, 32, 0).is_err());
        assert!(SbheOperator::new(96, 10, 24, 0).is_err());
        assert!(SbheOperator::from_parts(4, 2, vec![0, 0, 1, 2], vec![0]).is_err());
        assert!(SbheOperator::from_parts(4, 2, vec![0, 1, 2, 3], vec![1, 1]).is_err());
    }

    #[test]
    fn sbhe_full_size_structure() {
        let op = SbheOperator::new(4096, 1024, 32, 17).unwrap();
        let report = op.wiring_report();
        assert_eq!(report.groups.len(), 128);
        assert!(report.groups.iter().all(|g| g.taxels.len() == 32));
        assert_eq!(report.groups.iter().map(|g| g.measurements).sum::<usize>(), 1024);
        let mut seen = vec![false; 4096];
        for g in &report.groups {
            for &t in &g.taxels {
                assert!(!seen[t], "taxel {t} in two groups");
                seen[t] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        for r in [0, 511, 1023] {
            let row = op.row_support(r);
            assert_eq!(row.len(), 32);
            assert!(row.iter().all(|&(_, v)| v == 1 || v == -1));
        }
    }

    #[test]
    fn sbhe_identity_permutation_full_rows() {
        let n = 64;
        let op = SbheOperator::from_parts(n, 8, (0..n).collect(), (0..n).collect()).unwrap();
        let d = op.to_dense_i8();
        for r in 0..n {
            for s in 0..n {
                let g: i32 = (0..n).map(|j| d[r][j] as i32 * d[s][j] as i32).sum();
                assert_eq!(g, if r == s { 8 } else { 0 });
            }
        }
        // block diagonal: first block is H_8
        let h = hadamard_matrix(8);
        for a in 0..8 {
            assert_eq!(&d[a][..8], &h[a][..]);
        }
    }

    #[test]
    fn sbhe_row_gram_is_scaled_identity_integer() {
        let mut rng = crate::rng::rng_from(3);
        for trial in 0..100u64 {
            let n = [64usize, 256, 1024, 4096][trial as usize % 4];
            let block = [2usize, 8, 32][trial as usize % 3];
            let m = rng.random_range(1..=n);
            let op = SbheOperator::new(n, m, block, trial).unwrap();
            // accumulate Phi Phi^T column by column in integers
            let mut by_col: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
            for r in 0..m {
                for (j, v) in op.row_support(r) {
                    by_col[j].push((r, v as i64));
                }
            }
            let mut gram: HashMap<(usize, usize), i64> = HashMap::new();
            for col in &by_col {
                for &(r, a) in col {
                    for &(s, b) in col {
                        *gram.entry((r, s)).or_default() += a * b;
                    }
                }
            }
            for r in 0..m {
                assert_eq!(gram.get(&(r, r)).copied(), Some(block as i64));
            }
            for (&(r, s), &v) in &gram {
                if r != s {
                    assert_eq!(v, 0, "trial {trial} ({r},{s})");
                }
            }
        }
    }

    #[test]
    fn sbhe_fast_apply_matches_dense_exactly() {
        let mut rng = crate::rng::rng_from(8);
        let op = SbheOperator::new(256, 100, 16, 1).unwrap();
        let d = op.to_dense_i8();
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-50..50) as f64).collect();
        let y = op.apply(&x).unwrap();
        for r in 0..100 {
            let want: f64 = (0..256).map(|j| d[r][j] as f64 * x[j]).sum();
            assert_eq!(y[r], want);
        }
        let yv: Vec<f64> = (0..100).map(|_| rng.random_range(-50..50) as f64).collect();
        let z = op.adjoint(&yv).unwrap();
        for j in 0..256 {
            let want: f64 = (0..100).map(|r| d[r][j] as f64 * yv[r]).sum();
            assert_eq!(z[j], want);
        }
    }

    #[test]
    fn sbhe_single_taxel_readout() {
        let op = SbheOperator::new(128, 40, 16, 5).unwrap();
        for j in [0usize, 77, 127] {
            let mut x = vec![0.0; 128];
            x[j] = 1.0;
            let y = op.apply(&x).unwrap();
            let pos = op.permutation().iter().position(|&p| p == j).unwrap();
            let group = pos / 16;
            for (r, &v) in y.iter().enumerate() {
                assert!(v == 0.0 || v == 1.0 || v == -1.0);
                let in_group = op.selected_rows()[r] / 16 == group;
                assert_eq!(v != 0.0, in_group);
            }
        }
        assert_eq!(op.apply(&[0.0; 128]).unwrap(), vec![0.0; 40]);
    }

    #[test]
    fn sbhe_full_rows_adjoint_scales() {
        let op = SbheOperator::new(64, 64, 32, 9).unwrap();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.7).cos()).collect();
        let back = op.adjoint(&op.apply(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((32.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_random() {
        let mut rng = crate::rng::rng_from(21);
        let ops = [
            MeasurementOperator::Sbhe(SbheOperator::new(256, 77, 32, 2).unwrap()),
            MeasurementOperator::Separable(SeparableOperator::new(16, 5, 7, 2).unwrap()),
        ];
        for op in &ops {
            for _ in 0..20 {
                let x: Vec<f64> = (0..op.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..op.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let lhs = dot(&op.apply(&x).unwrap(), &y);
                let rhs = dot(&x, &op.adjoint(&y).unwrap());
                assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
            }
            assert!(op.adjoint(&vec![0.0; op.rows()]).unwrap().iter().all(|&v| v == 0.0));
            assert!(op.apply(&[1.0]).is_err());
        }
    }

    #[test]
    fn separable_base_is_orthogonal_pm1() {
        for side in [2usize, 4, 8, 64] {
            let op = SeparableOperator::new(side, side / 2, side, 4).unwrap();
            let nmat = op.base_matrix();
            assert!(nmat.iter().all(|&v| v == 1 || v == -1));
            for i in 0..side {
                for j in 0..side {
                    let g: i32 = (0..side)
                        .map(|k| nmat[i * side + k] as i32 * nmat[j * side + k] as i32)
                        .sum();
                    assert_eq!(g, if i == j { side as i32 } else { 0 });
                }
            }
        }
    }

    // Dense Kronecker oracle: (Phi1 (x) Phi2)^T.
    fn kron_transpose(op: &SeparableOperator) -> Vec<f64> {
        let (s, m1, m2) = (op.side(), op.m1(), op.m2());
        let (p1, p2) = (op.phi1(), op.phi2());
        let n = s * s;
        let m = m1 * m2;
        let mut k = vec![0.0; m * n];
        for i in 0..s {
            for a in 0..m1 {
                for j in 0..s {
                    for b in 0..m2 {
                        // (Phi1 (x) Phi2)[(i,j),(a,b)] = Phi1[i,a] Phi2[j,b]
                        k[(a * m2 + b) * n + (i * s + j)] = p1[i * m1 + a] * p2[j * m2 + b];
                    }
                }
            }
        }
        k
    }

    #[test]
    fn separable_fast_matches_kronecker_exactly() {
        let mut rng = crate::rng::rng_from(77);
        for side in [2usize, 4, 8] {
            for seed in 0..5 {
                let m1 = rng.random_range(1..=side);
                let m2 = rng.random_range(1..=side);
                let op = SeparableOperator::new(side, m1, m2, seed).unwrap();
                let k = kron_transpose(&op);
                let n = side * side;
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-20..20) as f64).collect();
                let want = dense_mul(&k, &x, m1 * m2, n, 1);
                assert_eq!(op.apply(&x).unwrap(), want);
                assert_eq!(op.to_dense(), k);
            }
        }
        // fixed 4x4 instance with m1 = m2 = 2
        let op = SeparableOperator::new(4, 2, 2, 1234).unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64) - 7.0).collect();
        assert_eq!(op.apply(&x).unwrap(), dense_mul(&kron_transpose(&op), &x, 4, 16, 1));
    }

    #[test]
    fn separable_wiring_and_sizes() {
        let op = SeparableOperator::for_measurements(64, 1024, 3).unwrap();
        assert_eq!(op.m1() * op.m2(), 1024);
        let w = op.wiring_report();
        assert_eq!(w.groups.len(), 64);
        let op = SeparableOperator::for_measurements(32, 341, 3).unwrap();
        assert!(op.m1() * op.m2() <= 341);
        assert!(SeparableOperator::new(12, 2, 2, 0).is_err());
        assert!(SeparableOperator::new(8, 9, 2, 0).is_err());
    }

    #[test]
    fn header_round_trip_is_bit_exact() {
        let ops = [
            MeasurementOperator::Sbhe(SbheOperator::new(1024, 256, 32, 42).unwrap()),
            MeasurementOperator::Separable(SeparableOperator::new(32, 16, 16, 42).unwrap()),
        ];
        for op in ops {
            let header = op.header().unwrap();
            let json = serde_json::to_string(&header).unwrap();
            let back: OperatorHeader = serde_json::from_str(&json).unwrap();
            assert_eq!(back, header);
            assert_eq!(MeasurementOperator::from_header(&back).unwrap(), op);
        }
        let json = r#"{"kind":"sbhe","n":64,"m":16,"block_size":32,"seed":9}"#;
        let h: OperatorHeader = serde_json::from_str(json).unwrap();
        assert!(matches!(
            MeasurementOperator::from_header(&h).unwrap(),
            MeasurementOperator::Sbhe(_)
        ));
    }

    #[test]
    fn seeds_determine_operators() {
        assert_eq!(
            SbheOperator::new(256, 64, 32, 5).unwrap(),
            SbheOperator::new(256, 64, 32, 5).unwrap()
        );
        assert_ne!(
            SbheOperator::new(256, 64, 32, 5).unwrap(),
            SbheOperator::new(256, 64, 32, 6).unwrap()
        );
    }

    #[test]
    fn rip_trivial_cases() {
        let id = DenseOperator::identity(6);
        for k in 1..=3 {
            assert!(rip_delta_bruteforce(&id, k).unwrap().abs() < 1e-12);
        }
        // two identical unit columns
        let a = DenseOperator::new(2, 3, vec![1.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(rip_delta_bruteforce(&a, 2).unwrap() >= 1.0 - 1e-12);
        let big = DenseOperator::new(1, 21, vec![1.0; 21]).unwrap();
        assert!(matches!(rip_delta_bruteforce(&big, 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn coherence_bounds() {
        let basis = SparseBasis::new(BasisKind::Haar2, 8).unwrap();
        let op = SeparableOperator::new(8, 8, 8, 1).unwrap();
        let mu = mutual_coherence(&op, &basis).unwrap();
        assert!((1.0 - 1e-12..=8.0 + 1e-12).contains(&mu));
    }
}

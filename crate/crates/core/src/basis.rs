//! Orthonormal separable 2-D transforms used as sparsifying bases.
//!
//! `synthesize` maps coefficients to a signal (`x = Psi s`) and `analyze`
//! maps a signal to coefficients (`s = Psi^T x`). All transforms are
//! orthonormal, so `analyze` is both the inverse and the adjoint of
//! `synthesize`.
//!
//! Wavelets use periodic boundaries and the usual Mallat pyramid: at each
//! level the rows and then the columns of the current low-pass block are
//! split into approximation and detail halves. Coefficient index 0 holds the
//! coarsest scaling coefficient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::frame::{approx_sparsity, TactileFrame};
use crate::linop::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Dct2,
    Haar2,
    #[serde(rename = "d4_2d")]
    D4,
}

impl BasisKind {
    pub const ALL: [BasisKind; 3] = [BasisKind::Haar2, BasisKind::D4, BasisKind::Dct2];

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Dct2 => "dct2",
            BasisKind::Haar2 => "haar2",
            BasisKind::D4 => "d4_2d",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dct" | "dct2" => Ok(BasisKind::Dct2),
            "haar" | "haar2" | "d2" => Ok(BasisKind::Haar2),
            "d4" | "d4_2d" => Ok(BasisKind::D4),
            other => Err(Error::InvalidParameter(format!("unknown basis '{other}'"))),
        }
    }
}

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn d4_filter() -> [f64; 4] {
    let s3 = 3f64.sqrt();
    let k = 4.0 * 2f64.sqrt();
    [(1.0 + s3) / k, (3.0 + s3) / k, (3.0 - s3) / k, (1.0 - s3) / k]
}

#[derive(Debug, Clone)]
enum Kernel {
    /// Row-major `side x side` orthonormal DCT-II matrix, `C[k][i]`.
    Dct(Vec<f64>),
    /// Low-pass filter; the high-pass is its quadrature mirror.
    Wavelet { lo: Vec<f64>, hi: Vec<f64> },
}

/// An orthonormal 2-D transform on `side x side` frames.
#[derive(Debug, Clone)]
pub struct SparseBasis {
    kind: BasisKind,
    side: usize,
    levels: usize,
    kernel: Kernel,
}

impl SparseBasis {
    /// Full-depth transform (wavelet levels = log2 side).
    pub fn new(kind: BasisKind, side: usize) -> Result<Self> {
        let levels = match kind {
            BasisKind::Dct2 => 0,
            _ => max_levels(side)?,
        };
        Self::with_levels(kind, side, levels)
    }

    pub fn with_levels(kind: BasisKind, side: usize, levels: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidParameter("basis side must be >= 1".into()));
        }
        let kernel = match kind {
            BasisKind::Dct2 => Kernel::Dct(dct_matrix(side)),
            BasisKind::Haar2 | BasisKind::D4 => {
                let max = max_levels(side)?;
                if levels > max {
                    return Err(Error::InvalidParameter(format!(
                        "{levels} levels exceed log2({side}) = {max}"
                    )));
                }
                let lo = match kind {
                    BasisKind::Haar2 => vec![INV_SQRT2, INV_SQRT2],
                    _ => d4_filter().to_vec(),
                };
                let len = lo.len();
                let hi = (0..len)
                    .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * lo[len - 1 - j])
                    .collect();
                Kernel::Wavelet { lo, hi }
            }
        };
        Ok(Self {
            kind,
            side,
            levels,
            kernel,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Signal length `n = side^2` (also the coefficient count).
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `Psi s`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), coeffs.len())?;
        let mut buf = coeffs.to_vec();
        self.synthesize_in_place(&mut buf);
        Ok(buf)
    }

    /// `Psi^T x`.
    pub fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), signal.len())?;
        let mut buf = signal.to_vec();
        self.analyze_in_place(&mut buf);
        Ok(buf)
    }

    pub fn analyze_in_place(&self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.len());
        let n = self.side;
        match &self.kernel {
            Kernel::Dct(c) => {
                // S = C X C^T
                let mut tmp = vec![0.0; n * n];
                matmul_nt(buf, c, &mut tmp, n); // X C^T
                matmul_nn(c, &tmp, buf, n); // C (X C^T)
            }
            Kernel::Wavelet { lo, hi } => {
                let mut line = vec![0.0; n];
                let mut out = vec![0.0; n];
                for level in 0..self.levels {
                    let s = n >> level;
                    for r in 0..s {
                        let row = &mut buf[r * n..r * n + s];
                        line[..s].copy_from_slice(row);
                        dwt_step(&line[..s], &mut out[..s], lo, hi);
                        row.copy_from_slice(&out[..s]);
                    }
                    for c in 0..s {
                        for r in 0..s {
                            line[r] = buf[r * n + c];
                        }
                        dwt_step(&line[..s], &mut out[..s], lo, hi);
                        for r in 0..s {
                            buf[r * n + c] = out[r];
                        }
                    }
                }
            }
        }
    }

    pub fn synthesize_in_place(&self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.len());
        let n = self.side;
        match &self.kernel {
            Kernel::Dct(c) => {
                // X = C^T S C
                let mut tmp = vec![0.0; n * n];
                matmul_nn(buf, c, &mut tmp, n); // S C
                matmul_tn(c, &tmp, buf, n); // C^T (S C)
            }
            Kernel::Wavelet { lo, hi } => {
                let mut line = vec![0.0; n];
                let mut out = vec![0.0; n];
                for level in (0..self.levels).rev() {
                    let s = n >> level;
                    for c in 0..s {
                        for r in 0..s {
                            line[r] = buf[r * n + c];
                        }
                        idwt_step(&line[..s], &mut out[..s], lo, hi);
                        for r in 0..s {
                            buf[r * n + c] = out[r];
                        }
                    }
                    for r in 0..s {
                        let row = &mut buf[r * n..r * n + s];
                        line[..s].copy_from_slice(row);
                        idwt_step(&line[..s], &mut out[..s], lo, hi);
                        row.copy_from_slice(&out[..s]);
                    }
                }
            }
        }
    }
}

/// The basis viewed as the operator `Psi` (so the adjoint is `analyze`).
impl LinearOperator for SparseBasis {
    fn rows(&self) -> usize {
        self.len()
    }

    fn cols(&self) -> usize {
        self.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        self.synthesize_in_place(out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
        self.analyze_in_place(out);
    }
}

fn max_levels(side: usize) -> Result<usize> {
    if side == 0 || !side.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "wavelet side must be a power of two, got {side}"
        )));
    }
    Ok(side.trailing_zeros() as usize)
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            c[k * n + i] = alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    c
}

// out = a * b for n x n row-major matrices.
fn matmul_nn(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let orow = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for (o, bkj) in orow.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *o += aik * bkj;
            }
        }
    }
}

// out = a * b^T
fn matmul_nt(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..n {
            out[i * n + j] = arow.iter().zip(&b[j * n..(j + 1) * n]).map(|(x, y)| x * y).sum();
        }
    }
}

// out = a^T * b
fn matmul_tn(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..n {
        let brow = &b[k * n..(k + 1) * n];
        for i in 0..n {
            let aki = a[k * n + i];
            if aki == 0.0 {
                continue;
            }
            for (o, bkj) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                *o += aki * bkj;
            }
        }
    }
}

// One periodic analysis step: out = [approx | detail].
fn dwt_step(x: &[f64], out: &mut [f64], lo: &[f64], hi: &[f64]) {
    let len = x.len();
    let half = len / 2;
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (j, (l, h)) in lo.iter().zip(hi).enumerate() {
            let v = x[(2 * k + j) % len];
            a += l * v;
            d += h * v;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn idwt_step(coeffs: &[f64], out: &mut [f64], lo: &[f64], hi: &[f64]) {
    let len = coeffs.len();
    let half = len / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..half {
        let a = coeffs[k];
        let d = coeffs[half + k];
        for (j, (l, h)) in lo.iter().zip(hi).enumerate() {
            out[(2 * k + j) % len] += l * a + h * d;
        }
    }
}

/// Mean and max approximate sparsity of a frame sequence in one basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityStats {
    pub basis: BasisKind,
    pub mean: f64,
    pub max: usize,
}

pub fn sparsity_table(frames: &[TactileFrame], bases: &[BasisKind], tau: f64) -> Result<Vec<SparsityStats>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidParameter("sparsity table needs at least one frame".into()))?;
    let side = first.side();
    bases
        .iter()
        .map(|&kind| {
            let basis = SparseBasis::new(kind, side)?;
            let counts = crate::par::try_map_range(frames.len(), |i| {
                basis.analyze(frames[i].forces()).map(|s| approx_sparsity(&s, tau))
            })?;
            let total: usize = counts.iter().sum();
            Ok(SparsityStats {
                basis: kind,
                mean: total as f64 / counts.len() as f64,
                max: counts.iter().copied().max().unwrap_or(0),
            })
        })
        .collect()
}

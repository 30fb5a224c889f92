//! Matrix-free linear operators.

use crate::error::{check_len, Result};

/// A real linear map `R^cols -> R^rows` with its adjoint.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = A x`. Lengths are checked by the caller-facing wrappers.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = A^T y`.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows(), y.len())?;
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }

    /// Materialize as a row-major dense matrix. Test and oracle use only.
    fn to_dense(&self) -> Vec<f64> {
        let (m, n) = (self.rows(), self.cols());
        let mut dense = vec![0.0; m * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; m];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            for i in 0..m {
                dense[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        dense
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in d.iter().enumerate() {
            data[i * n + i] = v;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Scale every column to unit Euclidean norm; zero columns stay zero.
    pub fn normalize_columns(&mut self) {
        for j in 0..self.cols {
            let norm = (0..self.rows).map(|i| self.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for i in 0..self.rows {
                    self.data[i * self.cols + j] /= norm;
                }
            }
        }
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }

    fn to_dense(&self) -> Vec<f64> {
        self.data.clone()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// All `k`-subsets of `0..p` in lexicographic order.
pub fn combinations(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < p - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(20, 3).len(), 1140);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(combinations(4, 2)[..3], [vec![0, 1], vec![0, 2], vec![0, 3]]);
    }

    #[test]
    fn dense_adjoint_identity() {
        let a = DenseOperator::new(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 4.0]).unwrap();
        let x = [0.3, -1.2, 2.0];
        let y = [1.5, -0.7];
        let lhs = dot(&a.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &a.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(a.apply(&[1.0]).is_err());
        assert_eq!(a.to_dense(), a.data());
    }
}

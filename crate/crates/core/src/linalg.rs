//! Small dense matrices and numerically careful accumulation.
//!
//! Parameter dimensions here are tiny (p <= 4), so matrices are plain
//! row-major `Vec<f64>` with no external linear algebra dependency. The
//! accumulators matter more: auxiliary-sample estimators sum 2N ~ 2e5 terms
//! per entry, so sums use a streaming pairwise (binary-counter) scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMat {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMat {
    pub fn zeros(dim: usize) -> Self {
        SquareMat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "rows must form a square matrix");
            data.extend_from_slice(r);
        }
        SquareMat { dim, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Outer product v * v^T.
    pub fn outer(v: &[f64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, v[i] * v[j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn add(&self, other: &SquareMat) -> SquareMat {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        SquareMat {
            dim: self.dim,
            data,
        }
    }

    pub fn sub(&self, other: &SquareMat) -> SquareMat {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        SquareMat {
            dim: self.dim,
            data,
        }
    }

    pub fn scale(&self, a: f64) -> SquareMat {
        SquareMat {
            dim: self.dim,
            data: self.data.iter().map(|v| v * a).collect(),
        }
    }

    /// (M + M^T) / 2.
    pub fn symmetrized(&self) -> SquareMat {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise maximum absolute value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Half-vectorization: the lower triangle stacked column by column,
    /// i.e. (m00, m10, ..., m_{p-1,0}, m11, m21, ...).
    pub fn vech(&self) -> Vec<f64> {
        let p = self.dim;
        let mut out = Vec::with_capacity(p * (p + 1) / 2);
        for j in 0..p {
            for i in j..p {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn check_same_dim(&self, other: &SquareMat) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix dims {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Streaming pairwise summation: partial sums are merged like a binary
/// counter, so a length-n sum is evaluated as a balanced tree with O(log n)
/// rounding depth instead of O(n).
#[derive(Debug, Clone, Default)]
pub struct PairwiseSum {
    // (level, partial sum); levels strictly increasing from the back.
    stack: Vec<(u32, f64)>,
}

impl PairwiseSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let mut level = 0u32;
        let mut acc = value;
        while let Some(&(l, s)) = self.stack.last() {
            if l != level {
                break;
            }
            self.stack.pop();
            acc += s;
            level += 1;
        }
        self.stack.push((level, acc));
    }

    pub fn total(&self) -> f64 {
        // Combine smallest blocks first.
        self.stack.iter().rev().map(|&(_, s)| s).sum()
    }
}

/// A vector of pairwise accumulators.
#[derive(Debug, Clone)]
pub struct PairwiseVec {
    sums: Vec<PairwiseSum>,
}

impl PairwiseVec {
    pub fn new(len: usize) -> Self {
        PairwiseVec {
            sums: vec![PairwiseSum::new(); len],
        }
    }

    #[inline]
    pub fn add(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.sums.len());
        for (s, &v) in self.sums.iter_mut().zip(values) {
            s.add(v);
        }
    }

    #[inline]
    pub fn add_at(&mut self, idx: usize, value: f64) {
        self.sums[idx].add(value);
    }

    pub fn totals(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s.total()).collect()
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }
}

/// Sum a slice with pairwise recursion.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const CUTOFF: usize = 64;
    if values.len() <= CUTOFF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

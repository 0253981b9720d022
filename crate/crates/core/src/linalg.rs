//! Dense row-major matrices and symmetric eigensolvers.
//!
//! Small problems go through cyclic Jacobi, which is accurate to machine
//! precision. Large ones use block subspace iteration with a Rayleigh–Ritz
//! step (solved by Jacobi) to extract only the leading eigenpairs.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use rand::Rng;

use serde::{Deserialize, Serialize};

use crate::rng::{rng_for, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = &'static str;

    fn try_from(m: RawMatrix) -> Result<Self, Self::Error> {
        if m.rows.checked_mul(m.cols) != Some(m.data.len()) {
            return Err("matrix data length does not match its shape");
        }
        Ok(Matrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        })
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &bv) in out_row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds them as columns.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &Matrix) -> EigenPairs {
    let n = a.rows();
    assert_eq!(n, a.cols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = m.max_abs();
    if n > 1 && scale > 0.0 {
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)] * m[(i, j)])
                .sum();
            if libm::sqrt(off) <= f64::EPSILON * 1e-3 * scale {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    sorted_pairs(values, &v)
}

fn sorted_pairs(values: Vec<f64>, vectors: &Matrix) -> EigenPairs {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    EigenPairs {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: Matrix::from_fn(vectors.rows(), order.len(), |r, c| vectors[(r, order[c])]),
    }
}

/// Orthonormalize the columns in place (modified Gram–Schmidt, two passes).
/// Columns that collapse are replaced by unit vectors orthogonal to the rest.
fn orthonormalize(q: &mut Matrix) {
    let (n, p) = (q.rows(), q.cols());
    for j in 0..p {
        for _pass in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..n).map(|i| q[(i, j)] * q[(i, k)]).sum();
                for i in 0..n {
                    q[(i, j)] -= dot * q[(i, k)];
                }
            }
        }
        let mut norm = libm::sqrt((0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>());
        if norm < 1e-300 {
            // Replace with a canonical basis vector not yet spanned.
            for e in 0..n {
                for i in 0..n {
                    q[(i, j)] = if i == e { 1.0 } else { 0.0 };
                }
                for k in 0..j {
                    let dot = q[(e, k)];
                    for i in 0..n {
                        q[(i, j)] -= dot * q[(i, k)];
                    }
                }
                norm = libm::sqrt((0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>());
                if norm > 1e-8 {
                    break;
                }
            }
        }
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
}

/// Problems up to this size are solved with full Jacobi.
pub const DENSE_LIMIT: usize = 64;

/// The `count` algebraically largest eigenpairs of a symmetric matrix.
///
/// Returns the pairs and whether the iteration met its residual tolerance
/// (always true on the dense path).
pub fn top_eigenpairs(a: &Matrix, count: usize) -> (EigenPairs, bool) {
    let n = a.rows();
    let count = count.min(n);
    if n <= DENSE_LIMIT {
        let full = jacobi_eigen(a);
        return (truncate(full, count), true);
    }

    let p = (count + 10).min(n);
    let mut rng = rng_for(0x5eed, Stream::EigenStart, n as u64);
    let mut q = Matrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    orthonormalize(&mut q);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut best = None;
    for _iter in 0..5000 {
        let z = a.matmul(&q);
        let h = q.t_matmul(&z);
        let h = Matrix::from_fn(p, p, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
        let ritz = jacobi_eigen(&h);
        let x = q.matmul(&ritz.vectors);
        let ax = z.matmul(&ritz.vectors);
        let top = ritz.values[0].abs().max(scale * 1e-12);
        let mut converged = true;
        for c in 0..count {
            let theta = ritz.values[c];
            let r: f64 = (0..n)
                .map(|i| {
                    let d = ax[(i, c)] - theta * x[(i, c)];
                    d * d
                })
                .sum();
            if libm::sqrt(r) > 1e-10 * top {
                converged = false;
                break;
            }
        }
        let pairs = EigenPairs {
            values: ritz.values.clone(),
            vectors: x,
        };
        if converged {
            return (truncate(pairs, count), true);
        }
        best = Some(pairs);
        q = ax;
        orthonormalize(&mut q);
    }
    (truncate(best.expect("at least one iteration"), count), false)
}

fn truncate(pairs: EigenPairs, count: usize) -> EigenPairs {
    let n = pairs.vectors.rows();
    EigenPairs {
        values: pairs.values[..count].to_vec(),
        vectors: Matrix::from_fn(n, count, |i, j| pairs.vectors[(i, j)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = rng_for(seed, Stream::EigenStart, 99);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random::<f64>() * 2.0 - 1.0;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn check_pairs(a: &Matrix, pairs: &EigenPairs, tol: f64) {
        for c in 0..pairs.values.len() {
            let v = pairs.vectors.column(c);
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < tol);
            for i in 0..a.rows() {
                let av: f64 = (0..a.cols()).map(|k| a[(i, k)] * v[k]).sum();
                assert!((av - pairs.values[c] * v[i]).abs() < tol, "residual at {i}");
            }
        }
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = random_symmetric(12, 1);
        let pairs = jacobi_eigen(&a);
        check_pairs(&a, &pairs, 1e-10);
        assert!(pairs.values.windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = (0..12).map(|i| a[(i, i)]).sum();
        assert!((pairs.values.iter().sum::<f64>() - trace).abs() < 1e-10);
    }

    #[test]
    fn jacobi_known_2x2() {
        let a = Matrix::from_rows(&[vec![4.0, -4.0], vec![-4.0, 4.0]]);
        let pairs = jacobi_eigen(&a);
        assert!((pairs.values[0] - 8.0).abs() < 1e-12);
        assert!(pairs.values[1].abs() < 1e-12);
    }

    #[test]
    fn subspace_matches_jacobi_on_large_matrix() {
        // Gram matrix of 3-D points plus noise has a clear top-2 gap.
        let n = 150;
        let mut rng = rng_for(3, Stream::EigenStart, 1);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 5.0, rng.random::<f64>()])
            .collect();
        let a = Matrix::from_fn(n, n, |i, j| pts[i].iter().zip(&pts[j]).map(|(x, y)| x * y).sum());
        let (fast, ok) = top_eigenpairs(&a, 2);
        assert!(ok);
        let exact = jacobi_eigen(&a);
        for c in 0..2 {
            assert!((fast.values[c] - exact.values[c]).abs() < 1e-8 * exact.values[0]);
        }
        check_pairs(&a, &fast, 1e-6 * exact.values[0]);
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let (pairs, ok) = top_eigenpairs(&Matrix::zeros(5, 5), 2);
        assert!(ok);
        assert_eq!(pairs.values, vec![0.0, 0.0]);
    }
}

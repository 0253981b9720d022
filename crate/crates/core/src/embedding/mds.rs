use alloc::vec::Vec;

use super::EmbeddingError;
use crate::linalg::{top_eigenpairs, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    /// n × dims coordinates.
    pub coords: Matrix,
    /// Retained eigenvalues, largest first.
    pub eigenvalues: Vec<f64>,
    /// Fewer than `dims` positive eigenvalues; the missing columns are zero.
    pub rank_deficient: bool,
    /// The iterative eigensolver met its tolerance.
    pub converged: bool,
}

impl Embedding {
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.coords.rows()).map(|i| self.coords.row(i).to_vec()).collect()
    }
}

/// `B = −½ · J · D⊙D · J` with `J = I − 11ᵀ/n`.
pub fn double_center(distances: &Matrix) -> Matrix {
    let n = distances.rows();
    let sq = Matrix::from_fn(n, n, |i, j| distances[(i, j)] * distances[(i, j)]);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // sq is symmetric, so column means equal row means.
    Matrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand))
}

/// Classical (Torgerson) MDS keeping the `dims` largest eigenvalues of the
/// double-centered squared distances. Each eigenvector is signed so that its
/// first clearly nonzero entry is positive.
pub fn classical_mds(distances: &Matrix, dims: usize) -> Result<Embedding, EmbeddingError> {
    let n = distances.rows();
    let scale = distances.max_abs();
    if distances.cols() != n
        || !distances.is_symmetric(1e-9 * scale.max(1.0))
        || (0..n).any(|i| distances[(i, i)] != 0.0)
    {
        return Err(EmbeddingError::InvalidDistances);
    }
    let b = double_center(distances);
    let (pairs, converged) = top_eigenpairs(&b, dims);

    let trace: f64 = (0..n).map(|i| b[(i, i)].abs()).sum();
    let cutoff = 1e-12 * trace.max(pairs.values.first().copied().unwrap_or(0.0).abs());
    let mut coords = Matrix::zeros(n, dims);
    let mut rank_deficient = false;
    let mut eigenvalues = Vec::with_capacity(dims);
    for c in 0..dims {
        let value = pairs.values.get(c).copied().unwrap_or(0.0);
        eigenvalues.push(value);
        if value <= cutoff {
            rank_deficient = true;
            continue;
        }
        let v = pairs.vectors.column(c);
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-8 * peak)
            .map_or(1.0, |x| x.signum());
        let root = libm::sqrt(value);
        for (i, x) in v.iter().enumerate() {
            coords[(i, c)] = sign * x * root;
        }
    }
    Ok(Embedding {
        coords,
        eigenvalues,
        rank_deficient,
        converged,
    })
}

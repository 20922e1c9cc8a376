//! Small symmetric eigensolvers: dense (nalgebra) and Lanczos with full
//! reorthogonalization for sparse operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric matrix stored as adjacency lists plus an optional diagonal.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    /// Unweighted adjacency matrix.
    pub fn from_adjacency(adjacency: &[Vec<usize>]) -> Self {
        let rows = adjacency
            .iter()
            .map(|row| row.iter().map(|&j| (j, 1.0)).collect())
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn add_diagonal(&mut self, i: usize, value: f64) {
        self.rows[i].push((i, value));
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum::<f64>()),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] += w;
            }
        }
        m
    }

    /// `||A x - lambda x|| / ||x||`.
    pub fn residual(&self, lambda: f64, x: &DVector<f64>) -> f64 {
        (self.apply(x) - x * lambda).norm() / x.norm()
    }
}

/// One eigenpair with its unit-norm vector and residual `||Ax - lambda x||`.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub residual: f64,
}

/// Largest `count` eigenpairs of a dense symmetric matrix, in decreasing order.
pub fn dense_top(matrix: &DMatrix<f64>, count: usize) -> Vec<Eigenpair> {
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(count)
        .map(|i| {
            let value = eig.eigenvalues[i];
            let vector = eig.eigenvectors.column(i).into_owned();
            let residual = (matrix * &vector - &vector * value).norm();
            Eigenpair {
                value,
                vector,
                residual,
            }
        })
        .collect()
}

/// All eigenvalues of a dense symmetric matrix, decreasing.
pub fn dense_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Lanczos iteration with full reorthogonalization for the top `count` eigenpairs.
///
/// Converged when every wanted Ritz pair has residual below `tol * |theta|`.
pub fn lanczos_top(
    op: &SparseSymmetric,
    count: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<Eigenpair>> {
    let n = op.dim();
    if n == 0 || count == 0 {
        return Ok(Vec::new());
    }
    if n <= 64 {
        return Ok(dense_top(&op.to_dense(), count));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_iter = max_iter.min(n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut betas: Vec<f64> = Vec::with_capacity(max_iter);

    let mut q = random_unit(n, &mut rng, &basis);
    let mut worst = f64::INFINITY;
    for step in 0..max_iter {
        basis.push(q.clone());
        let mut w = op.apply(&q);
        let alpha = w.dot(&q);
        alphas.push(alpha);
        // two passes of classical Gram-Schmidt keep the basis orthonormal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = w.dot(b);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();

        let m = basis.len();
        if m >= count && (step % 8 == 7 || m == max_iter || beta < 1e-12) {
            let pairs = ritz_pairs(&alphas, &betas, &basis, count);
            worst = pairs
                .iter()
                .map(|p| {
                    let r = op.residual(p.value, &p.vector);
                    r / p.value.abs().max(1.0)
                })
                .fold(0.0, f64::max);
            if worst <= tol {
                return Ok(finish(op, pairs));
            }
        }
        if m == max_iter {
            break;
        }
        if beta < 1e-12 {
            // invariant subspace: restart orthogonally to everything seen so far
            betas.push(0.0);
            q = random_unit(n, &mut rng, &basis);
        } else {
            betas.push(beta);
            q = w / beta;
        }
    }
    Err(Error::NonConvergence { residual: worst })
}

fn finish(op: &SparseSymmetric, pairs: Vec<Eigenpair>) -> Vec<Eigenpair> {
    pairs
        .into_iter()
        .map(|mut p| {
            p.residual = op.residual(p.value, &p.vector);
            p
        })
        .collect()
}

fn ritz_pairs(
    alphas: &[f64],
    betas: &[f64],
    basis: &[DVector<f64>],
    count: usize,
) -> Vec<Eigenpair> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let n = basis[0].len();
    dense_top(&t, count)
        .into_iter()
        .map(|p| {
            let mut v = DVector::zeros(n);
            for (coef, b) in p.vector.iter().zip(basis) {
                v.axpy(*coef, b, 1.0);
            }
            let norm = v.norm();
            Eigenpair {
                value: p.value,
                vector: v / norm,
                residual: f64::NAN,
            }
        })
        .collect()
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[DVector<f64>]) -> DVector<f64> {
    loop {
        let mut v = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        for _ in 0..2 {
            for b in against {
                let c = v.dot(b);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

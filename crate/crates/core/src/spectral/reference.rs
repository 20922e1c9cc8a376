use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{dense_eigenvalues, dense_top, lanczos_top, SparseSymmetric};

/// Dense solves up to this size, Lanczos above it.
const DENSE_LIMIT: usize = 1024;
/// Largest instance accepted at all.
const REFERENCE_LIMIT: usize = 20_000;

/// Top eigenpair of an explicitly materialized adjacency matrix.
#[derive(Debug, Clone)]
pub struct ExactReference {
    pub lambda: f64,
    /// Unit vector with non-negative entries.
    pub vector: DVector<f64>,
    pub lambda2: f64,
    /// Eigenvalues within `1e-8` relative of `lambda`; above 1 the top eigenvector is not unique.
    pub multiplicity: usize,
    pub residual: f64,
}

/// Brute-force reference for the recursions; disconnected inputs are flagged via `multiplicity`.
pub fn exact_reference(adjacency: &[Vec<usize>]) -> Result<ExactReference> {
    let n = adjacency.len();
    if n == 0 {
        return Err(Error::InvalidParams("empty graph".into()));
    }
    if n > REFERENCE_LIMIT {
        return Err(Error::TooLarge(format!("{n} vertices exceeds {REFERENCE_LIMIT}")));
    }
    let op = SparseSymmetric::from_adjacency(adjacency);
    let (top, lambda2, multiplicity) = if n <= DENSE_LIMIT {
        let dense = op.to_dense();
        let mut pairs = dense_top(&dense, 1);
        let values = dense_eigenvalues(&dense);
        let top = pairs.remove(0);
        let tol = 1e-8 * top.value.abs().max(1.0);
        let multiplicity = values.iter().filter(|&&v| (v - top.value).abs() <= tol).count();
        let lambda2 = values.get(1).copied().unwrap_or(f64::NEG_INFINITY);
        (top, lambda2, multiplicity)
    } else {
        if !connected(adjacency) {
            return Err(Error::InvalidParams(
                "disconnected input too large for a dense multiplicity check".into(),
            ));
        }
        let mut pairs = lanczos_top(&op, 2, 1e-12, n.min(3000), 0)?;
        let second = pairs.pop().expect("two pairs").value;
        (pairs.remove(0), second, 1)
    };
    let sign = if top.vector.sum() < 0.0 { -1.0 } else { 1.0 };
    Ok(ExactReference {
        lambda: top.value,
        vector: top.vector * sign,
        lambda2,
        multiplicity,
        residual: top.residual,
    })
}

fn connected(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &w in &adjacency[u] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_four_has_golden_ratio() {
        let adj = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let r = exact_reference(&adj).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((r.lambda - phi).abs() < 1e-12);
        assert_eq!(r.multiplicity, 1);
        assert!((r.vector[0] / r.vector[1] - 1.0 / phi).abs() < 1e-12);
    }

    #[test]
    fn single_edge() {
        let r = exact_reference(&[vec![1], vec![0]]).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-12);
        let h = 0.5f64.sqrt();
        assert!((r.vector[0] - h).abs() < 1e-12 && (r.vector[1] - h).abs() < 1e-12);
    }

    #[test]
    fn disconnected_input_is_flagged() {
        let r = exact_reference(&[vec![1], vec![0], vec![3], vec![2]]).unwrap();
        assert_eq!(r.multiplicity, 2);
    }
}

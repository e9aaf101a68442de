//! Subspace iteration with Rayleigh-Ritz for the leading eigenpairs of a
//! symmetric operator given only through matrix-vector products.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Returns `(vectors, values)` for the `r` largest eigenvalues of the
/// `size x size` operator `op`, stopping once every residual
/// `||A v - lambda v||` is at most `tol * lambda_1`.
pub(super) fn top_eigenpairs<F>(
    size: usize,
    r: usize,
    op: F,
    tol: f64,
    max_iterations: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let block = (2 * r).max(r + 8).min(size);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5EED);
    let start = DMatrix::from_fn(size, block, |_, _| StandardNormal.sample(&mut rng));
    let mut x = start.qr().q();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let y = apply(&op, &x);
        let mut h = x.transpose() * &y;
        h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let s = DMatrix::from_fn(block, block, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let ritz = &x * &s;
        let image = &y * &s;
        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        residual = (0..r)
            .map(|k| (image.column(k) - ritz.column(k) * theta[k]).norm())
            .fold(0.0, f64::max);
        if residual <= tol * scale {
            let vectors = ritz.columns(0, r).into_owned();
            return Ok((vectors, theta[..r].to_vec()));
        }
        x = image.qr().q();
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual,
    })
}

fn apply<F: Fn(&[f64], &mut [f64])>(op: &F, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(x.nrows(), x.ncols());
    for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
        let xv: Vec<f64> = xc.iter().copied().collect();
        op(&xv, yc.as_mut_slice());
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_leading_eigenpairs_of_a_diagonal_operator() {
        let diag: Vec<f64> = (0..60).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let op = |x: &[f64], y: &mut [f64]| {
            for ((yv, xv), d) in y.iter_mut().zip(x).zip(&diag) {
                *yv = d * xv;
            }
        };
        let (vecs, vals) = top_eigenpairs(60, 3, op, 1e-10, 5000).unwrap();
        for k in 0..3 {
            assert!((vals[k] - diag[k]).abs() < 1e-9);
            assert!(vecs[(k, k)].abs() > 1.0 - 1e-9);
        }
    }
}

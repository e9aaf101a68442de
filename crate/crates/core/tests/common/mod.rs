#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn positive_weights(n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..n).map(|_| 0.25 + 2.0 * rng.random::<f64>()).collect()
}

/// Cyclic Jacobi eigensolver for a symmetric matrix; eigenvalues descending.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
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
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Eigenpairs of `C W` for diagonal `w`, vectors W-normalised.
pub fn weighted_eigen(c: &DMatrix<f64>, w: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = c.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * c[(i, j)] * w[j].sqrt());
    let (values, u) = jacobi_eigen(&sym);
    let phi = DMatrix::from_fn(n, n, |i, k| u[(i, k)] / w[i].sqrt());
    (values, phi)
}

pub fn weighted_similarity(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let n = w.len();
    let ip = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).enumerate().map(|(i, (p, q))| w[i % n] * p * q).sum() };
    let ab = ip(a, b);
    ab * ab / (ip(a, a) * ip(b, b))
}

/// Block Hankel data matrix written out directly from its definition.
pub fn hankel_by_definition(x: &DMatrix<f64>, d: usize, s: usize) -> DMatrix<f64> {
    let n = x.nrows();
    let m = (x.ncols() - d) / s + 1;
    DMatrix::from_fn(n * d, m, |row, col| x[(row % n, col * s + row / n)])
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_RANK_TAU: f64 = 0.01;
pub const DEFAULT_DORMANT_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlasticityReport {
    pub stable_rank: usize,
    pub dormant_ratio: f64,
    pub feature_norm: f64,
    pub rank_tau: f64,
    pub dormant_eps: f64,
}

fn as_matrix(m: &Tensor, what: &'static str) -> Result<(usize, usize)> {
    match m.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::DimMismatch {
            what,
            expected: 2,
            got: s.len(),
        }),
    }
}

/// Centered population covariance `(F - μ)ᵀ(F - μ) / d` of a `d × m` matrix.
pub fn covariance(features: &Tensor) -> Result<Vec<f64>> {
    let (d, m) = as_matrix(features, "feature matrix rank")?;
    let f = features.data();
    let mut mean = vec![0.0; m];
    for i in 0..d {
        mean.iter_mut().zip(&f[i * m..(i + 1) * m]).for_each(|(a, x)| *a += x);
    }
    mean.iter_mut().for_each(|a| *a /= d as f64);
    let mut cov = vec![0.0; m * m];
    let mut centered = vec![0.0; m];
    for i in 0..d {
        centered.iter_mut().zip(&f[i * m..(i + 1) * m]).zip(&mean).for_each(|((c, x), mu)| *c = x - mu);
        for a in 0..m {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let row = &mut cov[a * m..(a + 1) * m];
            for b in a..m {
                row[b] += ca * centered[b];
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            let v = cov[a * m + b] / d as f64;
            cov[a * m + b] = v;
            cov[b * m + a] = v;
        }
    }
    Ok(cov)
}

/// Eigenvalues of a symmetric `m × m` matrix by cyclic Jacobi rotations,
/// sorted in descending order.
pub fn symmetric_eigenvalues(matrix: &[f64], m: usize) -> Vec<f64> {
    let mut a = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|p| (0..m).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * m + q] * a[p * m + q])
            .sum();
        let diag: f64 = (0..m).map(|p| a[p * m + p] * a[p * m + p]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * m + p], a[q * m + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k * m + p], a[k * m + q]);
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p * m + k], a[q * m + k]);
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Number of covariance singular values above `tau` for a `d × m` feature matrix.
pub fn stable_rank(features: &Tensor, tau: f64) -> Result<usize> {
    let (_, m) = as_matrix(features, "feature matrix rank")?;
    let cov = covariance(features)?;
    // the covariance is PSD, so its singular values are |eigenvalues|
    Ok(symmetric_eigenvalues(&cov, m).iter().filter(|e| e.abs() > tau).count())
}

/// Fraction of neurons (columns of a `batch × D` matrix) whose mean absolute
/// activation over the batch is strictly below `eps`.
pub fn dormant_ratio(activations: &Tensor, eps: f64) -> Result<f64> {
    let (n, d) = as_matrix(activations, "activation matrix rank")?;
    let a = activations.data();
    let mut mean_abs = vec![0.0; d];
    for i in 0..n {
        mean_abs.iter_mut().zip(&a[i * d..(i + 1) * d]).for_each(|(m, x)| *m += x.abs());
    }
    let dormant = mean_abs.iter().filter(|m| **m / (n as f64) < eps).count();
    Ok(dormant as f64 / d as f64)
}

/// Mean row L2 norm of an `N × m` feature matrix.
pub fn feature_norm(features: &Tensor) -> Result<f64> {
    let (n, m) = as_matrix(features, "feature matrix rank")?;
    let f = features.data();
    let total: f64 = (0..n)
        .map(|i| libm::sqrt(f[i * m..(i + 1) * m].iter().map(|x| x * x).sum::<f64>()))
        .sum();
    Ok(total / n as f64)
}

/// Concatenate per-layer `[batch, width_l]` activations column-wise.
pub fn concat_columns(parts: &[&Tensor]) -> Result<Tensor> {
    let n = parts.first().map(|p| p.rows()).unwrap_or(0);
    let width: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(n * width);
    for i in 0..n {
        for p in parts {
            if p.rows() != n {
                return Err(Error::DimMismatch {
                    what: "activation batch",
                    expected: n,
                    got: p.rows(),
                });
            }
            data.extend_from_slice(p.row_slice(i));
        }
    }
    Tensor::new(vec![n, width], data)
}

pub fn plasticity(features: &Tensor, activations: &Tensor, rank_tau: f64, dormant_eps: f64) -> Result<PlasticityReport> {
    Ok(PlasticityReport {
        stable_rank: stable_rank(features, rank_tau)?,
        dormant_ratio: dormant_ratio(activations, dormant_eps)?,
        feature_norm: feature_norm(features)?,
        rank_tau,
        dormant_eps,
    })
}

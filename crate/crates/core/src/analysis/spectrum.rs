//! Two-dimensional DFT and the radial frequency-weighted complexity.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::grid::Image;

/// Unnormalised 2-D DFT `F[u][v] = Σ x[i][j]·e^{-2πi(ui + vj)/n}`, returned as
/// `(re, im)` in row-major order.
pub fn dft2(image: &Image) -> (Vec<f64>, Vec<f64>) {
    let n = image.size;
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            (libm::cos(a), libm::sin(a))
        })
        .unzip();

    // rows: real input
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for i in 0..n {
        let row = &image.data[i * n..(i + 1) * n];
        for v in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            let mut idx = 0;
            for &x in row {
                sr += x * cos[idx];
                si -= x * sin[idx];
                idx += v;
                if idx >= n {
                    idx -= n;
                }
            }
            re[i * n + v] = sr;
            im[i * n + v] = si;
        }
    }

    // columns: complex input
    let mut out_re = vec![0.0; n * n];
    let mut out_im = vec![0.0; n * n];
    let mut col_re = vec![0.0; n];
    let mut col_im = vec![0.0; n];
    for v in 0..n {
        for i in 0..n {
            col_re[i] = re[i * n + v];
            col_im[i] = im[i * n + v];
        }
        for u in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            let mut idx = 0;
            for i in 0..n {
                let (c, s) = (cos[idx], sin[idx]);
                sr += col_re[i] * c + col_im[i] * s;
                si += col_im[i] * c - col_re[i] * s;
                idx += u;
                if idx >= n {
                    idx -= n;
                }
            }
            out_re[u * n + v] = sr;
            out_im[u * n + v] = si;
        }
    }
    (out_re, out_im)
}

/// Signed frequency of DFT index `u` for length `n`, in `[-n/2, n/2)`.
pub fn signed_frequency(u: usize, n: usize) -> i64 {
    if u < n.div_ceil(2) {
        u as i64
    } else {
        u as i64 - n as i64
    }
}

/// Highest radial frequency kept: the Nyquist limit `n/2`.
pub fn nyquist(n: usize) -> usize {
    n / 2
}

/// Coefficients at or below this fraction of the largest possible magnitude
/// (`n² · max|x|`) are rounding residue and count as zero.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Total coefficient magnitude per integer radial frequency `k = 0..=K`,
/// with `k = round(sqrt(kx² + ky²))`. Corner frequencies beyond `K` are dropped.
pub fn radial_spectrum(image: &Image) -> Vec<f64> {
    let n = image.size;
    let k_max = nyquist(n);
    let (re, im) = dft2(image);
    let peak = image.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = NOISE_FLOOR * (n * n) as f64 * peak;
    let mut bins = vec![0.0; k_max + 1];
    for u in 0..n {
        let ku = signed_frequency(u, n) as f64;
        for v in 0..n {
            let kv = signed_frequency(v, n) as f64;
            let k = libm::round(libm::sqrt(ku * ku + kv * kv)) as usize;
            if k <= k_max {
                let idx = u * n + v;
                let mag = libm::sqrt(re[idx] * re[idx] + im[idx] * im[idx]);
                if mag > floor {
                    bins[k] += mag;
                }
            }
        }
    }
    bins
}

/// Frequency-weighted mean of the radial spectrum, `Σ k·|F|(k) / Σ |F|(k)`.
/// An all-zero image has complexity 0.
pub fn complexity(image: &Image) -> f64 {
    complexity_from_spectrum(&radial_spectrum(image))
}

pub fn complexity_from_spectrum(bins: &[f64]) -> f64 {
    let total: f64 = bins.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    bins.iter().enumerate().map(|(k, m)| k as f64 * m).sum::<f64>() / total
}

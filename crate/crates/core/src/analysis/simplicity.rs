use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::grid::{evaluate_on_grid, GridSpec};
use super::spectrum::complexity;
use crate::error::{Error, Result};
use crate::nets::{NetworkSpec, Params};
use crate::rng::{derive_seed, Stream};

/// Added to every complexity before inversion so constant functions stay finite.
pub const C_FLOOR: f64 = 1e-6;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub arch: String,
    pub params: usize,
    pub n_inits: usize,
    pub complexities: Vec<f64>,
    pub mean_c: f64,
    pub mean_s: f64,
    pub s_ci_low: f64,
    pub s_ci_high: f64,
    /// Observation normalisation is never part of the probed function.
    pub rsnorm_bypassed: bool,
    /// Images are transformed as-is, without mean/variance standardisation.
    pub standardized: bool,
}

/// Mean of `1 / (c + C_FLOOR)` with a normal-approximation 95% interval.
pub fn score_from_complexities(complexities: &[f64]) -> (f64, f64, f64) {
    let n = complexities.len() as f64;
    let inv: Vec<f64> = complexities.iter().map(|c| 1.0 / (c + C_FLOOR)).collect();
    let mean = inv.iter().sum::<f64>() / n;
    let half = if complexities.len() > 1 {
        let var = inv.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        Z_95 * libm::sqrt(var / n)
    } else {
        0.0
    };
    (mean, mean - half, mean + half)
}

/// Seed of the `i`-th initialisation of an experiment rooted at `root`.
pub fn init_seed(root: u64, i: usize) -> u64 {
    derive_seed(root, Stream::Analysis(i as u32))
}

/// Complexity of one initialisation.
pub fn init_complexity(spec: &NetworkSpec, seed: u64, grid: &GridSpec) -> Result<f64> {
    let params = Params::init(spec, seed)?;
    Ok(complexity(&evaluate_on_grid(spec, &params, grid)?))
}

/// Aggregate per-initialisation complexities (ordered by init index).
pub fn report(arch: &str, spec: &NetworkSpec, complexities: Vec<f64>) -> Result<SimplicityReport> {
    if complexities.len() < 2 {
        return Err(Error::config("n_inits", "at least two initialisations are required"));
    }
    let (mean_s, lo, hi) = score_from_complexities(&complexities);
    Ok(SimplicityReport {
        arch: arch.into(),
        params: crate::nets::count_params(spec),
        n_inits: complexities.len(),
        mean_c: complexities.iter().sum::<f64>() / complexities.len() as f64,
        complexities,
        mean_s,
        s_ci_low: lo,
        s_ci_high: hi,
        rsnorm_bypassed: true,
        standardized: false,
    })
}

/// Simplicity score of an architecture over `n_inits` random initialisations.
///
/// `factory` builds the network for a given seed; it must expose two inputs
/// and a scalar output.
pub fn simplicity_score<F>(arch: &str, factory: F, n_inits: usize, grid: &GridSpec, root_seed: u64) -> Result<SimplicityReport>
where
    F: Fn(u64) -> Result<(NetworkSpec, Params)>,
{
    if n_inits < 2 {
        return Err(Error::config("n_inits", "at least two initialisations are required"));
    }
    let mut complexities = Vec::with_capacity(n_inits);
    let mut spec = None;
    for i in 0..n_inits {
        let (s, params) = factory(init_seed(root_seed, i))?;
        complexities.push(complexity(&evaluate_on_grid(&s, &params, grid)?));
        spec = Some(s);
    }
    report(arch, &spec.unwrap(), complexities)
}

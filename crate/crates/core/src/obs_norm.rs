//! Observation normalisation: running statistics (RSNorm) and the
//! alternative schemes it is compared against.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_FIXED_STEPS: u64 = 5000;
const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-dimension running mean and population variance.
///
/// Starts from `μ₀ = 0, σ²₀ = 0`; after each sample `o_t`, with
/// `δ = o_t − μ_{t−1}`:
///
/// ```text
/// μ_t  = μ_{t−1} + δ / t
/// σ²_t = (t − 1)/t · (σ²_{t−1} + δ² / t)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    count: u64,
    eps: f64,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self::with_eps(dim, DEFAULT_EPS)
    }

    pub fn with_eps(dim: usize, eps: f64) -> Self {
        RunningStats {
            mean: vec![0.0; dim],
            var: vec![0.0; dim],
            count: 0,
            eps,
        }
    }

    /// Statistics supplied from outside (oracle files, checkpoints).
    pub fn from_moments(mean: Vec<f64>, var: Vec<f64>, count: u64, eps: f64) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimMismatch {
                what: "variance",
                expected: mean.len(),
                got: var.len(),
            });
        }
        if let Some(v) = var.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Invalid(format!("variance must be non-negative, got {v}")));
        }
        Ok(RunningStats { mean, var, count, eps })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn check(&self, o: &[f64]) -> Result<()> {
        if o.len() != self.dim() {
            return Err(Error::DimMismatch {
                what: "observation",
                expected: self.dim(),
                got: o.len(),
            });
        }
        Ok(())
    }

    pub fn update(&mut self, o: &[f64]) -> Result<()> {
        self.check(o)?;
        self.count += 1;
        let t = self.count as f64;
        for ((mu, var), &x) in self.mean.iter_mut().zip(&mut self.var).zip(o) {
            let delta = x - *mu;
            *mu += delta / t;
            *var = (t - 1.0) / t * (*var + delta * delta / t);
        }
        Ok(())
    }

    /// `(o − μ) / sqrt(σ² + ε)`; never modifies the statistics.
    pub fn apply(&self, o: &[f64]) -> Result<Vec<f64>> {
        self.check(o)?;
        Ok(o.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((x, mu), var)| (x - mu) / libm::sqrt(var + self.eps))
            .collect())
    }

    /// Row-wise [`apply`](Self::apply) on a `[n, dim]` batch.
    pub fn apply_batch(&self, batch: &Tensor) -> Result<Tensor> {
        let mut out = Vec::with_capacity(batch.numel());
        for i in 0..batch.rows() {
            out.extend(self.apply(batch.row_slice(i))?);
        }
        Tensor::new(batch.shape().to_vec(), out)
    }

    pub fn freeze_for_eval(&self) -> FrozenStats<'_> {
        FrozenStats(self)
    }
}

/// Read-only view used during evaluation episodes.
#[derive(Clone, Copy, Debug)]
pub struct FrozenStats<'a>(&'a RunningStats);

impl FrozenStats<'_> {
    pub fn apply(&self, o: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(o)
    }

    pub fn count(&self) -> u64 {
        self.0.count
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerKind {
    /// Raw observations are stored; current statistics normalise at acting
    /// and at training time.
    Rsnorm,
    /// Normalise once at collection time and store the normalised value.
    EnvWrapperRsnorm,
    /// Running statistics frozen after the first `steps` environment steps.
    FixedInitial { steps: u64 },
    /// Statistics loaded from a file and never updated.
    Oracle,
    /// Parameter-free layer normalisation of each observation.
    LayernormObs,
    /// Minibatch statistics during updates, running statistics when acting.
    BatchnormObs,
    None,
}

impl NormalizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormalizerKind::Rsnorm => "rsnorm",
            NormalizerKind::EnvWrapperRsnorm => "env-wrapper",
            NormalizerKind::FixedInitial { .. } => "fixed-initial",
            NormalizerKind::Oracle => "oracle",
            NormalizerKind::LayernormObs => "layernorm-obs",
            NormalizerKind::BatchnormObs => "batchnorm-obs",
            NormalizerKind::None => "none",
        }
    }
}

impl fmt::Display for NormalizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizerKind::FixedInitial { steps } => write!(f, "fixed-initial-{steps}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for NormalizerKind {
    type Err = Error;

    /// Accepts the names of [`NormalizerKind::name`]; `fixed-initial` takes an
    /// optional `-N` suffix.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "rsnorm" => NormalizerKind::Rsnorm,
            "env-wrapper" | "env-wrapper-rsnorm" => NormalizerKind::EnvWrapperRsnorm,
            "fixed-initial" => NormalizerKind::FixedInitial {
                steps: DEFAULT_FIXED_STEPS,
            },
            "oracle" => NormalizerKind::Oracle,
            "layernorm-obs" => NormalizerKind::LayernormObs,
            "batchnorm-obs" => NormalizerKind::BatchnormObs,
            "none" => NormalizerKind::None,
            other => match other.strip_prefix("fixed-initial-").map(str::parse::<u64>) {
                Some(Ok(steps)) => NormalizerKind::FixedInitial { steps },
                _ => return Err(Error::config("normalizer", format!("unknown normalizer `{other}`"))),
            },
        })
    }
}

fn layer_norm_row(o: &[f64]) -> Vec<f64> {
    let n = o.len() as f64;
    let mu = o.iter().sum::<f64>() / n;
    let var = o.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    let inv = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
    o.iter().map(|x| (x - mu) * inv).collect()
}

/// One normaliser attached to one network input stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    kind: NormalizerKind,
    stats: RunningStats,
}

impl ObsNormalizer {
    pub fn new(kind: NormalizerKind, dim: usize) -> Result<Self> {
        if kind == NormalizerKind::Oracle {
            return Err(Error::config("normalizer", "oracle statistics must be supplied"));
        }
        Ok(ObsNormalizer {
            kind,
            stats: RunningStats::new(dim),
        })
    }

    pub fn oracle(stats: RunningStats) -> Self {
        ObsNormalizer {
            kind: NormalizerKind::Oracle,
            stats,
        }
    }

    /// Restore from checkpointed statistics.
    pub fn with_stats(kind: NormalizerKind, stats: RunningStats) -> Self {
        ObsNormalizer { kind, stats }
    }

    pub fn kind(&self) -> NormalizerKind {
        self.kind
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    /// Whether the replay buffer holds normalised observations.
    pub fn stores_normalized(&self) -> bool {
        self.kind == NormalizerKind::EnvWrapperRsnorm
    }

    /// Record the observation the agent is about to act on. Called exactly
    /// once per environment step.
    pub fn observe(&mut self, o: &[f64]) -> Result<()> {
        match self.kind {
            NormalizerKind::Rsnorm | NormalizerKind::EnvWrapperRsnorm | NormalizerKind::BatchnormObs => self.stats.update(o),
            NormalizerKind::FixedInitial { steps } if self.stats.count < steps => self.stats.update(o),
            _ => {
                self.stats.check(o)?;
                Ok(())
            }
        }
    }

    /// Normalised observation for action selection.
    pub fn for_acting(&self, o: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            NormalizerKind::None => {
                self.stats.check(o)?;
                Ok(o.to_vec())
            }
            NormalizerKind::LayernormObs => {
                self.stats.check(o)?;
                Ok(layer_norm_row(o))
            }
            _ => self.stats.apply(o),
        }
    }

    /// Value written into the replay buffer.
    pub fn for_storage(&self, o: &[f64]) -> Result<Vec<f64>> {
        if self.stores_normalized() {
            self.stats.apply(o)
        } else {
            self.stats.check(o)?;
            Ok(o.to_vec())
        }
    }

    /// Normalise a sampled `(obs, next_obs)` minibatch for an update.
    pub fn for_training(&self, obs: &Tensor, next_obs: &Tensor) -> Result<(Tensor, Tensor)> {
        match self.kind {
            NormalizerKind::EnvWrapperRsnorm | NormalizerKind::None => Ok((obs.clone(), next_obs.clone())),
            NormalizerKind::LayernormObs => {
                let ln = |t: &Tensor| -> Result<Tensor> {
                    let mut out = Vec::with_capacity(t.numel());
                    for i in 0..t.rows() {
                        out.extend(layer_norm_row(t.row_slice(i)));
                    }
                    Tensor::new(t.shape().to_vec(), out)
                };
                Ok((ln(obs)?, ln(next_obs)?))
            }
            NormalizerKind::BatchnormObs => {
                let stats = batch_stats(obs, self.stats.eps)?;
                Ok((stats.apply_batch(obs)?, stats.apply_batch(next_obs)?))
            }
            _ => Ok((self.stats.apply_batch(obs)?, self.stats.apply_batch(next_obs)?)),
        }
    }
}

/// Minibatch mean and population variance as [`RunningStats`].
pub fn batch_stats(batch: &Tensor, eps: f64) -> Result<RunningStats> {
    let (n, d) = (batch.rows(), batch.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        mean.iter_mut().zip(batch.row_slice(i)).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for i in 0..n {
        var.iter_mut()
            .zip(batch.row_slice(i))
            .zip(&mean)
            .for_each(|((v, x), m)| *v += (x - m) * (x - m));
    }
    var.iter_mut().for_each(|v| *v /= n as f64);
    RunningStats::from_moments(mean, var, n as u64, eps)
}

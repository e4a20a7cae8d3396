use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{matched_spec, HeadKind, NetworkSpec, Variant};
use crate::obs_norm::NormalizerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Sac,
    Ddpg,
}

impl core::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sac" => Ok(Algo::Sac),
            "ddpg" => Ok(Algo::Ddpg),
            other => Err(Error::config("algo", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Architecture and learning rate of one network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub variant: Variant,
    pub num_blocks: usize,
    pub hidden_dim: usize,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algo: Algo,
    pub actor: NetConfig,
    pub critic: NetConfig,
    pub normalizer: NormalizerKind,
    pub tau: f64,
    pub init_temperature: f64,
    pub temperature_lr: f64,
    /// `None` resolves to `−|A|/2`.
    pub target_entropy: Option<f64>,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub adam_eps: f64,
    pub gamma: f64,
    pub replay_ratio: usize,
    pub clipped_double_q: bool,
    /// Gradient steps between full resets of networks and optimizers.
    pub reset_interval: Option<u64>,
    pub buffer_capacity: usize,
    pub warmup_steps: u64,
    /// Std of the Gaussian exploration noise used by DDPG, in policy units.
    pub exploration_noise: f64,
    /// Environment steps between plasticity probes; `None` disables them.
    pub probe_every: Option<u64>,
    pub rank_tau: f64,
    pub dormant_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Sac,
            actor: NetConfig {
                variant: Variant::Simba,
                num_blocks: 1,
                hidden_dim: 128,
                lr: 1e-4,
            },
            critic: NetConfig {
                variant: Variant::Simba,
                num_blocks: 2,
                hidden_dim: 512,
                lr: 1e-4,
            },
            normalizer: NormalizerKind::Rsnorm,
            tau: 5e-3,
            init_temperature: 1e-2,
            temperature_lr: 1e-4,
            target_entropy: None,
            batch_size: 256,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 1e-2,
            adam_eps: 1e-8,
            gamma: 0.99,
            replay_ratio: 2,
            clipped_double_q: false,
            reset_interval: None,
            buffer_capacity: 1_000_000,
            warmup_steps: 1000,
            exploration_noise: 0.1,
            probe_every: Some(1000),
            rank_tau: crate::analysis::DEFAULT_RANK_TAU,
            dormant_eps: crate::analysis::DEFAULT_DORMANT_EPS,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        positive("actor.lr", self.actor.lr)?;
        positive("critic.lr", self.critic.lr)?;
        positive("temperature_lr", self.temperature_lr)?;
        positive("init_temperature", self.init_temperature)?;
        positive("adam_eps", self.adam_eps)?;
        if self.actor.hidden_dim == 0 {
            return Err(Error::config("actor.hidden_dim", "must be positive"));
        }
        if self.critic.hidden_dim == 0 {
            return Err(Error::config("critic.hidden_dim", "must be positive"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("tau", format!("must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("betas", "must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        if self.replay_ratio == 0 {
            return Err(Error::config("replay_ratio", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("buffer_capacity", "must be at least 1"));
        }
        if self.reset_interval == Some(0) {
            return Err(Error::config("reset_interval", "must be at least 1 when set"));
        }
        if self.probe_every == Some(0) {
            return Err(Error::config("probe_every", "must be at least 1 when set"));
        }
        if !(self.exploration_noise >= 0.0) {
            return Err(Error::config("exploration_noise", "must be non-negative"));
        }
        Ok(())
    }

    pub fn resolved_target_entropy(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64) / 2.0)
    }

    /// Switch both networks to `variant`. With `match_params`, each network's
    /// depth and width are chosen so its parameter count is within 1% of the
    /// simba network the current widths describe.
    pub fn with_architecture(mut self, variant: Variant, obs_dim: usize, action_dim: usize, match_params: bool) -> Result<Self> {
        if match_params {
            let mut reference = self;
            reference.actor.variant = Variant::Simba;
            reference.critic.variant = Variant::Simba;
            let actor = matched_spec(&reference.actor_spec(obs_dim, action_dim), variant, 0.01)?;
            let critic = matched_spec(&reference.critic_spec(obs_dim, action_dim), variant, 0.01)?;
            self.actor.num_blocks = actor.num_blocks;
            self.actor.hidden_dim = actor.hidden_dim;
            self.critic.num_blocks = critic.num_blocks;
            self.critic.hidden_dim = critic.hidden_dim;
        }
        self.actor.variant = variant;
        self.critic.variant = variant;
        Ok(self)
    }

    pub fn actor_spec(&self, obs_dim: usize, action_dim: usize) -> NetworkSpec {
        let head = match self.algo {
            Algo::Sac => HeadKind::GaussianPolicy,
            Algo::Ddpg => HeadKind::DeterministicPolicy,
        };
        NetworkSpec::new(
            self.actor.variant,
            obs_dim,
            self.actor.hidden_dim,
            self.actor.num_blocks,
            action_dim,
            head,
        )
    }

    pub fn critic_spec(&self, obs_dim: usize, action_dim: usize) -> NetworkSpec {
        NetworkSpec::new(
            self.critic.variant,
            obs_dim + action_dim,
            self.critic.hidden_dim,
            self.critic.num_blocks,
            1,
            HeadKind::QValue,
        )
    }
}

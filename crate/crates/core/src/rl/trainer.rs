use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng as _;

use super::agent::{Agent, Capture};
use super::buffer::{ReplayBuffer, Transition};
use super::config::TrainConfig;
use super::losses::Bounds;
use crate::analysis::{plasticity, PlasticityReport};
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::obs_norm::{NormalizerKind, ObsNormalizer};
use crate::rng::{derive_seed, stream_rng, Rng, Stream};

pub const METRICS_HEADER: &str =
    "env_step,grad_step,episode_return,critic_loss,actor_loss,alpha,dormant_ratio,stable_rank,feature_norm,wall_time_s";

/// One row per finished episode. Quantities that do not exist yet (no update
/// so far, no probe so far, no temperature for DDPG) are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub env_step: u64,
    pub grad_step: u64,
    pub episode_return: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha: Option<f64>,
    pub dormant_ratio: Option<f64>,
    pub stable_rank: Option<usize>,
    pub feature_norm: Option<f64>,
    pub wall_time_s: f64,
}

/// Plasticity measurements on the critic's last minibatch.
#[derive(Clone, Debug)]
pub struct Probe {
    pub env_step: u64,
    pub grad_step: u64,
    pub capture: Capture,
    pub report: PlasticityReport,
}

/// Off-policy training loop driven one environment step at a time.
pub struct Trainer<E> {
    env: E,
    cfg: TrainConfig,
    seed: u64,
    bounds: Bounds,
    obs_dim: usize,
    action_dim: usize,
    normalizer: ObsNormalizer,
    buffer: ReplayBuffer,
    agent: Agent,
    sampling: Rng,
    policy: Rng,
    exploration: Rng,
    env_step: u64,
    grad_step: u64,
    resets: u32,
    obs: Option<Vec<f64>>,
    episode_return: f64,
    episode_len: usize,
    last_losses: Option<(f64, f64)>,
    probe: Option<Probe>,
    fresh_probe: bool,
    metrics: Vec<MetricsRow>,
    clock: Option<Box<dyn Fn() -> f64>>,
}

impl<E: Env> Trainer<E> {
    pub fn new(env: E, cfg: TrainConfig, seed: u64) -> Result<Self> {
        if cfg.normalizer == NormalizerKind::Oracle {
            return Err(Error::config("normalizer", "oracle statistics must be supplied"));
        }
        let normalizer = ObsNormalizer::new(cfg.normalizer, env.obs_dim())?;
        Self::with_normalizer(env, cfg, seed, normalizer)
    }

    pub fn with_normalizer(env: E, cfg: TrainConfig, seed: u64, normalizer: ObsNormalizer) -> Result<Self> {
        cfg.validate()?;
        let (obs_dim, action_dim) = (env.obs_dim(), env.action_dim());
        if normalizer.dim() != obs_dim {
            return Err(Error::DimMismatch {
                what: "normalizer",
                expected: obs_dim,
                got: normalizer.dim(),
            });
        }
        let (low, high) = env.action_bounds();
        let bounds = Bounds::new(low, high)?;
        let agent = Agent::new(&cfg, obs_dim, action_dim, derive_seed(seed, Stream::Init))?;
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, action_dim)?,
            sampling: stream_rng(seed, Stream::Sampling),
            policy: stream_rng(seed, Stream::Policy),
            exploration: stream_rng(seed, Stream::Exploration),
            env,
            cfg,
            seed,
            bounds,
            obs_dim,
            action_dim,
            normalizer,
            agent,
            env_step: 0,
            grad_step: 0,
            resets: 0,
            obs: None,
            episode_return: 0.0,
            episode_len: 0,
            last_losses: None,
            probe: None,
            fresh_probe: false,
            metrics: Vec::new(),
            clock: None,
        })
    }

    /// Seconds since start, reported in `wall_time_s`. Without a clock the
    /// column is 0 so logs stay reproducible.
    pub fn set_clock(&mut self, clock: Box<dyn Fn() -> f64>) {
        self.clock = Some(clock);
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut Agent {
        &mut self.agent
    }

    pub fn normalizer(&self) -> &ObsNormalizer {
        &self.normalizer
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn env_steps(&self) -> u64 {
        self.env_step
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_step
    }

    pub fn resets(&self) -> u32 {
        self.resets
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn latest_probe(&self) -> Option<&Probe> {
        self.probe.as_ref()
    }

    /// The probe taken during the most recent step, if any.
    pub fn take_fresh_probe(&mut self) -> Option<&Probe> {
        if core::mem::take(&mut self.fresh_probe) {
            self.probe.as_ref()
        } else {
            None
        }
    }

    fn is_probe_step(&self, step: u64) -> bool {
        self.cfg.probe_every.is_some_and(|k| step % k == 0)
    }

    /// Collect one transition, then run `replay_ratio` updates once warmup
    /// is over. Returns the metrics row if an episode finished.
    pub fn step(&mut self) -> Result<Option<MetricsRow>> {
        let obs = match self.obs.take() {
            Some(o) => o,
            None => self.env.reset(),
        };
        self.normalizer.observe(&obs)?;
        let policy_action = if self.env_step < self.cfg.warmup_steps {
            (0..self.action_dim)
                .map(|_| self.exploration.random_range(-1.0..=1.0))
                .collect::<Vec<f64>>()
        } else {
            let o = self.normalizer.for_acting(&obs)?;
            self.agent.act(&o, false, self.cfg.exploration_noise, &mut self.exploration)?
        };
        let action = self.bounds.scale(&policy_action);
        let step = self.env.step(&action)?;
        self.env_step += 1;
        self.episode_len += 1;
        self.episode_return += step.reward;

        self.buffer.push(Transition {
            obs: self.normalizer.for_storage(&obs)?,
            action,
            reward: step.reward,
            next_obs: self.normalizer.for_storage(&step.obs)?,
            done: step.done,
        })?;

        if self.env_step > self.cfg.warmup_steps {
            let probe = self.is_probe_step(self.env_step);
            for k in 0..self.cfg.replay_ratio {
                self.update(probe && k + 1 == self.cfg.replay_ratio)?;
            }
        }

        let finished = step.done || self.episode_len >= self.env.max_episode_steps();
        if finished {
            let row = self.row();
            self.metrics.push(row.clone());
            self.episode_return = 0.0;
            self.episode_len = 0;
            self.obs = None;
            Ok(Some(row))
        } else {
            self.obs = Some(step.obs);
            Ok(None)
        }
    }

    fn update(&mut self, probe: bool) -> Result<()> {
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.sampling)?;
        let (obs, next_obs) = self.normalizer.for_training(&batch.obs, &batch.next_obs)?;
        let info = self.agent.update(
            &obs,
            &batch.action,
            &batch.reward,
            &next_obs,
            &batch.done,
            &self.cfg,
            &self.bounds,
            &mut self.policy,
            probe,
        )?;
        self.grad_step += 1;
        self.last_losses = Some((info.critic_loss, info.actor_loss));
        if let Some(capture) = info.capture {
            let report = plasticity(&capture.features, &capture.activations, self.cfg.rank_tau, self.cfg.dormant_eps)?;
            self.probe = Some(Probe {
                env_step: self.env_step,
                grad_step: self.grad_step,
                capture,
                report,
            });
            self.fresh_probe = true;
        }
        if let Some(every) = self.cfg.reset_interval {
            if self.grad_step % every == 0 {
                self.reset_agent()?;
            }
        }
        Ok(())
    }

    /// Seed used by the `k`-th periodic reset.
    pub fn reset_seed(&self, k: u32) -> u64 {
        derive_seed(self.seed, Stream::Reset(k))
    }

    /// Reinitialise actor, critics, targets, temperature and optimizers.
    /// The replay buffer and normaliser statistics are kept.
    pub fn reset_agent(&mut self) -> Result<()> {
        let seed = self.reset_seed(self.resets);
        self.agent = Agent::new(&self.cfg, self.obs_dim, self.action_dim, seed)?;
        self.resets += 1;
        Ok(())
    }

    fn row(&self) -> MetricsRow {
        let report = self.probe.as_ref().map(|p| &p.report);
        MetricsRow {
            env_step: self.env_step,
            grad_step: self.grad_step,
            episode_return: self.episode_return,
            critic_loss: self.last_losses.map(|l| l.0),
            actor_loss: self.last_losses.map(|l| l.1),
            alpha: self.agent.alpha(),
            dormant_ratio: report.map(|r| r.dormant_ratio),
            stable_rank: report.map(|r| r.stable_rank),
            feature_norm: report.map(|r| r.feature_norm),
            wall_time_s: self.clock.as_ref().map_or(0.0, |c| c()),
        }
    }

    pub fn run(&mut self, env_steps: u64) -> Result<()> {
        for _ in 0..env_steps {
            self.step()?;
        }
        Ok(())
    }

    /// Deterministic-policy returns on `env`, normalising with frozen
    /// statistics.
    pub fn evaluate<F: Env>(&self, env: &mut F, episodes: usize) -> Result<Vec<f64>> {
        let frozen = self.normalizer.clone();
        let mut unused = stream_rng(self.seed, Stream::Policy);
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut obs = env.reset();
            let mut total = 0.0;
            for _ in 0..env.max_episode_steps() {
                let o = frozen.for_acting(&obs)?;
                let a = self.agent.act(&o, true, 0.0, &mut unused)?;
                let step = env.step(&self.bounds.scale(&a))?;
                total += step.reward;
                obs = step.obs;
                if step.done {
                    break;
                }
            }
            returns.push(total);
        }
        Ok(returns)
    }

    pub fn into_metrics(self) -> Vec<MetricsRow> {
        self.metrics
    }
}

/// Train for `total_env_steps` and return the per-episode metrics.
pub fn train_loop<E: Env>(env: E, cfg: TrainConfig, seed: u64, total_env_steps: u64) -> Result<Vec<MetricsRow>> {
    let mut trainer = Trainer::new(env, cfg, seed)?;
    trainer.run(total_env_steps)?;
    Ok(trainer.into_metrics())
}

use alloc::vec;
use alloc::vec::Vec;

use super::config::{Algo, TrainConfig};
use super::losses::{self, Bounds, SacTargetInputs};
use super::optim::{adamw_step, polyak_update, AdamW, OptimizerState};
use crate::analysis::concat_columns;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::nets::{self, ForwardOutput, NetworkSpec, Params};
use crate::rng::{normal, splitmix64, Rng};
use crate::tensor::Tensor;

const ACTOR_ROLE: u64 = 1;
const CRITIC_ROLE: u64 = 2;

/// Seed of the `role`-th network drawn from a base seed.
pub fn role_seed(base: u64, role: u64) -> u64 {
    splitmix64(base ^ role.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// A network with its optimizer.
#[derive(Clone, Debug)]
pub struct Learner {
    pub spec: NetworkSpec,
    pub params: Params,
    pub opt: OptimizerState,
    pub adam: AdamW,
}

impl Learner {
    pub fn new(spec: NetworkSpec, seed: u64, adam: AdamW) -> Result<Self> {
        let params = Params::init(&spec, seed)?;
        let opt = OptimizerState::new(params.tensors());
        Ok(Learner { spec, params, opt, adam })
    }

    pub fn step(&mut self, grads: &[Tensor]) -> Result<()> {
        adamw_step(self.params.tensors_mut(), grads, &mut self.opt, &self.adam)
    }
}

/// Critic features and post-ReLU activations captured during an update.
#[derive(Clone, Debug)]
pub struct Capture {
    pub features: Tensor,
    pub activations: Tensor,
}

/// Losses of one gradient update.
#[derive(Clone, Debug)]
pub struct UpdateInfo {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: Option<f64>,
    pub capture: Option<Capture>,
}

fn capture(tape: &Tape, out: &ForwardOutput) -> Result<Capture> {
    let acts: Vec<&Tensor> = out.activations.iter().map(|v| tape.value(*v)).collect();
    let activations = if acts.is_empty() {
        tape.value(out.features).clone()
    } else {
        concat_columns(&acts)?
    };
    Ok(Capture {
        features: tape.value(out.features).clone(),
        activations,
    })
}

fn gaussian_noise(rows: usize, cols: usize, rng: &mut Rng) -> Result<Tensor> {
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| normal(rng)).collect())
}

#[derive(Clone, Debug)]
pub struct SacAgent {
    pub actor: Learner,
    /// One critic, or two with clipped double-Q.
    pub critics: Vec<Learner>,
    pub targets: Vec<Params>,
    pub log_alpha: Tensor,
    pub alpha_opt: OptimizerState,
    pub alpha_adam: AdamW,
    pub target_entropy: f64,
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub actor: Learner,
    pub critic: Learner,
    pub target_actor: Params,
    pub target_critic: Params,
}

#[derive(Clone, Debug)]
pub enum Agent {
    Sac(SacAgent),
    Ddpg(DdpgAgent),
}

impl Agent {
    /// Fresh networks, targets, temperature and optimizers from `base_seed`.
    pub fn new(cfg: &TrainConfig, obs_dim: usize, action_dim: usize, base_seed: u64) -> Result<Self> {
        let actor_spec = cfg.actor_spec(obs_dim, action_dim);
        let critic_spec = cfg.critic_spec(obs_dim, action_dim);
        let actor_adam = AdamW::new(cfg.actor.lr, cfg.beta1, cfg.beta2, cfg.weight_decay);
        let critic_adam = AdamW::new(cfg.critic.lr, cfg.beta1, cfg.beta2, cfg.weight_decay);
        let mut actor = Learner::new(actor_spec, role_seed(base_seed, ACTOR_ROLE), actor_adam)?;
        actor.adam.eps = cfg.adam_eps;
        let n_critics = match (cfg.algo, cfg.clipped_double_q) {
            (Algo::Sac, true) => 2,
            _ => 1,
        };
        let critics = (0..n_critics)
            .map(|i| {
                let mut l = Learner::new(critic_spec, role_seed(base_seed, CRITIC_ROLE + i), critic_adam)?;
                l.adam.eps = cfg.adam_eps;
                Ok(l)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(match cfg.algo {
            Algo::Sac => {
                let log_alpha = Tensor::scalar(libm::log(cfg.init_temperature));
                let alpha_opt = OptimizerState::new(core::slice::from_ref(&log_alpha));
                let mut alpha_adam = AdamW::new(cfg.temperature_lr, cfg.beta1, cfg.beta2, 0.0);
                alpha_adam.eps = cfg.adam_eps;
                Agent::Sac(SacAgent {
                    targets: critics.iter().map(|c| c.params.clone()).collect(),
                    actor,
                    critics,
                    log_alpha,
                    alpha_opt,
                    alpha_adam,
                    target_entropy: cfg.resolved_target_entropy(action_dim),
                })
            }
            Algo::Ddpg => {
                let critic = critics.into_iter().next().expect("one critic");
                Agent::Ddpg(DdpgAgent {
                    target_actor: actor.params.clone(),
                    target_critic: critic.params.clone(),
                    actor,
                    critic,
                })
            }
        })
    }

    pub fn actor(&self) -> &Learner {
        match self {
            Agent::Sac(a) => &a.actor,
            Agent::Ddpg(a) => &a.actor,
        }
    }

    pub fn critic(&self) -> &Learner {
        match self {
            Agent::Sac(a) => &a.critics[0],
            Agent::Ddpg(a) => &a.critic,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Agent::Sac(a) => Some(libm::exp(a.log_alpha.item())),
            Agent::Ddpg(_) => None,
        }
    }

    /// Policy action in `[-1, 1]^|A|` for one normalised observation.
    /// Stochastic unless `deterministic`; DDPG adds `N(0, noise²)` and clips.
    pub fn act(&self, obs: &[f64], deterministic: bool, noise_std: f64, rng: &mut Rng) -> Result<Vec<f64>> {
        let actor = self.actor();
        let head = nets::evaluate(&actor.spec, &actor.params, &Tensor::row(obs.to_vec()))?;
        let a_dim = actor.spec.output_dim;
        let h = head.data();
        Ok(match self {
            Agent::Sac(_) => (0..a_dim)
                .map(|j| {
                    let mean = h[j];
                    if deterministic {
                        libm::tanh(mean)
                    } else {
                        let log_std = h[a_dim + j].clamp(nets::LOG_STD_MIN, nets::LOG_STD_MAX);
                        libm::tanh(mean + libm::exp(log_std) * normal(rng))
                    }
                })
                .collect(),
            Agent::Ddpg(_) => h
                .iter()
                .map(|m| {
                    let a = libm::tanh(*m);
                    if deterministic {
                        a
                    } else {
                        (a + noise_std * normal(rng)).clamp(-1.0, 1.0)
                    }
                })
                .collect(),
        })
    }

    /// One gradient update on an already normalised batch. With `probe`, the
    /// critic's features and activations on this batch are returned.
    pub fn update(
        &mut self,
        obs: &Tensor,
        action: &Tensor,
        reward: &Tensor,
        next_obs: &Tensor,
        done: &Tensor,
        cfg: &TrainConfig,
        bounds: &Bounds,
        rng: &mut Rng,
        probe: bool,
    ) -> Result<UpdateInfo> {
        match self {
            Agent::Sac(a) => a.update(obs, action, reward, next_obs, done, cfg, bounds, rng, probe),
            Agent::Ddpg(a) => a.update(obs, action, reward, next_obs, done, cfg, bounds, probe),
        }
    }
}

impl SacAgent {
    pub fn alpha(&self) -> f64 {
        libm::exp(self.log_alpha.item())
    }

    #[allow(clippy::too_many_arguments)]
    fn update(
        &mut self,
        obs: &Tensor,
        action: &Tensor,
        reward: &Tensor,
        next_obs: &Tensor,
        done: &Tensor,
        cfg: &TrainConfig,
        bounds: &Bounds,
        rng: &mut Rng,
        probe: bool,
    ) -> Result<UpdateInfo> {
        let n = obs.rows();
        let a_dim = self.actor.spec.output_dim;
        let alpha = self.alpha();

        let target_noise = gaussian_noise(n, a_dim, rng)?;
        let targets: Vec<&Params> = self.targets.iter().collect();
        let y = losses::sac_target(
            &SacTargetInputs {
                actor_spec: &self.actor.spec,
                actor: &self.actor.params,
                critic_spec: &self.critics[0].spec,
                targets: &targets,
                alpha,
                gamma: cfg.gamma,
                bounds,
            },
            next_obs,
            reward,
            done,
            &target_noise,
        )?;

        let mut tape = Tape::new();
        let vars: Vec<_> = self.critics.iter().map(|c| c.params.register(&mut tape, true)).collect();
        let refs: Vec<_> = vars.iter().collect();
        let (loss, out) = losses::critic_loss(&mut tape, &self.critics[0].spec, &refs, obs, action, &y)?;
        let critic_loss = tape.value(loss).item();
        let captured = if probe { Some(capture(&tape, &out)?) } else { None };
        let grads = tape.backward(loss)?;
        for (critic, v) in self.critics.iter_mut().zip(&vars) {
            let g: Vec<Tensor> = v.0.iter().map(|x| grads.wrt(&tape, *x)).collect();
            critic.step(&g)?;
        }
        drop(grads);

        let noise = gaussian_noise(n, a_dim, rng)?;
        let mut tape = Tape::new();
        let actor_vars = self.actor.params.register(&mut tape, true);
        let critic_vars: Vec<_> = self.critics.iter().map(|c| c.params.register(&mut tape, false)).collect();
        let refs: Vec<_> = critic_vars.iter().collect();
        let (loss, log_prob) = losses::sac_actor_loss(
            &mut tape,
            &self.actor.spec,
            &actor_vars,
            &self.critics[0].spec,
            &refs,
            obs,
            &noise,
            alpha,
            bounds,
        )?;
        let actor_loss = tape.value(loss).item();
        let lp = tape.value(log_prob);
        let mean_log_prob = lp.data().iter().sum::<f64>() / lp.numel() as f64;
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor> = actor_vars.0.iter().map(|x| grads.wrt(&tape, *x)).collect();
        self.actor.step(&g)?;

        let mut tape = Tape::new();
        let la = tape.leaf(self.log_alpha.clone());
        let t_loss = losses::temperature_loss(&mut tape, la, mean_log_prob, self.target_entropy)?;
        let g = tape.backward(t_loss)?.wrt(&tape, la);
        adamw_step(
            core::slice::from_mut(&mut self.log_alpha),
            core::slice::from_ref(&g),
            &mut self.alpha_opt,
            &self.alpha_adam,
        )?;

        for (target, critic) in self.targets.iter_mut().zip(&self.critics) {
            polyak_update(target.tensors_mut(), critic.params.tensors(), cfg.tau)?;
        }
        Ok(UpdateInfo {
            critic_loss,
            actor_loss,
            alpha: Some(self.alpha()),
            capture: captured,
        })
    }
}

impl DdpgAgent {
    #[allow(clippy::too_many_arguments)]
    fn update(
        &mut self,
        obs: &Tensor,
        action: &Tensor,
        reward: &Tensor,
        next_obs: &Tensor,
        done: &Tensor,
        cfg: &TrainConfig,
        bounds: &Bounds,
        probe: bool,
    ) -> Result<UpdateInfo> {
        let y = losses::ddpg_target(
            &self.actor.spec,
            &self.target_actor,
            &self.critic.spec,
            &self.target_critic,
            next_obs,
            reward,
            done,
            cfg.gamma,
            bounds,
        )?;
        let mut tape = Tape::new();
        let vars = self.critic.params.register(&mut tape, true);
        let (loss, out) = losses::critic_loss(&mut tape, &self.critic.spec, &[&vars], obs, action, &y)?;
        let critic_loss = tape.value(loss).item();
        let captured = if probe { Some(capture(&tape, &out)?) } else { None };
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor> = vars.0.iter().map(|x| grads.wrt(&tape, *x)).collect();
        self.critic.step(&g)?;

        let mut tape = Tape::new();
        let actor_vars = self.actor.params.register(&mut tape, true);
        let critic_vars = self.critic.params.register(&mut tape, false);
        let loss = losses::ddpg_actor_loss(
            &mut tape,
            &self.actor.spec,
            &actor_vars,
            &self.critic.spec,
            &critic_vars,
            obs,
            bounds,
        )?;
        let actor_loss = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor> = actor_vars.0.iter().map(|x| grads.wrt(&tape, *x)).collect();
        self.actor.step(&g)?;

        polyak_update(self.target_critic.tensors_mut(), self.critic.params.tensors(), cfg.tau)?;
        polyak_update(self.target_actor.tensors_mut(), self.actor.params.tensors(), cfg.tau)?;
        Ok(UpdateInfo {
            critic_loss,
            actor_loss,
            alpha: None,
            capture: captured,
        })
    }
}

/// Check that a batch matches the agent's dimensions.
pub fn check_batch(obs: &Tensor, action: &Tensor, obs_dim: usize, action_dim: usize) -> Result<()> {
    if obs.cols() != obs_dim {
        return Err(Error::DimMismatch {
            what: "batch observation",
            expected: obs_dim,
            got: obs.cols(),
        });
    }
    if action.cols() != action_dim {
        return Err(Error::DimMismatch {
            what: "batch action",
            expected: action_dim,
            got: action.cols(),
        });
    }
    Ok(())
}

//! `simba train`, `simba analyze simplicity` and `simba analyze plasticity`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use simba_core::analysis::{self, GridSpec, PlasticityReport, SimplicityReport};
use simba_core::envs::{Env, WrapperSpec};
use simba_core::nets::{self, count_params, HeadKind, NetworkSpec, Params, Variant};
use simba_core::obs_norm::{NormalizerKind, ObsNormalizer};
use simba_core::rl::{Algo, Probe, TrainConfig, Trainer};
use simba_core::tensor::Tensor;

use crate::checkpoint::{snapshot, Archive};
use crate::error::{IoContext, LabError, Result};
use crate::files::{self, MetricsWriter, ProbeWriter};
use crate::make_env;

#[derive(Debug, Parser)]
#[command(name = "simba", version, about = "SimBa reinforcement learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and log per-episode metrics.
    Train(TrainArgs),
    /// Offline analyses.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
}

#[derive(Debug, Subcommand)]
pub enum Analyze {
    /// Spectral simplicity score of architectures at initialization.
    Simplicity(SimplicityArgs),
    /// Plasticity metrics of a dumped feature matrix.
    Plasticity(PlasticityArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long, default_value = "pendulum")]
    pub env: String,
    #[arg(long, default_value_t = 0)]
    pub distractors: usize,
    /// Architecture of both networks; parameter counts are matched to the
    /// simba networks of the configured sizes unless `--no-match-params`.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub no_match_params: bool,
    #[arg(long)]
    pub normalizer: Option<String>,
    /// `dim,mean,var` CSV used by `--normalizer oracle`.
    #[arg(long)]
    pub oracle_stats: Option<PathBuf>,
    #[arg(long)]
    pub replay_ratio: Option<usize>,
    /// Gradient steps between full resets.
    #[arg(long)]
    pub reset_every: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30_000)]
    pub steps: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with a partial training config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    /// Record elapsed wall time (makes metrics.csv non-reproducible).
    #[arg(long)]
    pub wall_clock: bool,
    /// Environment steps between periodic checkpoints.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Write the critic features of every probe under `features/`.
    #[arg(long)]
    pub dump_features: bool,
    #[arg(long)]
    pub probe_every: Option<u64>,
    #[arg(long)]
    pub actor_hidden_dim: Option<usize>,
    #[arg(long)]
    pub actor_blocks: Option<usize>,
    #[arg(long)]
    pub critic_hidden_dim: Option<usize>,
    #[arg(long)]
    pub critic_blocks: Option<usize>,
    /// Learning rate of actor and critic.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub clipped_double_q: bool,
}

#[derive(Debug, Args)]
pub struct SimplicityArgs {
    /// Comma-separated architectures; `constant` is a zero network.
    #[arg(long, default_value = "simba,mlp,mlp+ln,mlp+res")]
    pub archs: String,
    #[arg(long, default_value_t = 20)]
    pub inits: usize,
    #[arg(long, default_value_t = 300)]
    pub grid: usize,
    #[arg(long, default_value_t = 100.0)]
    pub domain: f64,
    /// Reference architecture for parameter matching, or `none`.
    #[arg(long, default_value = "simba")]
    pub match_params_to: String,
    #[arg(long, default_value_t = 64)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Write the output image of the first initialization of each arch.
    #[arg(long)]
    pub dump_images: bool,
}

#[derive(Debug, Args)]
pub struct PlasticityArgs {
    /// Feature archive written by `train --dump-features`.
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long, default_value_t = analysis::DEFAULT_RANK_TAU)]
    pub rank_tau: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_DORMANT_EPS)]
    pub dormant_eps: f64,
    /// Directory for `plasticity.json`; the report is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Analyze { what: Analyze::Simplicity(a) } => cmd_analyze_simplicity(&a),
        Command::Analyze { what: Analyze::Plasticity(a) } => cmd_analyze_plasticity(&a).map(|_| ()),
    }
}

fn parse<T: std::str::FromStr<Err = simba_core::Error>>(field: &str, s: &str) -> Result<T> {
    s.parse().map_err(|e: simba_core::Error| LabError::config(field, e.to_string()))
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Defaults, overlaid with the `--config` file, overlaid with flags.
pub fn resolve_train_config(a: &TrainArgs, obs_dim: usize, action_dim: usize) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).at(path)?;
        let patch: Value = serde_json::from_str(&text).map_err(|e| LabError::config("config", e.to_string()))?;
        let mut base = serde_json::to_value(cfg).map_err(|e| LabError::config("config", e.to_string()))?;
        merge(&mut base, patch);
        cfg = serde_json::from_value(base).map_err(|e| LabError::config("config", e.to_string()))?;
    }
    if let Some(s) = &a.algo {
        cfg.algo = parse::<Algo>("algo", s)?;
    }
    if let Some(s) = &a.normalizer {
        cfg.normalizer = parse::<NormalizerKind>("normalizer", s)?;
    }
    if let Some(r) = a.replay_ratio {
        cfg.replay_ratio = r;
    }
    if let Some(g) = a.reset_every {
        cfg.reset_interval = Some(g);
    }
    if let Some(p) = a.probe_every {
        cfg.probe_every = Some(p);
    }
    if let Some(d) = a.actor_hidden_dim {
        cfg.actor.hidden_dim = d;
    }
    if let Some(l) = a.actor_blocks {
        cfg.actor.num_blocks = l;
    }
    if let Some(d) = a.critic_hidden_dim {
        cfg.critic.hidden_dim = d;
    }
    if let Some(l) = a.critic_blocks {
        cfg.critic.num_blocks = l;
    }
    if let Some(lr) = a.lr {
        cfg.actor.lr = lr;
        cfg.critic.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(w) = a.warmup {
        cfg.warmup_steps = w;
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if a.clipped_double_q {
        cfg.clipped_double_q = true;
    }
    cfg.validate()?;
    if let Some(s) = &a.arch {
        let variant = parse::<Variant>("arch", s)?;
        cfg = cfg.with_architecture(variant, obs_dim, action_dim, !a.no_match_params)?;
    }
    cfg.target_entropy = Some(cfg.resolved_target_entropy(action_dim));
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct EnvRecord<'a> {
    name: &'a str,
    obs_dim: usize,
    action_dim: usize,
    max_episode_steps: usize,
    wrapper: &'a WrapperSpec,
}

#[derive(Serialize)]
struct ParamCounts {
    actor: usize,
    critic: usize,
}

#[derive(Serialize)]
struct TrainRecord<'a> {
    command: &'static str,
    seed: u64,
    steps: u64,
    env: EnvRecord<'a>,
    train: &'a TrainConfig,
    actor_spec: NetworkSpec,
    critic_spec: NetworkSpec,
    params: ParamCounts,
    oracle_stats: Option<&'a Path>,
    checkpoint_every: Option<u64>,
    dump_features: bool,
    wall_clock: bool,
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    if a.env != "pendulum" {
        return Err(LabError::config("env", format!("unknown environment `{}`", a.env)));
    }
    if a.checkpoint_every == Some(0) {
        return Err(LabError::config("checkpoint_every", "must be at least 1"));
    }
    let env = make_env(a.distractors, a.seed)?;
    let (obs_dim, action_dim) = (env.obs_dim(), env.action_dim());
    let cfg = resolve_train_config(a, obs_dim, action_dim)?;
    let normalizer = match (cfg.normalizer, &a.oracle_stats) {
        (NormalizerKind::Oracle, Some(p)) => ObsNormalizer::oracle(files::read_oracle_stats(p, obs_dim, 1e-8)?),
        (NormalizerKind::Oracle, None) => {
            return Err(LabError::config("oracle_stats", "`--normalizer oracle` needs `--oracle-stats FILE`"))
        }
        (kind, _) => ObsNormalizer::new(kind, obs_dim)?,
    };
    let actor_spec = cfg.actor_spec(obs_dim, action_dim);
    let critic_spec = cfg.critic_spec(obs_dim, action_dim);
    let wrapper = env.spec().clone();
    let mut trainer = Trainer::with_normalizer(env, cfg, a.seed, normalizer)?;

    files::prepare_out_dir(&a.out, a.force)?;
    let record = TrainRecord {
        command: "train",
        seed: a.seed,
        steps: a.steps,
        env: EnvRecord {
            name: "pendulum",
            obs_dim,
            action_dim,
            max_episode_steps: simba_core::envs::MAX_EPISODE_STEPS,
            wrapper: &wrapper,
        },
        train: &cfg,
        actor_spec,
        critic_spec,
        params: ParamCounts {
            actor: count_params(&actor_spec),
            critic: count_params(&critic_spec),
        },
        oracle_stats: a.oracle_stats.as_deref(),
        checkpoint_every: a.checkpoint_every,
        dump_features: a.dump_features,
        wall_clock: a.wall_clock,
    };
    files::write_json(&a.out.join("config.json"), &record)?;

    if a.wall_clock {
        let start = Instant::now();
        trainer.set_clock(Box::new(move || start.elapsed().as_secs_f64()));
    }
    let mut metrics = MetricsWriter::create(&a.out.join("metrics.csv"))?;
    let mut probes = ProbeWriter::create(&a.out.join("probes.csv"))?;
    let features_dir = a.out.join("features");
    if a.dump_features {
        fs::create_dir_all(&features_dir).at(&features_dir)?;
    }
    for _ in 0..a.steps {
        if let Some(row) = trainer.step()? {
            metrics.write(&row)?;
        }
        if let Some(p) = trainer.take_fresh_probe() {
            probes.write(p)?;
            if a.dump_features {
                probe_archive(p).save(&features_dir.join(format!("probe_{:08}.bin", p.env_step)))?;
            }
        }
        let t = trainer.env_steps();
        if a.checkpoint_every.is_some_and(|k| t % k == 0) {
            snapshot(trainer.agent(), trainer.normalizer()).save(&a.out.join(format!("checkpoint_{t:08}.bin")))?;
        }
    }
    snapshot(trainer.agent(), trainer.normalizer()).save(&a.out.join("checkpoint_final.bin"))?;
    files::mark_done(&a.out)
}

/// Features, activations and the in-loop report of one probe.
pub fn probe_archive(p: &Probe) -> Archive {
    let mut a = Archive::new();
    a.push("env_step", Tensor::scalar(p.env_step as f64));
    a.push("grad_step", Tensor::scalar(p.grad_step as f64));
    a.push("features", p.capture.features.clone());
    a.push("activations", p.capture.activations.clone());
    a.push("report/stable_rank", Tensor::scalar(p.report.stable_rank as f64));
    a.push("report/dormant_ratio", Tensor::scalar(p.report.dormant_ratio));
    a.push("report/feature_norm", Tensor::scalar(p.report.feature_norm));
    a.push("report/rank_tau", Tensor::scalar(p.report.rank_tau));
    a.push("report/dormant_eps", Tensor::scalar(p.report.dormant_eps));
    a
}

/// Recompute plasticity metrics from an archive holding `features` and,
/// optionally, `activations` (the features stand in when absent).
pub fn cmd_analyze_plasticity(a: &PlasticityArgs) -> Result<PlasticityReport> {
    let archive = Archive::load(&a.dump)?;
    let features = archive.require("features")?;
    let activations = archive.get("activations").unwrap_or(features);
    let report = analysis::plasticity(features, activations, a.rank_tau, a.dormant_eps)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| LabError::config("report", e.to_string()))?;
    println!("{text}");
    if let Some(out) = &a.out {
        fs::create_dir_all(out).at(out)?;
        files::write_json(&out.join("plasticity.json"), &report)?;
    }
    Ok(report)
}

/// Architecture name accepted by `analyze simplicity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeArch {
    Net(Variant),
    Constant,
}

impl ProbeArch {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "constant" => Ok(ProbeArch::Constant),
            other => parse::<Variant>("archs", other).map(ProbeArch::Net),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProbeArch::Net(v) => v.name(),
            ProbeArch::Constant => "constant",
        }
    }
}

/// Network specs probed by `analyze simplicity`: scalar output over two
/// inputs, each matched to `reference` when one is given.
pub fn simplicity_specs(archs: &[ProbeArch], hidden_dim: usize, blocks: usize, reference: Option<Variant>) -> Result<Vec<NetworkSpec>> {
    let base = |v| NetworkSpec::new(v, 2, hidden_dim, blocks, 1, HeadKind::QValue);
    archs
        .iter()
        .map(|arch| {
            let v = match arch {
                ProbeArch::Net(v) => *v,
                ProbeArch::Constant => Variant::Simba,
            };
            match reference {
                Some(r) => Ok(nets::matched_spec(&base(r), v, 0.01)?),
                None => Ok(base(v)),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SimplicityRecord<'a> {
    command: &'static str,
    archs: Vec<&'static str>,
    n_inits: usize,
    grid: GridSpec,
    match_params_to: Option<&'static str>,
    hidden_dim: usize,
    blocks: usize,
    seed: u64,
    specs: &'a [NetworkSpec],
    dump_images: bool,
}

pub fn cmd_analyze_simplicity(a: &SimplicityArgs) -> Result<()> {
    let archs = a.archs.split(',').filter(|s| !s.trim().is_empty()).map(ProbeArch::parse).collect::<Result<Vec<_>>>()?;
    if archs.is_empty() {
        return Err(LabError::config("archs", "no architectures given"));
    }
    if a.inits < 2 {
        return Err(LabError::config("inits", "at least two initializations are required"));
    }
    if a.grid < 2 {
        return Err(LabError::config("grid", "needs at least two divisions"));
    }
    if !(a.domain.is_finite() && a.domain > 0.0) {
        return Err(LabError::config("domain", "must be positive"));
    }
    let reference = match a.match_params_to.as_str() {
        "none" => None,
        s => Some(parse::<Variant>("match_params_to", s)?),
    };
    let specs = simplicity_specs(&archs, a.hidden_dim, a.blocks, reference)?;
    let grid = GridSpec {
        divisions: a.grid,
        half_width: a.domain,
    };

    files::prepare_out_dir(&a.out, a.force)?;
    let record = SimplicityRecord {
        command: "analyze simplicity",
        archs: archs.iter().map(|a| a.name()).collect(),
        n_inits: a.inits,
        grid,
        match_params_to: reference.map(Variant::name),
        hidden_dim: a.hidden_dim,
        blocks: a.blocks,
        seed: a.seed,
        specs: &specs,
        dump_images: a.dump_images,
    };
    files::write_json(&a.out.join("config.json"), &record)?;

    let mut reports: Vec<SimplicityReport> = Vec::new();
    for (arch, spec) in archs.iter().zip(&specs) {
        let factory = |seed: u64| -> simba_core::Result<(NetworkSpec, Params)> {
            let p = Params::init(spec, seed)?;
            match arch {
                ProbeArch::Constant => {
                    let zeros = p.tensors().iter().map(|t| t.map(|_| 0.0)).collect();
                    Ok((*spec, Params::from_parts(spec, zeros, seed)?))
                }
                ProbeArch::Net(_) => Ok((*spec, p)),
            }
        };
        if a.dump_images {
            let seed = analysis::init_seed(a.seed, 0);
            let (s, p) = factory(seed)?;
            let image = analysis::evaluate_on_grid(&s, &p, &grid)?;
            files::write_image(&a.out.join(format!("image_{}.bin", arch.name())), &image, &grid, seed)?;
        }
        reports.push(analysis::simplicity_score(arch.name(), factory, a.inits, &grid, a.seed)?);
    }
    files::write_simplicity(&a.out.join("simplicity.csv"), &reports)?;
    files::mark_done(&a.out)
}

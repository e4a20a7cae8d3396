//! Binary tensor archives.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"SIMBACK1"
//! u32     record count
//! record  u32 name length, name (UTF-8), u32 rank, u64 × rank dims, f64 × numel
//! u32     CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use simba_core::nets::Params;
use simba_core::obs_norm::{ObsNormalizer, RunningStats};
use simba_core::rl::{Agent, Learner, OptimizerState};
use simba_core::Tensor;

use crate::error::{IoContext, LabError, Result};

const MAGIC: &[u8; 8] = b"SIMBACK1";

/// Ordered named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    pub entries: Vec<(String, Tensor)>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.entries.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| LabError::config("checkpoint", format!("missing tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for d in t.shape() {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: &str| LabError::Corrupt {
            path: path.to_path_buf(),
            reason: reason.into(),
        };
        if bytes.len() < MAGIC.len() + 8 {
            return Err(corrupt("file too short"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        if &body[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut r = Reader { buf: &body[8..] };
        let count = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let entry = (|| {
                let len = r.u32()? as usize;
                let name = String::from_utf8(r.take(len)?.to_vec()).ok()?;
                let rank = r.u32()? as usize;
                let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Option<Vec<_>>>()?;
                let numel = shape.iter().product::<usize>();
                let data = (0..numel).map(|_| r.f64()).collect::<Option<Vec<_>>>()?;
                Some((name, shape, data))
            })()
            .ok_or_else(|| corrupt("truncated record"))?;
            let (name, shape, data) = entry;
            let t = Tensor::new(shape, data).map_err(|e| corrupt(&e.to_string()))?;
            entries.push((name, t));
        }
        if !r.buf.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Archive { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).at(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).at(path)?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Some(head)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

fn push_params(a: &mut Archive, prefix: &str, p: &Params) {
    for (name, t) in p.iter() {
        a.push(format!("{prefix}/{name}"), t.clone());
    }
}

fn push_learner(a: &mut Archive, prefix: &str, l: &Learner) {
    push_params(a, prefix, &l.params);
    push_opt(a, &format!("{prefix}.opt"), l.params.names(), &l.opt);
}

fn push_opt(a: &mut Archive, prefix: &str, names: &[String], opt: &OptimizerState) {
    a.push(format!("{prefix}/step"), Tensor::scalar(opt.step as f64));
    for (name, (m, v)) in names.iter().zip(opt.m.iter().zip(&opt.v)) {
        a.push(format!("{prefix}/m/{name}"), m.clone());
        a.push(format!("{prefix}/v/{name}"), v.clone());
    }
}

/// Networks, targets, optimizer moments, temperature and normaliser
/// statistics of a training run.
pub fn snapshot(agent: &Agent, normalizer: &ObsNormalizer) -> Archive {
    let mut a = Archive::new();
    match agent {
        Agent::Sac(s) => {
            push_learner(&mut a, "actor", &s.actor);
            for (i, c) in s.critics.iter().enumerate() {
                push_learner(&mut a, &format!("critic{i}"), c);
            }
            for (i, t) in s.targets.iter().enumerate() {
                push_params(&mut a, &format!("target{i}"), t);
            }
            a.push("log_alpha", s.log_alpha.clone());
            push_opt(&mut a, "log_alpha.opt", &["log_alpha".to_string()], &s.alpha_opt);
        }
        Agent::Ddpg(d) => {
            push_learner(&mut a, "actor", &d.actor);
            push_learner(&mut a, "critic0", &d.critic);
            push_params(&mut a, "target_actor", &d.target_actor);
            push_params(&mut a, "target0", &d.target_critic);
        }
    }
    let s = normalizer.stats();
    a.push("obs_norm/mean", Tensor::row(s.mean().to_vec()));
    a.push("obs_norm/var", Tensor::row(s.var().to_vec()));
    a.push("obs_norm/count", Tensor::scalar(s.count() as f64));
    a.push("obs_norm/eps", Tensor::scalar(s.eps()));
    a
}

fn load_params(a: &Archive, prefix: &str, like: &Params, spec: &simba_core::nets::NetworkSpec) -> Result<Params> {
    let tensors = like
        .names()
        .iter()
        .map(|n| a.require(&format!("{prefix}/{n}")).cloned())
        .collect::<Result<Vec<_>>>()?;
    Ok(Params::from_parts(spec, tensors, like.seed())?)
}

fn load_opt(a: &Archive, prefix: &str, names: &[String]) -> Result<OptimizerState> {
    let mut m = Vec::new();
    let mut v = Vec::new();
    for n in names {
        m.push(a.require(&format!("{prefix}/m/{n}"))?.clone());
        v.push(a.require(&format!("{prefix}/v/{n}"))?.clone());
    }
    let step = a.require(&format!("{prefix}/step"))?.item() as u64;
    Ok(OptimizerState { m, v, step })
}

fn load_learner(a: &Archive, prefix: &str, l: &mut Learner) -> Result<()> {
    l.params = load_params(a, prefix, &l.params, &l.spec)?;
    l.opt = load_opt(a, &format!("{prefix}.opt"), l.params.names())?;
    Ok(())
}

/// Overwrite `agent` (built with the run's config) with archived state and
/// return the archived normaliser statistics.
pub fn restore(a: &Archive, agent: &mut Agent) -> Result<RunningStats> {
    match agent {
        Agent::Sac(s) => {
            load_learner(a, "actor", &mut s.actor)?;
            for (i, c) in s.critics.iter_mut().enumerate() {
                load_learner(a, &format!("critic{i}"), c)?;
            }
            for (i, t) in s.targets.iter_mut().enumerate() {
                *t = load_params(a, &format!("target{i}"), t, &s.critics[i].spec)?;
            }
            s.log_alpha = a.require("log_alpha")?.clone();
            s.alpha_opt = load_opt(a, "log_alpha.opt", &["log_alpha".to_string()])?;
        }
        Agent::Ddpg(d) => {
            load_learner(a, "actor", &mut d.actor)?;
            load_learner(a, "critic0", &mut d.critic)?;
            d.target_actor = load_params(a, "target_actor", &d.target_actor, &d.actor.spec)?;
            d.target_critic = load_params(a, "target0", &d.target_critic, &d.critic.spec)?;
        }
    }
    let stats = RunningStats::from_moments(
        a.require("obs_norm/mean")?.data().to_vec(),
        a.require("obs_norm/var")?.data().to_vec(),
        a.require("obs_norm/count")?.item() as u64,
        a.require("obs_norm/eps")?.item(),
    )?;
    Ok(stats)
}

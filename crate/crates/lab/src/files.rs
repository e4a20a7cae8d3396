//! CSV, image and marker files.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use simba_core::analysis::{GridSpec, Image, SimplicityReport};
use simba_core::obs_norm::RunningStats;
use simba_core::rl::{MetricsRow, Probe, METRICS_HEADER};

use crate::error::{IoContext, LabError, Result};

pub const SIMPLICITY_HEADER: &str = "arch,n_inits,mean_c,mean_s,s_ci_low,s_ci_high,params";
pub const ORACLE_HEADER: &str = "dim,mean,var";
pub const PROBE_HEADER: &str = "env_step,grad_step,dormant_ratio,stable_rank,feature_norm";
pub const DONE_MARKER: &str = "DONE";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::io(path, io),
        other => LabError::Corrupt {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

/// Appends rows to `metrics.csv`, flushing after each one.
pub struct MetricsWriter {
    path: std::path::PathBuf,
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        inner
            .write_record(METRICS_HEADER.split(','))
            .map_err(|e| csv_err(path, e))?;
        inner.flush().at(path)?;
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, r: &MetricsRow) -> Result<()> {
        self.inner
            .write_record([
                r.env_step.to_string(),
                r.grad_step.to_string(),
                r.episode_return.to_string(),
                opt(r.critic_loss),
                opt(r.actor_loss),
                opt(r.alpha),
                opt(r.dormant_ratio),
                opt(r.stable_rank),
                opt(r.feature_norm),
                r.wall_time_s.to_string(),
            ])
            .map_err(|e| csv_err(&self.path, e))?;
        self.inner.flush().at(&self.path)
    }
}

pub struct ProbeWriter {
    path: std::path::PathBuf,
    inner: csv::Writer<File>,
}

impl ProbeWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        inner.write_record(PROBE_HEADER.split(',')).map_err(|e| csv_err(path, e))?;
        Ok(ProbeWriter {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, p: &Probe) -> Result<()> {
        self.inner
            .write_record([
                p.env_step.to_string(),
                p.grad_step.to_string(),
                p.report.dormant_ratio.to_string(),
                p.report.stable_rank.to_string(),
                p.report.feature_norm.to_string(),
            ])
            .map_err(|e| csv_err(&self.path, e))?;
        self.inner.flush().at(&self.path)
    }
}

pub fn write_simplicity(path: &Path, reports: &[SimplicityReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SIMPLICITY_HEADER.split(',')).map_err(|e| csv_err(path, e))?;
    for r in reports {
        w.write_record([
            r.arch.clone(),
            r.n_inits.to_string(),
            r.mean_c.to_string(),
            r.mean_s.to_string(),
            r.s_ci_low.to_string(),
            r.s_ci_high.to_string(),
            r.params.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().at(path)
}

#[derive(serde::Deserialize)]
struct OracleRecord {
    dim: usize,
    mean: f64,
    var: f64,
}

/// Read `dim,mean,var` statistics and check them against `expected_dim`.
pub fn read_oracle_stats(path: &Path, expected_dim: usize, eps: f64) -> Result<RunningStats> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != ORACLE_HEADER {
        return Err(LabError::config("oracle_stats", format!("expected header `{ORACLE_HEADER}`")));
    }
    let mut mean = vec![f64::NAN; expected_dim];
    let mut var = vec![f64::NAN; expected_dim];
    let mut seen = 0;
    for rec in rdr.deserialize::<OracleRecord>() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.dim >= expected_dim {
            return Err(LabError::config(
                "oracle_stats",
                format!("dimension {} out of range for {expected_dim}-dimensional observations", rec.dim),
            ));
        }
        mean[rec.dim] = rec.mean;
        var[rec.dim] = rec.var;
        seen += 1;
    }
    if seen != expected_dim || mean.iter().any(|m| m.is_nan()) {
        return Err(LabError::config(
            "oracle_stats",
            format!("expected {expected_dim} dimensions, found {seen}"),
        ));
    }
    RunningStats::from_moments(mean, var, 0, eps).map_err(|e| LabError::config("oracle_stats", e.to_string()))
}

pub fn write_oracle_stats(path: &Path, stats: &RunningStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(ORACLE_HEADER.split(',')).map_err(|e| csv_err(path, e))?;
    for (i, (m, v)) in stats.mean().iter().zip(stats.var()).enumerate() {
        w.write_record([i.to_string(), m.to_string(), v.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().at(path)
}

/// Raw image as row-major little-endian f64 with a `.txt` sidecar.
pub fn write_image(path: &Path, image: &Image, grid: &GridSpec, seed: u64) -> Result<()> {
    let bytes: Vec<u8> = image.data.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes).at(path)?;
    let sidecar = path.with_extension("txt");
    let mut f = File::create(&sidecar).at(&sidecar)?;
    writeln!(f, "dims={}x{}", image.size, image.size).at(&sidecar)?;
    writeln!(f, "domain=[-{h},{h}]x[-{h},{h}]", h = grid.half_width).at(&sidecar)?;
    writeln!(f, "seed={seed}").at(&sidecar)?;
    writeln!(f, "dtype=f64-le row-major").at(&sidecar)?;
    Ok(())
}

pub fn read_image(path: &Path, size: usize) -> Result<Image> {
    let bytes = fs::read(path).at(path)?;
    if bytes.len() != size * size * 8 {
        return Err(LabError::Corrupt {
            path: path.to_path_buf(),
            reason: format!("expected {} bytes", size * size * 8),
        });
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Image::new(size, data)?)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| LabError::config("config", e.to_string()))?;
    text.push('\n');
    fs::write(path, text).at(path)
}

pub fn mark_done(dir: &Path) -> Result<()> {
    let p = dir.join(DONE_MARKER);
    fs::write(&p, b"").at(p)
}

/// Create `dir`, refusing a directory that holds a finished run unless
/// `force` is set (in which case the old contents are removed).
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.join(DONE_MARKER).exists() {
        if !force {
            return Err(LabError::config(
                "out",
                format!("{} already holds a completed run; pass --force to overwrite", dir.display()),
            ));
        }
        fs::remove_dir_all(dir).at(dir)?;
    }
    fs::create_dir_all(dir).at(dir)
}

//! Experiment drivers behind the command-line subcommands.
//!
//! Output layout of a run directory:
//!
//! * `config.toml`: the effective configuration;
//! * `metrics.csv`: `episode,r_ac,h_total,pen0,pen1,wall_time`, one row per
//!   training episode, flushed as it is written;
//! * `model.ckpt`: final checkpoint;
//! * `eval.csv` and `seed_<s>/{uav,device}_trajectory.csv` for evaluations;
//! * `ablation.csv` and `ablation_summary.csv` for the variant matrix.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Variant, WorldConfig};
use crate::error::{ConfigError, Result};
use crate::magrl::{checkpoint, evaluate, EpisodeMetrics, EvalReport, Model, Trainer};
use crate::scenario::Scenario;

/// Parses `7`, `1..5` (inclusive) or `1,4,9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::Parse(format!("invalid seed list `{s}`"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

/// Appends episode rows to `metrics.csv`.
pub struct MetricsWriter {
    inner: csv::Writer<std::fs::File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self { inner: csv::Writer::from_path(path)? })
    }

    pub fn write(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.inner.serialize(m)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    Ok(csv::Reader::from_path(path)?.deserialize().collect::<Result<Vec<EpisodeMetrics>, _>>()?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpisodeMetrics>,
    pub model: Model,
    pub checkpoint: PathBuf,
}

/// Trains `cfg.train.variant` for `episodes` episodes and writes the run
/// directory.
pub fn run_train(
    cfg: &WorldConfig,
    scenario: &Scenario,
    seed: u64,
    episodes: usize,
    out: &Path,
    mut progress: impl FnMut(&EpisodeMetrics),
) -> Result<TrainOutcome> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    let mut writer = MetricsWriter::create(&out.join("metrics.csv"))?;
    let mut trainer = Trainer::new(cfg, scenario, seed)?;
    let mut metrics = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let m = trainer.run_episode()?;
        writer.write(&m)?;
        progress(&m);
        metrics.push(m);
    }
    let path = out.join("model.ckpt");
    checkpoint::save(&trainer.model, &path)?;
    Ok(TrainOutcome { metrics, model: trainer.model, checkpoint: path })
}

#[derive(Debug, Serialize)]
struct EvalRow {
    seed: u64,
    success: bool,
    h_total: u64,
    r_ac: f64,
    pen0: u64,
    pen1: u64,
    min_device_battery: f64,
    min_uav_residual: f64,
}

/// Deterministic rollouts of `model`, one per seed. Writes `eval.csv` and
/// the trajectories under `out`.
pub fn run_eval(model: &Model, cfg: &WorldConfig, scenario: &Scenario, seeds: &[u64], out: &Path) -> Result<Vec<EvalReport>> {
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("eval.csv"))?;
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let r = evaluate(model, cfg, scenario, seed)?;
        r.trajectory.write_csv(&out.join(format!("seed_{seed}")))?;
        w.serialize(EvalRow {
            seed,
            success: r.success(),
            h_total: r.h_total,
            r_ac: r.r_ac,
            pen0: r.pen0,
            pen1: r.pen1,
            min_device_battery: r.device_final.iter().copied().fold(f64::INFINITY, f64::min),
            min_uav_residual: r.uav_residual.iter().copied().fold(f64::INFINITY, f64::min),
        })?;
        reports.push(r);
    }
    w.flush()?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    /// Mean `r_ac` over the last (up to) ten training episodes.
    pub final_r_ac: f64,
    /// `H_total` of the deterministic policy on an episode seeded with the
    /// training seed.
    pub final_h_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSummary {
    pub variant: String,
    pub median_r_ac: f64,
    pub median_h_total: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Trains every variant on every seed. Each run lives in
/// `out/<variant>/seed_<s>`.
pub fn run_ablation(
    cfg: &WorldConfig,
    scenario: &Scenario,
    seeds: &[u64],
    episodes: usize,
    out: &Path,
    mut progress: impl FnMut(Variant, u64, &EpisodeMetrics),
) -> Result<(Vec<AblationRow>, Vec<AblationSummary>)> {
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for variant in Variant::ALL {
        let mut vcfg = cfg.clone();
        vcfg.train.variant = variant;
        let mut r_acs = Vec::new();
        let mut hs = Vec::new();
        for &seed in seeds {
            let dir = out.join(variant.name()).join(format!("seed_{seed}"));
            let t = run_train(&vcfg, scenario, seed, episodes, &dir, |m| progress(variant, seed, m))?;
            let tail = &t.metrics[t.metrics.len().saturating_sub(10)..];
            let final_r_ac = tail.iter().map(|m| m.r_ac).sum::<f64>() / tail.len().max(1) as f64;
            let report = evaluate(&t.model, &vcfg, scenario, seed)?;
            r_acs.push(final_r_ac);
            hs.push(report.h_total as f64);
            rows.push(AblationRow { variant: variant.name().into(), seed, final_r_ac, final_h_total: report.h_total });
        }
        summary.push(AblationSummary {
            variant: variant.name().into(),
            median_r_ac: median(&mut r_acs),
            median_h_total: median(&mut hs),
        });
    }
    let mut w = csv::Writer::from_path(out.join("ablation.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("ablation_summary.csv"))?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("3, 1,9").unwrap(), vec![3, 1, 9]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }
}

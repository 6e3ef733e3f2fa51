use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::episode::EpisodeMetrics;
use super::train::{evaluate, held_out_episode, train_policy, PolicySource};
use crate::constellation::{build_constellation, Constellation, ConstellationSpec};
use crate::error::{Error, Result};
use crate::policy::{load_checkpoint, PolicyKind};

/// Builds an evaluable source for every policy in `cfg.sweep.policies`,
/// loading checkpoints where configured and training the rest.
pub fn resolve_sources(cfg: &ExperimentConfig) -> Result<Vec<PolicySource>> {
    cfg.sweep
        .policies
        .iter()
        .map(|&kind| {
            if !kind.is_trainable() {
                return Ok(PolicySource::Baseline(kind));
            }
            let path = match kind {
                PolicyKind::TfDarm => &cfg.sweep.tf_darm_checkpoint,
                _ => &cfg.sweep.mdg_checkpoint,
            };
            let ckpt = match path {
                Some(p) => load_checkpoint(p)?,
                None => {
                    log::info!("no checkpoint for {kind}; training one");
                    let tcfg = ExperimentConfig { policy: kind, ..cfg.clone() };
                    let run = train_policy(&tcfg, |_| {})?;
                    if let Some(msg) = run.diverged {
                        return Err(Error::Training(msg));
                    }
                    run.checkpoint
                }
            };
            if ckpt.policy != kind {
                return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", ckpt.policy)));
            }
            Ok(PolicySource::Learned(ckpt))
        })
        .collect()
}

/// One evaluated (setting, policy, seed) combination.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub run_id: String,
    pub setting: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub metrics: EpisodeMetrics,
}

struct Job<'a> {
    setting: String,
    cfg: ExperimentConfig,
    roster: &'a Constellation,
    source: &'a PolicySource,
    seed: u64,
}

fn run_jobs(sweep: &str, jobs: Vec<Job<'_>>, trace_dir: Option<&Path>) -> Result<Vec<SweepCell>> {
    jobs.into_par_iter()
        .map(|job| {
            let policy = job.source.kind();
            let run_id = format!("{sweep}-{}-{policy}-s{}", job.setting, job.seed);
            let cfg = ExperimentConfig { seed: job.seed, ..job.cfg };
            let trace = trace_dir.map(|d| d.join(format!("{run_id}.jsonl")));
            let metrics = evaluate(&cfg, job.roster, job.source, held_out_episode(&cfg), trace.as_deref())?;
            log::info!("{run_id}: completion {:.4}", metrics.completion_rate);
            Ok(SweepCell { run_id, setting: job.setting, policy, seed: job.seed, metrics })
        })
        .collect()
}

fn trace_dir(cfg: &ExperimentConfig) -> Option<std::path::PathBuf> {
    cfg.write_traces.then(|| cfg.output_dir.join("traces"))
}

/// Completion rate per policy and load, averaged over the evaluation seeds.
#[derive(Debug, Clone, Serialize)]
pub struct LoadReport {
    pub loads: Vec<usize>,
    pub rows: Vec<ReportRow>,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub policy: PolicyKind,
    /// Mean completion rate per setting, in column order.
    pub completion: Vec<f64>,
}

fn aggregate(settings: &[String], sources: &[PolicySource], cells: &[SweepCell]) -> Vec<ReportRow> {
    sources
        .iter()
        .map(|s| {
            let policy = s.kind();
            let completion = settings
                .iter()
                .map(|setting| {
                    let v: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.policy == policy && &c.setting == setting)
                        .map(|c| c.metrics.completion_rate)
                        .collect();
                    v.iter().sum::<f64>() / v.len().max(1) as f64
                })
                .collect();
            ReportRow { policy, completion }
        })
        .collect()
}

pub fn sweep_load(cfg: &ExperimentConfig, sources: &[PolicySource]) -> Result<LoadReport> {
    cfg.validate()?;
    let roster = build_constellation(&cfg.constellation)?;
    let settings: Vec<String> = cfg.sweep.loads.iter().map(|l| l.to_string()).collect();
    let mut jobs = Vec::new();
    for &load in &cfg.sweep.loads {
        let mut lcfg = cfg.clone();
        lcfg.traffic.per_leo_count = load;
        for source in sources {
            for &seed in &cfg.sweep.eval_seeds {
                jobs.push(Job { setting: load.to_string(), cfg: lcfg.clone(), roster: &roster, source, seed });
            }
        }
    }
    let cells = run_jobs("load", jobs, trace_dir(cfg).as_deref())?;
    Ok(LoadReport { loads: cfg.sweep.loads.clone(), rows: aggregate(&settings, sources, &cells), cells })
}

/// Completion rate per policy and constellation size, plus the smallest
/// margin of the full learned policy over the best other policy.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleReport {
    pub scales: Vec<[usize; 2]>,
    pub rows: Vec<ReportRow>,
    pub min_gain: Option<f64>,
    pub cells: Vec<SweepCell>,
}

pub fn scale_label([p, s]: [usize; 2]) -> String {
    format!("{p}x{s}")
}

pub fn scale_spec(cfg: &ExperimentConfig, [planes, sats_per_plane]: [usize; 2]) -> ConstellationSpec {
    ConstellationSpec { planes, sats_per_plane, ..cfg.sweep.scale_shell.clone() }
}

/// Evaluates every source on each shell of `cfg.sweep.scales`. The load
/// per satellite stays at `cfg.traffic.per_leo_count` for every size.
pub fn sweep_scale(cfg: &ExperimentConfig, sources: &[PolicySource]) -> Result<ScaleReport> {
    cfg.validate()?;
    let shells: Vec<(String, ExperimentConfig, Constellation)> = cfg
        .sweep
        .scales
        .iter()
        .map(|&sc| {
            let spec = scale_spec(cfg, sc);
            let roster = build_constellation(&spec)?;
            Ok((scale_label(sc), ExperimentConfig { constellation: spec, ..cfg.clone() }, roster))
        })
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (label, scfg, roster) in &shells {
        for source in sources {
            for &seed in &cfg.sweep.eval_seeds {
                jobs.push(Job { setting: label.clone(), cfg: scfg.clone(), roster, source, seed });
            }
        }
    }
    let cells = run_jobs("scale", jobs, trace_dir(cfg).as_deref())?;
    let settings: Vec<String> = shells.iter().map(|s| s.0.clone()).collect();
    let rows = aggregate(&settings, sources, &cells);
    Ok(ScaleReport { scales: cfg.sweep.scales.clone(), min_gain: min_gain(&rows), rows, cells })
}

/// Smallest per-column margin of TF-DARM over the best other row.
pub fn min_gain(rows: &[ReportRow]) -> Option<f64> {
    let ours = rows.iter().find(|r| r.policy == PolicyKind::TfDarm)?;
    let others: Vec<&ReportRow> = rows.iter().filter(|r| r.policy != PolicyKind::TfDarm).collect();
    if others.is_empty() {
        return None;
    }
    (0..ours.completion.len())
        .map(|k| ours.completion[k] - others.iter().map(|r| r.completion[k]).fold(f64::NEG_INFINITY, f64::max))
        .reduce(f64::min)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub const LOAD_CSV_HEADER: [&str; 3] = ["load", "policy", "completion_rate"];

impl LoadReport {
    /// Long format: one row per (load, policy).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows = Vec::new();
        for (k, load) in self.loads.iter().enumerate() {
            for r in &self.rows {
                rows.push(vec![load.to_string(), r.policy.to_string(), r.completion[k].to_string()]);
            }
        }
        write_csv(path, &LOAD_CSV_HEADER.map(String::from), &rows)
    }
}

impl ScaleReport {
    /// Wide format: one row per policy, one column per shell, then the
    /// minimum gain (filled on the TF-DARM row only).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["policy".to_string()];
        header.extend(self.scales.iter().map(|&[p, s]| format!("{} ({p}x{s})", p * s)));
        header.push("min_gain".into());
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.policy.to_string()];
                row.extend(r.completion.iter().map(|c| c.to_string()));
                row.push(match (r.policy, self.min_gain) {
                    (PolicyKind::TfDarm, Some(g)) => g.to_string(),
                    _ => String::new(),
                });
                row
            })
            .collect();
        write_csv(path, &header, &rows)
    }
}

pub const RUNS_CSV_HEADER: [&str; 8] =
    ["run_id", "setting", "policy", "seed", "episode", "completion_rate", "delivered", "requests"];

/// Per-run index linking every report cell to its run id (and trace file).
pub fn write_runs_csv(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.run_id.clone(),
                c.setting.clone(),
                c.policy.to_string(),
                c.seed.to_string(),
                c.metrics.episode.to_string(),
                c.metrics.completion_rate.to_string(),
                c.metrics.delivered.to_string(),
                c.metrics.requests.to_string(),
            ]
        })
        .collect();
    write_csv(path, &RUNS_CSV_HEADER.map(String::from), &rows)
}

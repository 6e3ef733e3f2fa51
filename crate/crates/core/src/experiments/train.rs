use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::episode::{run_episode, save_metrics_csv, EpisodeMetrics, EpisodeOptions};
use crate::baselines::{LtgPolicy, SpgPolicy};
use crate::constellation::{build_constellation, Constellation};
use crate::error::{Error, Result};
use crate::netsim::JsonlTrace;
use crate::policy::{
    save_checkpoint, A2cLearner, ActionMode, Checkpoint, NeuralPolicy, PolicyKind, PolicyParameters, RoutingPolicy,
};
use crate::seed::{self, Stream};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

pub struct TrainingRun {
    /// Parameters after the last completed episode.
    pub checkpoint: Checkpoint,
    pub episodes: Vec<EpisodeMetrics>,
    /// Set when an update produced non-finite values; `checkpoint` then
    /// holds the last parameters that completed an episode cleanly.
    pub diverged: Option<String>,
}

/// Trains the configured learned policy in memory. `progress` sees every
/// finished episode.
pub fn train_policy(cfg: &ExperimentConfig, mut progress: impl FnMut(&EpisodeMetrics)) -> Result<TrainingRun> {
    cfg.validate()?;
    if !cfg.policy.is_trainable() {
        return Err(Error::config("policy", format!("`{}` is not a learned policy", cfg.policy)));
    }
    let roster = build_constellation(&cfg.constellation)?;
    let t = &cfg.trainer;
    let params = PolicyParameters::new(t.hyperparameters(), seed::derive(cfg.seed, Stream::Init, &[]))?;
    let mut learner = A2cLearner::new(
        params.clone(),
        cfg.policy.observation_mode(),
        t.minibatch,
        t.buffer,
        t.replay_capacity,
        seed::rng(cfg.seed, Stream::Sampling, &[]),
        seed::rng(cfg.seed, Stream::Replay, &[]),
    )?;

    let mut last_good = params;
    let mut episodes = Vec::with_capacity(t.episodes);
    for e in 0..t.episodes {
        let opts = EpisodeOptions { record_wall_clock: cfg.record_wall_clock, ..Default::default() };
        match run_episode(cfg, &roster, e, &mut learner, opts) {
            Ok(run) => {
                if let Some(l) = learner.take_mean_losses() {
                    log::debug!("episode {e}: actor loss {:.4}, critic loss {:.4}", l.actor, l.critic);
                }
                log::info!("episode {e}: completion {:.4}", run.metrics.completion_rate);
                progress(&run.metrics);
                episodes.push(run.metrics);
                last_good = learner.params().clone();
            }
            Err(Error::Training(msg)) => {
                log::error!("episode {e}: {msg}");
                return Ok(TrainingRun {
                    checkpoint: Checkpoint::new(cfg.policy, last_good),
                    episodes,
                    diverged: Some(format!("episode {e}: {msg}")),
                });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(TrainingRun { checkpoint: Checkpoint::new(cfg.policy, learner.into_params()), episodes, diverged: None })
}

pub struct TrainArtifacts {
    pub run: TrainingRun,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

/// Trains and writes the metrics file, checkpoint and resolved config into
/// `cfg.output_dir`. A diverged run still writes its last good checkpoint
/// and then reports [`Error::Training`].
pub fn train(cfg: &ExperimentConfig, progress: impl FnMut(&EpisodeMetrics)) -> Result<TrainArtifacts> {
    let run = train_policy(cfg, progress)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    save_metrics_csv(&metrics_path, &run.episodes)?;
    save_checkpoint(&run.checkpoint, &checkpoint_path)?;
    let resolved = dir.join(RESOLVED_CONFIG_FILE);
    std::fs::write(&resolved, cfg.to_toml_string()?).map_err(|e| Error::io(&resolved, e))?;
    if let Some(msg) = &run.diverged {
        return Err(Error::Training(format!("{msg}; last good checkpoint at {}", checkpoint_path.display())));
    }
    Ok(TrainArtifacts { run, metrics_path, checkpoint_path })
}

/// A policy that can be evaluated: a fixed baseline or trained weights.
#[derive(Debug, Clone)]
pub enum PolicySource {
    Baseline(PolicyKind),
    Learned(Checkpoint),
}

impl PolicySource {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicySource::Baseline(k) => *k,
            PolicySource::Learned(c) => c.policy,
        }
    }

    /// Greedy instance of the policy.
    pub fn instantiate(&self, rng_seed: u64) -> Result<Box<dyn RoutingPolicy + Send>> {
        Ok(match self {
            PolicySource::Baseline(PolicyKind::Spg) => Box::new(SpgPolicy),
            PolicySource::Baseline(PolicyKind::Ltg) => Box::new(LtgPolicy),
            PolicySource::Baseline(k) => {
                return Err(Error::config("policy", format!("`{k}` needs a checkpoint")));
            }
            PolicySource::Learned(c) => Box::new(NeuralPolicy::new(
                c.params.clone(),
                c.observation_mode,
                ActionMode::Greedy,
                seed::rng(rng_seed, Stream::Sampling, &[1]),
            )),
        })
    }
}

/// First episode index never used for training; evaluation runs start here.
pub fn held_out_episode(cfg: &ExperimentConfig) -> usize {
    cfg.trainer.episodes
}

/// One greedy evaluation episode. When `trace_path` is given every decision
/// epoch is written there as JSON lines.
pub fn evaluate(
    cfg: &ExperimentConfig,
    roster: &Constellation,
    source: &PolicySource,
    episode: usize,
    trace_path: Option<&Path>,
) -> Result<EpisodeMetrics> {
    let mut policy = source.instantiate(cfg.seed)?;
    let record_wall_clock = cfg.record_wall_clock;
    let run = match trace_path {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut sink = JsonlTrace::new(std::io::BufWriter::new(f));
            let opts = EpisodeOptions { trace: Some(&mut sink), record_wall_clock, ..Default::default() };
            let run = run_episode(cfg, roster, episode, policy.as_mut(), opts)?;
            use std::io::Write;
            sink.into_inner().flush().map_err(|e| Error::io(path, e))?;
            run
        }
        None => {
            let opts = EpisodeOptions { record_wall_clock, ..Default::default() };
            run_episode(cfg, roster, episode, policy.as_mut(), opts)?
        }
    };
    Ok(run.metrics)
}

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::netsim::{sample_link_rates, step_slot, SlotLedger, TraceSink};
use crate::policy::RoutingPolicy;
use crate::seed::{self, Stream};
use crate::traffic::{generate_cycle, merge_carryover, read_trace_csv, Outcome, RequestRuntime, ServiceRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub requests: usize,
    pub delivered: usize,
    pub failed: usize,
    pub inflight: usize,
    pub completion_rate: f64,
    pub cum_reward: f64,
    pub epochs: usize,
    /// Mean end-to-end delay of delivered requests.
    pub mean_delay_s: Option<f64>,
    pub wall_s: Option<f64>,
}

#[derive(Default)]
pub struct EpisodeOptions<'a> {
    pub trace: Option<&'a mut dyn TraceSink>,
    /// Keep every slot ledger (link budgets and committed hops).
    pub keep_ledgers: bool,
    pub record_wall_clock: bool,
}

pub struct EpisodeRun {
    pub metrics: EpisodeMetrics,
    /// Final state of every request of the episode, ordered by id.
    pub requests: Vec<RequestRuntime>,
    pub ledgers: Vec<SlotLedger>,
}

/// Requests of one episode: the configured trace file, or freshly drawn
/// traffic from the episode's own stream.
pub fn episode_requests(cfg: &ExperimentConfig, roster: &Constellation, episode: usize) -> Result<Vec<ServiceRequest>> {
    match &cfg.request_trace {
        Some(path) => read_trace_csv(path, roster),
        None => generate_cycle(
            roster,
            &cfg.traffic,
            cfg.sim.slots,
            seed::derive(cfg.seed, Stream::Traffic, &[episode as u64]),
        ),
    }
}

/// Plays one planning cycle. Episode `e` starts at orbital time
/// `e * slots * tau`, so consecutive episodes see consecutive topologies.
pub fn run_episode(
    cfg: &ExperimentConfig,
    roster: &Constellation,
    episode: usize,
    policy: &mut dyn RoutingPolicy,
    mut opts: EpisodeOptions<'_>,
) -> Result<EpisodeRun> {
    let started = Instant::now();
    let mut pending = episode_requests(cfg, roster, episode)?;
    let total = pending.len();
    let rate_seed = seed::derive(cfg.seed, Stream::LinkRates, &[episode as u64]);
    let tau = cfg.sim.tau_s;

    let mut carry: Vec<RequestRuntime> = Vec::new();
    let mut finished: Vec<RequestRuntime> = Vec::with_capacity(total);
    let mut ledgers = Vec::new();
    let mut cum_reward = 0.0;
    let mut epochs = 0;
    for slot in 0..cfg.sim.slots {
        let queue = merge_carryover(&mut pending, std::mem::take(&mut carry), slot)?;
        if queue.is_empty() {
            continue;
        }
        let epoch_s = (episode * cfg.sim.slots + slot) as f64 * tau;
        let snapshot = roster.snapshot_at(slot, epoch_s);
        let mut ledger = sample_link_rates(&snapshot, &cfg.sim, rate_seed)?;
        let trace: Option<&mut dyn TraceSink> = match &mut opts.trace {
            Some(t) => Some(&mut **t),
            None => None,
        };
        let res = step_slot(&mut ledger, queue, policy, &snapshot, trace)?;
        cum_reward += res.reward_sum;
        epochs += res.epochs;
        finished.extend(res.finished);
        carry = res.carryover;
        if opts.keep_ledgers {
            ledgers.push(ledger);
        }
    }
    finished.extend(carry);
    finished.extend(pending.into_iter().map(RequestRuntime::new));
    finished.sort_by_key(RequestRuntime::id);
    if finished.len() != total {
        return Err(Error::Consistency(format!("episode lost requests: {} of {total}", finished.len())));
    }

    let delivered: Vec<f64> =
        finished.iter().filter(|r| r.outcome == Outcome::Delivered).map(|r| r.elapsed_delay_s).collect();
    let failed = finished.iter().filter(|r| r.outcome == Outcome::Failed).count();
    let metrics = EpisodeMetrics {
        episode,
        requests: total,
        delivered: delivered.len(),
        failed,
        inflight: total - delivered.len() - failed,
        completion_rate: if total == 0 { 0.0 } else { delivered.len() as f64 / total as f64 },
        cum_reward,
        epochs,
        mean_delay_s: (!delivered.is_empty()).then(|| delivered.iter().sum::<f64>() / delivered.len() as f64),
        wall_s: opts.record_wall_clock.then(|| started.elapsed().as_secs_f64()),
    };
    Ok(EpisodeRun { metrics, requests: finished, ledgers })
}

pub const METRICS_CSV_HEADER: [&str; 8] =
    ["episode", "completion_rate", "cum_reward", "delivered", "failed", "inflight", "mean_delay_s", "wall_s"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_CSV_HEADER)?;
    for m in rows {
        w.write_record(&[
            m.episode.to_string(),
            m.completion_rate.to_string(),
            m.cum_reward.to_string(),
            m.delivered.to_string(),
            m.failed.to_string(),
            m.inflight.to_string(),
            opt(m.mean_delay_s),
            opt(m.wall_s),
        ])?;
    }
    w.flush().map_err(|e| Error::io("metrics", e))?;
    Ok(())
}

pub fn save_metrics_csv(path: &Path, rows: &[EpisodeMetrics]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(std::io::BufWriter::new(f), rows)
}

/// Reads back `(episode, completion_rate)` pairs from a metrics file.
pub fn read_completion_curve(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::config("metrics", format!("{} has no `{name}` column", path.display())))
    };
    let (ie, ic) = (col("episode")?, col("completion_rate")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse_err = |what: &str| Error::config("metrics", format!("bad {what} in {}", path.display()));
        let e = rec[ie].parse().map_err(|_| parse_err("episode"))?;
        let c = rec[ic].parse().map_err(|_| parse_err("completion_rate"))?;
        out.push((e, c));
    }
    Ok(out)
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rrm_core::constellation::build_constellation;
use rrm_core::experiments::{
    evaluate, held_out_episode, plot::plot_csv, resolve_sources, scale_label, sweep_load, sweep_scale, train,
    write_runs_csv, ExperimentConfig, PolicySource,
};
use rrm_core::policy::load_checkpoint;
use rrm_core::{Error, Result};

/// Regional resource management experiments on LEO constellations.
///
/// Exit status: 0 on success, 1 on a runtime or configuration error (one
/// `error kind=...` line on stderr), 2 on a usage error. Only JSON summaries
/// are written to stdout; logs go to stderr.
#[derive(Debug, Parser)]
#[command(name = "rrm", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Train the configured learned policy; writes metrics.csv, the
    /// checkpoint and the resolved config into the output directory.
    Train(Common),
    /// Evaluate a checkpoint or baseline for one held-out episode.
    Eval(Common),
    /// Completion rate versus requests per satellite for every policy.
    SweepLoad(Common),
    /// Completion rate across constellation sizes for every policy.
    SweepScale(Common),
    /// Print the ISL graph of one time slot as JSON.
    DumpTopology {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        slot: usize,
    },
    /// Render a metrics or load-sweep CSV as an SVG line chart.
    Plot {
        /// CSV written by `train` or `sweep-load`.
        #[arg(long)]
        input: PathBuf,
        /// Output SVG; defaults to the input path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Patch a config field, e.g. `--override traffic.per_leo_count=40`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trained model to evaluate (eval only).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Policy kind: tf-darm, mdg, spg or ltg (overrides `policy`).
    #[arg(long)]
    policy: Option<String>,
    /// Only log errors.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", quoted(&out.display().to_string())));
        }
        if let Some(p) = &self.policy {
            overrides.push(format!("policy={}", quoted(p)));
        }
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides)?,
            None => ExperimentConfig::default().with_overrides(&overrides)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn init_logging(quiet: bool) {
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
}

fn run(verb: Verb) -> Result<Value> {
    match verb {
        Verb::Train(c) => {
            let cfg = c.resolve()?;
            let art = train(&cfg, |_| {})?;
            let last = art.run.episodes.last();
            Ok(json!({
                "verb": "train",
                "policy": cfg.policy,
                "seed": cfg.seed,
                "episodes": art.run.episodes.len(),
                "final_completion_rate": last.map(|m| m.completion_rate),
                "metrics": art.metrics_path,
                "checkpoint": art.checkpoint_path,
            }))
        }
        Verb::Eval(c) => {
            let cfg = c.resolve()?;
            let source = match &c.checkpoint {
                Some(p) => PolicySource::Learned(load_checkpoint(p)?),
                None if cfg.policy.is_trainable() => {
                    return Err(Error::Config {
                        field: "checkpoint".into(),
                        reason: format!("evaluating `{}` needs --checkpoint", cfg.policy),
                    })
                }
                None => PolicySource::Baseline(cfg.policy),
            };
            let roster = build_constellation(&cfg.constellation)?;
            let episode = held_out_episode(&cfg);
            let shell = scale_label([cfg.constellation.planes, cfg.constellation.sats_per_plane]);
            let trace = cfg.write_traces.then(|| {
                cfg.output_dir.join("traces").join(format!("eval-{shell}-{}-s{}.jsonl", source.kind(), cfg.seed))
            });
            let metrics = evaluate(&cfg, &roster, &source, episode, trace.as_deref())?;
            Ok(json!({
                "verb": "eval",
                "policy": source.kind(),
                "seed": cfg.seed,
                "constellation": shell,
                "satellites": roster.len(),
                "metrics": metrics,
                "trace": trace,
            }))
        }
        Verb::SweepLoad(c) => {
            let cfg = c.resolve()?;
            let sources = resolve_sources(&cfg)?;
            let report = sweep_load(&cfg, &sources)?;
            let table = cfg.output_dir.join("load.csv");
            let runs = cfg.output_dir.join("load_runs.csv");
            report.write_csv(&table)?;
            write_runs_csv(&runs, &report.cells)?;
            Ok(json!({
                "verb": "sweep-load",
                "loads": report.loads,
                "rows": report.rows,
                "table": table,
                "runs": runs,
            }))
        }
        Verb::SweepScale(c) => {
            let cfg = c.resolve()?;
            let sources = resolve_sources(&cfg)?;
            let report = sweep_scale(&cfg, &sources)?;
            let table = cfg.output_dir.join("scale.csv");
            let runs = cfg.output_dir.join("scale_runs.csv");
            report.write_csv(&table)?;
            write_runs_csv(&runs, &report.cells)?;
            Ok(json!({
                "verb": "sweep-scale",
                "scales": report.scales.iter().map(|&s| scale_label(s)).collect::<Vec<_>>(),
                "rows": report.rows,
                "min_gain": report.min_gain,
                "table": table,
                "runs": runs,
            }))
        }
        Verb::DumpTopology { common, slot } => {
            let cfg = common.resolve()?;
            let roster = build_constellation(&cfg.constellation)?;
            let snap = roster.propagate(slot, cfg.sim.tau_s);
            Ok(serde_json::to_value(&snap)?)
        }
        Verb::Plot { input, out, .. } => {
            let out = out.unwrap_or_else(|| input.with_extension("svg"));
            plot_csv(&input, &out)?;
            Ok(json!({ "verb": "plot", "input": input, "output": out }))
        }
    }
}

fn error_line(e: &Error) -> String {
    let detail = match e {
        Error::Config { field, reason } => format!("field={field} reason={}", quoted(reason)),
        Error::Io { path, source } => format!("path={} reason={}", quoted(path), quoted(&source.to_string())),
        other => format!("reason={}", quoted(&other.to_string())),
    };
    format!("error kind={} {detail}", e.kind())
}

fn quiet(verb: &Verb) -> bool {
    match verb {
        Verb::Train(c) | Verb::Eval(c) | Verb::SweepLoad(c) | Verb::SweepScale(c) => c.quiet,
        Verb::DumpTopology { common, .. } => common.quiet,
        Verb::Plot { quiet, .. } => *quiet,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    init_logging(quiet(&cli.verb));
    match run(cli.verb) {
        Ok(summary) => {
            // a closed stdout (e.g. piped into `head`) is not a failure of the run
            let _ = writeln!(std::io::stdout().lock(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(1)
        }
    }
}

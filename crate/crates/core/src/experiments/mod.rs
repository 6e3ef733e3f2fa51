//! Experiment orchestration: configuration, episodes, training, evaluation,
//! sweeps and reporting.

pub mod config;
mod episode;
pub mod plot;
mod sweep;
mod train;

pub use config::{ExperimentConfig, SweepConfig, TrainerConfig, CONFIG_VERSION};
pub use episode::{
    episode_requests, read_completion_curve, run_episode, save_metrics_csv, write_metrics_csv, EpisodeMetrics,
    EpisodeOptions, EpisodeRun, METRICS_CSV_HEADER,
};
pub use sweep::{
    min_gain, resolve_sources, scale_label, scale_spec, sweep_load, sweep_scale, write_runs_csv, LoadReport, ReportRow,
    ScaleReport, SweepCell, LOAD_CSV_HEADER, RUNS_CSV_HEADER,
};
pub use train::{
    evaluate, held_out_episode, train, train_policy, PolicySource, TrainArtifacts, TrainingRun, CHECKPOINT_FILE,
    METRICS_FILE, RESOLVED_CONFIG_FILE,
};

//! Experiment orchestration: training runs, checkpoint evaluation, the
//! planner scaling study, the single-path study and plot emission.

pub mod config;
pub mod eval;
pub mod plots;
pub mod scale;
pub mod single_path;
pub mod train;

pub use config::TrainConfig;
pub use eval::{evaluate_checkpoint, select_best, EvalReport, EvalRow, EvalSet, EpisodeSummary};
pub use plots::{emit_plots, RunCurve};
pub use scale::{vod_scale_experiment, ScalePoint, DEFAULT_FACTORS};
pub use single_path::{single_path_study, ProfileSnapshot};
pub use train::{train, TrainOutcome};

//! Deterministic policy-gradient agent and its three policy architectures.

pub mod agent;
pub mod episode;
pub mod learner;
pub mod noise;
pub mod replay;
pub mod reward;

pub use agent::{build_state, combine_action, select_action, Agent, DdpgConfig, PolicyMode, UpdateStats};
pub use episode::{drive, drive_vod, write_trace_csv, Episode, EpisodeRecord, Observation, StepResult, TraceRow, EPISODE_STEPS};
pub use learner::{run_policy, EpisodeOptions, EpisodeOutcome, Learner};
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition};
pub use reward::compute_reward;

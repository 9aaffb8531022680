use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::paths::generate_random_path;
use crate::planner::Vod;
use crate::rl::drive;

use super::config::TrainConfig;

pub const DEFAULT_FACTORS: [f64; 6] = [1.00, 1.05, 1.10, 1.15, 1.20, 1.25];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub factor: f64,
    pub episodes: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// Mean of per-episode average speeds over successful episodes.
    pub mean_velocity: f64,
}

/// Failure rate of the planner with its limit curve scaled by each factor,
/// over the evaluation paths of `config`.
pub fn vod_scale_experiment(config: &TrainConfig, factors: &[f64], n_paths: usize) -> Vec<ScalePoint> {
    let p = config.vehicle;
    let paths: Vec<_> = (0..n_paths)
        .into_par_iter()
        .map(|i| generate_random_path(&config.path_gen.with_seed(config.eval_path_seed(i))))
        .collect();
    factors
        .iter()
        .map(|&factor| {
            let vod = Vod::scaled(p, factor);
            let records: Vec<_> = paths
                .par_iter()
                .map(|path| drive(path, &p, config.dt, config.episode_steps, vod, |o| o.tau_vod))
                .collect();
            let failures = records.iter().filter(|r| r.failed).count();
            let ok: Vec<f64> = records.iter().filter(|r| !r.failed).map(|r| r.avg_v).collect();
            ScalePoint {
                factor,
                episodes: records.len(),
                failures,
                failure_rate: if records.is_empty() { 0.0 } else { failures as f64 / records.len() as f64 },
                mean_velocity: if ok.is_empty() { 0.0 } else { ok.iter().sum::<f64>() / ok.len() as f64 },
            }
        })
        .collect()
}

pub fn write_scale_csv<W: Write>(points: &[ScalePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["factor", "episodes", "failures", "failure_rate", "mean_velocity"])?;
    for s in points {
        w.write_record([
            format!("{:.2}", s.factor),
            s.episodes.to_string(),
            s.failures.to_string(),
            format!("{:.4}", s.failure_rate),
            format!("{:.6}", s.mean_velocity),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scale_csv<R: Read>(reader: R) -> Result<Vec<ScalePoint>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ScalePoint>, _>>()?)
}

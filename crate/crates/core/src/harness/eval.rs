use std::io::{Read, Write};
use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::FailureCause;
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, Mlp};
use crate::paths::{generate_random_path, Path};
use crate::planner::Vod;
use crate::rl::{drive, run_policy, EpisodeRecord, Observation, PolicyMode};

use super::config::TrainConfig;

/// Failure-rate ceiling used when picking the best checkpoint.
pub const BEST_MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub path_seed: u64,
    pub steps: usize,
    pub avg_v: f64,
    pub failed: bool,
    pub cause: FailureCause,
}

impl EpisodeSummary {
    fn new(path_seed: u64, r: &EpisodeRecord) -> Self {
        Self {
            path_seed,
            steps: r.steps,
            avg_v: r.avg_v,
            failed: r.failed,
            cause: r.cause,
        }
    }
}

/// Seeded evaluation paths with the nominal controller's results on them.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub seeds: Vec<u64>,
    pub paths: Vec<Path>,
    pub vod: Vec<EpisodeSummary>,
}

impl EvalSet {
    pub fn new(config: &TrainConfig, n_paths: usize) -> Self {
        let seeds: Vec<u64> = (0..n_paths).map(|i| config.eval_path_seed(i)).collect();
        let paths: Vec<Path> = seeds
            .par_iter()
            .map(|&s| generate_random_path(&config.path_gen.with_seed(s)))
            .collect();
        let mut set = Self {
            seeds,
            paths,
            vod: Vec::new(),
        };
        set.vod = set.run(config, |obs| obs.tau_vod);
        set
    }

    /// Runs a throttle law on every path, in parallel, preserving path order.
    pub fn run<F>(&self, config: &TrainConfig, policy: F) -> Vec<EpisodeSummary>
    where
        F: Fn(&Observation) -> f64 + Sync,
    {
        let p = config.vehicle;
        self.paths
            .par_iter()
            .zip(&self.seeds)
            .map(|(path, &seed)| {
                let r = drive(path, &p, config.dt, config.episode_steps, Vod::new(p), &policy);
                EpisodeSummary::new(seed, &r)
            })
            .collect()
    }

    pub fn run_actor(&self, config: &TrainConfig, mode: PolicyMode, actor: &Mlp) -> Vec<EpisodeSummary> {
        let p = config.vehicle;
        self.paths
            .par_iter()
            .zip(&self.seeds)
            .map(|(path, &seed)| {
                let r = run_policy(mode, actor, path, &p, config.dt, config.episode_steps, Vod::new(p));
                EpisodeSummary::new(seed, &r)
            })
            .collect()
    }

    pub fn report(&self, updates: u64, episodes: Vec<EpisodeSummary>) -> EvalReport {
        EvalReport::new(updates, episodes, &self.vod)
    }
}

/// Mean of per-episode average speeds over successful episodes; 0 when every episode failed.
pub fn mean_velocity(episodes: &[EpisodeSummary]) -> f64 {
    let ok: Vec<f64> = episodes.iter().filter(|e| !e.failed).map(|e| e.avg_v).collect();
    if ok.is_empty() {
        0.0
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    }
}

pub fn failure_rate(episodes: &[EpisodeSummary]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    episodes.iter().filter(|e| e.failed).count() as f64 / episodes.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub updates: u64,
    pub mean_velocity: f64,
    pub vod_mean_velocity: f64,
    pub normalized: f64,
    pub failure_rate: f64,
    pub rollover: usize,
    pub slide: usize,
    pub deviation: usize,
    pub episodes: Vec<EpisodeSummary>,
}

impl EvalReport {
    pub fn new(updates: u64, episodes: Vec<EpisodeSummary>, vod: &[EpisodeSummary]) -> Self {
        assert_eq!(episodes.len(), vod.len(), "policy and planner must share the path set");
        assert!(
            episodes.iter().zip(vod).all(|(a, b)| a.path_seed == b.path_seed),
            "policy and planner must share the path set"
        );
        let count = |c: FailureCause| episodes.iter().filter(|e| e.cause == c).count();
        let mean = mean_velocity(&episodes);
        let vod_mean = mean_velocity(vod);
        Self {
            updates,
            mean_velocity: mean,
            vod_mean_velocity: vod_mean,
            normalized: if vod_mean > 0.0 { mean / vod_mean } else { 0.0 },
            failure_rate: failure_rate(&episodes),
            rollover: count(FailureCause::Rollover),
            slide: count(FailureCause::Slide),
            deviation: count(FailureCause::Deviation),
            episodes,
        }
    }

    pub fn row(&self) -> EvalRow {
        EvalRow {
            updates: self.updates,
            mean_velocity: self.mean_velocity,
            vod_mean_velocity: self.vod_mean_velocity,
            normalized: self.normalized,
            failure_rate: self.failure_rate,
            rollover: self.rollover,
            slide: self.slide,
            deviation: self.deviation,
        }
    }
}

/// One line of `eval.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub updates: u64,
    pub mean_velocity: f64,
    pub vod_mean_velocity: f64,
    pub normalized: f64,
    pub failure_rate: f64,
    pub rollover: usize,
    pub slide: usize,
    pub deviation: usize,
}

/// Evaluates a saved checkpoint; the mode comes from its manifest.
pub fn evaluate_checkpoint(path: &FsPath, config: &TrainConfig, set: &EvalSet) -> Result<EvalReport> {
    let (ckpt, manifest) = load_checkpoint(path)?;
    let mode: PolicyMode = manifest.mode.parse()?;
    let actor = ckpt
        .networks
        .first()
        .ok_or_else(|| Error::Checkpoint("checkpoint holds no actor".into()))?;
    if actor.input_size() != mode.state_dim() || actor.output_size() != 1 {
        return Err(Error::Checkpoint(format!(
            "actor shape {:?} does not fit mode {mode}",
            actor.sizes()
        )));
    }
    Ok(set.report(manifest.updates, set.run_actor(config, mode, actor)))
}

/// Highest mean velocity among checkpoints with failure rate at most `max_failure_rate`; ties go to the earliest.
pub fn select_best(rows: &[EvalRow], max_failure_rate: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.failure_rate > max_failure_rate + 1e-12 {
            continue;
        }
        match best {
            Some(b) if rows[b].mean_velocity >= r.mean_velocity => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn write_eval_csv<W: Write>(rows: &[EvalRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "updates",
            "mean_velocity",
            "vod_mean_velocity",
            "normalized",
            "failure_rate",
            "rollover",
            "slide",
            "deviation",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_csv<R: Read>(reader: R) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<EvalRow>, _>>()?)
}

/// Per-episode dump: `updates,source,path_seed,steps,avg_v,failed,cause`.
pub fn write_episodes_csv<W: Write>(reports: &[EvalReport], vod: &[EpisodeSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["updates", "source", "path_seed", "steps", "avg_v", "failed", "cause"])?;
    let mut put = |updates: String, source: &str, e: &EpisodeSummary| {
        w.write_record([
            updates,
            source.to_string(),
            e.path_seed.to_string(),
            e.steps.to_string(),
            format!("{:.6}", e.avg_v),
            e.failed.to_string(),
            e.cause.as_str().to_string(),
        ])
    };
    for e in vod {
        put(String::new(), "vod", e)?;
    }
    for r in reports {
        for e in &r.episodes {
            put(r.updates.to_string(), "policy", e)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(seed: u64, v: f64, failed: bool) -> EpisodeSummary {
        EpisodeSummary {
            path_seed: seed,
            steps: 100,
            avg_v: v,
            failed,
            cause: if failed { FailureCause::Rollover } else { FailureCause::Ok },
        }
    }

    #[test]
    fn failures_excluded_from_means() {
        let eps = vec![ep(0, 10.0, false), ep(1, 30.0, true), ep(2, 20.0, false)];
        assert_eq!(mean_velocity(&eps), 15.0);
        assert!((failure_rate(&eps) - 1.0 / 3.0).abs() < 1e-12);
        let vod = vec![ep(0, 5.0, false), ep(1, 10.0, false), ep(2, 15.0, false)];
        let r = EvalReport::new(0, eps, &vod);
        assert_eq!(r.normalized, 1.5);
        assert_eq!(r.rollover, 1);
        assert_eq!(mean_velocity(&[ep(0, 9.0, true)]), 0.0);
    }

    #[test]
    #[should_panic]
    fn mismatched_path_sets_rejected() {
        EvalReport::new(0, vec![ep(0, 1.0, false)], &[ep(1, 1.0, false)]);
    }

    fn row(updates: u64, v: f64, f: f64) -> EvalRow {
        EvalRow {
            updates,
            mean_velocity: v,
            vod_mean_velocity: 10.0,
            normalized: v / 10.0,
            failure_rate: f,
            rollover: 0,
            slide: 0,
            deviation: 0,
        }
    }

    #[test]
    fn best_checkpoint_selection() {
        let rows = vec![row(0, 9.0, 0.0), row(5000, 12.0, 0.05), row(10000, 11.0, 0.01), row(15000, 11.0, 0.0)];
        assert_eq!(select_best(&rows, BEST_MAX_FAILURE_RATE), Some(2));
        assert_eq!(select_best(&rows[1..2], BEST_MAX_FAILURE_RATE), None);
        assert_eq!(select_best(&[], BEST_MAX_FAILURE_RATE), None);
    }

    #[test]
    fn eval_csv_round_trip() {
        let rows = vec![row(0, 9.5, 0.0), row(5000, 12.25, 0.02)];
        let mut buf = Vec::new();
        write_eval_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("updates,mean_velocity,vod_mean_velocity,normalized,failure_rate"));
        assert_eq!(read_eval_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn planner_against_itself_is_exactly_one() {
        let config = TrainConfig::default();
        let set = EvalSet::new(&config, 4);
        let r = set.report(0, set.run(&config, |o| o.tau_vod));
        assert_eq!(r.normalized, 1.0);
        assert_eq!(r.episodes, set.vod);
    }

    #[test]
    fn braking_policy_is_slow_but_safe() {
        let config = TrainConfig::default();
        let set = EvalSet::new(&config, 4);
        let r = set.report(0, set.run(&config, |_| -1.0));
        assert_eq!(r.mean_velocity, 0.0);
        assert_eq!(r.failure_rate, 0.0);
    }
}

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::paths::Path;
use crate::planner::Vod;
use crate::rl::{drive_vod, run_policy, EpisodeOptions, EpisodeRecord, Learner, PolicyMode};

use super::config::TrainConfig;

/// Noise-free rollouts of the policy and the planner after `episode` training episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSnapshot {
    pub episode: u64,
    pub updates: u64,
    pub policy: EpisodeRecord,
    pub vod: EpisodeRecord,
}

impl ProfileSnapshot {
    /// Mean |v_policy − v_planner| over the planner's steps; the policy
    /// counts as stopped after its episode ends.
    pub fn velocity_gap(&self) -> f64 {
        velocity_gap(&self.policy, &self.vod)
    }
}

pub fn velocity_gap(policy: &EpisodeRecord, vod: &EpisodeRecord) -> f64 {
    let n = vod.trace.len();
    if n == 0 {
        return 0.0;
    }
    vod.trace
        .iter()
        .enumerate()
        .map(|(i, r)| (r.v - policy.trace.get(i).map_or(0.0, |p| p.v)).abs())
        .sum::<f64>()
        / n as f64
}

/// Trains on one fixed path and records snapshots at the requested episode counts.
pub fn single_path_study(config: &TrainConfig, mode: PolicyMode, path: &Path, snapshots: &[u64]) -> Result<Vec<ProfileSnapshot>> {
    config.validate()?;
    let p = config.vehicle;
    let vod = drive_vod(path, &p, Vod::new(p), config.episode_steps);
    let mut learner = Learner::new(mode, config.ddpg, config.seed);
    let mut wanted: Vec<u64> = snapshots.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let opts = EpisodeOptions {
        dt: config.dt,
        max_steps: config.episode_steps,
        explore: true,
        train: true,
        update_budget: None,
    };
    let mut out = Vec::with_capacity(wanted.len());
    let mut episode = 0u64;
    for target in wanted {
        while episode < target {
            learner.run_episode(path, &p, &opts, |_, _, _| Ok(()))?;
            episode += 1;
        }
        let policy = run_policy(mode, &learner.agent.actor, path, &p, config.dt, config.episode_steps, Vod::new(p));
        out.push(ProfileSnapshot {
            episode,
            updates: learner.agent.updates(),
            policy,
            vod: vod.clone(),
        });
    }
    Ok(out)
}

/// One row of the long-format profile dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub mode: String,
    pub episode: u64,
    pub source: String,
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub throttle: f64,
}

pub fn profile_rows(mode: PolicyMode, snapshots: &[ProfileSnapshot]) -> Vec<ProfileRow> {
    let mut rows = Vec::new();
    for snap in snapshots {
        for (source, rec) in [("policy", &snap.policy), ("vod", &snap.vod)] {
            for r in &rec.trace {
                rows.push(ProfileRow {
                    mode: mode.as_str().to_string(),
                    episode: snap.episode,
                    source: source.to_string(),
                    t: r.t,
                    s: r.s,
                    v: r.v,
                    throttle: r.throttle,
                });
            }
        }
    }
    rows
}

/// Writes `mode,episode,source,t,s,v,throttle` with fixed precision.
pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["mode", "episode", "source", "t", "s", "v", "throttle"])?;
    for r in rows {
        w.write_record([
            r.mode.clone(),
            r.episode.to_string(),
            r.source.clone(),
            format!("{:.6}", r.t),
            format!("{:.6}", r.s),
            format!("{:.6}", r.v),
            format!("{:.6}", r.throttle),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv<R: Read>(reader: R) -> Result<Vec<ProfileRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ProfileRow>, _>>()?)
}

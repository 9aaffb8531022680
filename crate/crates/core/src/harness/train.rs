use std::fs;
use std::path::{Path as FsPath, PathBuf};

use crate::error::Result;
use crate::nn::{save_checkpoint, Checkpoint, CheckpointManifest};
use crate::paths::generate_random_path;
use crate::rl::{Agent, EpisodeOptions, Learner};

use super::config::TrainConfig;

pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const NETWORK_NAMES: [&str; 3] = ["actor", "critic_state", "critic_head"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoints: Vec<PathBuf>,
    pub episodes: u64,
    pub updates: u64,
}

pub fn checkpoint_path(dir: &FsPath, updates: u64) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("ckpt_{updates:06}.bin"))
}

pub fn save_agent(agent: &Agent, path: &FsPath, config_hash: &str) -> Result<()> {
    let checkpoint = Checkpoint {
        networks: vec![
            agent.actor.clone(),
            agent.critic.state_net.clone(),
            agent.critic.head.clone(),
        ],
    };
    let manifest = CheckpointManifest {
        format_version: crate::nn::checkpoint::FORMAT_VERSION,
        updates: agent.updates(),
        mode: agent.mode.as_str().to_string(),
        config_hash: config_hash.to_string(),
        networks: NETWORK_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    save_checkpoint(path, &checkpoint, &manifest)
}

/// Lists `ckpt_*.bin` files of a run directory in update order.
pub fn list_checkpoints(run_dir: &FsPath) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(run_dir.join(CHECKPOINT_DIR))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("ckpt_") && n.ends_with(".bin"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Trains until the update budget is spent. Writes `config.toml`,
/// `training_log.csv`, `episodes.csv` and a checkpoint before the first
/// update and after every `checkpoint_every` updates.
pub fn train(config: &TrainConfig, out_dir: &FsPath) -> Result<TrainOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir.join(CHECKPOINT_DIR))?;
    fs::write(out_dir.join("config.toml"), config.to_toml()?)?;
    let hash = config.hash();

    let mut log = csv::Writer::from_path(out_dir.join("training_log.csv"))?;
    log.write_record(["update", "episode", "critic_loss", "actor_objective", "replay_size"])?;
    let mut episodes_csv = csv::Writer::from_path(out_dir.join("episodes.csv"))?;
    episodes_csv.write_record(["episode", "mode", "steps", "avg_v", "failed", "cause"])?;

    let mut learner = Learner::new(config.mode, config.ddpg, config.seed);
    let mut checkpoints = Vec::new();
    let first = checkpoint_path(out_dir, 0);
    save_agent(&learner.agent, &first, &hash)?;
    checkpoints.push(first);

    let opts = EpisodeOptions {
        dt: config.dt,
        max_steps: config.episode_steps,
        explore: true,
        train: true,
        update_budget: Some(config.total_updates),
    };
    let mut episode = 0u64;
    while learner.agent.updates() < config.total_updates {
        let path = generate_random_path(&config.path_gen.with_seed(config.training_path_seed(episode)));
        let outcome = learner.run_episode(&path, &config.vehicle, &opts, |agent, stats, replay_size| {
            let u = agent.updates();
            log.write_record([
                u.to_string(),
                episode.to_string(),
                stats.critic_loss.to_string(),
                stats.actor_objective.to_string(),
                replay_size.to_string(),
            ])?;
            if u % config.checkpoint_every == 0 {
                let p = checkpoint_path(out_dir, u);
                save_agent(agent, &p, &hash)?;
                checkpoints.push(p);
            }
            Ok(())
        })?;
        let r = &outcome.record;
        episodes_csv.write_record([
            episode.to_string(),
            config.mode.as_str().to_string(),
            r.steps.to_string(),
            format!("{:.6}", r.avg_v),
            r.failed.to_string(),
            r.cause.as_str().to_string(),
        ])?;
        episode += 1;
    }
    log.flush()?;
    episodes_csv.flush()?;
    Ok(TrainOutcome {
        checkpoints,
        episodes: episode,
        updates: learner.agent.updates(),
    })
}

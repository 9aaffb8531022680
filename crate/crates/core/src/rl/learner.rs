use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::VehicleParams;
use crate::error::Result;
use crate::nn::Mlp;
use crate::paths::Path;
use crate::planner::Vod;

use super::agent::{build_state, combine_action, Agent, DdpgConfig, PolicyMode, UpdateStats};
use super::episode::{drive, Episode, EpisodeRecord};
use super::noise::OuNoise;
use super::replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub dt: f64,
    pub max_steps: usize,
    pub explore: bool,
    /// Run gradient updates after each step once the replay is warm.
    pub train: bool,
    /// Stop updating once the agent reaches this many updates.
    pub update_budget: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub transitions: Vec<Transition>,
    pub updates: Vec<UpdateStats>,
}

/// Agent plus replay, exploration noise and the minibatch sampler.
#[derive(Debug, Clone)]
pub struct Learner {
    pub agent: Agent,
    pub replay: ReplayBuffer,
    pub noise: OuNoise,
    sampler: ChaCha8Rng,
}

impl Learner {
    /// All randomness derives from `seed` through separate ChaCha streams.
    pub fn new(mode: PolicyMode, config: DdpgConfig, seed: u64) -> Self {
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        let agent = Agent::new(mode, config, &mut stream(0));
        let mut noise_rng = stream(1);
        let noise_seed = rand::Rng::random(&mut noise_rng);
        Self {
            agent,
            replay: ReplayBuffer::new(config.replay_capacity),
            noise: OuNoise::new(config.ou_theta, config.ou_sigma, noise_seed),
            sampler: stream(2),
        }
    }

    /// One episode from rest at the path start. `on_update` runs after every
    /// gradient update with the replay size; an error from it aborts the episode.
    pub fn run_episode<F>(&mut self, path: &Path, params: &VehicleParams, opts: &EpisodeOptions, mut on_update: F) -> Result<EpisodeOutcome>
    where
        F: FnMut(&Agent, &UpdateStats, usize) -> Result<()>,
    {
        let mode = self.agent.mode;
        let cfg = self.agent.config;
        let mut ep = Episode::new(path, *params, opts.dt, opts.max_steps);
        self.noise.reset();
        let mut transitions = Vec::with_capacity(opts.max_steps);
        let mut updates = Vec::new();
        let mut obs = ep.observe();
        let mut state = build_state(obs.speed, &obs.horizon, mode, obs.tau_vod, params.v_max);
        while !ep.is_done() {
            let eta = if opts.explore { self.noise.sample() } else { 0.0 };
            let (throttle, action) = combine_action(mode, self.agent.actor_output(&state), eta, obs.tau_vod);
            let result = ep.advance(throttle);
            obs = ep.observe();
            let next_state = build_state(obs.speed, &obs.horizon, mode, obs.tau_vod, params.v_max);
            let t = Transition {
                state: std::mem::replace(&mut state, next_state.clone()),
                action,
                reward: result.reward,
                next_state,
                terminal: result.terminal,
            };
            if opts.train {
                self.replay.push(t.clone());
            }
            transitions.push(t);
            if opts.train && self.replay.len() >= cfg.warmup {
                for _ in 0..cfg.updates_per_step {
                    if opts.update_budget.is_some_and(|b| self.agent.updates() >= b) {
                        break;
                    }
                    let Some(batch) = self.replay.sample(cfg.batch_size, &mut self.sampler) else {
                        break;
                    };
                    let stats = self.agent.ddpg_update(&batch);
                    on_update(&self.agent, &stats, self.replay.len())?;
                    updates.push(stats);
                }
            }
        }
        Ok(EpisodeOutcome {
            record: ep.finish(),
            transitions,
            updates,
        })
    }
}

/// Noise-free rollout of a frozen actor.
pub fn run_policy(mode: PolicyMode, actor: &Mlp, path: &Path, params: &VehicleParams, dt: f64, max_steps: usize, vod: Vod) -> EpisodeRecord {
    drive(path, params, dt, max_steps, vod, |obs| {
        let s = build_state(obs.speed, &obs.horizon, mode, obs.tau_vod, params.v_max);
        combine_action(mode, actor.predict_one(&s)[0], 0.0, obs.tau_vod).0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{generate_random_path, PathGenParams};

    fn small() -> DdpgConfig {
        DdpgConfig {
            hidden: [16, 12],
            batch_size: 16,
            warmup: 50,
            ..DdpgConfig::default()
        }
    }

    fn opts(explore: bool, train: bool) -> EpisodeOptions {
        EpisodeOptions {
            dt: 0.2,
            max_steps: 100,
            explore,
            train,
            update_budget: None,
        }
    }

    #[test]
    fn evaluation_is_deterministic_and_matches_run_policy() {
        let path = generate_random_path(&PathGenParams::default().with_seed(3));
        let p = VehicleParams::default();
        let mut l = Learner::new(PolicyMode::RevoF, small(), 1);
        let a = l.run_episode(&path, &p, &opts(false, false), |_, _, _| Ok(())).unwrap();
        let b = l.run_episode(&path, &p, &opts(false, false), |_, _, _| Ok(())).unwrap();
        assert_eq!(a.record, b.record);
        let c = run_policy(PolicyMode::RevoF, &l.agent.actor, &path, &p, 0.2, 100, Vod::new(p));
        assert_eq!(a.record, c);
    }

    #[test]
    fn warmup_and_budget_respected() {
        let path = generate_random_path(&PathGenParams::default().with_seed(4));
        let p = VehicleParams::default();
        let mut l = Learner::new(PolicyMode::Revo, small(), 2);
        let mut o = opts(true, true);
        o.update_budget = Some(30);
        let mut seen = 0;
        let mut total = 0;
        while l.agent.updates() < 30 {
            let out = l
                .run_episode(&path, &p, &o, |agent, _, _| {
                    seen += 1;
                    assert!(agent.updates() as usize <= 30);
                    Ok(())
                })
                .unwrap();
            total += out.transitions.len();
            assert!(out.transitions.iter().all(|t| (-1.0..=1.0).contains(&t.action)));
        }
        assert_eq!(seen, 30);
        assert!(total >= 50 + 15);
        assert_eq!(l.replay.len(), total);
    }

    #[test]
    fn callback_error_aborts() {
        let path = generate_random_path(&PathGenParams::default().with_seed(5));
        let p = VehicleParams::default();
        let mut l = Learner::new(PolicyMode::Revo, DdpgConfig { warmup: 16, ..small() }, 3);
        let r = l.run_episode(&path, &p, &opts(true, true), |_, _, _| Err(crate::Error::Checkpoint("disk".into())));
        assert!(r.is_err());
    }
}

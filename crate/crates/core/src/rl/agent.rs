use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Critic, Mlp};
use crate::paths::{PathHorizon, HORIZON_POINTS};

use super::replay::Transition;

/// Horizon coordinates are divided by this length (m).
pub const HORIZON_SCALE: f64 = 25.0;
/// Bound applied to every feature.
pub const FEATURE_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    /// Learned throttle from speed and horizon.
    Revo,
    /// Learned correction added to the planner's throttle.
    RevoA,
    /// Planner throttle appended to the learner's features.
    RevoF,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 3] = [PolicyMode::Revo, PolicyMode::RevoA, PolicyMode::RevoF];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::Revo => "revo",
            PolicyMode::RevoA => "revo-a",
            PolicyMode::RevoF => "revo-f",
        }
    }

    pub fn state_dim(self) -> usize {
        let base = 1 + 2 * HORIZON_POINTS;
        match self {
            PolicyMode::RevoF => base + 1,
            _ => base,
        }
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "revo" => Ok(PolicyMode::Revo),
            "revo-a" | "revo_a" => Ok(PolicyMode::RevoA),
            "revo-f" | "revo_f" => Ok(PolicyMode::RevoF),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

/// Feature vector `[v/v_max] ++ (x/25, y/25)×25 (++ τ_VOD)`.
pub fn build_state(speed: f64, horizon: &PathHorizon, mode: PolicyMode, tau_vod: f64, v_max: f64) -> Vec<f64> {
    let b = FEATURE_BOUND;
    let mut f = Vec::with_capacity(mode.state_dim());
    f.push((speed / v_max).clamp(-b, b));
    for p in &horizon.points_vehicle_frame {
        f.push((p.x / HORIZON_SCALE).clamp(-b, b));
        f.push((p.y / HORIZON_SCALE).clamp(-b, b));
    }
    if mode == PolicyMode::RevoF {
        f.push(tau_vod.clamp(-1.0, 1.0));
    }
    debug_assert_eq!(f.len(), mode.state_dim());
    f
}

/// Throttle to execute and action to store, given the actor's output and noise.
///
/// The stored action is what the actor controls: the throttle itself, or the
/// correction on top of the planner for [`PolicyMode::RevoA`].
pub fn combine_action(mode: PolicyMode, actor_output: f64, noise: f64, tau_vod: f64) -> (f64, f64) {
    let raw = actor_output + noise;
    let stored = raw.clamp(-1.0, 1.0);
    let throttle = match mode {
        PolicyMode::RevoA => (tau_vod + raw).clamp(-1.0, 1.0),
        _ => stored,
    };
    (throttle, stored)
}

/// Executed throttle for a state; `noise` is `None` when not exploring.
pub fn select_action(mode: PolicyMode, actor: &Mlp, state: &[f64], tau_vod: f64, noise: Option<&mut super::OuNoise>) -> f64 {
    let out = actor.predict_one(state)[0];
    let eta = noise.map_or(0.0, |n| n.sample());
    combine_action(mode, out, eta, tau_vod).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub hidden: [usize; 2],
    pub gamma: f64,
    pub tau_soft: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub critic_weight_decay: f64,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub updates_per_step: usize,
    pub ou_theta: f64,
    pub ou_sigma: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden: [400, 300],
            gamma: 0.99,
            tau_soft: 0.001,
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            critic_weight_decay: 1e-2,
            replay_capacity: 1_000_000,
            warmup: 1000,
            updates_per_step: 2,
            ou_theta: 0.15,
            ou_sigma: 0.2,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.tau_soft) {
            return bad("tau_soft must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("batch size must be positive and fit in the replay buffer");
        }
        if self.warmup < self.batch_size {
            return bad("warmup must be at least the batch size");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.critic_weight_decay >= 0.0) {
            return bad("learning rates must be positive");
        }
        if self.ou_theta < 0.0 || self.ou_sigma < 0.0 {
            return bad("noise parameters must be non-negative");
        }
        Ok(())
    }
}

/// Diagnostics of one gradient update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Mean Q(s, π(s)) over the batch before the actor step.
    pub actor_objective: f64,
}

/// Actor, critic, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub mode: PolicyMode,
    pub config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Critic,
    pub actor_target: Mlp,
    pub critic_target: Critic,
    actor_opt: Adam,
    critic_opt: Adam,
    updates: u64,
}

fn stack(rows: impl ExactSizeIterator<Item = impl AsRef<[f64]>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * width);
    for r in rows {
        assert_eq!(r.as_ref().len(), width, "feature width");
        data.extend_from_slice(r.as_ref());
    }
    Array2::from_shape_vec((n, width), data).expect("sized above")
}

impl Agent {
    pub fn new<R: Rng>(mode: PolicyMode, config: DdpgConfig, rng: &mut R) -> Self {
        let d = mode.state_dim();
        let [h1, h2] = config.hidden;
        let actor = Mlp::new(&[d, h1, h2, 1], Activation::Tanh, rng);
        let critic = Critic::new(d, config.hidden, rng);
        Self::from_networks(mode, config, actor, critic)
    }

    /// Targets start as copies of the online networks.
    pub fn from_networks(mode: PolicyMode, config: DdpgConfig, actor: Mlp, critic: Critic) -> Self {
        let actor_opt = Adam::new(&actor.layers, config.actor_lr, 0.0);
        let critic_opt = Adam::new(
            critic.state_net.layers.iter().chain(&critic.head.layers),
            config.critic_lr,
            config.critic_weight_decay,
        );
        Self {
            mode,
            config,
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor_output(&self, state: &[f64]) -> f64 {
        self.actor.predict_one(state)[0]
    }

    /// Bellman targets `r + γ·Q'(s', π'(s'))`, with no bootstrap on terminal transitions.
    pub fn critic_targets(&self, batch: &[&Transition], gamma: f64) -> Vec<f64> {
        let d = self.mode.state_dim();
        let next = stack(batch.iter().map(|t| &t.next_state), d);
        let next_a = self.actor_target.predict(next.view());
        let next_q = self.critic_target.predict(next.view(), next_a.view());
        batch
            .iter()
            .zip(next_q.column(0))
            .map(|(t, &q)| if t.terminal { t.reward } else { t.reward + gamma * q })
            .collect()
    }

    /// One critic step, one actor step and soft target updates.
    pub fn ddpg_update(&mut self, batch: &[&Transition]) -> UpdateStats {
        assert!(!batch.is_empty(), "empty batch");
        let d = self.mode.state_dim();
        let n = batch.len() as f64;
        let y = self.critic_targets(batch, self.config.gamma);
        let states = stack(batch.iter().map(|t| &t.state), d);
        let actions = Array2::from_shape_fn((batch.len(), 1), |(i, _)| batch[i].action);

        let (q, cache) = self.critic.forward(states.view(), actions.view());
        let mut dq = Array2::zeros((batch.len(), 1));
        let mut loss = 0.0;
        for (i, &target) in y.iter().enumerate() {
            let e = q[[i, 0]] - target;
            loss += e * e;
            dq[[i, 0]] = 2.0 * e / n;
        }
        let (critic_grads, _) = self.critic.backward(&cache, dq.view());
        self.critic_opt.step(self.critic.layers_mut(), critic_grads.layers());

        let (pi, actor_cache) = self.actor.forward(states.view());
        let (q_pi, cache) = self.critic.forward(states.view(), pi.view());
        let objective = q_pi.sum() / n;
        let ascend = Array2::from_elem((batch.len(), 1), -1.0 / n);
        let (_, d_action) = self.critic.backward(&cache, ascend.view());
        let (actor_grads, _) = self.actor.backward(&actor_cache, d_action.view());
        self.actor_opt.step(self.actor.layers.iter_mut(), &actor_grads.layers);

        let tau = self.config.tau_soft;
        self.actor_target.soft_update(&self.actor, tau).expect("same shapes");
        self.critic_target.soft_update(&self.critic, tau).expect("same shapes");
        self.updates += 1;
        UpdateStats {
            critic_loss: loss / n,
            actor_objective: objective,
        }
    }

    pub fn q_value(&self, state: &[f64], action: f64) -> f64 {
        let s = ArrayView2::from_shape((1, state.len()), state).expect("row");
        let a = Array2::from_elem((1, 1), action);
        self.critic.predict(s, a.view())[[0, 0]]
    }
}

//! Episode runner shared by the nominal controller, learned policies and
//! scripted test policies.

use std::io::Write;

use crate::dynamics::{self, FailureCause, StabilityStatus, VehicleParams, VehicleState};
use crate::error::Result;
use crate::paths::{Path, PathHorizon};
use crate::planner::Vod;

use super::reward::compute_reward;

/// Steps per episode.
pub const EPISODE_STEPS: usize = 100;

/// What a controller sees before acting.
#[derive(Debug, Clone)]
pub struct Observation {
    pub speed: f64,
    pub horizon: PathHorizon,
    pub tau_vod: f64,
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub roll: f64,
    pub d_err: f64,
    pub throttle: f64,
    /// Arc length of the nearest path point.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: usize,
    /// Mean speed over the executed steps (m/s).
    pub avg_v: f64,
    pub failed: bool,
    pub cause: FailureCause,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub status: StabilityStatus,
    /// True when the episode ended on this step (failure or timeout).
    pub done: bool,
    /// True only when the episode ended through instability.
    pub terminal: bool,
}

/// A single rollout along a fixed path, starting at rest on the first point.
pub struct Episode<'a> {
    path: &'a Path,
    params: VehicleParams,
    vod: Vod,
    dt: f64,
    max_steps: usize,
    state: VehicleState,
    steps: usize,
    speed_sum: f64,
    cause: FailureCause,
    done: bool,
    trace: Vec<TraceRow>,
}

impl<'a> Episode<'a> {
    pub fn new(path: &'a Path, params: VehicleParams, dt: f64, max_steps: usize) -> Self {
        let state = VehicleState::at_path_start(path);
        let mut ep = Self {
            path,
            params,
            vod: Vod::new(params),
            dt,
            max_steps,
            state,
            steps: 0,
            speed_sum: 0.0,
            cause: FailureCause::Ok,
            done: max_steps == 0,
            trace: Vec::with_capacity(max_steps + 1),
        };
        ep.push_trace(0.0, 0.0);
        ep
    }

    /// Uses a scaled nominal controller for `tau_vod`.
    pub fn with_vod(mut self, vod: Vod) -> Self {
        self.vod = vod;
        self
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observe(&self) -> Observation {
        let horizon = self
            .path
            .horizon_from(self.state.path_index, self.state.position, self.state.yaw);
        let tau_vod = self.vod.command(self.state.speed, &horizon);
        Observation {
            speed: self.state.speed,
            horizon,
            tau_vod,
        }
    }

    pub fn advance(&mut self, throttle: f64) -> StepResult {
        assert!(!self.done, "episode already finished");
        let throttle = throttle.clamp(-1.0, 1.0);
        let out = dynamics::step(&self.state, throttle, self.path, &self.params, self.dt);
        self.state = out.state;
        self.steps += 1;
        self.speed_sum += self.state.speed;
        self.push_trace(throttle, out.d_err);
        let reward = compute_reward(out.status, self.state.speed, &self.params);
        let terminal = !out.status.stable;
        if terminal {
            self.cause = out.status.cause;
        }
        self.done = terminal || self.steps >= self.max_steps;
        StepResult {
            reward,
            status: out.status,
            done: self.done,
            terminal,
        }
    }

    fn push_trace(&mut self, throttle: f64, d_err: f64) {
        let m = self.state.path_index;
        self.trace.push(TraceRow {
            t: self.steps as f64 * self.dt,
            x: self.state.position.x,
            y: self.state.position.y,
            yaw: self.state.yaw,
            v: self.state.speed,
            roll: self.state.roll,
            d_err,
            throttle,
            s: self.path.cum_arc()[m],
        });
    }

    pub fn finish(self) -> EpisodeRecord {
        EpisodeRecord {
            steps: self.steps,
            avg_v: if self.steps > 0 {
                self.speed_sum / self.steps as f64
            } else {
                0.0
            },
            failed: self.cause != FailureCause::Ok,
            cause: self.cause,
            trace: self.trace,
        }
    }
}

/// Drives `path` with an arbitrary throttle law until failure or timeout.
pub fn drive<F>(path: &Path, params: &VehicleParams, dt: f64, max_steps: usize, vod: Vod, mut policy: F) -> EpisodeRecord
where
    F: FnMut(&Observation) -> f64,
{
    let mut ep = Episode::new(path, *params, dt, max_steps).with_vod(vod);
    while !ep.is_done() {
        let obs = ep.observe();
        let tau = policy(&obs);
        ep.advance(tau);
    }
    ep.finish()
}

/// Drives `path` with the (optionally scaled) nominal controller.
pub fn drive_vod(path: &Path, params: &VehicleParams, vod: Vod, max_steps: usize) -> EpisodeRecord {
    drive(path, params, dynamics::DEFAULT_DT, max_steps, vod, |obs| obs.tau_vod)
}

/// Writes `t,x,y,yaw,v,roll,d_err,throttle` CSV.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x", "y", "yaw", "v", "roll", "d_err", "throttle"])?;
    for r in trace {
        w.write_record(
            [r.t, r.x, r.y, r.yaw, r.v, r.roll, r.d_err, r.throttle].map(|v| format!("{v:.6}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

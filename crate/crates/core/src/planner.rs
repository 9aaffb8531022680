//! Velocity limit curve, time-optimal (bang-bang) velocity profiles and the
//! receding-horizon controller built on top of them (VOD).
//!
//! Profiles are integrated in the arc-length domain: over an interval of
//! length `ds` with constant acceleration `a`, `v'² = v² + 2·a·ds`.

use std::io::Write;

use crate::dynamics::VehicleParams;
use crate::error::Result;
use crate::paths::{Path, PathHorizon};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Drive,
    Brake,
}

/// Pointwise maximum stable speed along `path`.
pub fn velocity_limit_curve(path: &Path, params: &VehicleParams) -> Vec<f64> {
    path.curvature()
        .iter()
        .map(|&k| speed_limit(k, params))
        .collect()
}

/// Maximum speed on curvature `kappa` before sliding or rolling over.
pub fn speed_limit(kappa: f64, params: &VehicleParams) -> f64 {
    let k = kappa.abs();
    if k <= f64::EPSILON {
        return params.v_max;
    }
    let slide = (params.slide_accel() / k).sqrt();
    let rollover = (params.rollover_accel() / k).sqrt();
    params.v_max.min(slide).min(rollover)
}

/// Longitudinal acceleration available at speed `v` on curvature `kappa`:
/// the engine bound, reduced by the friction circle. Negative for braking.
pub fn available_accel(v: f64, kappa: f64, params: &VehicleParams, direction: Direction) -> f64 {
    let lat = v * v * kappa.abs();
    let grip = params.slide_accel();
    let fric = (grip * grip - lat * lat).max(0.0).sqrt();
    let a = params.engine_accel().min(fric);
    match direction {
        Direction::Drive => a,
        Direction::Brake => -a,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub stations: Vec<f64>,
    pub v_limit: Vec<f64>,
    pub v_plan: Vec<f64>,
    /// Acceleration over the interval starting at each station; the last
    /// entry repeats the previous interval.
    pub a_plan: Vec<f64>,
    pub v_init: f64,
    pub v_final: f64,
    /// The initial speed exceeds what the limit curve or the terminal
    /// condition allows at the first station.
    pub infeasible_start: bool,
}

impl VelocityProfile {
    /// Time to traverse the profile, assuming constant acceleration per
    /// interval.
    pub fn traversal_time(&self) -> f64 {
        traversal_time(&self.stations, &self.v_plan)
    }

    /// Writes `s,v_limit,v_plan,a_plan` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["s", "v_limit", "v_plan", "a_plan"])?;
        for i in 0..self.stations.len() {
            w.write_record([
                format!("{:.6}", self.stations[i]),
                format!("{:.6}", self.v_limit[i]),
                format!("{:.6}", self.v_plan[i]),
                format!("{:.6}", self.a_plan[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Time along a station/speed sequence with constant acceleration between
/// stations. Infinite if the vehicle stops strictly inside.
pub fn traversal_time(stations: &[f64], speeds: &[f64]) -> f64 {
    stations
        .windows(2)
        .zip(speeds.windows(2))
        .map(|(s, v)| {
            let sum = v[0] + v[1];
            if sum <= 0.0 {
                f64::INFINITY
            } else {
                2.0 * (s[1] - s[0]) / sum
            }
        })
        .sum()
}

/// Time-optimal velocity profile between boundary speeds.
///
/// A forward pass integrates maximum acceleration from the initial speed and
/// a backward pass integrates maximum deceleration from the terminal speed,
/// both capped by the limit curve. The profile is their pointwise minimum.
pub fn time_optimal_profile(path: &Path, v_init: f64, v_final: f64, params: &VehicleParams) -> VelocityProfile {
    let limit = velocity_limit_curve(path, params);
    profile_with_limit(path, &limit, v_init, v_final, params)
}

/// Same as [`time_optimal_profile`] with an explicit limit curve.
pub fn profile_with_limit(
    path: &Path,
    v_limit: &[f64],
    v_init: f64,
    v_final: f64,
    params: &VehicleParams,
) -> VelocityProfile {
    let stations = path.cum_arc().to_vec();
    let kappa = path.curvature();
    let n = stations.len();

    let mut forward = vec![0.0; n];
    forward[0] = v_init.max(0.0).min(v_limit[0]);
    for i in 0..n - 1 {
        let ds = stations[i + 1] - stations[i];
        let a = available_accel(forward[i], kappa[i], params, Direction::Drive);
        let v2 = forward[i] * forward[i] + 2.0 * a * ds;
        forward[i + 1] = v2.max(0.0).sqrt().min(v_limit[i + 1]);
    }

    let mut backward = vec![0.0; n];
    backward[n - 1] = v_final.max(0.0).min(v_limit[n - 1]);
    for i in (0..n - 1).rev() {
        let ds = stations[i + 1] - stations[i];
        let a = available_accel(backward[i + 1], kappa[i + 1], params, Direction::Brake);
        let v2 = backward[i + 1] * backward[i + 1] - 2.0 * a * ds;
        backward[i] = v2.max(0.0).sqrt().min(v_limit[i]);
    }

    let infeasible_start = v_init > v_limit[0].min(backward[0]) + 1e-9;
    let mut v_plan: Vec<f64> = forward.iter().zip(&backward).map(|(f, b)| f.min(*b)).collect();
    v_plan[0] = forward[0];

    let mut a_plan = vec![0.0; n];
    for i in 0..n - 1 {
        let ds = stations[i + 1] - stations[i];
        a_plan[i] = (v_plan[i + 1] * v_plan[i + 1] - v_plan[i] * v_plan[i]) / (2.0 * ds);
    }
    a_plan[n - 1] = a_plan[n - 2];

    VelocityProfile {
        stations,
        v_limit: v_limit.to_vec(),
        v_plan,
        a_plan,
        v_init,
        v_final,
        infeasible_start,
    }
}

/// Throttle realizing a profile's initial acceleration.
pub fn throttle_from_profile(profile: &VelocityProfile, params: &VehicleParams) -> f64 {
    if profile.infeasible_start {
        -1.0
    } else {
        let tau = (profile.a_plan[0] / params.engine_accel()).clamp(-1.0, 1.0);
        // snap rounding noise at saturation
        if (tau.abs() - 1.0).abs() < 1e-9 {
            tau.signum()
        } else {
            tau
        }
    }
}

/// Receding-horizon controller: replans a zero-terminal-speed profile over
/// the horizon at every call and commands its initial acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vod {
    pub params: VehicleParams,
    /// Multiplier on the limit curve and the terminal speed.
    pub scale: f64,
}

impl Vod {
    pub fn new(params: VehicleParams) -> Self {
        Self { params, scale: 1.0 }
    }

    pub fn scaled(params: VehicleParams, scale: f64) -> Self {
        Self { params, scale }
    }

    pub fn profile(&self, speed: f64, horizon: &PathHorizon) -> VelocityProfile {
        let path = horizon.to_path();
        let limit: Vec<f64> = velocity_limit_curve(&path, &self.params)
            .into_iter()
            .map(|v| v * self.scale)
            .collect();
        profile_with_limit(&path, &limit, speed, 0.0, &self.params)
    }

    pub fn command(&self, speed: f64, horizon: &PathHorizon) -> f64 {
        throttle_from_profile(&self.profile(speed, horizon), &self.params)
    }
}

/// Throttle of the nominal controller.
pub fn vod_command(speed: f64, horizon: &PathHorizon, params: &VehicleParams) -> f64 {
    Vod::new(*params).command(speed, horizon)
}

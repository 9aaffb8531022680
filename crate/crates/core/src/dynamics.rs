//! Simplified vehicle model: kinematic bicycle with pure-pursuit steering,
//! a constant-force longitudinal channel and a single torsional roll mode.

use serde::{Deserialize, Serialize};

use crate::paths::{Path, Point};

/// Internal integration step (s).
pub const SUBSTEP: f64 = 0.01;
/// Control period of the simulator (s).
pub const DEFAULT_DT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub width: f64,
    pub height: f64,
    pub length: f64,
    /// Center-of-mass height (m).
    pub h_com: f64,
    pub mass: f64,
    /// Total wheel force (N).
    pub f_total: f64,
    pub mu: f64,
    pub v_max: f64,
    /// Roll threshold (rad).
    pub alpha_max: f64,
    /// Path deviation threshold (m).
    pub d_max: f64,
    pub wheelbase: f64,
    pub r_min: f64,
    pub g: f64,
    /// Natural frequency of the roll mode (rad/s).
    pub roll_nat_freq: f64,
    pub roll_damping_ratio: f64,
    /// Lateral acceleration at which the simulated body reaches `alpha_max`
    /// in steady state, relative to the rigid-body rollover threshold.
    pub tip_accel_ratio: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            width: 2.1,
            height: 1.9,
            length: 5.1,
            h_com: 0.9,
            mass: 3200.0,
            f_total: 21_000.0,
            mu: 5.0,
            v_max: 30.0,
            alpha_max: 4f64.to_radians(),
            d_max: 2.0,
            wheelbase: 3.0,
            r_min: 15.0,
            g: 9.81,
            roll_nat_freq: 12.0,
            roll_damping_ratio: 0.7,
            tip_accel_ratio: 1.55,
        }
    }
}

impl VehicleParams {
    /// Longitudinal acceleration at full throttle (m/s²).
    pub fn engine_accel(&self) -> f64 {
        self.f_total / self.mass
    }

    /// Quasi-static rollover threshold on lateral acceleration (m/s²).
    pub fn rollover_accel(&self) -> f64 {
        self.g * (self.width / 2.0) / self.h_com
    }

    /// Sliding threshold on lateral acceleration (m/s²).
    pub fn slide_accel(&self) -> f64 {
        self.mu * self.g
    }

    pub fn max_steer(&self) -> f64 {
        (self.wheelbase / self.r_min).atan()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            self.width,
            self.height,
            self.length,
            self.h_com,
            self.mass,
            self.f_total,
            self.mu,
            self.v_max,
            self.alpha_max,
            self.d_max,
            self.wheelbase,
            self.r_min,
            self.g,
            self.roll_nat_freq,
            self.roll_damping_ratio,
            self.tip_accel_ratio,
        ];
        if fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(crate::Error::InvalidConfig(
                "vehicle parameters must be finite and strictly positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Point,
    pub yaw: f64,
    pub speed: f64,
    pub roll: f64,
    pub roll_rate: f64,
    pub steering: f64,
    /// Index of the nearest path point, used to search locally.
    #[serde(default)]
    pub path_index: usize,
}

impl VehicleState {
    /// At rest on the first point of `path`, aligned with its first segment.
    pub fn at_path_start(path: &Path) -> Self {
        Self {
            position: path.points()[0],
            yaw: path.start_heading(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureCause {
    Ok,
    Rollover,
    Slide,
    Deviation,
}

impl FailureCause {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCause::Ok => "ok",
            FailureCause::Rollover => "rollover",
            FailureCause::Slide => "slide",
            FailureCause::Deviation => "deviation",
        }
    }
}

impl std::fmt::Display for FailureCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilityStatus {
    pub stable: bool,
    pub cause: FailureCause,
}

impl StabilityStatus {
    pub const OK: StabilityStatus = StabilityStatus {
        stable: true,
        cause: FailureCause::Ok,
    };

    fn failed(cause: FailureCause) -> Self {
        Self {
            stable: false,
            cause,
        }
    }
}

/// Classifies a (roll, deviation, lateral acceleration) triple. Rollover
/// takes precedence over sliding, which takes precedence over deviation.
pub fn check_stability(alpha: f64, d_err: f64, a_lat: f64, params: &VehicleParams) -> StabilityStatus {
    if alpha.abs() > params.alpha_max {
        StabilityStatus::failed(FailureCause::Rollover)
    } else if a_lat.abs() > params.slide_accel() {
        StabilityStatus::failed(FailureCause::Slide)
    } else if d_err > params.d_max {
        StabilityStatus::failed(FailureCause::Deviation)
    } else {
        StabilityStatus::OK
    }
}

/// Lookahead distance along the path for a given speed.
pub fn lookahead_distance(speed: f64) -> f64 {
    (0.5 * speed).clamp(3.0, 12.0)
}

/// Pure-pursuit steering toward the path point one lookahead distance
/// beyond the nearest point. Positive steering turns left.
pub fn pure_pursuit_steering(state: &VehicleState, path: &Path, params: &VehicleParams) -> f64 {
    let (m, _) = path.nearest_point_local(state.position, state.path_index);
    steer_from_anchor(state, path, m, params)
}

fn steer_from_anchor(state: &VehicleState, path: &Path, anchor: usize, params: &VehicleParams) -> f64 {
    let ld = lookahead_distance(state.speed);
    let target = path
        .point_at_arc(path.cum_arc()[anchor] + ld)
        .to_frame(state.position, state.yaw);
    let bearing = target.y.atan2(target.x);
    let delta = (2.0 * params.wheelbase * bearing.sin() / ld).atan();
    let limit = params.max_steer();
    delta.clamp(-limit, limit)
}

/// Result of one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    pub status: StabilityStatus,
    /// Worst deviation over the sub-steps (m).
    pub d_err: f64,
    /// Lateral acceleration with the largest magnitude over the sub-steps.
    pub a_lat: f64,
}

/// Advances the vehicle by `dt` under throttle `throttle`, integrating with
/// 0.01 s sub-steps. Stability is judged on the worst sub-step values.
pub fn step(
    state: &VehicleState,
    throttle: f64,
    path: &Path,
    params: &VehicleParams,
    dt: f64,
) -> StepOutcome {
    let throttle = throttle.clamp(-1.0, 1.0);
    let substeps = ((dt / SUBSTEP).round() as usize).max(1);
    let h = dt / substeps as f64;
    let a_long = throttle * params.engine_accel();
    let a_tip = params.tip_accel_ratio * params.rollover_accel();
    let wn = params.roll_nat_freq;
    let zeta = params.roll_damping_ratio;

    let mut s = *state;
    let mut worst_alpha: f64 = s.roll.abs();
    let mut worst_d: f64 = 0.0;
    let mut worst_lat: f64 = 0.0;
    for _ in 0..substeps {
        let (anchor, _) = path.nearest_point_local(s.position, s.path_index);
        s.path_index = anchor;
        s.steering = steer_from_anchor(&s, path, anchor, params);
        s.speed = (s.speed + a_long * h).clamp(0.0, params.v_max);
        let yaw_rate = s.speed * s.steering.tan() / params.wheelbase;
        let a_lat = s.speed * yaw_rate;
        s.position = Point::new(
            s.position.x + s.speed * s.yaw.cos() * h,
            s.position.y + s.speed * s.yaw.sin() * h,
        );
        s.yaw += yaw_rate * h;

        let roll_target = params.alpha_max * a_lat / a_tip;
        let roll_acc = wn * wn * (roll_target - s.roll) - 2.0 * zeta * wn * s.roll_rate;
        s.roll_rate += roll_acc * h;
        s.roll += s.roll_rate * h;

        let (index, d_err) = path.nearest_point_local(s.position, s.path_index);
        s.path_index = index;
        worst_alpha = worst_alpha.max(s.roll.abs());
        worst_d = worst_d.max(d_err);
        if a_lat.abs() > worst_lat.abs() {
            worst_lat = a_lat;
        }
        // failure is terminal: stop at the first unstable sub-step
        if !check_stability(worst_alpha, worst_d, worst_lat, params).stable {
            break;
        }
    }
    StepOutcome {
        state: s,
        status: check_stability(worst_alpha, worst_d, worst_lat, params),
        d_err: worst_d,
        a_lat: worst_lat,
    }
}

//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use revo::dynamics::VehicleParams;
use revo::nn::{Dense, Mlp};
use revo::paths::{generate_random_path, Path, PathGenParams, Point};
use revo::planner::Vod;
use revo::rl::{build_state, drive, PolicyMode, EPISODE_STEPS};

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-7;

/// Relative agreement with an absolute floor for near-zero gradients.
pub fn grads_agree(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= FD_ABS_FLOOR || diff <= FD_REL_TOL * analytic.abs().max(numeric.abs())
}

/// Number of scalar parameters and mutable access by flat index.
pub fn param_mut(layers: &mut [Dense], mut k: usize) -> &mut f64 {
    for l in layers {
        let nw = l.weights.len();
        if k < nw {
            return l.weights.iter_mut().nth(k).unwrap();
        }
        k -= nw;
        if k < l.biases.len() {
            return &mut l.biases[k];
        }
        k -= l.biases.len();
    }
    panic!("parameter index out of range");
}

pub fn param_get(layers: &[Dense], mut k: usize) -> f64 {
    for l in layers {
        let nw = l.weights.len();
        if k < nw {
            return *l.weights.iter().nth(k).unwrap();
        }
        k -= nw;
        if k < l.biases.len() {
            return l.biases[k];
        }
        k -= l.biases.len();
    }
    panic!("parameter index out of range");
}

pub fn flat_len(layers: &[Dense]) -> usize {
    layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
}

/// Central difference of `f` with respect to parameter `k` of `net`.
pub fn central_difference(net: &Mlp, k: usize, f: impl Fn(&Mlp) -> f64) -> f64 {
    let mut plus = net.clone();
    *param_mut(&mut plus.layers, k) += FD_STEP;
    let mut minus = net.clone();
    *param_mut(&mut minus.layers, k) -= FD_STEP;
    (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
}

/// Speed limit from the closed-form sliding and rollover bounds.
pub fn oracle_limit(kappa: f64, p: &VehicleParams) -> f64 {
    let k = kappa.abs();
    if k < 1e-12 {
        return p.v_max;
    }
    let slide = (p.mu * p.g / k).sqrt();
    let roll = (p.g * (p.width / 2.0) / (p.h_com * k)).sqrt();
    p.v_max.min(slide).min(roll)
}

/// Minimum traversal time over a (station × speed) grid with speed step
/// `dv`, from rest to rest. A transition holds one constant acceleration from
/// a grid speed at station `i` to a grid speed at station `j ≤ i + span`;
/// every station it passes must respect the speed limit, and every interval
/// the engine and friction-circle bounds (driving at the entry speed, braking
/// at the exit speed).
pub fn dp_min_time(path: &Path, p: &VehicleParams, dv: f64, span: usize) -> f64 {
    let n = path.len();
    let s = path.cum_arc();
    let kappa = path.curvature();
    let a_eng = p.f_total / p.mass;
    let mu_g = p.mu * p.g;
    let accel_bound = |v: f64, k: f64| {
        let lat = v * v * k.abs();
        a_eng.min((mu_g * mu_g - lat * lat).max(0.0).sqrt())
    };
    let levels = (p.v_max / dv).floor() as usize + 1;
    let speeds: Vec<f64> = (0..levels).map(|j| j as f64 * dv).collect();
    let limits: Vec<f64> = kappa.iter().map(|&k| oracle_limit(k, p)).collect();

    let feasible = |i: usize, j: usize, v0: f64, v1: f64| {
        let a = (v1 * v1 - v0 * v0) / (2.0 * (s[j] - s[i]));
        let mut prev = v0;
        for m in i + 1..=j {
            let v = (v0 * v0 + 2.0 * a * (s[m] - s[i])).max(0.0).sqrt();
            if v > limits[m] + 1e-9 || (m < j && v == 0.0) {
                return false;
            }
            let ok = if a >= 0.0 {
                a <= accel_bound(prev, kappa[m - 1]) + 1e-9
            } else {
                -a <= accel_bound(v, kappa[m]) + 1e-9
            };
            if !ok {
                return false;
            }
            prev = v;
        }
        true
    };

    let mut cost = vec![vec![f64::INFINITY; levels]; n];
    cost[0][0] = 0.0;
    for i in 0..n - 1 {
        for (a, &v0) in speeds.iter().enumerate() {
            let c0 = cost[i][a];
            if !c0.is_finite() || v0 > limits[i] + 1e-9 {
                continue;
            }
            for j in i + 1..n.min(i + span + 1) {
                for (b, &v1) in speeds.iter().enumerate() {
                    if v0 + v1 == 0.0 || v1 > limits[j] + 1e-9 {
                        continue;
                    }
                    let t = c0 + 2.0 * (s[j] - s[i]) / (v0 + v1);
                    if t < cost[j][b] && feasible(i, j, v0, v1) {
                        cost[j][b] = t;
                    }
                }
            }
        }
    }
    cost[n - 1][0]
}

/// Exhaustive minimum distance from `q` to any segment of `path`.
pub fn brute_segment_distance(path: &Path, q: Point) -> f64 {
    path.points()
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let ab = b - a;
            let t = ((q - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            (q - (a + ab * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Exhaustive nearest point index, ties to the larger index.
pub fn brute_nearest_index(path: &Path, q: Point) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in path.points().iter().enumerate() {
        let d = (*p - q).norm();
        if d <= best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Feature vectors visited while the planner drives random paths.
pub fn visited_states(mode: PolicyMode, count: usize) -> Vec<(Vec<f64>, f64)> {
    let p = VehicleParams::default();
    let mut out = Vec::with_capacity(count);
    let mut seed = 0;
    while out.len() < count {
        let path = generate_random_path(&PathGenParams::default().with_seed(7000 + seed));
        seed += 1;
        drive(&path, &p, 0.2, EPISODE_STEPS, Vod::new(p), |obs| {
            if out.len() < count {
                out.push((build_state(obs.speed, &obs.horizon, mode, obs.tau_vod, p.v_max), obs.tau_vod));
            }
            obs.tau_vod
        });
    }
    out
}

use crate::dynamics::{StabilityStatus, VehicleParams};

/// Reward for reaching a state with the given stability and speed.
pub fn compute_reward(status: StabilityStatus, speed: f64, params: &VehicleParams) -> f64 {
    if !status.stable {
        -1.0
    } else if speed <= 0.0 {
        -0.2
    } else {
        0.2 * speed / params.v_max
    }
}

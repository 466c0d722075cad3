//! Proportional-derivative pose controller used to validate environments
//! without learning.

use nalgebra::{DMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{rotation_body_to_world, Pose, State, Vehicle};
use crate::tasks::pose_error;

/// Diagonal gains. Position errors are rotated into the body frame before
/// `kp_position` applies; attitude errors are the wrapped Euler differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdGains {
    /// N/m
    pub kp_position: [f64; 3],
    /// N·s/m
    pub kd_linear: [f64; 3],
    /// N·m/rad
    pub kp_attitude: [f64; 3],
    /// N·m·s/rad
    pub kd_angular: [f64; 3],
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp_position: [120.0, 120.0, 150.0],
            kd_linear: [80.0, 80.0, 110.0],
            kp_attitude: [6.0, 6.0, 6.0],
            kd_angular: [2.0, 2.0, 3.0],
        }
    }
}

impl PdGains {
    pub fn is_finite(&self) -> bool {
        [self.kp_position, self.kd_linear, self.kp_attitude, self.kd_angular]
            .iter()
            .flatten()
            .all(|g| g.is_finite())
    }
}

/// Desired body wrench `Kp·e − Kd·ν`.
pub fn pd_wrench(state: &State, reference: &Pose, gains: &PdGains) -> Vector6<f64> {
    let e = pose_error(&state.pose, reference);
    let p = &state.pose;
    let r = rotation_body_to_world(p.phi, p.theta, p.psi);
    let e_body = r.transpose() * Vector3::new(e[0], e[1], e[2]);
    let v = state.vel.to_array();
    Vector6::from_fn(|i, _| {
        if i < 3 {
            gains.kp_position[i] * e_body[i] - gains.kd_linear[i] * v[i]
        } else {
            gains.kp_attitude[i - 3] * e[i] - gains.kd_angular[i - 3] * v[i]
        }
    })
}

/// Throttles realizing `pd_wrench` as closely as the allocation allows,
/// clamped to [−1, 1].
pub fn pd_action(vehicle: &Vehicle, pinv: &DMatrix<f64>, state: &State, reference: &Pose, gains: &PdGains, out: &mut [f64]) {
    let wrench = pd_wrench(state, reference, gains);
    let forces = pinv * wrench;
    for ((o, f), t) in out.iter_mut().zip(forces.iter()).zip(vehicle.thrusters().thrusters()) {
        *o = t.curve.inverse(f / t.max_thrust).clamp(-1.0, 1.0);
    }
}

/// One-shot form of [`pd_action`].
pub fn pd_baseline(vehicle: &Vehicle, state: &State, reference: &Pose, gains: &PdGains) -> Vec<f64> {
    let pinv = vehicle.thrusters().allocation_pseudo_inverse();
    let mut out = vec![0.0; vehicle.n_thrusters()];
    pd_action(vehicle, &pinv, state, reference, gains, &mut out);
    out
}

/// PD controller that tracks `reference(step + 1)`, the pose scored after
/// the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct PdController {
    pub gains: PdGains,
}

impl PdController {
    pub fn new(gains: PdGains) -> Self {
        Self { gains }
    }
}

impl Default for PdController {
    fn default() -> Self {
        Self::new(PdGains::default())
    }
}

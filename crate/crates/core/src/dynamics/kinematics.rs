use nalgebra::{Matrix3, Vector3, Vector6};

use super::{BodyVelocity, DynamicsError, Pose, PITCH_LIMIT};

/// η̇: NED position rate (m/s) followed by Euler angle rates (rad/s).
pub type PoseRate = Vector6<f64>;

/// ZYX Euler rotation taking body-frame vectors to the NED frame.
pub fn rotation_body_to_world(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let (sphi, cphi) = phi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let (spsi, cpsi) = psi.sin_cos();
    Matrix3::new(
        cpsi * cth,
        -spsi * cphi + cpsi * sth * sphi,
        spsi * sphi + cpsi * cphi * sth,
        spsi * cth,
        cpsi * cphi + sphi * sth * spsi,
        -cpsi * sphi + sth * spsi * cphi,
        -sth,
        cth * sphi,
        cth * cphi,
    )
}

/// Computes η̇ = J(η) ν.
pub fn kinematic_transform(pose: &Pose, vel: &BodyVelocity) -> Result<PoseRate, DynamicsError> {
    if !(pose.theta.abs() < PITCH_LIMIT) {
        return Err(DynamicsError::Singularity { theta: pose.theta });
    }
    let (sphi, cphi) = pose.phi.sin_cos();
    let (sth, cth) = pose.theta.sin_cos();
    let tth = sth / cth;

    let rot = rotation_body_to_world(pose.phi, pose.theta, pose.psi);
    let lin = rot * Vector3::new(vel.u, vel.v, vel.w);

    let (p, q, r) = (vel.p, vel.q, vel.r);
    let phi_dot = p + sphi * tth * q + cphi * tth * r;
    let theta_dot = cphi * q - sphi * r;
    let psi_dot = (sphi * q + cphi * r) / cth;

    Ok(Vector6::new(lin.x, lin.y, lin.z, phi_dot, theta_dot, psi_dot))
}

use nalgebra::{Vector3, Vector6};

use super::kinematics::rotation_body_to_world;
use super::{BodyVelocity, Pose, Vehicle, Wrench};

/// `C(M, ν)·ν` for the combined mass matrix `M = M_RB + M_A`.
///
/// With `(a; b) = M ν` split into linear and angular halves the skew-block
/// construction gives `C(ν)ν = [ν₂ × a ; ν₁ × a + ν₂ × b]`, which does no
/// work: `νᵀ C(ν) ν = 0`.
pub fn coriolis_wrench(vehicle: &Vehicle, vel: &BodyVelocity) -> Wrench {
    let nu = vel.to_vector();
    let momentum = vehicle.mass * nu;
    let a = Vector3::new(momentum[0], momentum[1], momentum[2]);
    let b = Vector3::new(momentum[3], momentum[4], momentum[5]);
    let lin = vel.linear();
    let ang = vel.angular();
    let force = ang.cross(&a);
    let moment = lin.cross(&a) + ang.cross(&b);
    Wrench::from_parts(force, moment)
}

/// Hydrodynamic damping force `−(D_lin ν + D_quad |ν| ∘ ν)`.
pub fn damping_wrench(vehicle: &Vehicle, vel: &BodyVelocity) -> Wrench {
    let nu = vel.to_vector();
    let quad = Vector6::from_fn(|i, _| vehicle.damping_quadratic[i] * nu[i].abs() * nu[i]);
    Wrench::from_vector(&-(vehicle.damping_linear * nu + quad))
}

/// Gravity and buoyancy acting on the body, expressed in the body frame.
///
/// Weight pulls along +z (down) in NED at the center of gravity, buoyancy
/// pushes along −z at the center of buoyancy.
pub fn restoring_wrench(vehicle: &Vehicle, pose: &Pose) -> Wrench {
    let rot = rotation_body_to_world(pose.phi, pose.theta, pose.psi);
    // Rᵀ e_z: world "down" seen from the body.
    let down = Vector3::new(rot[(2, 0)], rot[(2, 1)], rot[(2, 2)]);
    let params = vehicle.params();
    let f_g = down * params.weight;
    let f_b = -(down * params.buoyancy);
    let force = f_g + f_b;
    let moment = vehicle.r_g.cross(&f_g) + vehicle.r_b.cross(&f_b);
    Wrench::from_parts(force, moment)
}

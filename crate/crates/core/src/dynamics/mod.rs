//! Six degree-of-freedom rigid-body and hydrodynamic model of an underwater
//! vehicle.
//!
//! The vehicle state is the pair (η, ν): a pose in the North-East-Down world
//! frame and a velocity in the body-fixed frame. The equation of motion is
//!
//! ```text
//! (M_RB + M_A) ν̇ + C(ν) ν + D(ν) ν + g(η) = τ
//! ```
//!
//! where `C` is built from the combined mass matrix, `D` holds linear and
//! quadratic damping and `g` is the gravity/buoyancy restoring term. The
//! integrator is semi-implicit Euler: velocity is advanced first, then the
//! pose using the updated velocity.
//!
//! Sign conventions used throughout:
//!
//! * [`coriolis_wrench`] returns `C(ν)ν`, the term on the left-hand side.
//! * [`damping_wrench`] returns `−D(ν)ν`, the force the water applies.
//! * [`restoring_wrench`] returns the gravity and buoyancy forces acting on
//!   the body (that is `−g(η)`), so a heavy vehicle sinks along +z.
//!
//! Hence `M ν̇ = τ − C(ν)ν + damping_wrench + restoring_wrench`.

mod forces;
mod integrate;
mod kinematics;
mod params;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, AddAssign, Neg, Sub};

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

pub use forces::{coriolis_wrench, damping_wrench, restoring_wrench};
pub use integrate::{acceleration, kinetic_energy, sim_step, substep, Advance};
pub use kinematics::{kinematic_transform, rotation_body_to_world, PoseRate};
pub use params::{ParamsError, Vehicle, VehicleParams, GRAVITY};

/// Largest admissible |pitch|. Euler-angle kinematics are singular at ±π/2.
pub const PITCH_LIMIT: f64 = FRAC_PI_2 - 1e-3;

/// Errors raised while propagating the equation of motion.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("pitch {theta} rad is outside the Euler-angle guard of ±{PITCH_LIMIT} rad")]
    Singularity { theta: f64 },
    #[error("integration diverged: component `{component}` is not finite")]
    Diverged { component: &'static str },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimestep(f64),
    #[error("at least one sub-step is required")]
    NoSubsteps,
}

/// Wraps an angle to the half-open interval (−π, π].
///
/// Values already inside the interval are returned unchanged (bit-exact).
#[inline]
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Vehicle pose η in the NED world frame. Angles are ZYX Euler angles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, z: f64, phi: f64, theta: f64, psi: f64) -> Self {
        Self { x, y, z, phi, theta, psi }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.phi, self.theta, self.psi]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    /// Euclidean distance between the positions of two poses.
    pub fn distance(&self, other: &Pose) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Body-fixed velocity ν: surge, sway, heave and roll, pitch, yaw rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyVelocity {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl BodyVelocity {
    pub const fn new(u: f64, v: f64, w: f64, p: f64, q: f64, r: f64) -> Self {
        Self { u, v, w, p, q, r }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.u, self.v, self.w, self.p, self.q, self.r)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn linear(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    pub fn angular(&self) -> Vector3<f64> {
        Vector3::new(self.p, self.q, self.r)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.u, self.v, self.w, self.p, self.q, self.r]
    }
}

/// Full 12-dimensional vehicle state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub pose: Pose,
    pub vel: BodyVelocity,
}

impl State {
    pub const fn new(pose: Pose, vel: BodyVelocity) -> Self {
        Self { pose, vel }
    }

    /// Vehicle at `pose` with zero velocity.
    pub const fn at_rest(pose: Pose) -> Self {
        Self { pose, vel: BodyVelocity::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0) }
    }

    /// `[x, y, z, φ, θ, ψ, u, v, w, p, q, r]`.
    pub fn to_array(&self) -> [f64; 12] {
        let p = self.pose.to_array();
        let v = self.vel.to_array();
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&p);
        out[6..].copy_from_slice(&v);
        out
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        Self {
            pose: Pose::new(a[0], a[1], a[2], a[3], a[4], a[5]),
            vel: BodyVelocity::new(a[6], a[7], a[8], a[9], a[10], a[11]),
        }
    }
}

/// Generalized force τ in the body frame (N and N·m).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench { fx: 0.0, fy: 0.0, fz: 0.0, mx: 0.0, my: 0.0, mz: 0.0 };

    pub const fn new(fx: f64, fy: f64, fz: f64, mx: f64, my: f64, mz: f64) -> Self {
        Self { fx, fy, fz, mx, my, mz }
    }

    pub fn from_parts(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self::new(force.x, force.y, force.z, moment.x, moment.y, moment.z)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.fx, self.fy, self.fz, self.mx, self.my, self.mz)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn force(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.fz)
    }

    pub fn moment(&self) -> Vector3<f64> {
        Vector3::new(self.mx, self.my, self.mz)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::from_vector(&(self.to_vector() + rhs.to_vector()))
    }
}

impl AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        *self = *self + rhs;
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::from_vector(&(self.to_vector() - rhs.to_vector()))
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench::from_vector(&-self.to_vector())
    }
}

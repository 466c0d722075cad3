use nalgebra::Vector6;

use super::forces::{coriolis_wrench, damping_wrench, restoring_wrench};
use super::kinematics::kinematic_transform;
use super::{wrap_angle, BodyVelocity, DynamicsError, Pose, State, Vehicle, Wrench, PITCH_LIMIT};

/// Result of advancing the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub state: State,
    /// Set when pitch had to be clamped to the Euler-angle guard.
    pub pitch_clamped: bool,
}

/// Solves `(M_RB + M_A) ν̇ = τ − C(ν)ν − D(ν)ν − g(η)` for ν̇.
pub fn acceleration(vehicle: &Vehicle, state: &State, control: &Wrench) -> Vector6<f64> {
    let rhs = control.to_vector() - coriolis_wrench(vehicle, &state.vel).to_vector()
        + damping_wrench(vehicle, &state.vel).to_vector()
        + restoring_wrench(vehicle, &state.pose).to_vector();
    vehicle.mass_factor.solve(&rhs)
}

/// `½ νᵀ (M_RB + M_A) ν`.
pub fn kinetic_energy(vehicle: &Vehicle, vel: &BodyVelocity) -> f64 {
    let nu = vel.to_vector();
    0.5 * nu.dot(&(vehicle.mass * nu))
}

const POSE_NAMES: [&str; 6] = ["x", "y", "z", "phi", "theta", "psi"];
const VEL_NAMES: [&str; 6] = ["u", "v", "w", "p", "q", "r"];

/// One semi-implicit Euler step: `ν' = ν + dt·ν̇`, then `η' = η + dt·J(η)ν'`.
pub fn substep(vehicle: &Vehicle, state: &State, control: &Wrench, dt: f64) -> Result<Advance, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidTimestep(dt));
    }
    let nu_dot = acceleration(vehicle, state, control);
    let nu = state.vel.to_vector() + nu_dot * dt;
    if let Some(i) = nu.iter().position(|c| !c.is_finite()) {
        return Err(DynamicsError::Diverged { component: VEL_NAMES[i] });
    }
    let vel = BodyVelocity::from_vector(&nu);
    let eta_dot = kinematic_transform(&state.pose, &vel)?;

    let p = &state.pose;
    let mut eta = [
        p.x + dt * eta_dot[0],
        p.y + dt * eta_dot[1],
        p.z + dt * eta_dot[2],
        p.phi + dt * eta_dot[3],
        p.theta + dt * eta_dot[4],
        p.psi + dt * eta_dot[5],
    ];
    if let Some(i) = eta.iter().position(|c| !c.is_finite()) {
        return Err(DynamicsError::Diverged { component: POSE_NAMES[i] });
    }
    for angle in &mut eta[3..] {
        *angle = wrap_angle(*angle);
    }
    let mut pitch_clamped = false;
    if eta[4].abs() >= PITCH_LIMIT {
        // stay strictly inside the guard so the next J(η) is defined
        eta[4] = eta[4].signum() * (PITCH_LIMIT - 1e-9);
        pitch_clamped = true;
    }
    Ok(Advance { state: State::new(Pose::from_array(eta), vel), pitch_clamped })
}

/// Holds `control` for `control_dt` seconds split into `n_substeps` sub-steps.
pub fn sim_step(
    vehicle: &Vehicle,
    state: &State,
    control: &Wrench,
    control_dt: f64,
    n_substeps: usize,
) -> Result<Advance, DynamicsError> {
    if n_substeps == 0 {
        return Err(DynamicsError::NoSubsteps);
    }
    let dt = control_dt / n_substeps as f64;
    let mut out = Advance { state: *state, pitch_clamped: false };
    for _ in 0..n_substeps {
        let next = substep(vehicle, &out.state, control, dt)?;
        out = Advance { state: next.state, pitch_clamped: out.pitch_clamped || next.pitch_clamped };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleParams;

    fn neutral() -> Vehicle {
        let mut p = VehicleParams::bluerov2_heavy();
        p.buoyancy = p.weight;
        p.r_b = p.r_g;
        p.validate().unwrap()
    }

    #[test]
    fn equilibrium_has_zero_acceleration() {
        let v = neutral();
        let s = State::at_rest(Pose::new(1.0, -2.0, 3.0, 0.2, 0.1, -1.0));
        assert_eq!(acceleration(&v, &s, &Wrench::ZERO), Vector6::zeros());
    }

    #[test]
    fn decoupled_surge_acceleration() {
        let mut p = VehicleParams::bluerov2_heavy();
        p.buoyancy = p.weight;
        p.r_g = [0.0; 3];
        p.r_b = [0.0; 3];
        let v = p.validate().unwrap();
        let a = v.mass_matrix()[(0, 0)];
        let acc = acceleration(&v, &State::default(), &Wrench::new(10.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert!((acc[0] - 10.0 / a).abs() < 1e-14);
        assert!(acc.rows(1, 5).amax() < 1e-15);
    }

    #[test]
    fn substep_rejects_bad_dt() {
        let v = neutral();
        for dt in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                substep(&v, &State::default(), &Wrench::ZERO, dt),
                Err(DynamicsError::InvalidTimestep(_))
            ));
        }
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let v = neutral();
        let s = State::at_rest(Pose::new(0.5, 0.25, 2.0, 0.05, -0.02, 1.3));
        let out = substep(&v, &s, &Wrench::ZERO, 0.005).unwrap();
        assert_eq!(out.state, s);
        for n in [1, 3, 10] {
            assert_eq!(sim_step(&v, &s, &Wrench::ZERO, 0.05, n).unwrap().state, s);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let v = neutral();
        let s = State::default();
        let err = substep(&v, &s, &Wrench::new(f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0), 0.005).unwrap_err();
        assert_eq!(err, DynamicsError::Diverged { component: "u" });
    }

    #[test]
    fn singular_pose_is_rejected() {
        let v = neutral();
        let s = State::at_rest(Pose::new(0.0, 0.0, 0.0, 0.0, 1.6, 0.0));
        assert!(matches!(substep(&v, &s, &Wrench::ZERO, 0.01), Err(DynamicsError::Singularity { .. })));
    }

    #[test]
    fn pitch_is_clamped_and_flagged() {
        let v = neutral();
        let s = State::new(
            Pose::new(0.0, 0.0, 0.0, 0.0, PITCH_LIMIT - 1e-4, 0.0),
            BodyVelocity::new(0.0, 0.0, 0.0, 0.0, 5.0, 0.0),
        );
        let out = substep(&v, &s, &Wrench::ZERO, 0.01).unwrap();
        assert!(out.pitch_clamped);
        assert!(out.state.pose.theta < PITCH_LIMIT);
    }

    #[test]
    fn angles_are_rewrapped() {
        let v = neutral();
        let s = State::new(
            Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 3.1),
            BodyVelocity::new(0.0, 0.0, 0.0, 0.0, 0.0, 2.0),
        );
        let out = sim_step(&v, &s, &Wrench::ZERO, 0.05, 10).unwrap();
        assert!(out.state.pose.psi < 0.0 && out.state.pose.psi > -std::f64::consts::PI);
    }

    #[test]
    fn sim_step_equals_substep_loop() {
        let v = VehicleParams::bluerov2_heavy().validate().unwrap();
        let s = State::new(
            Pose::new(0.1, 0.2, 1.0, 0.05, 0.02, 0.3),
            BodyVelocity::new(0.3, -0.1, 0.05, 0.1, 0.0, -0.2),
        );
        let tau = Wrench::new(5.0, -3.0, 2.0, 0.1, -0.2, 0.3);
        let one = substep(&v, &s, &tau, 0.05).unwrap().state;
        assert_eq!(sim_step(&v, &s, &tau, 0.05, 1).unwrap().state, one);

        let mut looped = s;
        for _ in 0..10 {
            looped = substep(&v, &looped, &tau, 0.05 / 10.0).unwrap().state;
        }
        assert_eq!(sim_step(&v, &s, &tau, 0.05, 10).unwrap().state, looped);
    }

    fn dist(a: &State, b: &State) -> f64 {
        a.to_array().iter().zip(b.to_array()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn first_order_continuity_and_convergence() {
        let v = VehicleParams::bluerov2_heavy().validate().unwrap();
        let s = State::new(
            Pose::new(0.0, 0.0, 1.0, 0.1, -0.05, 0.4),
            BodyVelocity::new(0.4, 0.1, -0.1, 0.2, -0.1, 0.3),
        );
        let tau = Wrench::new(10.0, 4.0, -6.0, 0.2, 0.1, -0.3);

        // ‖state' − state‖ = O(dt)
        let d1 = dist(&substep(&v, &s, &tau, 1e-3).unwrap().state, &s);
        let d2 = dist(&substep(&v, &s, &tau, 1e-4).unwrap().state, &s);
        assert!((d1 / d2 - 10.0).abs() < 0.5, "ratio {}", d1 / d2);

        // one step of dt against two of dt/2: the gap shrinks like dt²
        let gap = |dt: f64| {
            let one = substep(&v, &s, &tau, dt).unwrap().state;
            let half = substep(&v, &s, &tau, dt / 2.0).unwrap().state;
            let two = substep(&v, &half, &tau, dt / 2.0).unwrap().state;
            dist(&one, &two)
        };
        let ratio = gap(1e-2) / gap(5e-3);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }
}

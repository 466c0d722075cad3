//! Benchmark tasks: station-keeping and circle, helix, lemniscate tracking.
//!
//! Each task defines an observation (pose errors followed by body velocity),
//! a reward (negative Euclidean position error to the current reference),
//! a reset distribution and termination rules. The functions here are pure;
//! [`Env`] bundles them into a Gym-style single environment.

mod env;
mod trajectory;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use nalgebra::Vector3;

use crate::dynamics::{rotation_body_to_world, sim_step, wrap_angle, DynamicsError, Pose, State, Vehicle};

pub use env::Env;
pub use trajectory::trajectory_point;

/// Half-width of the reset box around the spawn point, m.
pub const RESET_POSITION_SPREAD: f64 = 1.0;
/// Half-width of the reset roll/pitch distribution, rad.
pub const RESET_TILT_SPREAD: f64 = 0.1;
/// Half-width of the reset yaw distribution around the reference heading, rad.
pub const RESET_YAW_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    StationKeeping,
    Circle,
    Helix,
    Lemniscate,
}

impl TaskKind {
    pub fn is_tracking(self) -> bool {
        !matches!(self, TaskKind::StationKeeping)
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::StationKeeping => "station_keeping",
            TaskKind::Circle => "circle",
            TaskKind::Helix => "helix",
            TaskKind::Lemniscate => "lemniscate",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryParams {
    /// Circle and helix radius, m.
    pub radius: f64,
    /// ω, rad/s.
    pub angular_rate: f64,
    /// Helix depth rate, m/s (positive descends).
    pub climb_rate: f64,
    /// Lemniscate half-width, m.
    pub scale: f64,
    /// Depth of the trajectory plane at t = 0, m.
    pub depth: f64,
    /// Center of the trajectory in the x-y plane, m.
    pub center: [f64; 2],
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self { radius: 1.5, angular_rate: 0.2, climb_rate: 0.05, scale: 2.0, depth: 2.0, center: [0.0, 0.0] }
    }
}

/// Frame of the positional error terms in the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFrame {
    /// `reference − current` in the world frame.
    #[default]
    Ned,
    /// The world-frame error rotated into the body frame. The observation
    /// holds no absolute heading, so a tracking policy needs this to know
    /// which way its thrusters push relative to the path.
    Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub error_frame: ErrorFrame,
    /// Station-keeping target.
    pub target: Pose,
    pub trajectory: TrajectoryParams,
    /// Number of future reference points in a tracking observation.
    pub lookahead: usize,
    /// Episode length in control steps.
    pub episode_len: usize,
    /// Control period, s.
    pub control_dt: f64,
    /// Physics sub-steps per control step.
    pub n_substeps: usize,
    /// Position error beyond which an episode is terminated, m.
    pub divergence_cutoff: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            kind: TaskKind::StationKeeping,
            error_frame: ErrorFrame::Ned,
            target: Pose::new(0.0, 0.0, 2.0, 0.0, 0.0, 0.0),
            trajectory: TrajectoryParams::default(),
            lookahead: 5,
            episode_len: 600,
            control_dt: 0.05,
            n_substeps: 10,
            divergence_cutoff: 10.0,
        }
    }
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |msg: &str| Err(TaskError::InvalidSpec(msg.to_string()));
        if self.lookahead == 0 {
            return bad("lookahead must be at least 1");
        }
        if self.episode_len == 0 {
            return bad("episode_len must be at least 1");
        }
        if !(self.control_dt > 0.0 && self.control_dt.is_finite()) {
            return bad("control_dt must be positive");
        }
        if self.n_substeps == 0 {
            return bad("n_substeps must be at least 1");
        }
        if !(self.divergence_cutoff > 0.0) {
            return bad("divergence_cutoff must be positive");
        }
        let tr = &self.trajectory;
        if self.kind.is_tracking() {
            if matches!(self.kind, TaskKind::Circle | TaskKind::Helix) && !(tr.radius > 0.0) {
                return bad("trajectory radius must be positive");
            }
            if self.kind == TaskKind::Lemniscate && !(tr.scale > 0.0) {
                return bad("lemniscate scale must be positive");
            }
            let finite = [tr.angular_rate, tr.climb_rate, tr.depth, tr.center[0], tr.center[1]];
            if finite.iter().any(|v| !v.is_finite()) {
                return bad("trajectory parameters must be finite");
            }
        } else if self.target.to_array().iter().any(|v| !v.is_finite()) {
            return bad("target must be finite");
        }
        Ok(())
    }

    /// Observation length: 12 for station-keeping, `6m + 6` for tracking.
    pub fn obs_dim(&self) -> usize {
        if self.kind.is_tracking() {
            6 * self.lookahead + 6
        } else {
            12
        }
    }

    /// Reference pose for the state reached after `step` control steps.
    pub fn reference(&self, step: usize) -> Pose {
        match self.kind {
            TaskKind::StationKeeping => self.target,
            _ => trajectory_point(self, step as f64 * self.control_dt).expect("tracking kind"),
        }
    }

    /// Center of the reset distribution.
    pub fn spawn_pose(&self) -> Pose {
        self.reference(0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("station-keeping has no trajectory")]
    NotTracking,
    #[error("action has {got} components, expected {expected}")]
    ActionLength { expected: usize, got: usize },
    #[error("step {step} is outside an episode of {len} steps")]
    StepOutOfRange { step: usize, len: usize },
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
}

/// Why an episode ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The episode reached `episode_len` steps.
    Truncated,
    /// Position error exceeded the divergence cutoff.
    Diverged,
    /// The integrator failed; the state was left unchanged.
    IntegrationFailure(String),
}

impl Termination {
    /// True for the time-limit case, false for genuine terminations.
    pub fn is_truncation(&self) -> bool {
        matches!(self, Termination::Truncated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Index of the step just taken.
    pub step: usize,
    /// Euclidean distance to the reference after the step, m.
    pub position_error: f64,
    pub termination: Option<Termination>,
    pub pitch_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// `reference − current`, with angle differences wrapped to (−π, π].
pub fn pose_error(current: &Pose, reference: &Pose) -> [f64; 6] {
    [
        reference.x - current.x,
        reference.y - current.y,
        reference.z - current.z,
        wrap_angle(reference.phi - current.phi),
        wrap_angle(reference.theta - current.theta),
        wrap_angle(reference.psi - current.psi),
    ]
}

/// Writes the observation for `state` at `step` into `out` (length
/// [`TaskSpec::obs_dim`]).
pub fn observe_into(spec: &TaskSpec, state: &State, step: usize, out: &mut [f64]) {
    assert_eq!(out.len(), spec.obs_dim(), "observation buffer has the wrong length");
    let n_refs = if spec.kind.is_tracking() { spec.lookahead } else { 1 };
    let to_body = match spec.error_frame {
        ErrorFrame::Ned => None,
        ErrorFrame::Body => {
            let p = &state.pose;
            Some(rotation_body_to_world(p.phi, p.theta, p.psi).transpose())
        }
    };
    for k in 0..n_refs {
        let reference = if spec.kind.is_tracking() { spec.reference(step + 1 + k) } else { spec.target };
        let mut e = pose_error(&state.pose, &reference);
        if let Some(rt) = &to_body {
            let b = rt * Vector3::new(e[0], e[1], e[2]);
            e[..3].copy_from_slice(b.as_slice());
        }
        out[6 * k..6 * k + 6].copy_from_slice(&e);
    }
    out[6 * n_refs..].copy_from_slice(&state.vel.to_array());
}

/// Observation vector for `state` at `step`.
pub fn observe(spec: &TaskSpec, state: &State, step: usize) -> Vec<f64> {
    let mut out = vec![0.0; spec.obs_dim()];
    observe_into(spec, state, step, &mut out);
    out
}

/// Distance from the vehicle to the reference for `step`.
pub fn position_error(spec: &TaskSpec, state: &State, step: usize) -> f64 {
    state.pose.distance(&spec.reference(step))
}

/// Negative Euclidean position error to the reference for `step`.
pub fn reward(spec: &TaskSpec, state: &State, step: usize) -> f64 {
    -position_error(spec, state, step)
}

/// Samples an initial state around the task's spawn pose.
pub fn reset<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> State {
    let spawn = spec.spawn_pose();
    let mut jitter = |half: f64| rng.random_range(-half..=half);
    let x = spawn.x + jitter(RESET_POSITION_SPREAD);
    let y = spawn.y + jitter(RESET_POSITION_SPREAD);
    let z = spawn.z + jitter(RESET_POSITION_SPREAD);
    let phi = jitter(RESET_TILT_SPREAD);
    let theta = jitter(RESET_TILT_SPREAD);
    let psi = wrap_angle(spawn.psi + jitter(RESET_YAW_SPREAD));
    State::at_rest(Pose::new(x, y, z, phi, theta, psi))
}

/// Outcome of one control step, without the observation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StepOutcome {
    pub state: State,
    pub reward: f64,
    pub position_error: f64,
    pub termination: Option<Termination>,
    pub pitch_clamped: bool,
}

/// Applies `action` for one control step. Shared by [`env_step`] and the
/// batch engine so both follow exactly the same arithmetic.
pub(crate) fn advance(
    spec: &TaskSpec,
    vehicle: &Vehicle,
    state: &State,
    action: &[f64],
    step: usize,
) -> Result<StepOutcome, TaskError> {
    if step >= spec.episode_len {
        return Err(TaskError::StepOutOfRange { step, len: spec.episode_len });
    }
    if action.len() != vehicle.n_thrusters() {
        return Err(TaskError::ActionLength { expected: vehicle.n_thrusters(), got: action.len() });
    }
    let wrench = vehicle.thrusters().actuate(action);
    let (next, pitch_clamped, failure) = match sim_step(vehicle, state, &wrench, spec.control_dt, spec.n_substeps) {
        Ok(adv) => (adv.state, adv.pitch_clamped, None),
        Err(e @ (DynamicsError::Diverged { .. } | DynamicsError::Singularity { .. })) => {
            (*state, false, Some(Termination::IntegrationFailure(e.to_string())))
        }
        Err(e) => return Err(TaskError::InvalidSpec(e.to_string())),
    };
    let next_step = step + 1;
    let err = position_error(spec, &next, next_step);
    let termination = if failure.is_some() {
        failure
    } else if !(err <= spec.divergence_cutoff) {
        Some(Termination::Diverged)
    } else if next_step == spec.episode_len {
        Some(Termination::Truncated)
    } else {
        None
    };
    Ok(StepOutcome { state: next, reward: -err, position_error: err, termination, pitch_clamped })
}

/// Gym-style step: actuate, integrate, then observe and score the new state.
pub fn env_step(
    spec: &TaskSpec,
    vehicle: &Vehicle,
    state: &State,
    action: &[f64],
    step: usize,
) -> Result<(State, Transition), TaskError> {
    let out = advance(spec, vehicle, state, action, step)?;
    let obs = observe(spec, &out.state, step + 1);
    let done = out.termination.is_some();
    let transition = Transition {
        obs,
        reward: out.reward,
        done,
        info: StepInfo {
            step,
            position_error: out.position_error,
            termination: out.termination,
            pitch_clamped: out.pitch_clamped,
        },
    };
    Ok((out.state, transition))
}

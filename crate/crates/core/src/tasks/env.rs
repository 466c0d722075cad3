use crate::dynamics::{State, Vehicle};
use crate::rng::EnvRng;

use super::{env_step, observe, reset, TaskError, TaskSpec, Transition};

/// A single Gym-style environment.
///
/// `step` does not reset on its own; after a transition with `done` the
/// caller invokes [`Env::reset`].
#[derive(Debug, Clone)]
pub struct Env {
    spec: TaskSpec,
    vehicle: Vehicle,
    state: State,
    step: usize,
    rng: EnvRng,
}

impl Env {
    /// Creates the environment and draws its initial state from `rng`.
    pub fn new(spec: TaskSpec, vehicle: Vehicle, mut rng: EnvRng) -> Result<Self, TaskError> {
        spec.validate()?;
        let state = reset(&spec, &mut rng);
        Ok(Self { spec, vehicle, state, step: 0, rng })
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.state = reset(&self.spec, &mut self.rng);
        self.step = 0;
        self.observation()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition, TaskError> {
        let (next, transition) = env_step(&self.spec, &self.vehicle, &self.state, action, self.step)?;
        self.state = next;
        self.step += 1;
        Ok(transition)
    }

    pub fn observation(&self) -> Vec<f64> {
        observe(&self.spec, &self.state, self.step)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Overwrites the state and step counter.
    pub fn set_state(&mut self, state: State, step: usize) {
        self.state = state;
        self.step = step;
    }

    /// Number of steps taken in the current episode.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn vehicle(&self) -> &Vehicle {
        &self.vehicle
    }

    pub(crate) fn rng_mut(&mut self) -> &mut EnvRng {
        &mut self.rng
    }

    pub(crate) fn set_vehicle(&mut self, vehicle: Vehicle) {
        self.vehicle = vehicle;
    }
}

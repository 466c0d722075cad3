//! Deterministic closed-loop evaluation.

use serde::{Deserialize, Serialize};

use crate::batch::{BatchError, EnvBatch};
use crate::dynamics::VehicleParams;
use crate::tasks::TaskSpec;

use super::pd::{pd_action, PdController};
use super::policy::{Policy, PolicyCache};

/// Anything that maps the batch's current observations or states to
/// throttles (`M × N`, env-major).
pub trait Controller {
    fn act_batch(&self, batch: &EnvBatch, actions: &mut [f64]);
}

impl Controller for Policy {
    /// Mean action with frozen normalization statistics.
    fn act_batch(&self, batch: &EnvBatch, actions: &mut [f64]) {
        let mut cache = PolicyCache::default();
        let mut values = vec![0.0; batch.n_envs()];
        self.forward_batch(batch.observations(), batch.n_envs(), &mut cache, &mut values);
        actions.copy_from_slice(&cache.mean);
    }
}

impl Controller for PdController {
    fn act_batch(&self, batch: &EnvBatch, actions: &mut [f64]) {
        let n = batch.n_actions();
        let spec = batch.spec();
        for (i, out) in actions.chunks_mut(n).enumerate() {
            let vehicle = batch.vehicle(i);
            let pinv = vehicle.thrusters().allocation_pseudo_inverse();
            let reference = spec.reference(batch.step_counters()[i] + 1);
            pd_action(vehicle, &pinv, &batch.state(i), &reference, &self.gains, out);
        }
    }
}

/// Aggregates over the first episode of every environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean position error over all steps of all episodes, m.
    pub mean_pos_err_m: f64,
    pub max_pos_err_m: f64,
    pub mean_return: f64,
    pub episodes: usize,
    pub seed: u64,
    /// Mean position error across episodes after each step, m.
    #[serde(skip)]
    pub error_trace: Vec<f64>,
    /// Position error after the first step of each episode, m.
    #[serde(skip)]
    pub initial_errors: Vec<f64>,
    /// Position error after the last step of each episode, m.
    #[serde(skip)]
    pub final_errors: Vec<f64>,
}

/// Runs one episode per environment for `episodes` environments seeded from
/// `seed`, with default vehicle parameters.
pub fn evaluate<C: Controller + ?Sized>(
    controller: &C,
    spec: &TaskSpec,
    params: &VehicleParams,
    episodes: usize,
    seed: u64,
    threads: usize,
) -> Result<EvalReport, BatchError> {
    evaluate_with_hook(controller, spec, params, episodes, seed, threads, |_| {})
}

/// [`evaluate`] with `hook` called on the batch before every action.
pub fn evaluate_with_hook<C: Controller + ?Sized, F: FnMut(&mut EnvBatch)>(
    controller: &C,
    spec: &TaskSpec,
    params: &VehicleParams,
    episodes: usize,
    seed: u64,
    threads: usize,
    mut hook: F,
) -> Result<EvalReport, BatchError> {
    if episodes == 0 {
        return Err(BatchError::Empty);
    }
    let mut batch = EnvBatch::new(spec.clone(), params.clone(), None, episodes, seed, threads)?;
    let mut actions = vec![0.0; episodes * batch.n_actions()];
    let mut active = vec![true; episodes];
    let mut returns = vec![0.0; episodes];
    let mut initial = vec![0.0; episodes];
    let mut last = vec![0.0; episodes];
    let mut trace = Vec::with_capacity(spec.episode_len);
    let (mut sum, mut count, mut max) = (0.0, 0usize, 0.0f64);
    for step in 0..spec.episode_len {
        hook(&mut batch);
        controller.act_batch(&batch, &mut actions);
        let view = batch.step(&actions)?;
        let (mut step_sum, mut step_count) = (0.0, 0usize);
        for i in 0..episodes {
            if !active[i] {
                continue;
            }
            let e = view.position_errors[i];
            if step == 0 {
                initial[i] = e;
            }
            last[i] = e;
            returns[i] += view.rewards[i];
            sum += e;
            count += 1;
            max = max.max(e);
            step_sum += e;
            step_count += 1;
            if view.dones[i] {
                active[i] = false;
            }
        }
        if step_count == 0 {
            break;
        }
        trace.push(step_sum / step_count as f64);
    }
    Ok(EvalReport {
        mean_pos_err_m: sum / count as f64,
        max_pos_err_m: max,
        mean_return: returns.iter().sum::<f64>() / episodes as f64,
        episodes,
        seed,
        error_trace: trace,
        initial_errors: initial,
        final_errors: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::TaskKind;

    #[test]
    fn same_seed_same_report() {
        let spec = TaskSpec { episode_len: 40, ..TaskSpec::new(TaskKind::Circle) };
        let p = VehicleParams::bluerov2_heavy();
        let a = evaluate(&PdController::default(), &spec, &p, 3, 11, 1).unwrap();
        let b = evaluate(&PdController::default(), &spec, &p, 3, 11, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.error_trace.len(), 40);
    }

    #[test]
    fn zero_episodes_is_an_error() {
        let p = VehicleParams::bluerov2_heavy();
        assert!(evaluate(&PdController::default(), &TaskSpec::default(), &p, 0, 0, 1).is_err());
    }
}

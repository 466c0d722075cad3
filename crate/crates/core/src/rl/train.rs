//! Collect, estimate advantages, update: the PPO training loop.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::batch::{BatchError, EnvBatch, RandomizationRanges};
use crate::dynamics::VehicleParams;
use crate::rng::{stream, AUX_STREAM};
use crate::tasks::TaskSpec;

use super::eval::{evaluate, EvalReport};
use super::gae::gae;
use super::policy::{gaussian_log_prob, Policy, PolicyCache};
use super::ppo::{ppo_update, Adam, PpoError, PpoParams, PpoStats, RolloutBuffer};

/// Mixed into the training seed to get the evaluation seed, so evaluation
/// episodes differ from the first training episodes.
pub const EVAL_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_env_steps: u64,
    /// Steps collected per environment between updates.
    pub horizon: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero over the run.
    pub anneal_lr: bool,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Evaluate every this many updates (and after the last one).
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Stop once the evaluation error falls below this value, m.
    pub target_pos_err_m: Option<f64>,
    /// Taken from the run's top-level seed when loaded from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_env_steps: 5_000_000,
            horizon: 64,
            minibatch: 4096,
            epochs: 4,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            anneal_lr: false,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            init_log_std: -0.5,
            eval_interval: 5,
            eval_episodes: 16,
            target_pos_err_m: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if !(self.clip > 0.0) {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        if self.horizon == 0 || self.minibatch == 0 || self.epochs == 0 || self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("horizon, minibatch, epochs, eval_interval and eval_episodes must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        let finite = [
            self.learning_rate,
            self.entropy_coef,
            self.value_coef,
            self.max_grad_norm,
            self.init_log_std,
        ];
        if !finite.iter().all(|v| v.is_finite()) || self.learning_rate < 0.0 || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate, coefficients and max_grad_norm must be finite, non-negative".into());
        }
        Ok(())
    }

    fn ppo_params(&self, learning_rate: f64) -> PpoParams {
        PpoParams {
            clip: self.clip,
            epochs: self.epochs,
            minibatch: self.minibatch,
            learning_rate,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            max_grad_norm: self.max_grad_norm,
        }
    }
}

/// Environment-side settings for a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainEnv {
    pub spec: TaskSpec,
    pub vehicle: VehicleParams,
    pub ranges: Option<RandomizationRanges>,
    pub envs: usize,
    pub threads: usize,
}

/// One line of the metric log. Contains no wall-clock data, so equal seeds
/// give byte-identical logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: usize,
    pub env_steps: u64,
    /// Mean undiscounted return of training episodes that ended during the
    /// iteration.
    pub mean_return: Option<f64>,
    /// Mean position error over the iteration's training steps, m.
    pub mean_pos_err_m: f64,
    pub eval_mean_pos_err_m: Option<f64>,
    pub eval_mean_return: Option<f64>,
    pub learning_rate: f64,
    #[serde(flatten)]
    pub stats: PpoStats,
}

/// Wall-clock companion of a [`MetricRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub iteration: usize,
    pub env_steps: u64,
    pub wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub env_steps: u64,
    pub final_eval: EvalReport,
    pub records: Vec<MetricRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error("training diverged at iteration {iteration} ({env_steps} env-steps): {source}")]
    Diverged { iteration: usize, env_steps: u64, source: PpoError },
    #[error("cannot write training logs: {0}")]
    Log(#[from] std::io::Error),
}

/// Evaluation seed derived from a training seed.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ EVAL_SEED_MIX
}

/// Trains a policy with PPO. `on_record` receives every metric and timing
/// record as soon as it is produced, so logs survive a later failure.
pub fn train<F>(env: &TrainEnv, cfg: &TrainConfig, mut on_record: F) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&MetricRecord, &TimingRecord) -> std::io::Result<()>,
{
    cfg.validate()?;
    let start = Instant::now();
    let mut batch = EnvBatch::new(env.spec.clone(), env.vehicle.clone(), env.ranges.clone(), env.envs, cfg.seed, env.threads)?;
    let (m, d, n) = (batch.n_envs(), batch.obs_dim(), batch.n_actions());
    let mut rng = stream(cfg.seed, AUX_STREAM);
    let mut policy = Policy::new(d, n, &cfg.hidden, cfg.init_log_std, &mut rng);
    let mut adam = Adam::new(policy.params.len());
    let mut buffer = RolloutBuffer::new(m, cfg.horizon, d, n);
    let mut cache = PolicyCache::default();
    let mut env_actions = vec![0.0; m * n];
    let mut episode_returns = vec![0.0; m];
    let mut bootstrap = vec![0.0; m];
    let per_iter = (m * cfg.horizon) as u64;
    // never exceed the step budget, but always run at least one update
    let iterations = (cfg.total_env_steps / per_iter).max(1) as usize;
    let mut records = Vec::new();
    let mut env_steps = 0u64;
    let mut final_eval = None;

    for iteration in 0..iterations {
        let (mut finished_sum, mut finished) = (0.0, 0usize);
        let mut err_sum = 0.0;
        for t in 0..cfg.horizon {
            policy.norm.update(batch.observations());
            let rows = t * m..(t + 1) * m;
            let obs = &mut buffer.obs[rows.start * d..rows.end * d];
            policy.norm.normalize_into(batch.observations(), obs);
            policy.forward_normalized(&policy.params, obs, m, &mut cache, &mut buffer.values[rows.clone()]);
            let log_std = policy.log_std();
            for i in 0..m {
                let k = t * m + i;
                let mean = &cache.mean[i * n..(i + 1) * n];
                let action = &mut buffer.actions[k * n..(k + 1) * n];
                for j in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    action[j] = mean[j] + log_std[j].exp() * z;
                    env_actions[i * n + j] = action[j].clamp(-1.0, 1.0);
                }
                buffer.log_probs[k] = gaussian_log_prob(action, mean, log_std);
            }
            let view = batch.step(&env_actions)?;
            for i in 0..m {
                let k = t * m + i;
                buffer.rewards[k] = view.rewards[i];
                buffer.dones[k] = view.dones[i];
                err_sum += view.position_errors[i];
                episode_returns[i] += view.rewards[i];
                if view.dones[i] {
                    finished_sum += episode_returns[i];
                    finished += 1;
                    episode_returns[i] = 0.0;
                }
            }
        }
        policy.forward_batch(batch.observations(), m, &mut cache, &mut bootstrap);
        gae(
            &buffer.rewards,
            &buffer.values,
            &buffer.dones,
            &bootstrap,
            m,
            cfg.gamma,
            cfg.lambda,
            &mut buffer.advantages,
            &mut buffer.returns,
        );
        let lr = if cfg.anneal_lr {
            cfg.learning_rate * (1.0 - iteration as f64 / iterations as f64)
        } else {
            cfg.learning_rate
        };
        env_steps += per_iter;
        let stats = ppo_update(&mut policy, &mut adam, &buffer, &cfg.ppo_params(lr), &mut rng)
            .map_err(|source| TrainError::Diverged { iteration, env_steps, source })?;

        let last = iteration + 1 == iterations;
        let eval = if (iteration + 1) % cfg.eval_interval == 0 || last {
            Some(evaluate(&policy, &env.spec, &env.vehicle, cfg.eval_episodes, eval_seed(cfg.seed), env.threads)?)
        } else {
            None
        };
        let record = MetricRecord {
            iteration,
            env_steps,
            mean_return: (finished > 0).then(|| finished_sum / finished as f64),
            mean_pos_err_m: err_sum / per_iter as f64,
            eval_mean_pos_err_m: eval.as_ref().map(|e| e.mean_pos_err_m),
            eval_mean_return: eval.as_ref().map(|e| e.mean_return),
            learning_rate: lr,
            stats,
        };
        let timing = TimingRecord { iteration, env_steps, wall_s: start.elapsed().as_secs_f64() };
        on_record(&record, &timing)?;
        records.push(record);
        let reached = match (&eval, cfg.target_pos_err_m) {
            (Some(e), Some(target)) => e.mean_pos_err_m < target,
            _ => false,
        };
        if eval.is_some() {
            final_eval = eval;
        }
        if reached {
            break;
        }
    }
    let final_eval = final_eval.expect("the last iteration always evaluates");
    Ok(TrainOutcome { policy, env_steps, final_eval, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (TrainEnv, TrainConfig) {
        let env = TrainEnv {
            spec: TaskSpec { episode_len: 50, ..TaskSpec::default() },
            vehicle: VehicleParams::bluerov2_heavy(),
            ranges: None,
            envs: 8,
            threads: 1,
        };
        let cfg = TrainConfig {
            total_env_steps: 8 * 16 * 3,
            horizon: 16,
            minibatch: 32,
            epochs: 2,
            hidden: vec![16, 16],
            eval_interval: 2,
            eval_episodes: 2,
            seed: 3,
            ..TrainConfig::default()
        };
        (env, cfg)
    }

    #[test]
    fn same_seed_same_records() {
        let (env, cfg) = tiny();
        let a = train(&env, &cfg, |_, _| Ok(())).unwrap();
        let b = train(&env, &cfg, |_, _| Ok(())).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.records.len(), 3);
        assert!(a.records[0].eval_mean_pos_err_m.is_none());
        assert!(a.records[1].eval_mean_pos_err_m.is_some());
        assert!(a.records[2].eval_mean_pos_err_m.is_some());
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let (env, cfg) = tiny();
        for bad in [
            TrainConfig { gamma: 0.0, ..cfg.clone() },
            TrainConfig { lambda: 1.5, ..cfg.clone() },
            TrainConfig { clip: 0.0, ..cfg.clone() },
        ] {
            assert!(matches!(train(&env, &bad, |_, _| Ok(())), Err(TrainError::Config(_))));
        }
    }

    #[test]
    fn divergence_keeps_earlier_records() {
        let (env, cfg) = tiny();
        let cfg = TrainConfig { learning_rate: 1e300, max_grad_norm: 1e300, ..cfg };
        let mut seen = 0;
        let result = train(&env, &cfg, |_, _| {
            seen += 1;
            Ok(())
        });
        match result {
            Err(TrainError::Diverged { iteration, .. }) => assert_eq!(seen, iteration),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.env_steps)),
        }
    }
}

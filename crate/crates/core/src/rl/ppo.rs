//! Clipped-surrogate PPO update with hand-written gradients.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{gaussian_entropy, Policy, PolicyCache, LN_2PI};

/// Hyperparameters consumed by [`ppo_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoParams {
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
}

/// Transitions collected over `horizon` steps of `n_envs` environments,
/// time-major (`t * n_envs + i`).
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
    /// Normalized observations the policy acted on.
    pub obs: Vec<f64>,
    /// Sampled actions before clamping.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, horizon: usize, obs_dim: usize, n_actions: usize) -> Self {
        let n = n_envs * horizon;
        Self {
            n_envs,
            horizon,
            obs_dim,
            n_actions,
            obs: vec![0.0; n * obs_dim],
            actions: vec![0.0; n * n_actions],
            log_probs: vec![0.0; n],
            rewards: vec![0.0; n],
            values: vec![0.0; n],
            dones: vec![false; n],
            advantages: vec![0.0; n],
            returns: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.n_envs * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Diagnostics of an update, averaged over minibatches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PpoError {
    #[error("non-finite loss in epoch {epoch}, minibatch {minibatch}: {stats:?}")]
    NonFinite { epoch: usize, minibatch: usize, stats: PpoStats },
}

/// Scratch space for [`loss_and_grad`].
#[derive(Debug, Clone, Default)]
pub struct LossScratch {
    obs: Vec<f64>,
    values: Vec<f64>,
    cache: PolicyCache,
    d_actor: Vec<f64>,
    d_value: Vec<f64>,
}

/// Loss and gradient of one minibatch.
///
/// `L = mean(−min(ρA, clip(ρ)A) + c_v (V − R)²) − c_e H`, with `ρ` the
/// probability ratio against `buffer.log_probs` and `A` taken from
/// `advantages` (already normalized). The gradient with respect to `params`
/// is written into `grad`.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grad(
    policy: &Policy,
    params: &[f64],
    buffer: &RolloutBuffer,
    advantages: &[f64],
    indices: &[usize],
    hp: &PpoParams,
    grad: &mut [f64],
    scratch: &mut LossScratch,
) -> PpoStats {
    let (d, n) = (buffer.obs_dim, buffer.n_actions);
    let b = indices.len();
    assert!(b > 0);
    assert_eq!(grad.len(), params.len());
    scratch.obs.clear();
    for &k in indices {
        scratch.obs.extend_from_slice(&buffer.obs[k * d..(k + 1) * d]);
    }
    scratch.values.resize(b, 0.0);
    policy.forward_normalized(params, &scratch.obs, b, &mut scratch.cache, &mut scratch.values);

    let (ra, rc, rs) = policy.split();
    let log_std = &params[rs.clone()];
    let inv_var: Vec<f64> = log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let norm_const: f64 = log_std.iter().map(|s| s + 0.5 * LN_2PI).sum();
    let scale = 1.0 / b as f64;

    scratch.d_actor.clear();
    scratch.d_actor.resize(b * n, 0.0);
    scratch.d_value.clear();
    scratch.d_value.resize(b, 0.0);
    let mut d_log_std = vec![0.0; n];
    let mut stats = PpoStats::default();

    for (row, &k) in indices.iter().enumerate() {
        let mean = &scratch.cache.mean[row * n..(row + 1) * n];
        let action = &buffer.actions[k * n..(k + 1) * n];
        let mut quad = 0.0;
        for j in 0..n {
            let diff = action[j] - mean[j];
            quad += diff * diff * inv_var[j];
        }
        let log_prob = -0.5 * quad - norm_const;
        let log_ratio = log_prob - buffer.log_probs[k];
        let ratio = log_ratio.exp();
        let adv = advantages[k];
        let clipped = ratio.clamp(1.0 - hp.clip, 1.0 + hp.clip);
        let (s1, s2) = (ratio * adv, clipped * adv);
        stats.policy_loss -= s1.min(s2) * scale;
        if (ratio - 1.0).abs() > hp.clip {
            stats.clip_fraction += scale;
        }
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * scale;

        // d(−min)/dρ is −A while the unclipped branch is active
        let d_ratio = if s1 <= s2 { -adv * scale } else { 0.0 };
        let d_log_prob = d_ratio * ratio;
        for j in 0..n {
            let diff = action[j] - mean[j];
            let d_mean = d_log_prob * diff * inv_var[j];
            scratch.d_actor[row * n + j] = d_mean * (1.0 - mean[j] * mean[j]);
            d_log_std[j] += d_log_prob * (diff * diff * inv_var[j] - 1.0);
        }

        let err = scratch.values[row] - buffer.returns[k];
        stats.value_loss += err * err * scale;
        scratch.d_value[row] = 2.0 * hp.value_coef * err * scale;
    }
    stats.entropy = gaussian_entropy(log_std);

    policy.actor().backward(&params[ra.clone()], &mut scratch.cache.actor, &scratch.d_actor, &mut grad[ra]);
    policy.critic().backward(&params[rc.clone()], &mut scratch.cache.critic, &scratch.d_value, &mut grad[rc]);
    for (g, dl) in grad[rs].iter_mut().zip(&d_log_std) {
        *g = dl - hp.entropy_coef;
    }
    stats
}

/// Total minibatch loss matching [`loss_and_grad`].
pub fn total_loss(stats: &PpoStats, hp: &PpoParams) -> f64 {
    stats.policy_loss + hp.value_coef * stats.value_loss - hp.entropy_coef * stats.entropy
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Mean 0, standard deviation 1 copy of `values`.
pub fn normalize_advantages(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    values.iter().map(|a| (a - mean) / std).collect()
}

/// Runs `hp.epochs` passes of shuffled minibatch Adam steps over `buffer`.
/// Advantages must already be filled in.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    hp: &PpoParams,
    rng: &mut R,
) -> Result<PpoStats, PpoError> {
    let advantages = normalize_advantages(&buffer.advantages);
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut grad = vec![0.0; policy.params.len()];
    let mut scratch = LossScratch::default();
    let mut total = PpoStats::default();
    let mut count = 0usize;
    let mb = hp.minibatch.clamp(1, buffer.len());
    for epoch in 0..hp.epochs {
        order.shuffle(rng);
        for (minibatch, indices) in order.chunks(mb).enumerate() {
            let stats = loss_and_grad(policy, &policy.params, buffer, &advantages, indices, hp, &mut grad, &mut scratch);
            if !total_loss(&stats, hp).is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(PpoError::NonFinite { epoch, minibatch, stats });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > hp.max_grad_norm {
                let k = hp.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            adam.step(&mut policy.params, &grad, hp.learning_rate);
            total.policy_loss += stats.policy_loss;
            total.value_loss += stats.value_loss;
            total.entropy += stats.entropy;
            total.clip_fraction += stats.clip_fraction;
            total.approx_kl += stats.approx_kl;
            count += 1;
        }
    }
    if count > 0 {
        let k = 1.0 / count as f64;
        total.policy_loss *= k;
        total.value_loss *= k;
        total.entropy *= k;
        total.clip_fraction *= k;
        total.approx_kl *= k;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::policy::gaussian_log_prob;
    use crate::rng::stream;
    use rand::RngExt;

    fn hp() -> PpoParams {
        PpoParams {
            clip: 0.2,
            epochs: 2,
            minibatch: 4,
            learning_rate: 1e-3,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
        }
    }

    /// Tiny buffer whose old log-probs are offset so some ratios land outside
    /// the clip range, away from its edges.
    fn tiny(policy: &Policy, seed: u64, on_policy: bool) -> RolloutBuffer {
        let mut rng = stream(seed, 0);
        let mut buf = RolloutBuffer::new(2, 5, policy.obs_dim(), policy.n_actions());
        for x in buf.obs.iter_mut() {
            *x = rng.random_range(-1.5..1.5);
        }
        for x in buf.actions.iter_mut() {
            *x = rng.random_range(-1.2..1.2);
        }
        let mut cache = PolicyCache::default();
        let mut values = vec![0.0; buf.len()];
        policy.forward_normalized(&policy.params, &buf.obs, buf.len(), &mut cache, &mut values);
        let n = policy.n_actions();
        for k in 0..buf.len() {
            let lp = gaussian_log_prob(&buf.actions[k * n..(k + 1) * n], &cache.mean[k * n..(k + 1) * n], policy.log_std());
            let offsets = [0.0, 0.5, -0.45, 0.1, -0.05];
            buf.log_probs[k] = if on_policy { lp } else { lp + offsets[k % 5] };
            buf.values[k] = values[k];
            buf.advantages[k] = rng.random_range(-2.0..2.0);
            buf.returns[k] = rng.random_range(-3.0..3.0);
        }
        buf
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = stream(9, 1);
        let policy = Policy::new(4, 2, &[8, 8], -0.3, &mut rng);
        let mut params = policy.params.clone();
        // larger output layer so the actor gradient is not negligible
        params.iter_mut().for_each(|p| *p *= 3.0);
        let buf = tiny(&policy, 5, false);
        let adv = normalize_advantages(&buf.advantages);
        let idx: Vec<usize> = (0..buf.len()).collect();
        let hp = hp();
        let mut scratch = LossScratch::default();
        let mut grad = vec![0.0; params.len()];
        let stats = loss_and_grad(&policy, &params, &buf, &adv, &idx, &hp, &mut grad, &mut scratch);
        assert!(stats.clip_fraction > 0.0 && stats.clip_fraction < 1.0);
        let loss = |p: &[f64]| {
            let mut g = vec![0.0; p.len()];
            let mut s = LossScratch::default();
            total_loss(&loss_and_grad(&policy, p, &buf, &adv, &idx, &hp, &mut g, &mut s), &hp)
        };
        let h = 1e-5;
        for i in 0..params.len() {
            let mut q = params.clone();
            q[i] += h;
            let up = loss(&q);
            q[i] -= 2.0 * h;
            let fd = (up - loss(&q)) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: fd {fd} analytic {}", grad[i]);
        }
    }

    #[test]
    fn on_policy_ratio_is_one() {
        let mut rng = stream(2, 1);
        let policy = Policy::new(4, 2, &[8, 8], -0.3, &mut rng);
        let buf = tiny(&policy, 6, true);
        let adv = normalize_advantages(&buf.advantages);
        let idx: Vec<usize> = (0..buf.len()).collect();
        let mut grad = vec![0.0; policy.params.len()];
        let stats = loss_and_grad(&policy, &policy.params, &buf, &adv, &idx, &hp(), &mut grad, &mut LossScratch::default());
        assert_eq!(stats.clip_fraction, 0.0);
        assert!(stats.approx_kl.abs() < 1e-8);
        let mean_adv = adv.iter().sum::<f64>() / adv.len() as f64;
        assert!((stats.policy_loss + mean_adv).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut rng = stream(3, 1);
        let mut policy = Policy::new(4, 2, &[8, 8], -0.3, &mut rng);
        let before = policy.params.clone();
        let buf = tiny(&policy, 7, false);
        let mut adam = Adam::new(before.len());
        let hp = PpoParams { learning_rate: 0.0, ..hp() };
        ppo_update(&mut policy, &mut adam, &buf, &hp, &mut rng).unwrap();
        assert!(policy.params.iter().zip(&before).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn update_reduces_loss_on_fixed_batch() {
        let mut rng = stream(4, 1);
        let mut policy = Policy::new(4, 2, &[8, 8], -0.3, &mut rng);
        let buf = tiny(&policy, 8, true);
        let hp = PpoParams { epochs: 20, minibatch: 10, ..hp() };
        let adv = normalize_advantages(&buf.advantages);
        let idx: Vec<usize> = (0..buf.len()).collect();
        let loss = |p: &Policy| {
            let mut g = vec![0.0; p.params.len()];
            total_loss(&loss_and_grad(p, &p.params, &buf, &adv, &idx, &hp, &mut g, &mut LossScratch::default()), &hp)
        };
        let before = loss(&policy);
        let mut adam = Adam::new(policy.params.len());
        ppo_update(&mut policy, &mut adam, &buf, &hp, &mut rng).unwrap();
        assert!(loss(&policy) < before);
    }

    #[test]
    fn nan_loss_is_reported() {
        let mut rng = stream(5, 1);
        let mut policy = Policy::new(4, 2, &[8, 8], -0.3, &mut rng);
        let mut buf = tiny(&policy, 9, true);
        buf.returns[3] = f64::NAN;
        let mut adam = Adam::new(policy.params.len());
        let err = ppo_update(&mut policy, &mut adam, &buf, &hp(), &mut rng).unwrap_err();
        assert!(matches!(err, PpoError::NonFinite { epoch: 0, .. }));
    }
}

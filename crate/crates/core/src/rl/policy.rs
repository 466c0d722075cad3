//! Gaussian actor-critic policy with observation normalization.

use rand::Rng;

use super::mlp::{Mlp, MlpCache};

/// Normalized observations are clipped to this magnitude.
pub const OBS_CLIP: f64 = 10.0;
const NORM_EPS: f64 = 1e-8;
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("observation has {got} components, policy expects {expected}")]
    ObsDim { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, policy expects {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("policy parameters are not finite")]
    NonFinite,
}

/// Running per-component mean and variance (parallel Welford merge).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self { count: 0.0, mean: vec![0.0; dim], var: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Folds `rows` (row-major, `dim` columns) into the statistics.
    pub fn update(&mut self, rows: &[f64]) {
        let dim = self.dim();
        assert_eq!(rows.len() % dim, 0);
        let n = (rows.len() / dim) as f64;
        if n == 0.0 {
            return;
        }
        let total = self.count + n;
        for j in 0..dim {
            let column = rows.iter().skip(j).step_by(dim);
            let batch_mean = column.clone().sum::<f64>() / n;
            let batch_var = column.map(|x| (x - batch_mean).powi(2)).sum::<f64>() / n;
            let delta = batch_mean - self.mean[j];
            let m2 = self.var[j] * self.count + batch_var * n + delta * delta * self.count * n / total;
            self.mean[j] += delta * n / total;
            self.var[j] = m2 / total;
        }
        self.count = total;
    }

    pub fn normalize_into(&self, rows: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        assert_eq!(rows.len(), out.len());
        for (row, dst) in rows.chunks(dim).zip(out.chunks_mut(dim)) {
            for j in 0..dim {
                let z = (row[j] - self.mean[j]) / (self.var[j] + NORM_EPS).sqrt();
                dst[j] = z.clamp(-OBS_CLIP, OBS_CLIP);
            }
        }
    }
}

/// Outputs of the policy for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// Action mean in [−1, 1].
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
}

/// Actor and critic networks sharing one flat parameter vector laid out as
/// `[actor | critic | log_std]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    actor: Mlp,
    critic: Mlp,
    pub params: Vec<f64>,
    pub norm: RunningNorm,
}

/// Reusable forward buffers for batched evaluation.
#[derive(Debug, Clone, Default)]
pub struct PolicyCache {
    pub actor: MlpCache,
    pub critic: MlpCache,
    pub normalized: Vec<f64>,
    /// Squashed means, `batch × n_actions`.
    pub mean: Vec<f64>,
}

impl Policy {
    /// All-zero parameters (zero mean, zero value, unit standard deviation).
    pub fn zeros(obs_dim: usize, n_actions: usize, hidden: &[usize]) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = Mlp::new(sizes(n_actions));
        let critic = Mlp::new(sizes(1));
        let n = actor.n_params() + critic.n_params() + n_actions;
        Self { actor, critic, params: vec![0.0; n], norm: RunningNorm::new(obs_dim) }
    }

    /// Random initialization: small actor output layer and a fixed initial
    /// log standard deviation.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, n_actions: usize, hidden: &[usize], init_log_std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(obs_dim, n_actions, hidden);
        let (na, nc) = (p.actor.n_params(), p.critic.n_params());
        p.actor.init(&mut p.params[..na], 1.0, 0.01, rng);
        p.critic.init(&mut p.params[na..na + nc], 1.0, 1.0, rng);
        p.params[na + nc..].iter_mut().for_each(|s| *s = init_log_std);
        p
    }

    /// Rebuilds a policy from its dimensions and stored parameters.
    pub fn from_parts(
        obs_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        params: Vec<f64>,
        norm: RunningNorm,
    ) -> Result<Self, PolicyError> {
        let mut p = Self::zeros(obs_dim, n_actions, hidden);
        if params.len() != p.params.len() {
            return Err(PolicyError::ParamCount { expected: p.params.len(), got: params.len() });
        }
        if norm.dim() != obs_dim {
            return Err(PolicyError::ObsDim { expected: obs_dim, got: norm.dim() });
        }
        if !params.iter().all(|v| v.is_finite()) {
            return Err(PolicyError::NonFinite);
        }
        p.params = params;
        p.norm = norm;
        Ok(p)
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn hidden(&self) -> &[usize] {
        let s = self.actor.sizes();
        &s[1..s.len() - 1]
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    /// Parameter ranges of the actor, the critic and the log-std vector.
    pub fn split(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>, std::ops::Range<usize>) {
        let (na, nc) = (self.actor.n_params(), self.critic.n_params());
        (0..na, na..na + nc, na + nc..self.params.len())
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.split().2]
    }

    /// Batched forward pass on already normalized observations using the
    /// parameters in `params`. Means land in `cache.mean`, values in `values`.
    pub fn forward_normalized(&self, params: &[f64], obs: &[f64], batch: usize, cache: &mut PolicyCache, values: &mut [f64]) {
        let (a, c, _) = self.split();
        self.actor.forward(&params[a], obs, batch, &mut cache.actor);
        cache.mean.clear();
        cache.mean.extend(cache.actor.output().iter().map(|z| z.tanh()));
        self.critic.forward(&params[c], obs, batch, &mut cache.critic);
        values.copy_from_slice(cache.critic.output());
    }

    /// Normalizes `raw` with the current statistics and runs the networks.
    pub fn forward_batch(&self, raw: &[f64], batch: usize, cache: &mut PolicyCache, values: &mut [f64]) {
        let mut normalized = std::mem::take(&mut cache.normalized);
        normalized.resize(raw.len(), 0.0);
        self.norm.normalize_into(raw, &mut normalized);
        self.forward_normalized(&self.params, &normalized, batch, cache, values);
        cache.normalized = normalized;
    }

    /// Mean action, log standard deviation and value for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput, PolicyError> {
        if obs.len() != self.obs_dim() {
            return Err(PolicyError::ObsDim { expected: self.obs_dim(), got: obs.len() });
        }
        let mut cache = PolicyCache::default();
        let mut value = [0.0];
        self.forward_batch(obs, 1, &mut cache, &mut value);
        Ok(PolicyOutput { mean: cache.mean, log_std: self.log_std().to_vec(), value: value[0] })
    }
}

/// Log-density of `action` under a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// Entropy of a diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_policy_outputs_zero() {
        let p = Policy::zeros(12, 8, &[64, 64]);
        let out = p.forward(&[0.3; 12]).unwrap();
        assert_eq!(out.mean, vec![0.0; 8]);
        assert_eq!(out.value, 0.0);
        assert_eq!(out.log_std, vec![0.0; 8]);
    }

    #[test]
    fn rejects_wrong_obs_length() {
        let p = Policy::zeros(12, 8, &[64, 64]);
        assert_eq!(p.forward(&[0.0; 11]), Err(PolicyError::ObsDim { expected: 12, got: 11 }));
    }

    #[test]
    fn large_observations_stay_finite_and_bounded() {
        let mut rng = stream(3, 0);
        let mut p = Policy::new(36, 8, &[64, 64], -0.5, &mut rng);
        p.params.iter_mut().for_each(|w| *w *= 50.0);
        let obs: Vec<f64> = (0..36).map(|i| if i % 2 == 0 { 1e3 } else { -1e3 }).collect();
        let out = p.forward(&obs).unwrap();
        assert!(out.value.is_finite());
        assert!(out.mean.iter().all(|m| m.is_finite() && m.abs() <= 1.0));
    }

    #[test]
    fn value_gradient_matches_finite_differences() {
        let mut rng = stream(4, 0);
        let p = Policy::new(4, 2, &[8, 8], -0.5, &mut rng);
        let obs = [0.3, -0.7, 1.1, 0.2];
        let value = |params: &[f64]| {
            let mut cache = PolicyCache::default();
            let mut v = [0.0];
            p.forward_normalized(params, &obs, 1, &mut cache, &mut v);
            v[0]
        };
        let (_, c, _) = p.split();
        let mut cache = PolicyCache::default();
        let mut v = [0.0];
        p.forward_normalized(&p.params, &obs, 1, &mut cache, &mut v);
        let mut grad = vec![0.0; c.len()];
        p.critic().backward(&p.params[c.clone()], &mut cache.critic, &[1.0], &mut grad);
        let h = 1e-5;
        for (k, i) in c.enumerate() {
            let mut q = p.params.clone();
            q[i] += h;
            let up = value(&q);
            q[i] -= 2.0 * h;
            let fd = (up - value(&q)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: fd {fd} analytic {}", grad[k]);
        }
    }

    #[test]
    fn running_norm_matches_two_pass_statistics() {
        let rows: Vec<f64> = (0..60).map(|i| ((i * 13) % 17) as f64 * 0.3 - 1.0).collect();
        let mut norm = RunningNorm::new(3);
        // uneven batches: 9, 9, ..., 6 values
        for chunk in rows.chunks(9) {
            norm.update(chunk);
        }
        let n = 20.0;
        for j in 0..3 {
            let col: Vec<f64> = rows.iter().skip(j).step_by(3).copied().collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            assert!((norm.mean[j] - mean).abs() < 1e-12);
            assert!((norm.var[j] - var).abs() < 1e-12);
        }
        assert_eq!(norm.count, n);
    }

    #[test]
    fn log_prob_matches_scalar_density() {
        let lp = gaussian_log_prob(&[0.5], &[0.2], &[(0.3f64).ln()]);
        let density = (-(0.3f64 / 0.3).powi(2) / 2.0).exp() / (0.3 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((lp - density.ln()).abs() < 1e-12);
        let h = gaussian_entropy(&[(0.3f64).ln()]);
        assert!((h - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.09).ln()).abs() < 1e-12);
    }
}

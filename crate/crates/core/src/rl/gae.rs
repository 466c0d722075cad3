//! Generalized advantage estimation.

/// Advantages and returns for `horizon` steps of `n_envs` environments.
///
/// All arrays are time-major: entry `t * n_envs + i` belongs to environment
/// `i` at step `t`. `bootstrap[i]` is the value estimate of the observation
/// following the last step. A done flag cuts both the bootstrap and the
/// advantage recursion.
#[allow(clippy::too_many_arguments)]
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: &[f64],
    n_envs: usize,
    gamma: f64,
    lambda: f64,
    advantages: &mut [f64],
    returns: &mut [f64],
) {
    let len = rewards.len();
    assert!(n_envs > 0 && len.is_multiple_of(n_envs), "arrays must cover whole steps");
    assert_eq!(values.len(), len);
    assert_eq!(dones.len(), len);
    assert_eq!(advantages.len(), len);
    assert_eq!(returns.len(), len);
    assert_eq!(bootstrap.len(), n_envs);
    let horizon = len / n_envs;
    for i in 0..n_envs {
        let mut next_value = bootstrap[i];
        let mut next_adv = 0.0;
        for t in (0..horizon).rev() {
            let k = t * n_envs + i;
            let live = if dones[k] { 0.0 } else { 1.0 };
            let delta = rewards[k] + gamma * next_value * live - values[k];
            next_adv = delta + gamma * lambda * live * next_adv;
            advantages[k] = next_adv;
            returns[k] = next_adv + values[k];
            next_value = values[k];
        }
    }
}

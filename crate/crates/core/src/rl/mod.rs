//! PPO training and a PD baseline over the batch engine.
//!
//! The actor and critic are separate tanh networks that share one flat
//! parameter vector. Gradients are written out by hand and checked against
//! finite differences in the tests.

pub mod checkpoint;
mod eval;
mod gae;
pub mod mlp;
mod pd;
mod policy;
mod ppo;
mod train;

pub use eval::{evaluate, evaluate_with_hook, Controller, EvalReport};
pub use gae::gae;
pub use pd::{pd_action, pd_baseline, pd_wrench, PdController, PdGains};
pub use policy::{gaussian_entropy, gaussian_log_prob, Policy, PolicyCache, PolicyError, PolicyOutput, RunningNorm, OBS_CLIP};
pub use ppo::{
    loss_and_grad, normalize_advantages, ppo_update, total_loss, Adam, LossScratch, PpoError, PpoParams, PpoStats, RolloutBuffer,
};
pub use train::{eval_seed, train, MetricRecord, TimingRecord, TrainConfig, TrainEnv, TrainError, TrainOutcome, EVAL_SEED_MIX};

//! The `bench`, `train`, `rollout` and `eval` commands.
//!
//! Each command reads a [`RunConfig`](crate::config::RunConfig), applies
//! command-line overrides and writes its artifacts under `out_dir`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::batch::{bench_throughput, BenchReport, EnvBatch};
use crate::config::{ConfigError, Loaded, RunConfig};
use crate::dynamics::{State, VehicleParams};
use crate::rl::{checkpoint, evaluate, train, Controller, EvalReport, PdController, Policy, TrainError};
use crate::tasks::{env_step, TaskSpec};

pub const BENCH_FILE: &str = "bench.json";
pub const EVAL_FILE: &str = "eval.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METRICS_FILE: &str = "metrics.ndjson";
pub const TIMING_FILE: &str = "timing.ndjson";
pub const CHECKPOINT_FILE: &str = "policy.bin";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Flags shared by every command. Set fields replace config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<Loaded, CliError> {
    let mut loaded = RunConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        loaded.run.set_seed(seed);
    }
    if let Some(out) = &overrides.out_dir {
        loaded.run.out_dir = out.clone();
    }
    if let Some(threads) = overrides.threads {
        loaded.run.batch.threads = threads;
    }
    Ok(loaded)
}

/// `--policy pd` or `--policy PATH` to a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySource {
    Pd,
    Checkpoint(PathBuf),
}

impl FromStr for PolicySource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s == "pd" { PolicySource::Pd } else { PolicySource::Checkpoint(PathBuf::from(s)) })
    }
}

/// Loads the controller named by `source` and checks it fits the task.
pub fn load_controller(cfg: &Loaded, source: &PolicySource) -> Result<Box<dyn Controller>, CliError> {
    match source {
        PolicySource::Pd => Ok(Box::new(PdController::new(cfg.run.pd))),
        PolicySource::Checkpoint(path) => {
            let policy = checkpoint::load(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            check_fit(&policy, &cfg.run.task, &cfg.vehicle)?;
            Ok(Box::new(policy))
        }
    }
}

fn check_fit(policy: &Policy, spec: &TaskSpec, vehicle: &VehicleParams) -> Result<(), CliError> {
    let (obs, act) = (spec.obs_dim(), vehicle.thrusters.len());
    if policy.obs_dim() != obs || policy.n_actions() != act {
        return Err(CliError::Runtime(format!(
            "checkpoint expects {} observations and {} thrusters, the config has {obs} and {act}",
            policy.obs_dim(),
            policy.n_actions()
        )));
    }
    Ok(())
}

fn create_out_dir(cfg: &Loaded) -> Result<&Path, CliError> {
    let dir = cfg.run.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Steps `envs` environments with fixed random throttles for `steps` steps.
pub fn cmd_bench(cfg: &Loaded, envs: Option<usize>, steps: usize, threads: Option<usize>) -> Result<BenchReport, CliError> {
    let envs = envs.unwrap_or(cfg.run.batch.envs);
    let threads = threads.unwrap_or(cfg.run.batch.threads);
    if envs == 0 || steps == 0 {
        return Err(CliError::Config(ConfigError::Invalid("--envs and --steps must be at least 1".into())));
    }
    let mut batch = EnvBatch::new(
        cfg.run.task.clone(),
        cfg.vehicle.clone(),
        cfg.run.batch.randomization.clone(),
        envs,
        cfg.run.seed,
        threads,
    )
    .map_err(CliError::runtime)?;
    let report = bench_throughput(&mut batch, steps, threads).map_err(CliError::runtime)?;
    let dir = create_out_dir(cfg)?;
    write_json(&dir.join(BENCH_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub task: String,
    pub env_steps: u64,
    pub final_mean_pos_err_m: f64,
}

/// Trains a policy and writes the checkpoint, the metric and timing logs
/// and a summary. Log lines are flushed as they are produced.
pub fn cmd_train(cfg: &Loaded) -> Result<TrainSummary, CliError> {
    let dir = create_out_dir(cfg)?;
    let open = |name: &str| {
        File::create(dir.join(name))
            .map(BufWriter::new)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.join(name).display())))
    };
    let (mut metrics, mut timing) = (open(METRICS_FILE)?, open(TIMING_FILE)?);
    let result = train(&cfg.train_env(), &cfg.run.train, |record, time| {
        serde_json::to_writer(&mut metrics, record)?;
        metrics.write_all(b"\n")?;
        metrics.flush()?;
        serde_json::to_writer(&mut timing, time)?;
        timing.write_all(b"\n")?;
        timing.flush()
    });
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(e @ TrainError::Config(_)) => return Err(CliError::Config(ConfigError::Invalid(e.to_string()))),
        Err(e) => return Err(CliError::runtime(e)),
    };
    checkpoint::save(&outcome.policy, &dir.join(CHECKPOINT_FILE)).map_err(CliError::runtime)?;
    let summary = TrainSummary {
        task: cfg.run.task.kind.name().to_string(),
        env_steps: outcome.env_steps,
        final_mean_pos_err_m: outcome.final_eval.mean_pos_err_m,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Header of the rollout CSV for `n_thrusters` thrusters.
pub fn rollout_header(n_thrusters: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "x", "y", "z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r"].map(String::from).to_vec();
    h.extend((1..=n_thrusters).map(|i| format!("f_{i}")));
    h.extend(["reward", "ref_x", "ref_y", "ref_z"].map(String::from));
    h
}

/// Runs one deterministic episode and writes it to `csv_path`. Row `k` holds
/// the state at `t_k`, the action applied from it, the reward of that step
/// and the reference at `t_k`. Returns the number of data rows.
pub fn cmd_rollout(cfg: &Loaded, source: &PolicySource, csv_path: &Path) -> Result<usize, CliError> {
    let controller = load_controller(cfg, source)?;
    let spec = &cfg.run.task;
    let mut batch = EnvBatch::new(spec.clone(), cfg.vehicle.clone(), None, 1, cfg.run.seed, 1).map_err(CliError::runtime)?;
    let n = batch.n_actions();
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::runtime)?;
    }
    let mut out = csv::Writer::from_path(csv_path).map_err(|e| CliError::Runtime(format!("{}: {e}", csv_path.display())))?;
    out.write_record(rollout_header(n)).map_err(CliError::runtime)?;
    let mut action = vec![0.0; n];
    let mut rows = 0;
    for k in 0..spec.episode_len {
        let state = batch.state(0);
        controller.act_batch(&batch, &mut action);
        let view = batch.step(&action).map_err(CliError::runtime)?;
        let reference = spec.reference(k);
        let mut row = vec![k as f64 * spec.control_dt];
        row.extend(state.to_array());
        row.extend(&action);
        row.extend([view.rewards[0], reference.x, reference.y, reference.z]);
        out.write_record(row.iter().map(|v| v.to_string())).map_err(CliError::runtime)?;
        rows += 1;
        if view.dones[0] {
            break;
        }
    }
    out.flush().map_err(CliError::runtime)?;
    Ok(rows)
}

/// Evaluates the controller over `episodes` (or the config's count) and
/// writes the report.
pub fn cmd_eval(cfg: &Loaded, source: &PolicySource, episodes: Option<usize>) -> Result<EvalReport, CliError> {
    let controller = load_controller(cfg, source)?;
    let episodes = episodes.unwrap_or(cfg.run.eval.episodes);
    if episodes == 0 {
        return Err(CliError::Config(ConfigError::Invalid("--episodes must be at least 1".into())));
    }
    let report = evaluate(controller.as_ref(), &cfg.run.task, &cfg.vehicle, episodes, cfg.run.seed, cfg.run.batch.threads)
        .map_err(CliError::runtime)?;
    let dir = create_out_dir(cfg)?;
    write_json(&dir.join(EVAL_FILE), &report)?;
    Ok(report)
}

/// Re-simulates a rollout CSV from its first state using the logged
/// actions. Returns the largest absolute difference between a logged and a
/// re-simulated state component or reward.
pub fn replay_max_deviation(csv_path: &Path, spec: &TaskSpec, vehicle: &VehicleParams) -> Result<f64, CliError> {
    let vehicle = vehicle.clone().validate().map_err(CliError::runtime)?;
    let n = vehicle.n_thrusters();
    let mut reader = csv::Reader::from_path(csv_path).map_err(CliError::runtime)?;
    let header: Vec<String> = reader.headers().map_err(CliError::runtime)?.iter().map(String::from).collect();
    if header != rollout_header(n) {
        return Err(CliError::Runtime("unexpected rollout header".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(CliError::runtime)?;
        let row = record.iter().map(f64::from_str).collect::<Result<Vec<f64>, _>>().map_err(CliError::runtime)?;
        rows.push(row);
    }
    let state_of = |row: &[f64]| State::from_array(std::array::from_fn(|i| row[1 + i]));
    let mut state = match rows.first() {
        Some(row) => state_of(row),
        None => return Ok(0.0),
    };
    let mut worst = 0.0f64;
    for (k, row) in rows.iter().enumerate() {
        let logged = state_of(row).to_array();
        for (a, b) in logged.iter().zip(state.to_array()) {
            worst = worst.max((a - b).abs());
        }
        let action = &row[13..13 + n];
        let (next, transition) = env_step(spec, &vehicle, &state, action, k).map_err(CliError::runtime)?;
        worst = worst.max((transition.reward - row[13 + n]).abs());
        state = next;
    }
    Ok(worst)
}

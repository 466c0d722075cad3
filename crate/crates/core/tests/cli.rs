use std::path::{Path, PathBuf};
use std::process::Command;

use uuvsim::cli::{self, Overrides, PolicySource, TrainSummary};
use uuvsim::config::{Loaded, RunConfig};
use uuvsim::dynamics::{State, VehicleParams};
use uuvsim::rl::{checkpoint, evaluate, evaluate_with_hook, Controller, PdController, PdGains, TrainConfig};
use uuvsim::tasks::{TaskKind, TaskSpec};

const CONFIGS: [&str; 4] = ["station_keeping", "circle", "helix", "lemniscate"];

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

/// Writes `body` as a config in `dir` with `out_dir` pointing into `dir`.
fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let out = dir.join("out");
    std::fs::write(&path, format!("out_dir = {:?}\n{body}", out.to_str().unwrap())).unwrap();
    path
}

const TINY_TRAIN: &str = r#"
seed = 5
[task]
error_frame = "body"
episode_len = 40
[batch]
envs = 16
threads = 1
[train]
total_env_steps = 10_000
horizon = 32
minibatch = 128
epochs = 2
hidden = [16, 16]
eval_interval = 4
eval_episodes = 4
[eval]
episodes = 4
"#;

fn load(path: &Path) -> Loaded {
    cli::load_config(path, &Overrides::default()).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uuvsim"))
}

#[test]
fn shipped_configs_spell_out_library_defaults() {
    for name in CONFIGS {
        let loaded = load(&shipped(name));
        assert_eq!(loaded.vehicle, VehicleParams::bluerov2_heavy(), "{name}");
        let run = &loaded.run;
        assert_eq!(run.train, TrainConfig { seed: run.seed, ..TrainConfig::default() }, "{name}");
        assert_eq!(run.pd, PdGains::default(), "{name}");
        let default_task = TaskSpec { kind: run.task.kind, error_frame: run.task.error_frame, ..TaskSpec::default() };
        assert_eq!(run.task, default_task, "{name}");
        assert_eq!(run.task.kind.name(), name);
    }
}

#[test]
fn tiny_train_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&write_config(dir.path(), TINY_TRAIN));
    let summary = cli::cmd_train(&cfg).unwrap();
    let out = dir.path().join("out");
    let metrics = std::fs::read_to_string(out.join(cli::METRICS_FILE)).unwrap();
    let timing = std::fs::read_to_string(out.join(cli::TIMING_FILE)).unwrap();
    assert_eq!(metrics.lines().count(), timing.lines().count());
    assert!(metrics.lines().count() > 1);
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("env_steps").is_some() && v.get("wall_s").is_none());
    }
    let written: TrainSummary = serde_json::from_str(&std::fs::read_to_string(out.join(cli::SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(written, summary);
    assert_eq!(summary.task, "station_keeping");
    assert!(summary.env_steps <= 10_000 && summary.final_mean_pos_err_m.is_finite());

    // the checkpoint drives rollout and eval
    let policy = PolicySource::Checkpoint(out.join(cli::CHECKPOINT_FILE));
    let rows = cli::cmd_rollout(&cfg, &policy, &out.join("r.csv")).unwrap();
    assert!(rows > 0);
    let report = cli::cmd_eval(&cfg, &policy, None).unwrap();
    assert_eq!(report.episodes, 4);
}

#[test]
fn training_logs_are_reproducible() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = load(&write_config(dir.path(), TINY_TRAIN));
        cli::cmd_train(&cfg).unwrap();
        let out = dir.path().join("out");
        (std::fs::read(out.join(cli::METRICS_FILE)).unwrap(), std::fs::read(out.join(cli::CHECKPOINT_FILE)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn divergence_keeps_partial_logs_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = TINY_TRAIN.replace("epochs = 2", "epochs = 2\nlearning_rate = 1e300\nmax_grad_norm = 1e300");
    let path = write_config(dir.path(), &body);
    let status = bin().args(["--config", path.to_str().unwrap(), "train"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2), "{}", String::from_utf8_lossy(&status.stderr));
    let out = dir.path().join("out");
    assert!(out.join(cli::METRICS_FILE).exists() && out.join(cli::TIMING_FILE).exists());
    assert!(!out.join(cli::SUMMARY_FILE).exists());
}

#[test]
fn bench_record_has_all_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "seed = 2");
    let output = bin().args(["--config", path.to_str().unwrap(), "bench", "--envs", "1", "--steps", "10"]).output().unwrap();
    assert!(output.status.success());
    let printed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(cli::BENCH_FILE)).unwrap()).unwrap();
    for record in [&printed, &written] {
        assert!(record["env_steps_per_sec"].as_f64().unwrap() > 0.0);
        assert!(record["wall_time_s"].as_f64().unwrap() > 0.0);
        assert_eq!(record["M"], 1);
        assert!(record["threads"].as_u64().is_some());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&["--config", missing.to_str().unwrap(), "bench"]), Some(1));
    let bad = write_config(dir.path(), "seed = 1\n[batch]\nenvs = 0");
    assert_eq!(code(&["--config", bad.to_str().unwrap(), "bench"]), Some(1));
    let typo = write_config(dir.path(), "seed = 1\n[train]\nlearning_rat = 0.1");
    assert_eq!(code(&["--config", typo.to_str().unwrap(), "train"]), Some(1));
    assert_eq!(code(&["bench", "--unknown"]), Some(1));
    let ok = write_config(dir.path(), "seed = 1");
    let garbage = dir.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    assert_eq!(code(&["--config", ok.to_str().unwrap(), "eval", "--policy", garbage.to_str().unwrap()]), Some(2));
}

#[test]
fn checkpoint_must_match_the_task() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&write_config(dir.path(), "seed = 1\n[task]\nkind = \"circle\""));
    let mut rng = uuvsim::rng::stream(1, 0);
    let policy = uuvsim::rl::Policy::new(12, 8, &[8], -0.5, &mut rng);
    let path = dir.path().join("p.bin");
    checkpoint::save(&policy, &path).unwrap();
    let err = cli::cmd_eval(&cfg, &PolicySource::Checkpoint(path), Some(1)).err().unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn overrides_replace_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "seed = 1\n[batch]\nthreads = 3");
    let overrides = Overrides { seed: Some(9), out_dir: Some("elsewhere".into()), threads: Some(2) };
    let cfg = cli::load_config(&path, &overrides).unwrap();
    assert_eq!((cfg.run.seed, cfg.run.train.seed, cfg.run.batch.threads), (9, 9, 2));
    assert_eq!(cfg.run.out_dir, PathBuf::from("elsewhere"));
}

fn rollout_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn pd_circle_rollout_has_one_row_per_step_on_the_circle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cli::load_config(&shipped("circle"), &Overrides { out_dir: Some(dir.path().into()), ..Default::default() }).unwrap();
    let csv = dir.path().join("circle.csv");
    let rows = cli::cmd_rollout(&cfg, &PolicySource::Pd, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows, cfg.run.task.episode_len);
    assert_eq!(text.lines().count(), cfg.run.task.episode_len + 1);
    assert_eq!(text.lines().next().unwrap(), cli::rollout_header(8).join(","));

    let traj = &cfg.run.task.trajectory;
    for (k, row) in rollout_rows(&csv).iter().enumerate() {
        assert!((row[0] - k as f64 * 0.05).abs() < 1e-12);
        let (rx, ry, rz) = (row[row.len() - 3], row[row.len() - 2], row[row.len() - 1]);
        let r = ((rx - traj.center[0]).powi(2) + (ry - traj.center[1]).powi(2)).sqrt();
        assert!((r - traj.radius).abs() < 1e-12 && rz == traj.depth, "row {k}");
        assert!(row[13..21].iter().all(|a| (-1.0..=1.0).contains(a)));
    }
    let dev = cli::replay_max_deviation(&csv, &cfg.run.task, &cfg.vehicle).unwrap();
    assert!(dev <= 1e-9, "{dev}");
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&write_config(dir.path(), "seed = 4\n[task]\nepisode_len = 20"));
    let csv = dir.path().join("r.csv");
    cli::cmd_rollout(&cfg, &PolicySource::Pd, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[10].split(',').map(String::from).collect();
    fields[13] = "0.123".into();
    lines[10] = fields.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    assert!(cli::replay_max_deviation(&csv, &cfg.run.task, &cfg.vehicle).unwrap() > 1e-6);
}

#[test]
fn eval_of_one_episode_equals_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&write_config(dir.path(), "seed = 11\n[task]\nkind = \"helix\""));
    let report = cli::cmd_eval(&cfg, &PolicySource::Pd, Some(1)).unwrap();
    let direct = evaluate(&PdController::new(cfg.run.pd), &cfg.run.task, &cfg.vehicle, 1, 11, cfg.run.batch.threads).unwrap();
    assert_eq!(report, direct);
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(cli::EVAL_FILE)).unwrap()).unwrap();
    assert_eq!(written["episodes"], 1);
    assert_eq!(written["seed"], 11);
    assert_eq!(written["mean_pos_err_m"].as_f64().unwrap(), report.mean_pos_err_m);
    assert!(written.get("max_pos_err_m").is_some() && written.get("mean_return").is_some());
    assert_eq!(cli::cmd_eval(&cfg, &PolicySource::Pd, Some(1)).unwrap(), report);
}

/// A neutrally trimmed vehicle placed at rest on the target with zero thrust
/// stays there, so the evaluated error must be exactly zero.
#[test]
fn teleported_vehicle_scores_zero_error() {
    struct Idle;
    impl Controller for Idle {
        fn act_batch(&self, _: &uuvsim::batch::EnvBatch, actions: &mut [f64]) {
            actions.fill(0.0);
        }
    }
    let mut params = VehicleParams::bluerov2_heavy();
    params.buoyancy = params.weight;
    params.r_b = params.r_g;
    let spec = TaskSpec { episode_len: 50, ..TaskSpec::new(TaskKind::StationKeeping) };
    let target = spec.target;
    let report = evaluate_with_hook(&Idle, &spec, &params, 8, 3, 1, |batch| {
        for env in 0..batch.n_envs() {
            let step = batch.step_counters()[env];
            batch.set_state(env, State::at_rest(target), step);
        }
    })
    .unwrap();
    assert_eq!(report.mean_pos_err_m, 0.0);
    assert_eq!(report.max_pos_err_m, 0.0);

    // and without the teleport the same episodes are not trivially zero
    let free = evaluate(&Idle, &spec, &params, 8, 3, 1).unwrap();
    assert!(free.mean_pos_err_m > 0.1);
}

#[test]
fn pd_baseline_stays_finite_on_every_task() {
    for name in CONFIGS {
        let cfg = load(&shipped(name));
        let report = evaluate(&PdController::new(cfg.run.pd), &cfg.run.task, &cfg.vehicle, 8, 1, 1).unwrap();
        assert!(report.mean_pos_err_m.is_finite() && report.max_pos_err_m.is_finite(), "{name}");
        assert!(report.mean_pos_err_m < 1.0, "{name}: {}", report.mean_pos_err_m);
    }
}

#[test]
fn run_config_round_trips_through_toml() {
    let cfg = load(&shipped("lemniscate"));
    let text = toml::to_string(&cfg.run).unwrap();
    let again = RunConfig::from_toml_str(&text, Path::new("x.toml")).unwrap();
    assert_eq!(again, cfg.run);
}

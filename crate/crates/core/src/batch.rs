//! Lockstep execution of many environments.
//!
//! States live in structure-of-arrays form: one contiguous column per state
//! component, indexed by environment. A step partitions the environments
//! into contiguous ranges and runs the ranges on a rayon pool. Environments
//! never read each other's data and each one draws from its own counted RNG
//! stream, so results are bit-identical for any thread count and equal to
//! running the environments one by one (see [`AutoResetEnv`]).

use std::time::Instant;

use rand::{Rng, RngExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ParamsError, State, Vehicle, VehicleParams};
use crate::rng::{env_stream, stream, EnvRng, AUX_STREAM};
use crate::tasks::{self, observe_into, Env, StepInfo, TaskError, TaskSpec, Termination};

const STATE_DIM: usize = 12;

/// Domain-randomization ranges. Multiplicative factors are drawn
/// log-uniformly, offsets uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationRanges {
    /// Scales mass, inertia and weight together.
    pub mass: [f64; 2],
    /// Scales the diagonal of the added-mass matrix.
    pub added_mass: [f64; 2],
    pub damping_linear: [f64; 2],
    pub damping_quadratic: [f64; 2],
    /// Drawn independently for every thruster.
    pub max_thrust: [f64; 2],
    /// Offset added to each component of the center of buoyancy, m.
    pub r_b_offset: [f64; 2],
    /// Scales the buoyancy-to-weight ratio.
    pub buoyancy_ratio: [f64; 2],
    /// Resample parameters at every reset instead of once at creation.
    pub per_episode: bool,
}

impl Default for RandomizationRanges {
    /// Identity ranges: sampling returns the base parameters unchanged.
    fn default() -> Self {
        Self {
            mass: [1.0, 1.0],
            added_mass: [1.0, 1.0],
            damping_linear: [1.0, 1.0],
            damping_quadratic: [1.0, 1.0],
            max_thrust: [1.0, 1.0],
            r_b_offset: [0.0, 0.0],
            buoyancy_ratio: [1.0, 1.0],
            per_episode: false,
        }
    }
}

impl RandomizationRanges {
    /// Moderate ranges, matching the commented-out block in the example configs.
    pub fn moderate() -> Self {
        Self {
            mass: [0.9, 1.1],
            added_mass: [0.8, 1.2],
            damping_linear: [0.7, 1.3],
            damping_quadratic: [0.7, 1.3],
            max_thrust: [0.9, 1.1],
            r_b_offset: [-0.005, 0.005],
            buoyancy_ratio: [0.995, 1.01],
            per_episode: false,
        }
    }

    pub fn validate(&self) -> Result<(), BatchError> {
        let multiplicative = [
            ("mass", self.mass),
            ("added_mass", self.added_mass),
            ("damping_linear", self.damping_linear),
            ("damping_quadratic", self.damping_quadratic),
            ("max_thrust", self.max_thrust),
            ("buoyancy_ratio", self.buoyancy_ratio),
        ];
        for (name, [lo, hi]) in multiplicative {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(BatchError::Ranges(format!("{name}: need 0 < low <= high, got [{lo}, {hi}]")));
            }
        }
        let [lo, hi] = self.r_b_offset;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(BatchError::Ranges(format!("r_b_offset: need low <= high, got [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("a batch needs at least one environment")]
    Empty,
    #[error("invalid randomization ranges: {0}")]
    Ranges(String),
    #[error("environment {index}: randomized parameters are invalid: {source}")]
    Params { index: usize, source: ParamsError },
    #[error("action array has {got} values, expected {envs}×{actions}")]
    ActionShape { envs: usize, actions: usize, got: usize },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    let u: f64 = rng.random();
    lo + u * (hi - lo)
}

/// Draws one randomized parameter set. The number of draws taken from `rng`
/// depends only on the thruster count.
pub fn sample_params<R: Rng + ?Sized>(base: &VehicleParams, ranges: &RandomizationRanges, rng: &mut R) -> VehicleParams {
    let k_mass = log_uniform(rng, ranges.mass);
    let k_added = log_uniform(rng, ranges.added_mass);
    let k_lin = log_uniform(rng, ranges.damping_linear);
    let k_quad = log_uniform(rng, ranges.damping_quadratic);
    let k_thrust: Vec<f64> = base.thrusters.iter().map(|_| log_uniform(rng, ranges.max_thrust)).collect();
    let offset: [f64; 3] = std::array::from_fn(|_| uniform(rng, ranges.r_b_offset));
    let k_ratio = log_uniform(rng, ranges.buoyancy_ratio);

    let mut p = base.clone();
    p.mass *= k_mass;
    p.inertia.iter_mut().flatten().for_each(|v| *v *= k_mass);
    p.weight *= k_mass;
    p.buoyancy = base.buoyancy * k_mass * k_ratio;
    for i in 0..6 {
        p.added_mass[i][i] *= k_added;
    }
    p.damping_linear.iter_mut().flatten().for_each(|v| *v *= k_lin);
    p.damping_quadratic.iter_mut().for_each(|v| *v *= k_quad);
    for (t, k) in p.thrusters.iter_mut().zip(k_thrust) {
        t.max_thrust *= k;
    }
    for (r, d) in p.r_b.iter_mut().zip(offset) {
        *r += d;
    }
    p
}

fn build_env_rng(
    base: &VehicleParams,
    ranges: Option<&RandomizationRanges>,
    root_seed: u64,
    env_id: usize,
) -> Result<(Vehicle, EnvRng), BatchError> {
    let mut rng = env_stream(root_seed, env_id);
    let params = match ranges {
        Some(r) => sample_params(base, r, &mut rng),
        None => base.clone(),
    };
    let vehicle = Vehicle::new(params).map_err(|source| BatchError::Params { index: env_id, source })?;
    Ok((vehicle, rng))
}

/// Single environment with the batch engine's auto-reset and
/// re-randomization rules, stepped on the scalar code path. This is the
/// reference the batch is checked against.
#[derive(Debug, Clone)]
pub struct AutoResetEnv {
    env: Env,
    base: VehicleParams,
    ranges: Option<RandomizationRanges>,
}

impl AutoResetEnv {
    pub fn new(
        spec: TaskSpec,
        base: VehicleParams,
        ranges: Option<RandomizationRanges>,
        root_seed: u64,
        env_id: usize,
    ) -> Result<Self, BatchError> {
        if let Some(r) = &ranges {
            r.validate()?;
        }
        let (vehicle, rng) = build_env_rng(&base, ranges.as_ref(), root_seed, env_id)?;
        let env = Env::new(spec, vehicle, rng)?;
        Ok(Self { env, base, ranges })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn observation(&self) -> Vec<f64> {
        self.env.observation()
    }

    /// Steps; on `done` resets and returns the fresh observation together
    /// with the reward and info of the terminating step.
    pub fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64, bool, StepInfo), BatchError> {
        let t = self.env.step(action)?;
        if !t.done {
            return Ok((t.obs, t.reward, false, t.info));
        }
        if let Some(r) = self.ranges.as_ref().filter(|r| r.per_episode) {
            let params = sample_params(&self.base, r, self.env.rng_mut());
            let vehicle = Vehicle::new(params).map_err(|source| BatchError::Params { index: 0, source })?;
            self.env.set_vehicle(vehicle);
        }
        let obs = self.env.reset();
        Ok((obs, t.reward, true, t.info))
    }
}

/// Borrowed results of the latest [`EnvBatch::step`].
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    /// `M × obs_dim`, env-major. Post-reset observation for finished envs.
    pub obs: &'a [f64],
    pub rewards: &'a [f64],
    pub dones: &'a [bool],
    /// Position error after the step (before any reset), m.
    pub position_errors: &'a [f64],
    pub terminations: &'a [Option<Termination>],
}

/// M environments sharing a task, stepped in lockstep.
pub struct EnvBatch {
    spec: TaskSpec,
    base: VehicleParams,
    ranges: Option<RandomizationRanges>,
    root_seed: u64,
    n_envs: usize,
    n_actions: usize,
    obs_dim: usize,
    vehicles: Vec<Vehicle>,
    /// One column per state component: x y z φ θ ψ u v w p q r.
    columns: [Vec<f64>; STATE_DIM],
    steps: Vec<usize>,
    rngs: Vec<EnvRng>,
    obs: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    position_errors: Vec<f64>,
    terminations: Vec<Option<Termination>>,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for EnvBatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnvBatch")
            .field("kind", &self.spec.kind)
            .field("n_envs", &self.n_envs)
            .field("threads", &self.threads())
            .finish_non_exhaustive()
    }
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool, BatchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))
}

/// Mutable view of a contiguous range of environments.
struct Chunk<'a> {
    columns: [&'a mut [f64]; STATE_DIM],
    vehicles: &'a mut [Vehicle],
    steps: &'a mut [usize],
    rngs: &'a mut [EnvRng],
    obs: &'a mut [f64],
    rewards: &'a mut [f64],
    dones: &'a mut [bool],
    position_errors: &'a mut [f64],
    terminations: &'a mut [Option<Termination>],
    actions: &'a [f64],
}

struct Shared<'a> {
    spec: &'a TaskSpec,
    base: &'a VehicleParams,
    ranges: Option<&'a RandomizationRanges>,
    obs_dim: usize,
    n_actions: usize,
}

impl Chunk<'_> {
    fn run(self, shared: &Shared<'_>) -> Result<(), BatchError> {
        let Chunk { columns, vehicles, steps, rngs, obs, rewards, dones, position_errors, terminations, actions } = self;
        let spec = shared.spec;
        for i in 0..steps.len() {
            let state = State::from_array(std::array::from_fn(|k| columns[k][i]));
            let action = &actions[i * shared.n_actions..(i + 1) * shared.n_actions];
            let out = tasks::advance(spec, &vehicles[i], &state, action, steps[i])?;
            let obs_row = &mut obs[i * shared.obs_dim..(i + 1) * shared.obs_dim];
            let done = out.termination.is_some();
            let next = if done {
                if let Some(r) = shared.ranges.filter(|r| r.per_episode) {
                    let params = sample_params(shared.base, r, &mut rngs[i]);
                    vehicles[i] = Vehicle::new(params).map_err(|source| BatchError::Params { index: i, source })?;
                }
                steps[i] = 0;
                tasks::reset(spec, &mut rngs[i])
            } else {
                steps[i] += 1;
                out.state
            };
            observe_into(spec, &next, steps[i], obs_row);
            for (k, v) in next.to_array().into_iter().enumerate() {
                columns[k][i] = v;
            }
            rewards[i] = out.reward;
            dones[i] = done;
            position_errors[i] = out.position_error;
            terminations[i] = out.termination;
        }
        Ok(())
    }
}

impl EnvBatch {
    /// Creates `n_envs` environments. Environment `i` draws from stream `i`
    /// of `root_seed`: first its randomized parameters (if `ranges` is set),
    /// then its initial state.
    pub fn new(
        spec: TaskSpec,
        base: VehicleParams,
        ranges: Option<RandomizationRanges>,
        n_envs: usize,
        root_seed: u64,
        threads: usize,
    ) -> Result<Self, BatchError> {
        if n_envs == 0 {
            return Err(BatchError::Empty);
        }
        spec.validate()?;
        if let Some(r) = &ranges {
            r.validate()?;
        }
        let pool = build_pool(threads)?;
        let built: Vec<(Vehicle, EnvRng)> = pool.install(|| {
            (0..n_envs)
                .into_par_iter()
                .map(|i| build_env_rng(&base, ranges.as_ref(), root_seed, i))
                .collect::<Result<_, _>>()
        })?;
        let n_actions = built[0].0.n_thrusters();
        let obs_dim = spec.obs_dim();
        let mut vehicles = Vec::with_capacity(n_envs);
        let mut rngs = Vec::with_capacity(n_envs);
        let mut columns: [Vec<f64>; STATE_DIM] = std::array::from_fn(|_| Vec::with_capacity(n_envs));
        let mut obs = vec![0.0; n_envs * obs_dim];
        for (i, (vehicle, mut rng)) in built.into_iter().enumerate() {
            let state = tasks::reset(&spec, &mut rng);
            observe_into(&spec, &state, 0, &mut obs[i * obs_dim..(i + 1) * obs_dim]);
            for (k, v) in state.to_array().into_iter().enumerate() {
                columns[k].push(v);
            }
            vehicles.push(vehicle);
            rngs.push(rng);
        }
        Ok(Self {
            spec,
            base,
            ranges,
            root_seed,
            n_envs,
            n_actions,
            obs_dim,
            vehicles,
            columns,
            steps: vec![0; n_envs],
            rngs,
            obs,
            rewards: vec![0.0; n_envs],
            dones: vec![false; n_envs],
            position_errors: vec![0.0; n_envs],
            terminations: vec![None; n_envs],
            pool,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Rebuilds the worker pool. `0` means one thread per available core.
    pub fn set_threads(&mut self, threads: usize) -> Result<(), BatchError> {
        self.pool = build_pool(threads)?;
        Ok(())
    }

    /// Current observations, `M × obs_dim`, env-major.
    pub fn observations(&self) -> &[f64] {
        &self.obs
    }

    pub fn state(&self, env: usize) -> State {
        State::from_array(std::array::from_fn(|k| self.columns[k][env]))
    }

    /// All states as an `M × 12` env-major matrix.
    pub fn state_matrix(&self) -> Vec<f64> {
        (0..self.n_envs).flat_map(|i| self.state(i).to_array()).collect()
    }

    /// Steps taken in each environment's current episode.
    pub fn step_counters(&self) -> &[usize] {
        &self.steps
    }

    pub fn vehicle(&self, env: usize) -> &Vehicle {
        &self.vehicles[env]
    }

    /// Overwrites one environment's state and episode step, refreshing its
    /// observation row.
    pub fn set_state(&mut self, env: usize, state: State, step: usize) {
        for (k, v) in state.to_array().into_iter().enumerate() {
            self.columns[k][env] = v;
        }
        self.steps[env] = step;
        let d = self.obs_dim;
        observe_into(&self.spec, &state, step, &mut self.obs[env * d..(env + 1) * d]);
    }

    fn chunk_len(&self) -> usize {
        let parts = self.threads().max(1) * 4;
        self.n_envs.div_ceil(parts).max(8)
    }

    /// Advances every environment by one control step with `actions`
    /// (`M × N`, env-major). Finished environments are reset in place.
    pub fn step(&mut self, actions: &[f64]) -> Result<StepView<'_>, BatchError> {
        if actions.len() != self.n_envs * self.n_actions {
            return Err(BatchError::ActionShape { envs: self.n_envs, actions: self.n_actions, got: actions.len() });
        }
        let chunk = self.chunk_len();
        let shared = Shared {
            spec: &self.spec,
            base: &self.base,
            ranges: self.ranges.as_ref(),
            obs_dim: self.obs_dim,
            n_actions: self.n_actions,
        };
        let mut column_chunks: Vec<_> = self.columns.iter_mut().map(|c| c.chunks_mut(chunk)).collect();
        let mut vehicles = self.vehicles.chunks_mut(chunk);
        let mut steps = self.steps.chunks_mut(chunk);
        let mut rngs = self.rngs.chunks_mut(chunk);
        let mut obs = self.obs.chunks_mut(chunk * self.obs_dim);
        let mut rewards = self.rewards.chunks_mut(chunk);
        let mut dones = self.dones.chunks_mut(chunk);
        let mut errors = self.position_errors.chunks_mut(chunk);
        let mut terms = self.terminations.chunks_mut(chunk);
        let mut acts = actions.chunks(chunk * self.n_actions);

        let mut work = Vec::with_capacity(self.n_envs.div_ceil(chunk));
        for _ in 0..self.n_envs.div_ceil(chunk) {
            work.push(Chunk {
                columns: std::array::from_fn(|k| column_chunks[k].next().expect("column chunk")),
                vehicles: vehicles.next().expect("chunk"),
                steps: steps.next().expect("chunk"),
                rngs: rngs.next().expect("chunk"),
                obs: obs.next().expect("chunk"),
                rewards: rewards.next().expect("chunk"),
                dones: dones.next().expect("chunk"),
                position_errors: errors.next().expect("chunk"),
                terminations: terms.next().expect("chunk"),
                actions: acts.next().expect("chunk"),
            });
        }
        self.pool.install(|| work.into_par_iter().try_for_each(|c| c.run(&shared)))?;

        Ok(StepView {
            obs: &self.obs,
            rewards: &self.rewards,
            dones: &self.dones,
            position_errors: &self.position_errors,
            terminations: &self.terminations,
        })
    }
}

/// Throughput measurement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub env_steps_per_sec: f64,
    pub wall_time_s: f64,
    #[serde(rename = "M")]
    pub envs: usize,
    pub threads: usize,
}

/// Steps `batch` `n_steps` times with a fixed uniformly random action array
/// on `threads` workers and reports the env-step rate.
pub fn bench_throughput(batch: &mut EnvBatch, n_steps: usize, threads: usize) -> Result<BenchReport, BatchError> {
    batch.set_threads(threads)?;
    let mut rng = stream(batch.root_seed(), AUX_STREAM);
    let actions: Vec<f64> = (0..batch.n_envs() * batch.n_actions()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let n_steps = n_steps.max(1);
    let start = Instant::now();
    for _ in 0..n_steps {
        batch.step(&actions)?;
    }
    let wall = start.elapsed().as_secs_f64().max(1e-12);
    Ok(BenchReport {
        env_steps_per_sec: (batch.n_envs() * n_steps) as f64 / wall,
        wall_time_s: wall,
        envs: batch.n_envs(),
        threads: batch.threads(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::TaskKind;

    fn base() -> VehicleParams {
        VehicleParams::bluerov2_heavy()
    }

    #[test]
    fn identity_ranges_return_base() {
        let mut rng = env_stream(1, 0);
        let p = sample_params(&base(), &RandomizationRanges::default(), &mut rng);
        assert_eq!(p, base());
    }

    #[test]
    fn sampled_params_stay_in_range_and_valid() {
        let ranges = RandomizationRanges { mass: [0.9, 1.1], ..RandomizationRanges::moderate() };
        let b = base();
        let mut rng = env_stream(2, 0);
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for _ in 0..10_000 {
            let p = sample_params(&b, &ranges, &mut rng);
            let k = p.mass / b.mass;
            lo = lo.min(k);
            hi = hi.max(k);
            assert!((0.9 - 1e-12..=1.1 + 1e-12).contains(&k));
        }
        assert!(lo < 0.91 && hi > 1.09, "range poorly covered: [{lo}, {hi}]");
        for _ in 0..200 {
            let v = sample_params(&b, &ranges, &mut rng).validate().unwrap();
            let d = v.params().damping_linear;
            let m = nalgebra::Matrix6::from_fn(|i, j| d[i][j]);
            assert!(m.symmetric_eigenvalues().min() >= -1e-12);
        }
    }

    #[test]
    fn ranges_validation() {
        let bad = RandomizationRanges { mass: [0.0, 1.0], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RandomizationRanges { r_b_offset: [0.1, -0.1], ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(RandomizationRanges::moderate().validate().is_ok());
    }

    #[test]
    fn impossible_ranges_name_the_env() {
        // shrinking added mass far enough cannot break PD here, so break the
        // base instead: negative heave added mass that randomization scales up
        let mut b = base();
        b.added_mass[2][2] = -13.0;
        let ranges = RandomizationRanges { added_mass: [1.0, 1.2], ..Default::default() };
        let err = EnvBatch::new(TaskSpec::default(), b, Some(ranges), 50, 0, 1).unwrap_err();
        assert!(matches!(err, BatchError::Params { .. }), "{err}");
    }

    #[test]
    fn creation_is_deterministic() {
        let spec = TaskSpec::new(TaskKind::Helix);
        let a = EnvBatch::new(spec.clone(), base(), Some(RandomizationRanges::moderate()), 37, 5, 2).unwrap();
        let b = EnvBatch::new(spec, base(), Some(RandomizationRanges::moderate()), 37, 5, 1).unwrap();
        assert_eq!(a.state_matrix(), b.state_matrix());
        assert_eq!(a.observations(), b.observations());
        for i in 0..37 {
            assert_eq!(a.vehicle(i), b.vehicle(i));
        }
    }

    #[test]
    fn action_shape_is_checked() {
        let mut b = EnvBatch::new(TaskSpec::default(), base(), None, 3, 0, 1).unwrap();
        assert!(matches!(b.step(&[0.0; 5]), Err(BatchError::ActionShape { envs: 3, actions: 8, got: 5 })));
    }

    #[test]
    fn zero_actions_at_equilibrium() {
        let mut p = base();
        p.buoyancy = p.weight;
        p.r_b = p.r_g;
        let spec = TaskSpec::default();
        let mut b = EnvBatch::new(spec.clone(), p, None, 4, 0, 1).unwrap();
        // place every env at rest on the target
        for col in 0..STATE_DIM {
            let v = crate::dynamics::State::at_rest(spec.target).to_array()[col];
            b.columns[col].iter_mut().for_each(|c| *c = v);
        }
        for _ in 0..5 {
            let out = b.step(&[0.0; 32]).unwrap();
            assert!(out.rewards.iter().all(|r| *r == 0.0));
            assert!(out.dones.iter().all(|d| !d));
        }
    }

    #[test]
    fn auto_reset_restarts_counter() {
        let spec = TaskSpec { episode_len: 3, ..TaskSpec::default() };
        let mut b = EnvBatch::new(spec.clone(), base(), None, 2, 9, 1).unwrap();
        for k in 0..3 {
            let out = b.step(&[0.2; 16]).unwrap();
            assert_eq!(out.dones.iter().all(|d| *d), k == 2);
        }
        assert_eq!(b.step_counters(), &[0, 0]);
        let spawn = spec.spawn_pose();
        for i in 0..2 {
            let s = b.state(i);
            assert!(s.pose.distance(&spawn) <= 3f64.sqrt());
            assert_eq!(s.vel, Default::default());
        }
    }

    #[test]
    fn matches_scalar_envs_with_per_episode_randomization() {
        let spec = TaskSpec { episode_len: 7, ..TaskSpec::new(TaskKind::Circle) };
        let ranges = RandomizationRanges { per_episode: true, ..RandomizationRanges::moderate() };
        let n = 5;
        let mut batch = EnvBatch::new(spec.clone(), base(), Some(ranges.clone()), n, 3, 2).unwrap();
        let mut scalars: Vec<_> = (0..n)
            .map(|i| AutoResetEnv::new(spec.clone(), base(), Some(ranges.clone()), 3, i).unwrap())
            .collect();
        let mut rng = stream(77, 0);
        for _ in 0..20 {
            let actions: Vec<f64> = (0..n * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out = batch.step(&actions).unwrap();
            for (i, env) in scalars.iter_mut().enumerate() {
                let (obs, r, d, _) = env.step(&actions[i * 8..(i + 1) * 8]).unwrap();
                assert_eq!(&out.obs[i * spec.obs_dim()..(i + 1) * spec.obs_dim()], &obs[..]);
                assert_eq!(out.rewards[i], r);
                assert_eq!(out.dones[i], d);
            }
        }
    }

    #[test]
    fn bench_reports_positive_rate() {
        let mut b = EnvBatch::new(TaskSpec::default(), base(), None, 1, 0, 1).unwrap();
        let r = bench_throughput(&mut b, 10, 1).unwrap();
        assert!(r.env_steps_per_sec > 0.0 && r.wall_time_s > 0.0);
        assert_eq!((r.envs, r.threads), (1, 1));
    }
}

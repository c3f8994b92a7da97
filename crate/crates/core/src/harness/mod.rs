//! Benchmark harness: N robot profiles x M seeded learning runs, with CSV
//! curves, summary statistics, SVG plots and zero-shot transfer evaluation.
//!
//! Every run is a pure function of (config, seed): results merge in
//! deterministic (robot, run) order no matter how the worker pool schedules
//! them, and rerunning a benchmark reproduces its output files byte for
//! byte.

pub mod csvio;
pub mod plot;

use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::device::{
    ClientError, DeviceClient, InProcessTransport, MockFirmware, RobotImperfection,
};
use crate::dial_env::{
    angle_from_adc, reward_with_tol, DialEnv, DialEnvConfig, EnvError, StepOutcome,
};
use crate::kinematics::{
    denormalize_params, CartesianPoint, KinematicsError, RobotGeometry, WorkspaceCylinder,
};
use crate::policy::{
    init_policy, reps_update, sample, should_terminate, EpisodeRecord, GaussianPolicy,
    PolicyError, RepsConfig, SkillParams,
};

pub use crate::device::ClientError as DeviceClientError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("kinematics: {0}")]
    Kinematics(#[from] KinematicsError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("device: {0}")]
    Device(#[from] ClientError),
    #[error("parse error in {file}: {msg}")]
    Parse { file: String, msg: String },
}

/// How episodes reach the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    /// Call the environment in-process.
    Direct,
    /// Go through the text protocol and the mock firmware.
    Protocol,
}

/// Workspace section of the config file. `z_top` is normally omitted and
/// computed from the home pose of the configured geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub diameter: f64,
    pub height: f64,
    pub z_top: Option<f64>,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            diameter: 60.0,
            height: 40.0,
            z_top: None,
        }
    }
}

/// The full experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed_base: u64,
    pub runs_per_robot: usize,
    pub transport: Transport,
    pub reps: RepsConfig,
    pub geometry: RobotGeometry,
    pub workspace: WorkspaceConfig,
    pub env: DialEnvConfig,
    pub robots: Vec<RobotImperfection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed_base: 20220 ^ 0x5eed,
            runs_per_robot: 7,
            transport: Transport::Protocol,
            reps: RepsConfig::default(),
            geometry: RobotGeometry::default(),
            workspace: WorkspaceConfig::default(),
            env: DialEnvConfig::default(),
            robots: RobotImperfection::shipped(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.geometry
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.env
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.reps.validate().map_err(HarnessError::Config)?;
        if self.runs_per_robot == 0 {
            return Err(HarnessError::Config("runs_per_robot must be >= 1".into()));
        }
        if self.robots.is_empty() {
            return Err(HarnessError::Config("need at least one robot profile".into()));
        }
        if !(self.workspace.diameter > 0.0) || !(self.workspace.height > 0.0) {
            return Err(HarnessError::Config(
                "workspace diameter and height must be positive".into(),
            ));
        }
        // the workspace must resolve and contain the push height
        let ws = self.resolved_workspace()?;
        if self.env.push_z < ws.z_bottom() || self.env.push_z > ws.z_top {
            return Err(HarnessError::Config(format!(
                "push_z {} outside workspace z [{}, {}]",
                self.env.push_z,
                ws.z_bottom(),
                ws.z_top
            )));
        }
        Ok(())
    }

    pub fn resolved_workspace(&self) -> Result<WorkspaceCylinder, HarnessError> {
        Ok(match self.workspace.z_top {
            Some(z_top) => WorkspaceCylinder {
                diameter: self.workspace.diameter,
                height: self.workspace.height,
                z_top,
            },
            None => WorkspaceCylinder::from_geometry(
                self.workspace.diameter,
                self.workspace.height,
                &self.geometry,
            )?,
        })
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one learning run. Robots are identified by their profile seed,
/// so identical profiles replay identical episodes run for run.
pub fn run_seed(seed_base: u64, robot: &RobotImperfection, run_index: usize) -> u64 {
    seed_base ^ splitmix64(robot.seed ^ splitmix64(run_index as u64))
}

const NOISE_STREAM: u64 = 0x4E4F_4953_45;
const EVAL_STREAM: u64 = 0x4556_414C;

// --- episode execution ------------------------------------------------------

/// Positions commanded over the wire carry two decimals (0.01 mm).
const WIRE_RESOLUTION_MM: f64 = 0.01;
/// Radial clamping backs off far enough that wire rounding cannot push a
/// boundary waypoint back outside the cylinder (half cell diagonal).
const CLAMP_MARGIN_MM: f64 = 0.0075;

fn wire_round(v: f64) -> f64 {
    (v / WIRE_RESOLUTION_MM).round() * WIRE_RESOLUTION_MM
}

/// The two commanded waypoints of one skill execution, at command
/// resolution. Both transports execute exactly these positions, so a
/// direct run replays like a protocol run with an ideal robot.
fn command_waypoints(
    params: &SkillParams,
    env_cfg: &DialEnvConfig,
    ws: &WorkspaceCylinder,
) -> (CartesianPoint, CartesianPoint) {
    let wp = denormalize_params(params);
    let (mut a, mut b) = wp.at_height(env_cfg.push_z);
    let r_max = (ws.diameter / 2.0 - CLAMP_MARGIN_MM).max(0.0);
    for p in [&mut a, &mut b] {
        let r = p.radial();
        if r > r_max {
            let s = r_max / r;
            p.x *= s;
            p.y *= s;
        }
        p.x = wire_round(p.x);
        p.y = wire_round(p.y);
        p.z = wire_round(p.z);
    }
    (a, b)
}

/// Runs one episode either in-process or through the protocol. Owns the
/// environment (direct) or the firmware session (protocol).
enum Executor {
    Direct {
        env: DialEnv,
        workspace: WorkspaceCylinder,
    },
    Protocol {
        client: DeviceClient<InProcessTransport>,
        env_cfg: DialEnvConfig,
        workspace: WorkspaceCylinder,
    },
}

impl Executor {
    fn new(
        cfg: &ExperimentConfig,
        robot: &RobotImperfection,
        noise_seed: u64,
    ) -> Result<Self, HarnessError> {
        let ws = cfg.resolved_workspace()?;
        let env = DialEnv::new(cfg.env, ws, noise_seed)?;
        Ok(match cfg.transport {
            Transport::Direct => Executor::Direct {
                env,
                workspace: ws,
            },
            Transport::Protocol => {
                let fw = MockFirmware::new(&cfg.geometry, ws, *robot, env);
                Executor::Protocol {
                    client: DeviceClient::new(InProcessTransport::new(fw)),
                    env_cfg: cfg.env,
                    workspace: ws,
                }
            }
        })
    }

    /// Reset, execute the skill, observe. The protocol path scripts
    /// home -> waypoint 1 -> waypoint 2 -> pot readback and scores the
    /// quantized readout, which is all a serial host can see.
    fn run_episode(&mut self, params: &SkillParams) -> Result<StepOutcome, HarnessError> {
        match self {
            Executor::Direct { env, workspace } => {
                env.reset()?;
                let (a, b) = command_waypoints(params, env.config(), workspace);
                env.sweep_segment(&a, &b);
                Ok(env.finish_episode())
            }
            Executor::Protocol {
                client,
                env_cfg,
                workspace,
            } => {
                client.home()?;
                let (a, b) = command_waypoints(params, env_cfg, workspace);
                client.goto(&a)?;
                client.goto(&b)?;
                let pot = client.read_pot()?;
                let measured = angle_from_adc(pot, env_cfg)?;
                let err = measured - env_cfg.target_angle;
                Ok(StepOutcome {
                    final_angle: measured,
                    reward: reward_with_tol(measured, env_cfg.target_angle, env_cfg.success_tol),
                    success: err.abs() < env_cfg.success_tol,
                    adc: pot,
                })
            }
        }
    }
}

// --- learning runs ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged { updates: usize },
    MaxUpdates,
}

impl RunStatus {
    pub fn converged(&self) -> bool {
        matches!(self, RunStatus::Converged { .. })
    }
}

/// One row of a learning curve: the policy after `update` updates and the
/// batch that was rolled out from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub update: usize,
    pub mean: [f64; 4],
    pub std: [f64; 4],
    pub batch_reward_mean: f64,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub robot: usize,
    pub run: usize,
    pub points: Vec<CurvePoint>,
    pub status: RunStatus,
    pub final_mean: [f64; 4],
}

impl LearningCurve {
    pub fn final_batch_reward(&self) -> f64 {
        self.points
            .last()
            .map(|p| p.batch_reward_mean)
            .unwrap_or(f64::NAN)
    }
}

/// Execute one full learning run against one robot profile.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    robot_index: usize,
    run_index: usize,
) -> Result<LearningCurve, HarnessError> {
    let robot = cfg
        .robots
        .get(robot_index)
        .ok_or_else(|| HarnessError::Config(format!("no robot profile {robot_index}")))?;
    let seed = run_seed(cfg.seed_base, robot, run_index);
    let mut policy_rng = ChaCha20Rng::seed_from_u64(seed);
    let mut executor = Executor::new(cfg, robot, splitmix64(seed ^ NOISE_STREAM))?;

    let reps = cfg.reps;
    let mut policy = init_policy(&reps);
    let mut replay: Vec<EpisodeRecord> = Vec::with_capacity(reps.replay_window + reps.batch);
    let mut points = Vec::new();

    let rollout = |policy: &GaussianPolicy,
                       rng: &mut ChaCha20Rng,
                       executor: &mut Executor,
                       n: usize|
     -> Result<Vec<EpisodeRecord>, HarnessError> {
        let draws = sample(policy, rng, n)?;
        let mut out = Vec::with_capacity(n);
        for s in draws {
            let mut reward_sum = 0.0;
            let mut last = None;
            for _ in 0..reps.reward_repeats {
                let o = executor.run_episode(&s.params)?;
                reward_sum += o.reward;
                last = Some(o);
            }
            let o = last.expect("reward_repeats >= 1");
            out.push(EpisodeRecord {
                draw: s.draw,
                params: s.params,
                reward: reward_sum / reps.reward_repeats as f64,
                final_angle: o.final_angle,
                success: o.success,
            });
        }
        Ok(out)
    };

    let push_point = |points: &mut Vec<CurvePoint>,
                      update: usize,
                      policy: &GaussianPolicy,
                      batch: &[EpisodeRecord]| {
        let reward_mean = batch.iter().map(|r| r.reward).sum::<f64>() / batch.len() as f64;
        points.push(CurvePoint {
            update,
            mean: policy.mean_array(),
            std: policy.diag_std(),
            batch_reward_mean: reward_mean,
            successes: batch.iter().filter(|r| r.success).count(),
        });
    };

    let init_batch = rollout(&policy, &mut policy_rng, &mut executor, reps.init_batch)?;
    push_point(&mut points, 0, &policy, &init_batch);
    replay.extend(init_batch);
    truncate_window(&mut replay, reps.replay_window);

    let mut status = RunStatus::MaxUpdates;
    for update in 1..=reps.max_updates {
        let outcome = reps_update(&policy, &replay, &reps)?;
        policy = outcome.policy;
        let batch = rollout(&policy, &mut policy_rng, &mut executor, reps.batch)?;
        push_point(&mut points, update, &policy, &batch);
        let done = should_terminate(&batch, &reps);
        replay.extend(batch);
        truncate_window(&mut replay, reps.replay_window);
        if done {
            status = RunStatus::Converged { updates: update };
            break;
        }
    }

    Ok(LearningCurve {
        robot: robot_index,
        run: run_index,
        final_mean: policy.mean_array(),
        points,
        status,
    })
}

fn truncate_window(replay: &mut Vec<EpisodeRecord>, window: usize) {
    if replay.len() > window {
        let cut = replay.len() - window;
        replay.drain(0..cut);
    }
}

/// Execute fixed mean parameters for `episodes` episodes on one robot and
/// count successes. Device or environment failures count as unsuccessful
/// episodes, not errors.
pub fn evaluate_mean(
    cfg: &ExperimentConfig,
    robot_index: usize,
    mean: [f64; 4],
    episodes: usize,
    seed: u64,
) -> Result<usize, HarnessError> {
    let robot = cfg
        .robots
        .get(robot_index)
        .ok_or_else(|| HarnessError::Config(format!("no robot profile {robot_index}")))?;
    let mut executor = Executor::new(cfg, robot, splitmix64(seed ^ EVAL_STREAM))?;
    let params = SkillParams::new(mean[0], mean[1], mean[2], mean[3]).clamped();
    let mut successes = 0;
    for _ in 0..episodes {
        match executor.run_episode(&params) {
            Ok(o) if o.success => successes += 1,
            _ => {}
        }
    }
    Ok(successes)
}

// --- benchmark ---------------------------------------------------------------

/// Per-robot aggregate over its runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSummary {
    pub robot: usize,
    pub runs: usize,
    pub failed: usize,
    pub converged: usize,
    pub convergence_rate: f64,
    pub final_reward_mean: f64,
    pub final_reward_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPair {
    pub i: usize,
    pub j: usize,
    pub mean_abs_diff: f64,
    pub bound: f64,
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub robots: Vec<RobotSummary>,
    pub pairs: Vec<OverlapPair>,
    pub all_overlap: bool,
}

/// A run that errored out; kept in the records, never silently dropped.
#[derive(Debug)]
pub struct FailedRun {
    pub robot: usize,
    pub run: usize,
    pub error: HarnessError,
}

pub struct BenchOutcome {
    pub curves: Vec<LearningCurve>,
    pub failures: Vec<FailedRun>,
    pub summary: BenchSummary,
}

/// Mean, sample standard deviation (n-1) based standard error. A single
/// sample reports SE = 0.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn summarize(
    curves: &[LearningCurve],
    failures: &[FailedRun],
    n_robots: usize,
) -> BenchSummary {
    let mut robots = Vec::with_capacity(n_robots);
    for r in 0..n_robots {
        let mine: Vec<&LearningCurve> = curves.iter().filter(|c| c.robot == r).collect();
        let failed = failures.iter().filter(|f| f.robot == r).count();
        let finals: Vec<f64> = mine.iter().map(|c| c.final_batch_reward()).collect();
        let converged = mine.iter().filter(|c| c.status.converged()).count();
        let runs = mine.len() + failed;
        let (mean, se) = mean_se(&finals);
        robots.push(RobotSummary {
            robot: r,
            runs,
            failed,
            converged,
            convergence_rate: if runs > 0 {
                converged as f64 / runs as f64
            } else {
                0.0
            },
            final_reward_mean: mean,
            final_reward_se: se,
        });
    }
    let mut pairs = Vec::new();
    for i in 0..n_robots {
        for j in (i + 1)..n_robots {
            let diff = (robots[i].final_reward_mean - robots[j].final_reward_mean).abs();
            let bound = 2.0 * (robots[i].final_reward_se + robots[j].final_reward_se);
            pairs.push(OverlapPair {
                i,
                j,
                mean_abs_diff: diff,
                bound,
                overlap: diff <= bound,
            });
        }
    }
    let all_overlap = pairs.iter().all(|p| p.overlap);
    BenchSummary {
        robots,
        pairs,
        all_overlap,
    }
}

fn worker_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BENCH_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| HarnessError::Config(format!("BENCH_THREADS={v} is not a number")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))
}

/// Run the whole experiment matrix and write all artifacts into `out_dir`:
/// per-run curve CSVs, summary and overlap CSVs, final policy means, the
/// resolved config, and the SVG plots.
pub fn run_benchmark(cfg: &ExperimentConfig, out_dir: &Path) -> Result<BenchOutcome, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.robots.len())
        .flat_map(|r| (0..cfg.runs_per_robot).map(move |n| (r, n)))
        .collect();
    let pool = worker_pool()?;
    let results: Vec<Result<LearningCurve, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(r, n)| run_experiment(cfg, *r, *n))
            .collect()
    });

    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for ((robot, run), res) in jobs.into_iter().zip(results) {
        match res {
            Ok(c) => curves.push(c),
            Err(error) => failures.push(FailedRun { robot, run, error }),
        }
    }

    let summary = summarize(&curves, &failures, cfg.robots.len());

    std::fs::write(out_dir.join("resolved_config.toml"), cfg.to_toml_string())?;
    for curve in &curves {
        let name = format!("curve_r{}_n{}.csv", curve.robot, curve.run);
        std::fs::write(out_dir.join(name), csvio::curve_to_csv(curve))?;
    }
    std::fs::write(
        out_dir.join("summary.csv"),
        csvio::summary_to_csv(&summary),
    )?;
    std::fs::write(out_dir.join("overlap.csv"), csvio::overlap_to_csv(&summary))?;
    std::fs::write(
        out_dir.join("final_policies.csv"),
        csvio::final_policies_to_csv(&curves, &failures),
    )?;
    plot::emit_plots(&curves, &summary, out_dir)?;

    Ok(BenchOutcome {
        curves,
        failures,
        summary,
    })
}

// --- zero-shot transfer -------------------------------------------------------

/// The learned mean of one converged run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnedSkill {
    pub robot: usize,
    pub run: usize,
    pub mean: [f64; 4],
}

/// Success of every learned skill executed on every robot profile,
/// deterministically (no parameter sampling, no readout noise).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub skills: Vec<LearnedSkill>,
    /// results[s][t]: skill s succeeded on robot t.
    pub results: Vec<Vec<bool>>,
    pub n_robots: usize,
}

impl TransferMatrix {
    /// True iff every skill learned on `src` succeeds on `dst`.
    pub fn pair_success(&self, src: usize, dst: usize) -> bool {
        let mut any = false;
        for (skill, row) in self.skills.iter().zip(&self.results) {
            if skill.robot == src {
                any = true;
                if !row[dst] {
                    return false;
                }
            }
        }
        any
    }
}

pub fn zero_shot_transfer(
    cfg: &ExperimentConfig,
    skills: &[LearnedSkill],
) -> Result<TransferMatrix, HarnessError> {
    // transfer executes deterministically: the noise channel is disabled
    let mut quiet = cfg.clone();
    quiet.env.adc_noise_sd = 0.0;
    let mut results = Vec::with_capacity(skills.len());
    for skill in skills {
        let mut row = Vec::with_capacity(cfg.robots.len());
        for target in 0..cfg.robots.len() {
            let ok = evaluate_mean(&quiet, target, skill.mean, 1, 0)? == 1;
            row.push(ok);
        }
        results.push(row);
    }
    Ok(TransferMatrix {
        skills: skills.to_vec(),
        results,
        n_robots: cfg.robots.len(),
    })
}

//! Simulated desk-scale delta-robot dial-turning benchmark.
//!
//! The crate models a small rotary delta robot that learns to turn a
//! potentiometer lever to a target angle with episodic relative entropy
//! policy search (eREPS). Everything runs in simulation: closed-form
//! kinematics, a quasi-static contact model for the lever, the robot's
//! line-oriented serial protocol backed by a mock firmware with per-robot
//! imperfections, and a benchmark harness that reproduces the multi-robot
//! convergence study (N robot profiles x M seeded runs, CSV + SVG output,
//! zero-shot transfer of learned skills between robots).
//!
//! Modules map onto the subsystems:
//! - [`kinematics`]: forward/inverse kinematics, workspace, skill
//!   parameter denormalization
//! - [`policy`]: 4D Gaussian policy and the eREPS update machinery
//! - [`dial_env`]: the potentiometer environment (reset/step, reward, ADC)
//! - [`device`]: wire protocol codec, robot imperfection profiles, mock
//!   firmware
//! - [`harness`]: experiment configuration, seeded runs, summaries, plots
//! - [`oracles`]: slow independent reference implementations used by the
//!   test suites; not part of the production path

pub mod device;
pub mod dial_env;
pub mod harness;
pub mod kinematics;
pub mod oracles;
pub mod policy;

pub use dial_env::{DialEnv, DialEnvConfig, LeverState, StepOutcome};
pub use harness::{BenchSummary, ExperimentConfig, LearningCurve, RunStatus};
pub use kinematics::{CartesianPoint, JointAngles, RobotGeometry, WorkspaceCylinder};
pub use policy::{EpisodeRecord, GaussianPolicy, RepsConfig, SkillParams};

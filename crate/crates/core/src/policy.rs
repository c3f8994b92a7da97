//! Episodic relative entropy policy search over the 4D skill parameters.
//!
//! The policy is a Gaussian over normalized `(rho1, theta1, rho2, theta2)`.
//! Each update reweights the replayed episodes by exponentiated reward with
//! a temperature chosen so the implied distribution shift stays inside a KL
//! bound, then refits the Gaussian by weighted maximum likelihood. The
//! update fits the unclipped Gaussian draws; clipping into [-1,1] is part of
//! the environment interface, not the policy.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    /// Covariance lost positive definiteness; indicates a broken update upstream.
    #[error("covariance is not positive definite")]
    CholeskyFailure,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("empty reward batch")]
    EmptyRewards,
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("sample/weight length mismatch")]
    LengthMismatch,
}

/// Normalized skill parameters, each component in [-1, 1] after clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParams {
    pub rho1: f64,
    pub theta1: f64,
    pub rho2: f64,
    pub theta2: f64,
}

impl SkillParams {
    pub const fn new(rho1: f64, theta1: f64, rho2: f64, theta2: f64) -> Self {
        SkillParams {
            rho1,
            theta1,
            rho2,
            theta2,
        }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        SkillParams::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.rho1, self.theta1, self.rho2, self.theta2)
    }

    pub fn clamped(self) -> Self {
        SkillParams::new(
            self.rho1.clamp(-1.0, 1.0),
            self.theta1.clamp(-1.0, 1.0),
            self.rho2.clamp(-1.0, 1.0),
            self.theta2.clamp(-1.0, 1.0),
        )
    }
}

/// Gaussian policy: mean and symmetric positive-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl GaussianPolicy {
    pub fn diag_std(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.covariance[(i, i)].max(0.0).sqrt();
        }
        out
    }

    pub fn mean_array(&self) -> [f64; 4] {
        [self.mean[0], self.mean[1], self.mean[2], self.mean[3]]
    }
}

/// One executed episode. `draw` is the raw Gaussian draw kept for the
/// weighted ML update; `params` is the clipped vector that was executed.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub draw: Vector4<f64>,
    pub params: SkillParams,
    pub reward: f64,
    pub final_angle: f64,
    pub success: bool,
}

/// Hyperparameters of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepsConfig {
    /// KL bound of one policy update, nats.
    pub epsilon: f64,
    /// Episodes rolled out before the first update.
    pub init_batch: usize,
    /// Episodes per subsequent batch.
    pub batch: usize,
    /// Most recent episodes reused by each update.
    pub replay_window: usize,
    /// Hard stop; a run hitting it is recorded as non-converged.
    pub max_updates: usize,
    /// Eigenvalue floor applied to every fitted covariance.
    pub cov_floor: f64,
    pub init_mean: f64,
    pub init_var: f64,
    /// Times each sampled parameter vector is executed, rewards averaged.
    pub reward_repeats: usize,
}

impl Default for RepsConfig {
    fn default() -> Self {
        RepsConfig {
            epsilon: 1.0,
            init_batch: 20,
            batch: 10,
            replay_window: 20,
            max_updates: 50,
            cov_floor: 1e-6,
            init_mean: 0.4,
            init_var: 0.15,
            reward_repeats: 1,
        }
    }
}

impl RepsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0) {
            return Err("epsilon must be > 0".into());
        }
        if self.batch == 0 || self.init_batch < self.batch || self.replay_window < self.batch {
            return Err("need init_batch >= batch >= 1 and replay_window >= batch".into());
        }
        if self.max_updates == 0 {
            return Err("max_updates must be >= 1".into());
        }
        if !(self.init_var > 0.0) || self.cov_floor < 0.0 {
            return Err("init_var must be > 0 and cov_floor >= 0".into());
        }
        if self.reward_repeats == 0 {
            return Err("reward_repeats must be >= 1".into());
        }
        Ok(())
    }
}

pub fn init_policy(cfg: &RepsConfig) -> GaussianPolicy {
    GaussianPolicy {
        mean: Vector4::repeat(cfg.init_mean),
        covariance: Matrix4::identity() * cfg.init_var,
    }
}

/// One policy draw: the raw Gaussian sample and its clipped form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySample {
    pub draw: Vector4<f64>,
    pub params: SkillParams,
}

/// Draw `n` i.i.d. samples through the Cholesky factor of the covariance,
/// clipping each component into [-1,1] for execution.
pub fn sample<R: Rng>(
    policy: &GaussianPolicy,
    rng: &mut R,
    n: usize,
) -> Result<Vec<PolicySample>, PolicyError> {
    let chol = nalgebra::Cholesky::new(policy.covariance).ok_or(PolicyError::CholeskyFailure)?;
    let l = chol.l();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let draw = policy.mean + l * z;
        out.push(PolicySample {
            draw,
            params: SkillParams::from_vector(&draw).clamped(),
        });
    }
    Ok(out)
}

/// Result of the dual solve. `degenerate` flags an information-free batch
/// (all rewards equal within 1e-12): eta is the upper bracket end and the
/// implied weights are uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolution {
    pub eta: f64,
    pub degenerate: bool,
}

/// Dual objective g(eta) = eta*eps + eta*log mean exp(R/eta), evaluated with
/// the rewards shifted by their maximum. The additive eta*max(R) term is
/// dropped: it does not move the minimizer and keeping the objective a
/// function of shifted rewards only makes the solve exactly invariant under
/// adding a constant to all rewards.
fn dual_value(shifted: &[f64], epsilon: f64, eta: f64) -> f64 {
    let mean_exp = shifted.iter().map(|r| (r / eta).exp()).sum::<f64>() / shifted.len() as f64;
    eta * epsilon + eta * mean_exp.ln()
}

/// Minimize the dual over eta in [1e-6*range + 1e-12, 1e6*range + 1] by
/// golden-section search in log space, to 1e-10 relative.
pub fn solve_dual(rewards: &[f64], epsilon: f64) -> Result<DualSolution, PolicyError> {
    if rewards.is_empty() {
        return Err(PolicyError::EmptyRewards);
    }
    if !(epsilon > 0.0) {
        return Err(PolicyError::NonPositiveEpsilon);
    }
    let max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range < 1e-12 {
        return Ok(DualSolution {
            eta: 1e6 * range + 1.0,
            degenerate: true,
        });
    }
    let shifted: Vec<f64> = rewards.iter().map(|r| r - max).collect();
    let lo = (1e-6 * range + 1e-12).ln();
    let hi = (1e6 * range + 1.0).ln();
    let g = |t: f64| dual_value(&shifted, epsilon, t.exp());

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = g(x2);
        }
    }
    Ok(DualSolution {
        eta: (0.5 * (a + b)).exp(),
        degenerate: false,
    })
}

/// Normalized exponential weights at temperature eta (max-shifted).
pub fn weights_from(rewards: &[f64], eta: f64) -> Vec<f64> {
    assert!(eta > 0.0, "temperature must be positive");
    let max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = rewards.iter().map(|r| ((r - max) / eta).exp()).collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Sample-level KL of the weights against uniform: sum w_i ln(w_i N).
pub fn weight_kl(weights: &[f64]) -> f64 {
    let n = weights.len() as f64;
    weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| w * (w * n).ln())
        .sum()
}

/// Weighted maximum-likelihood Gaussian fit: weighted mean and weighted
/// (biased) covariance, symmetrized and eigenvalue-floored at `cov_floor`.
pub fn weighted_ml_update(
    draws: &[Vector4<f64>],
    weights: &[f64],
    cfg: &RepsConfig,
) -> Result<GaussianPolicy, PolicyError> {
    if draws.len() < 2 {
        return Err(PolicyError::TooFewSamples(draws.len()));
    }
    if draws.len() != weights.len() {
        return Err(PolicyError::LengthMismatch);
    }
    let mut mean = Vector4::zeros();
    for (x, w) in draws.iter().zip(weights) {
        mean += x * *w;
    }
    let mut cov = Matrix4::zeros();
    for (x, w) in draws.iter().zip(weights) {
        let d = x - mean;
        cov += d * d.transpose() * *w;
    }
    cov = (cov + cov.transpose()) * 0.5;
    Ok(GaussianPolicy {
        mean,
        covariance: floor_eigenvalues(&cov, cfg.cov_floor),
    })
}

fn floor_eigenvalues(cov: &Matrix4<f64>, floor: f64) -> Matrix4<f64> {
    // leave well-conditioned fits untouched; rebuild only when some
    // eigenvalue actually falls below the floor
    if nalgebra::Cholesky::new(cov - Matrix4::identity() * floor).is_some() {
        return *cov;
    }
    let eig = nalgebra::SymmetricEigen::new(*cov);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let v = eig.eigenvectors;
    let m = v * Matrix4::from_diagonal(&vals) * v.transpose();
    (m + m.transpose()) * 0.5
}

/// Everything one policy update produced, for logging and tests.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub policy: GaussianPolicy,
    pub eta: f64,
    /// Batch carried no information; the old policy was kept.
    pub degenerate: bool,
    pub weights: Vec<f64>,
    pub weight_kl: f64,
}

/// One eREPS update over the replay window: dual solve, weighting, weighted
/// ML refit. The old policy is untouched; degenerate batches return it
/// unchanged.
pub fn reps_update(
    policy: &GaussianPolicy,
    replay: &[EpisodeRecord],
    cfg: &RepsConfig,
) -> Result<UpdateOutcome, PolicyError> {
    if replay.len() < cfg.batch.max(2) {
        return Err(PolicyError::TooFewSamples(replay.len()));
    }
    let rewards: Vec<f64> = replay.iter().map(|r| r.reward).collect();
    let dual = solve_dual(&rewards, cfg.epsilon)?;
    if dual.degenerate {
        let n = replay.len();
        return Ok(UpdateOutcome {
            policy: policy.clone(),
            eta: dual.eta,
            degenerate: true,
            weights: vec![1.0 / n as f64; n],
            weight_kl: 0.0,
        });
    }
    let weights = weights_from(&rewards, dual.eta);
    let draws: Vec<Vector4<f64>> = replay.iter().map(|r| r.draw).collect();
    let new_policy = weighted_ml_update(&draws, &weights, cfg)?;
    let kl = weight_kl(&weights);
    Ok(UpdateOutcome {
        policy: new_policy,
        eta: dual.eta,
        degenerate: false,
        weights,
        weight_kl: kl,
    })
}

/// Learning terminates when the whole previous batch succeeded.
pub fn should_terminate(last_batch: &[EpisodeRecord], cfg: &RepsConfig) -> bool {
    last_batch.len() == cfg.batch && last_batch.iter().all(|r| r.success)
}

/// Closed-form KL divergence KL(p || q) between two 4D Gaussians, nats.
pub fn gaussian_kl(p: &GaussianPolicy, q: &GaussianPolicy) -> Result<f64, PolicyError> {
    let chol_q = nalgebra::Cholesky::new(q.covariance).ok_or(PolicyError::CholeskyFailure)?;
    let chol_p = nalgebra::Cholesky::new(p.covariance).ok_or(PolicyError::CholeskyFailure)?;
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::U4>| {
        2.0 * (0..4).map(|i| c.l()[(i, i)].ln()).sum::<f64>()
    };
    let qinv_p = chol_q.solve(&p.covariance);
    let d = q.mean - p.mean;
    let maha = d.dot(&chol_q.solve(&d));
    Ok(0.5 * (qinv_p.trace() + maha - 4.0 + logdet(&chol_q) - logdet(&chol_p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn init_policy_matches_config() {
        let p = init_policy(&RepsConfig::default());
        assert_eq!(p.mean, Vector4::repeat(0.4));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(p.covariance[(i, j)], if i == j { 0.15 } else { 0.0 });
            }
        }
        // deterministic construction
        assert_eq!(p, init_policy(&RepsConfig::default()));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = init_policy(&RepsConfig::default());
        let a = sample(&p, &mut ChaCha20Rng::seed_from_u64(9), 16).unwrap();
        let b = sample(&p, &mut ChaCha20Rng::seed_from_u64(9), 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_covariance_collapses_to_mean() {
        let p = GaussianPolicy {
            mean: Vector4::repeat(0.3),
            covariance: Matrix4::identity() * 1e-18,
        };
        for s in sample(&p, &mut ChaCha20Rng::seed_from_u64(1), 100).unwrap() {
            for i in 0..4 {
                assert!((s.draw[i] - 0.3).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sample_statistics_match_law_of_large_numbers() {
        let p = init_policy(&RepsConfig::default());
        let n = 100_000;
        let samples = sample(&p, &mut ChaCha20Rng::seed_from_u64(123), n).unwrap();
        for i in 0..4 {
            let mean = samples.iter().map(|s| s.draw[i]).sum::<f64>() / n as f64;
            assert!((mean - 0.4).abs() < 0.01, "coord {i} mean {mean}");
            let var = samples
                .iter()
                .map(|s| (s.draw[i] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            assert!((var - 0.15).abs() < 0.15 * 0.05, "coord {i} var {var}");
        }
        // executed params are clipped
        assert!(samples
            .iter()
            .all(|s| s.params.clamped() == s.params));
    }

    #[test]
    fn constant_rewards_are_degenerate_with_uniform_weights() {
        let d = solve_dual(&[42.0; 8], 1.0).unwrap();
        assert!(d.degenerate);
        let w = weights_from(&[42.0; 8], d.eta);
        for v in w {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_dual_matches_grid_oracle() {
        let rewards = [0.0, 100.0];
        let sol = solve_dual(&rewards, 1.0).unwrap();
        let oracle = crate::oracles::dual_grid_search(&rewards, 1.0, 1_000_000);
        assert!(
            (sol.eta - oracle).abs() <= 1e-6 * oracle,
            "eta {} oracle {}",
            sol.eta,
            oracle
        );
    }

    #[test]
    fn huge_epsilon_concentrates_on_argmax() {
        let rewards = [0.0, 100.0];
        let sol = solve_dual(&rewards, 1e6).unwrap();
        let w = weights_from(&rewards, sol.eta);
        assert!((w[1] - 1.0).abs() < 1e-3, "w = {w:?}");
    }

    #[test]
    fn huge_eta_gives_uniform_weights() {
        let w = weights_from(&[1.0, 5.0, 2.0, 4.0], 1e12);
        for v in &w {
            assert!((v - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn dual_solution_respects_kl_bound() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        use rand::Rng;
        for eps in [0.5, 1.0, 2.0] {
            for _ in 0..30 {
                let n = if rng.random::<bool>() { 10 } else { 20 };
                let rewards: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 100.0).collect();
                let sol = solve_dual(&rewards, eps).unwrap();
                let w = weights_from(&rewards, sol.eta);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(weight_kl(&w) <= eps + 1e-6, "kl {} eps {eps}", weight_kl(&w));
            }
        }
    }

    #[test]
    fn reward_shift_leaves_dual_and_weights_unchanged() {
        // integer-valued rewards and shifts keep the arithmetic exact
        let rewards = [3.0, 17.0, 5.0, 29.0, 11.0, 2.0, 23.0, 8.0];
        for eps in [0.5, 1.0, 2.0] {
            let base = solve_dual(&rewards, eps).unwrap();
            let wb = weights_from(&rewards, base.eta);
            for c in [1.0, 64.0, -128.0, 1000.0] {
                let shifted: Vec<f64> = rewards.iter().map(|r| r + c).collect();
                let s = solve_dual(&shifted, eps).unwrap();
                assert_eq!(base.eta.to_bits(), s.eta.to_bits(), "c={c}");
                let ws = weights_from(&shifted, s.eta);
                for (a, b) in wb.iter().zip(&ws) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn monotone_weighting() {
        let rewards = [4.0, 9.0, 1.0, 9.0, 7.0];
        let sol = solve_dual(&rewards, 1.0).unwrap();
        let w = weights_from(&rewards, sol.eta);
        for i in 0..rewards.len() {
            for j in 0..rewards.len() {
                if rewards[i] > rewards[j] {
                    assert!(w[i] >= w[j]);
                }
            }
        }
        assert_eq!(w[1], w[3]);
    }

    #[test]
    fn weighted_update_matches_hand_computed_oracle() {
        // frozen independent arithmetic for draws x1..x3, weights (.5,.3,.2)
        let draws = vec![
            Vector4::new(0.1, -0.2, 0.3, 0.4),
            Vector4::new(-0.5, 0.6, -0.7, 0.8),
            Vector4::new(0.9, -1.0, 1.1, -1.2),
        ];
        let w = [0.5, 0.3, 0.2];
        // floor disabled: the oracle is the raw weighted-moment arithmetic
        let cfg = RepsConfig {
            cov_floor: 0.0,
            ..RepsConfig::default()
        };
        let got = weighted_ml_update(&draws, &w, &cfg).unwrap();
        let mean = [
            0.08000000000000003,
            -0.12000000000000002,
            0.16000000000000003,
            0.2,
        ];
        let cov = [
            [0.23560000000000003, -0.2704, 0.3052, -0.332],
            [-0.2704, 0.3136, -0.3568, 0.36800000000000005],
            [0.3052, -0.3568, 0.4084, -0.404],
            [-0.332, 0.36800000000000005, -0.404, 0.52],
        ];
        for i in 0..4 {
            assert!((got.mean[i] - mean[i]).abs() < 1e-12);
            for j in 0..4 {
                assert!(
                    (got.covariance[(i, j)] - cov[i][j]).abs() < 1e-12,
                    "cov[{i}][{j}]"
                );
            }
        }
    }

    #[test]
    fn uniform_weights_reduce_to_mle() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let p = init_policy(&RepsConfig::default());
        let draws: Vec<Vector4<f64>> = sample(&p, &mut rng, 40)
            .unwrap()
            .into_iter()
            .map(|s| s.draw)
            .collect();
        let w = vec![1.0 / 40.0; 40];
        let got = weighted_ml_update(&draws, &w, &RepsConfig::default()).unwrap();
        let mle_mean = draws.iter().sum::<Vector4<f64>>() / 40.0;
        let mut mle_cov = Matrix4::zeros();
        for x in &draws {
            let d = x - mle_mean;
            mle_cov += d * d.transpose() / 40.0;
        }
        assert!((got.mean - mle_mean).norm() < 1e-12);
        assert!((got.covariance - mle_cov).norm() < 1e-10);
    }

    #[test]
    fn single_weight_engages_covariance_floor() {
        let draws = vec![
            Vector4::new(0.1, 0.2, 0.3, 0.4),
            Vector4::new(-0.3, 0.1, 0.0, 0.9),
            Vector4::new(0.5, -0.5, 0.2, 0.1),
        ];
        let cfg = RepsConfig::default();
        let got = weighted_ml_update(&draws, &[0.0, 1.0, 0.0], &cfg).unwrap();
        assert!((got.mean - draws[1]).norm() < 1e-15);
        let eig = nalgebra::SymmetricEigen::new(got.covariance);
        for v in eig.eigenvalues.iter() {
            assert!((v - cfg.cov_floor).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let cfg = RepsConfig::default();
        assert_eq!(
            weighted_ml_update(&[Vector4::zeros()], &[1.0], &cfg),
            Err(PolicyError::TooFewSamples(1))
        );
    }

    fn record(draw: Vector4<f64>, reward: f64, success: bool) -> EpisodeRecord {
        EpisodeRecord {
            draw,
            params: SkillParams::from_vector(&draw).clamped(),
            reward,
            final_angle: 0.0,
            success,
        }
    }

    #[test]
    fn identical_replay_collapses_to_floor() {
        let cfg = RepsConfig::default();
        let policy = init_policy(&cfg);
        // identical params but *distinct* rewards are needed for a
        // non-degenerate update; identical rewards keep the old policy
        let x = Vector4::new(0.2, 0.1, -0.3, 0.4);
        let replay: Vec<EpisodeRecord> = (0..20)
            .map(|i| record(x, 50.0 + (i as f64) * 1e-6, true))
            .collect();
        let out = reps_update(&policy, &replay, &cfg).unwrap();
        assert!(!out.degenerate);
        assert!((out.policy.mean - x).norm() < 1e-12);
        let eig = nalgebra::SymmetricEigen::new(out.policy.covariance);
        for v in eig.eigenvalues.iter() {
            assert!((v - cfg.cov_floor).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_replay_keeps_old_policy() {
        let cfg = RepsConfig::default();
        let policy = init_policy(&cfg);
        let replay: Vec<EpisodeRecord> = (0..20)
            .map(|i| record(Vector4::repeat(i as f64 * 0.01), -0.036, false))
            .collect();
        let out = reps_update(&policy, &replay, &cfg).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.policy, policy);
        assert_eq!(out.weight_kl, 0.0);
    }

    #[test]
    fn update_satisfies_kl_bound_and_spd() {
        let cfg = RepsConfig::default();
        let policy = init_policy(&cfg);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        use rand::Rng;
        let replay: Vec<EpisodeRecord> = sample(&policy, &mut rng, 20)
            .unwrap()
            .into_iter()
            .map(|s| record(s.draw, rng.random::<f64>() * 100.0, false))
            .collect();
        let out = reps_update(&policy, &replay, &cfg).unwrap();
        assert!(out.weight_kl <= cfg.epsilon + 1e-6);
        assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // new covariance is SPD and the Gaussian KL to the old policy is finite
        assert!(nalgebra::Cholesky::new(out.policy.covariance).is_some());
        let kl = gaussian_kl(&out.policy, &policy).unwrap();
        assert!(kl.is_finite() && kl >= 0.0);
    }

    #[test]
    fn termination_rule() {
        let cfg = RepsConfig::default();
        let mk = |n: usize, ok: bool| -> Vec<EpisodeRecord> {
            (0..n)
                .map(|_| record(Vector4::zeros(), 100.0, ok))
                .collect()
        };
        assert!(should_terminate(&mk(10, true), &cfg));
        let mut nine = mk(10, true);
        nine[3].success = false;
        assert!(!should_terminate(&nine, &cfg));
        assert!(!should_terminate(&[], &cfg));
        assert!(!should_terminate(&mk(20, true), &cfg)); // wrong batch length
    }

    #[test]
    fn gaussian_kl_closed_form_cases() {
        let cfg = RepsConfig::default();
        let p = init_policy(&cfg);
        assert!(gaussian_kl(&p, &p).unwrap().abs() < 1e-12);

        let a = GaussianPolicy {
            mean: Vector4::zeros(),
            covariance: Matrix4::identity(),
        };
        let b = GaussianPolicy {
            mean: Vector4::new(1.0, 0.0, 0.0, 0.0),
            covariance: Matrix4::identity(),
        };
        assert!((gaussian_kl(&a, &b).unwrap() - 0.5).abs() < 1e-12);

        let c = GaussianPolicy {
            mean: Vector4::zeros(),
            covariance: Matrix4::identity() * 2.0,
        };
        assert!((gaussian_kl(&a, &c).unwrap() - 0.3862943611198906).abs() < 1e-12);
    }
}

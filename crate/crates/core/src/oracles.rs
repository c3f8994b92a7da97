//! Slow, independent reference implementations used by the test suites.
//!
//! Everything here is deliberately written from first principles, without
//! reusing the production code paths it is meant to check: brute-force
//! scans instead of closed forms, bisection instead of trigonometric
//! identities. Not part of the benchmark itself.

use crate::dial_env::DialEnvConfig;
use crate::kinematics::{CartesianPoint, RobotGeometry, ARM_AZIMUTHS_DEG};

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Invert the forward map one arm at a time by scanning the shoulder angle
/// on a uniform grid and minimizing the forearm-length residual. The arm
/// geometry is rebuilt here in world coordinates.
pub fn ik_grid_search(
    p: &CartesianPoint,
    geom: &RobotGeometry,
    grid_deg: f64,
) -> Option<[f64; 3]> {
    let mut out = [0.0; 3];
    for arm in 0..3 {
        let az = ARM_AZIMUTHS_DEG[arm] * DEG;
        let (ux, uy) = (az.cos(), az.sin());
        // wrist joint of this arm in world coordinates
        let (wx, wy, wz) = (
            p.x + geom.effector_radius * ux,
            p.y + geom.effector_radius * uy,
            p.z,
        );
        let steps = ((geom.servo_max - geom.servo_min) / grid_deg).round() as usize;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let theta = geom.servo_min + k as f64 * grid_deg;
            let th = theta * DEG;
            // elbow in world coordinates
            let radial = geom.base_radius + geom.upper_arm * th.cos();
            let (ex, ey, ez) = (radial * ux, radial * uy, -geom.upper_arm * th.sin());
            let dist = ((wx - ex).powi(2) + (wy - ey).powi(2) + (wz - ez).powi(2)).sqrt();
            let residual = (dist - geom.forearm).abs();
            if residual < best.0 {
                best = (residual, theta);
            }
        }
        // a root exists only if the best residual is essentially zero
        if best.0 > geom.upper_arm * grid_deg * DEG * 2.0 + 1e-6 {
            return None;
        }
        out[arm] = best.1;
    }
    Some(out)
}

/// Evaluate the eREPS dual at one temperature (max-shifted rewards).
pub fn dual_objective(rewards: &[f64], epsilon: f64, eta: f64) -> f64 {
    let max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean_exp =
        rewards.iter().map(|r| ((r - max) / eta).exp()).sum::<f64>() / rewards.len() as f64;
    eta * epsilon + eta * mean_exp.ln()
}

fn dual_bracket(rewards: &[f64]) -> (f64, f64) {
    let max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    (1e-6 * range + 1e-12, 1e6 * range + 1.0)
}

/// Exhaustive log-grid search of the dual over the standard bracket.
pub fn dual_grid_search(rewards: &[f64], epsilon: f64, points: usize) -> f64 {
    let (lo, hi) = dual_bracket(rewards);
    grid_argmin(rewards, epsilon, lo, hi, points).0
}

fn grid_argmin(
    rewards: &[f64],
    epsilon: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> (f64, usize, f64, f64) {
    let (tlo, thi) = (lo.ln(), hi.ln());
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..points {
        let t = tlo + (thi - tlo) * k as f64 / (points - 1) as f64;
        let g = dual_objective(rewards, epsilon, t.exp());
        if g < best.0 {
            best = (g, k);
        }
    }
    let at = |k: usize| (tlo + (thi - tlo) * k as f64 / (points - 1) as f64).exp();
    let k = best.1;
    (
        at(k),
        k,
        at(k.saturating_sub(1)),
        at((k + 1).min(points - 1)),
    )
}

/// Two-stage grid search: a full-bracket pass followed by an equally dense
/// pass over the winning cell, resolving the minimizer far below 1e-6
/// relative.
pub fn dual_grid_search_refined(rewards: &[f64], epsilon: f64, points: usize) -> f64 {
    let (lo, hi) = dual_bracket(rewards);
    let (_, _, cell_lo, cell_hi) = grid_argmin(rewards, epsilon, lo, hi, points);
    grid_argmin(rewards, epsilon, cell_lo, cell_hi, points).0
}

/// Fine-step contact oracle: fixed-size steps along the segment; penetration
/// is resolved by bisecting the minimal separating rotation, with the same
/// side latch, hub dead zone and end-stop clamping the environment contracts.
pub fn fine_sweep(a: [f64; 2], b: [f64; 2], lever0: f64, cfg: &DialEnvConfig, step: f64) -> f64 {
    let contact_r = cfg.effector_radius_contact + cfg.lever_width / 2.0;

    let dist = |cx: f64, cy: f64, phi_pot: f64| -> f64 {
        let w = (cfg.mount_angle + phi_pot) * DEG;
        let (dx, dy) = (w.cos(), w.sin());
        let (rx, ry) = (cx - cfg.pivot[0], cy - cfg.pivot[1]);
        let t = (rx * dx + ry * dy).clamp(0.0, cfg.lever_length);
        (rx - t * dx).hypot(ry - t * dy)
    };
    let penetrates = |cx: f64, cy: f64, phi: f64| dist(cx, cy, phi) < contact_r;

    let total = (b[0] - a[0]).hypot(b[1] - a[1]);
    let n = ((total / step).ceil() as usize).max(1);
    let mut phi = lever0;
    let mut side: Option<f64> = None;
    for k in 1..=n {
        let f = k as f64 / n as f64;
        let (cx, cy) = (a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f);
        if !penetrates(cx, cy, phi) {
            side = None;
            continue;
        }
        let (rx, ry) = (cx - cfg.pivot[0], cy - cfg.pivot[1]);
        let rc = rx.hypot(ry);
        let s = *side.get_or_insert_with(|| {
            let gamma = ry.atan2(rx);
            let w = (cfg.mount_angle + phi) * DEG;
            let d0 = (gamma - w).sin().atan2((gamma - w).cos());
            if d0 >= 0.0 {
                1.0
            } else {
                -1.0
            }
        });
        if rc * rc < cfg.hub_radius * cfg.hub_radius + contact_r * contact_r {
            continue; // axle housing holds the lever in place
        }
        // exponential search then bisection for the smallest separating
        // rotation in the -s direction
        let mut hi = f64::NAN;
        for mag in [1.0, 2.0, 5.0, 10.0, 20.0, 45.0, 90.0, 180.0, 360.0] {
            if !penetrates(cx, cy, phi - s * mag) {
                hi = mag;
                break;
            }
        }
        if hi.is_nan() {
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if penetrates(cx, cy, phi - s * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        phi = (phi - s * hi).clamp(0.0, cfg.pot_range);
    }
    phi
}

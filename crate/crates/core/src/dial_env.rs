//! Simulated potentiometer dial-turning environment.
//!
//! A lever of configurable length is attached to a potentiometer shaft. The
//! end-effector is modeled as a vertical disc in the x-y plane at the fixed
//! skill height; sweeping it along a straight segment resolves contact
//! quasi-statically: whenever the disc penetrates the lever capsule, the
//! lever rotates by the minimal angle that resolves the penetration, away
//! from the side the disc arrived from. Mechanical end stops clamp the
//! lever to [0, pot_range]. A small hub dead zone around the shaft models
//! the potentiometer's axle housing: contact that close to the pivot cannot
//! rotate the lever.
//!
//! The environment exposes the episodic reset/step pair; `bench` drives it
//! either directly or through the serial protocol and mock firmware.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{denormalize_params, in_workspace, CartesianPoint, WorkspaceCylinder};
use crate::policy::SkillParams;

const DEG: f64 = std::f64::consts::PI / 180.0;
pub const ADC_MAX: u16 = 1023;

/// Default tolerance of the success indicator, degrees.
pub const SUCCESS_TOL_DEG: f64 = 15.0;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    /// step called twice without an intervening reset.
    #[error("environment needs reset before step")]
    NotReset,
    /// Simulated reset sweep failed to restore the start angle.
    #[error("reset sweep ended {achieved:.3} deg, start angle not restored")]
    ResetFailed { achieved: f64 },
    #[error("ADC code {0} out of range 0..=1023")]
    AdcOutOfRange(u16),
    #[error("invalid environment config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetMode {
    /// Lever angle set instantaneously.
    Kinematic,
    /// Reset executed as a sweep from behind the lever.
    Simulated,
}

/// Task geometry and observation model.
///
/// Angles are degrees. Lever angles live in the pot frame [0, pot_range];
/// the lever's world direction is `mount_angle + pot angle`. The defaults
/// are calibrated so the shipped benchmark converges reliably.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DialEnvConfig {
    /// Potentiometer axis location in the base frame (z irrelevant), mm.
    pub pivot: [f64; 2],
    pub lever_length: f64,
    pub lever_width: f64,
    /// End-effector contact disc radius, mm.
    pub effector_radius_contact: f64,
    /// Axle housing radius; lever arcs inside it cannot be pushed.
    pub hub_radius: f64,
    /// Fixed skill-execution height, mm (base frame z).
    pub push_z: f64,
    /// Half-height of the band around push_z in which a motion segment
    /// engages the lever.
    pub contact_z_band: f64,
    /// World direction of pot angle zero, degrees.
    pub mount_angle: f64,
    pub start_angle: f64,
    pub target_angle: f64,
    /// Mechanical travel between the end stops, degrees.
    pub pot_range: f64,
    /// Gaussian readout noise, ADC counts. Zero disables the noise channel.
    pub adc_noise_sd: f64,
    pub success_tol: f64,
    /// Derive reward and success from the quantized ADC readout instead of
    /// the true simulated angle (hardware parity).
    pub reward_from_adc: bool,
    pub reset_mode: ResetMode,
    /// Base sweep step, mm. Steps refine further near contact events.
    pub step_len: f64,
}

impl Default for DialEnvConfig {
    fn default() -> Self {
        DialEnvConfig {
            pivot: [0.0, -9.0],
            lever_length: 18.0,
            lever_width: 2.0,
            effector_radius_contact: 4.0,
            hub_radius: 3.0,
            push_z: -52.59,
            contact_z_band: 4.0,
            mount_angle: 30.0,
            start_angle: 45.0,
            target_angle: 105.0,
            pot_range: 270.0,
            adc_noise_sd: 2.0,
            success_tol: SUCCESS_TOL_DEG,
            reward_from_adc: false,
            reset_mode: ResetMode::Kinematic,
            step_len: 0.05,
        }
    }
}

impl DialEnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::BadConfig(m.into()));
        if !(self.pot_range > 0.0) {
            return bad("pot_range must be positive");
        }
        if self.start_angle < 0.0
            || self.start_angle > self.pot_range
            || self.target_angle < 0.0
            || self.target_angle > self.pot_range
        {
            return bad("start and target angles must lie in [0, pot_range]");
        }
        if self.effector_radius_contact < 0.0
            || self.lever_length <= self.effector_radius_contact
        {
            return bad("need lever_length > effector_radius_contact >= 0");
        }
        if self.lever_width <= 0.0 || self.hub_radius < 0.0 {
            return bad("lever_width must be positive, hub_radius non-negative");
        }
        if !(self.step_len > 0.0) || !(self.success_tol > 0.0) {
            return bad("step_len and success_tol must be positive");
        }
        if self.adc_noise_sd < 0.0 {
            return bad("adc_noise_sd must be non-negative");
        }
        Ok(())
    }

    /// Combined contact radius: effector disc plus half the lever width.
    fn contact_radius(&self) -> f64 {
        self.effector_radius_contact + self.lever_width / 2.0
    }
}

/// Lever angle in the pot frame, clamped to [0, pot_range].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeverState {
    pub angle: f64,
}

/// Result of one episode step (or a reset observation with reward 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub final_angle: f64,
    pub reward: f64,
    pub success: bool,
    pub adc: u16,
}

/// The dial-turning reward: full marks strictly inside the tolerance band,
/// quadratic penalty everywhere.
pub fn reward(phi: f64, phi_d: f64) -> f64 {
    reward_with_tol(phi, phi_d, SUCCESS_TOL_DEG)
}

pub fn reward_with_tol(phi: f64, phi_d: f64, tol: f64) -> f64 {
    let e = phi - phi_d;
    let indicator = if e.abs() < tol { 100.0 } else { 0.0 };
    indicator - 1e-5 * e * e
}

/// Noiseless ADC code for a lever angle: round half-up onto 0..=1023.
pub fn adc_from_angle(phi: f64, cfg: &DialEnvConfig) -> u16 {
    let code = (phi / cfg.pot_range * ADC_MAX as f64 + 0.5).floor();
    code.clamp(0.0, ADC_MAX as f64) as u16
}

/// Angle represented by an ADC code; inverse of the quantizer up to half a
/// code width.
pub fn angle_from_adc(code: u16, cfg: &DialEnvConfig) -> Result<f64, EnvError> {
    if code > ADC_MAX {
        return Err(EnvError::AdcOutOfRange(code));
    }
    Ok(code as f64 / ADC_MAX as f64 * cfg.pot_range)
}

// --- quasi-static contact resolution -------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ContactTag {
    None,
    Rotated,
    /// Penetrating, but the tangent contact point falls inside the hub.
    HubFrozen,
    /// Resolution hit an end stop.
    Clamped,
}

fn wrap_pi(x: f64) -> f64 {
    x.sin().atan2(x.cos())
}

fn dist_to_lever(cx: f64, cy: f64, cfg: &DialEnvConfig, phi_pot: f64) -> f64 {
    let phi_w = (cfg.mount_angle + phi_pot) * DEG;
    let (px, py) = (cfg.pivot[0], cfg.pivot[1]);
    let (dx, dy) = (phi_w.cos(), phi_w.sin());
    let t = ((cx - px) * dx + (cy - py) * dy).clamp(0.0, cfg.lever_length);
    (cx - px - t * dx).hypot(cy - py - t * dy)
}

/// Resolve penetration of the disc at (cx, cy) against the lever. `side` is
/// the latched contact side (+1: disc counter-clockwise of the lever), kept
/// for the duration of one continuous contact.
fn resolve_contact(
    cx: f64,
    cy: f64,
    phi_pot: f64,
    side: Option<f64>,
    cfg: &DialEnvConfig,
) -> (f64, Option<f64>, ContactTag) {
    let r = cfg.contact_radius();
    let (rx, ry) = (cx - cfg.pivot[0], cy - cfg.pivot[1]);
    let rc = rx.hypot(ry);
    if rc >= cfg.lever_length + r || dist_to_lever(cx, cy, cfg, phi_pot) >= r {
        return (phi_pot, None, ContactTag::None);
    }
    let phi_w = (cfg.mount_angle + phi_pot) * DEG;
    let gamma = ry.atan2(rx);
    let side = side.unwrap_or(if wrap_pi(gamma - phi_w) >= 0.0 { 1.0 } else { -1.0 });
    if rc * rc < cfg.hub_radius * cfg.hub_radius + r * r {
        return (phi_pot, Some(side), ContactTag::HubFrozen);
    }
    let offset = if rc * rc <= cfg.lever_length * cfg.lever_length + r * r {
        // tangent contact on the shaft-to-tip span
        (r / rc).asin()
    } else {
        // tip-governed contact
        let cosd = (rc * rc + cfg.lever_length * cfg.lever_length - r * r)
            / (2.0 * rc * cfg.lever_length);
        cosd.clamp(-1.0, 1.0).acos()
    };
    let delta = wrap_pi(gamma - side * offset - phi_w) / DEG;
    let candidate = phi_pot + delta;
    let clamped = candidate.clamp(0.0, cfg.pot_range);
    let tag = if clamped != candidate {
        ContactTag::Clamped
    } else {
        ContactTag::Rotated
    };
    (clamped, Some(side), tag)
}

/// Per-substep rotation beyond which the sweep refines its step.
const MAX_STEP_ROT_DEG: f64 = 0.02;
/// Refinement floor, mm.
const MIN_SUBSTEP_MM: f64 = 5e-4;

/// Walking state of one continuous effector path. Carrying the latched
/// contact side across the segments of a polyline keeps a lever that is
/// being plowed through at an end stop from snapping to the other face of
/// the disc at a segment boundary.
struct SweepState {
    phi: f64,
    side: Option<f64>,
    tag: ContactTag,
}

impl SweepState {
    fn at(start: [f64; 2], lever0: f64, cfg: &DialEnvConfig) -> Self {
        // classify the entry position; its penetration (if any) resolves at
        // the first committed substep
        let (_, _, tag) = resolve_contact(start[0], start[1], lever0, None, cfg);
        SweepState {
            phi: lever0,
            side: None,
            tag,
        }
    }

    /// Advance along one segment, resolving contact at sample points at
    /// most `step_len` apart. Substeps shrink near contact events (onset,
    /// hub entry, end stops, large rotations) so the resolved angle tracks
    /// the continuum model.
    fn advance(&mut self, a: [f64; 2], b: [f64; 2], cfg: &DialEnvConfig) {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let total = dx.hypot(dy);
        if total == 0.0 {
            let (phi, side, tag) = resolve_contact(a[0], a[1], self.phi, self.side, cfg);
            self.phi = phi;
            self.side = side;
            self.tag = tag;
            return;
        }
        let (ux, uy) = (dx / total, dy / total);
        let mut s = 0.0;
        while s < total {
            let mut h = cfg.step_len.min(total - s);
            loop {
                let (cx, cy) = (a[0] + ux * (s + h), a[1] + uy * (s + h));
                let (phi_c, side_c, tag_c) = resolve_contact(cx, cy, self.phi, self.side, cfg);
                if ((phi_c - self.phi).abs() > MAX_STEP_ROT_DEG || tag_c != self.tag)
                    && h > MIN_SUBSTEP_MM
                {
                    h /= 2.0;
                    continue;
                }
                self.phi = phi_c;
                self.side = side_c;
                self.tag = tag_c;
                s += h;
                break;
            }
        }
    }
}

fn sweep_xy(a: [f64; 2], b: [f64; 2], lever0: f64, cfg: &DialEnvConfig) -> f64 {
    let mut state = SweepState::at(a, lever0, cfg);
    state.advance(a, b, cfg);
    state.phi
}

/// Sweep along a connected polyline, preserving contact state across the
/// joints.
fn sweep_polyline(points: &[[f64; 2]], lever0: f64, cfg: &DialEnvConfig) -> f64 {
    let Some(first) = points.first() else {
        return lever0;
    };
    let mut state = SweepState::at(*first, lever0, cfg);
    for pair in points.windows(2) {
        state.advance(pair[0], pair[1], cfg);
    }
    state.phi
}

/// Pure sweep over one straight segment. Contact is resolved only when both
/// endpoints lie within the contact band around the push height; a segment
/// that changes height (the descent onto the first waypoint, the retreat to
/// home) does not interact with the lever.
pub fn simulate_sweep(
    p_start: &CartesianPoint,
    p_end: &CartesianPoint,
    lever: LeverState,
    cfg: &DialEnvConfig,
) -> LeverState {
    let in_band = |p: &CartesianPoint| (p.z - cfg.push_z).abs() <= cfg.contact_z_band;
    if !in_band(p_start) || !in_band(p_end) {
        return lever;
    }
    LeverState {
        angle: sweep_xy(
            [p_start.x, p_start.y],
            [p_end.x, p_end.y],
            lever.angle,
            cfg,
        ),
    }
}

// --- the environment state machine ----------------------------------------

#[derive(Debug, Clone)]
pub struct DialEnv {
    cfg: DialEnvConfig,
    workspace: WorkspaceCylinder,
    lever: LeverState,
    ready: bool,
    noise: ChaCha20Rng,
}

impl DialEnv {
    pub fn new(
        cfg: DialEnvConfig,
        workspace: WorkspaceCylinder,
        noise_seed: u64,
    ) -> Result<Self, EnvError> {
        cfg.validate()?;
        if cfg.push_z < workspace.z_bottom() || cfg.push_z > workspace.z_top {
            return Err(EnvError::BadConfig(
                "push_z lies outside the workspace cylinder".into(),
            ));
        }
        Ok(DialEnv {
            cfg,
            workspace,
            lever: LeverState {
                angle: cfg.start_angle,
            },
            ready: true,
            noise: ChaCha20Rng::seed_from_u64(noise_seed),
        })
    }

    pub fn config(&self) -> &DialEnvConfig {
        &self.cfg
    }

    pub fn lever(&self) -> LeverState {
        self.lever
    }

    /// Restore the start angle and re-arm the episode contract.
    /// Kinematic mode sets the lever instantaneously; simulated mode drives
    /// the effector behind the lever and pushes it back with the same
    /// contact model, and must land within 1 degree.
    pub fn reset(&mut self) -> Result<StepOutcome, EnvError> {
        match self.cfg.reset_mode {
            ResetMode::Kinematic => {
                self.lever.angle = self.cfg.start_angle;
            }
            ResetMode::Simulated => {
                self.simulated_reset()?;
            }
        }
        self.ready = true;
        Ok(StepOutcome {
            final_angle: self.lever.angle,
            reward: 0.0,
            success: false,
            adc: adc_from_angle(self.lever.angle, &self.cfg),
        })
    }

    /// Sweep the lever back to the start angle with chord segments along a
    /// circle around the pivot, approaching from behind.
    fn simulated_reset(&mut self) -> Result<(), EnvError> {
        let cfg = self.cfg;
        let r = cfg.contact_radius();
        let rm = 0.7 * cfg.lever_length;
        debug_assert!(rm > r, "reset push radius must clear the contact radius");
        let offset = (r / rm).asin() / DEG;
        let err = cfg.start_angle - self.lever.angle;
        if err.abs() > 1e-12 {
            let dir = err.signum();
            // disc at pot-frame angle beta keeps the lever tangent at
            // beta + dir*offset while pushing in direction dir
            let beta0 = self.lever.angle - dir * (offset + 3.0);
            let beta1 = cfg.start_angle - dir * offset;
            let n = ((beta1 - beta0).abs() / 2.0).ceil().max(1.0) as usize;
            let at = |beta: f64| {
                let w = (cfg.mount_angle + beta) * DEG;
                [cfg.pivot[0] + rm * w.cos(), cfg.pivot[1] + rm * w.sin()]
            };
            let points: Vec<[f64; 2]> = (0..=n)
                .map(|k| at(beta0 + (beta1 - beta0) * k as f64 / n as f64))
                .collect();
            self.lever.angle = sweep_polyline(&points, self.lever.angle, &cfg);
        }
        if (self.lever.angle - cfg.start_angle).abs() > 1.0 {
            return Err(EnvError::ResetFailed {
                achieved: self.lever.angle,
            });
        }
        Ok(())
    }

    /// Read the potentiometer through the ADC, with the configured readout
    /// noise. Consumes one noise draw per call when noise is enabled.
    pub fn read_adc(&mut self) -> u16 {
        let base = self.lever.angle / self.cfg.pot_range * ADC_MAX as f64;
        let noisy = if self.cfg.adc_noise_sd > 0.0 {
            base + self.cfg.adc_noise_sd * self.noise.sample::<f64, _>(rand_distr::StandardNormal)
        } else {
            base
        };
        (noisy + 0.5).floor().clamp(0.0, ADC_MAX as f64) as u16
    }

    /// Feed one realized motion segment into the contact model. Used by the
    /// mock firmware, which moves the effector between arbitrary commanded
    /// positions.
    pub fn sweep_segment(&mut self, from: &CartesianPoint, to: &CartesianPoint) {
        self.lever = simulate_sweep(from, to, self.lever, &self.cfg);
    }

    /// Mark the episode as consumed and build its outcome from the current
    /// lever state. The firmware path calls this after its command script.
    pub fn finish_episode(&mut self) -> StepOutcome {
        self.ready = false;
        let adc = self.read_adc();
        self.outcome_from(adc)
    }

    fn outcome_from(&self, adc: u16) -> StepOutcome {
        let cfg = &self.cfg;
        let true_angle = self.lever.angle;
        let measured = if cfg.reward_from_adc {
            adc as f64 / ADC_MAX as f64 * cfg.pot_range
        } else {
            true_angle
        };
        StepOutcome {
            final_angle: true_angle,
            reward: reward_with_tol(measured, cfg.target_angle, cfg.success_tol),
            success: (measured - cfg.target_angle).abs() < cfg.success_tol,
            adc,
        }
    }

    /// Execute one skill: denormalize the parameters, clamp the waypoints
    /// radially onto the workspace cylinder, sweep the straight segment
    /// between them at the push height, and score the resulting angle.
    pub fn step(&mut self, params: &SkillParams) -> Result<StepOutcome, EnvError> {
        if !self.ready {
            return Err(EnvError::NotReset);
        }
        let wp = denormalize_params(params);
        let (mut a, mut b) = wp.at_height(self.cfg.push_z);
        self.clamp_to_workspace(&mut a);
        self.clamp_to_workspace(&mut b);
        self.sweep_segment(&a, &b);
        Ok(self.finish_episode())
    }

    fn clamp_to_workspace(&self, p: &mut CartesianPoint) {
        if !in_workspace(p, &self.workspace) {
            let r_max = self.workspace.diameter / 2.0;
            let r = p.radial();
            if r > r_max {
                let scale = r_max / r;
                p.x *= scale;
                p.y *= scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::RobotGeometry;
    use rand::Rng;

    fn ws() -> WorkspaceCylinder {
        WorkspaceCylinder::from_geometry(60.0, 40.0, &RobotGeometry::default()).unwrap()
    }

    fn quiet_cfg() -> DialEnvConfig {
        DialEnvConfig {
            adc_noise_sd: 0.0,
            ..DialEnvConfig::default()
        }
    }

    fn env() -> DialEnv {
        DialEnv::new(quiet_cfg(), ws(), 0).unwrap()
    }

    #[test]
    fn reward_formula_values() {
        let d = DialEnvConfig::default().target_angle;
        assert_eq!(reward(d, d), 100.0);
        assert!((reward(d + 10.0, d) - 99.999).abs() < 1e-12);
        assert!((reward(d + 15.0, d) - -0.00225).abs() < 1e-12);
        assert!((reward(d + 100.0, d) - -0.1).abs() < 1e-12);
        assert!((reward(d - 14.999, d) - (100.0 - 1e-5 * 14.999f64.powi(2))).abs() < 1e-9);
    }

    #[test]
    fn adc_endpoints_and_midpoint() {
        let cfg = quiet_cfg();
        assert_eq!(adc_from_angle(0.0, &cfg), 0);
        assert_eq!(adc_from_angle(cfg.pot_range, &cfg), 1023);
        // 511.5 rounds half-up
        assert_eq!(adc_from_angle(cfg.pot_range / 2.0, &cfg), 512);
    }

    #[test]
    fn adc_round_trip_over_all_codes() {
        let cfg = quiet_cfg();
        let max_err = cfg.pot_range / 2046.0 + 1e-12;
        for code in 0..=ADC_MAX {
            let angle = angle_from_adc(code, &cfg).unwrap();
            assert_eq!(adc_from_angle(angle, &cfg), code);
            // quantizing any angle in the cell maps back within half a code
            let err = (angle_from_adc(adc_from_angle(angle, &cfg), &cfg).unwrap() - angle).abs();
            assert!(err <= max_err);
        }
        assert_eq!(
            angle_from_adc(1024, &cfg),
            Err(EnvError::AdcOutOfRange(1024))
        );
    }

    #[test]
    fn quantizer_inverts_within_half_code() {
        let cfg = quiet_cfg();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let phi = rng.random::<f64>() * cfg.pot_range;
            let back = angle_from_adc(adc_from_angle(phi, &cfg), &cfg).unwrap();
            assert!((back - phi).abs() <= cfg.pot_range / 2046.0 + 1e-12);
        }
    }

    #[test]
    fn reset_restores_start_and_is_idempotent() {
        let mut e = env();
        e.lever.angle = 200.0;
        let o = e.reset().unwrap();
        assert_eq!(o.final_angle, e.cfg.start_angle);
        assert_eq!(o.reward, 0.0);
        let o2 = e.reset().unwrap();
        assert_eq!(o.final_angle, o2.final_angle);
    }

    #[test]
    fn simulated_reset_sweeps_back() {
        let cfg = DialEnvConfig {
            reset_mode: ResetMode::Simulated,
            adc_noise_sd: 0.0,
            ..DialEnvConfig::default()
        };
        let mut e = DialEnv::new(cfg, ws(), 0).unwrap();
        for delta in [90.0, -30.0, 140.0] {
            e.lever.angle = (cfg.start_angle + delta).clamp(0.0, cfg.pot_range);
            e.reset().unwrap();
            assert!(
                (e.lever.angle - cfg.start_angle).abs() <= 1.0,
                "delta={delta} angle={}",
                e.lever.angle
            );
        }
    }

    #[test]
    fn step_requires_reset_between_episodes() {
        let mut e = env();
        let p = SkillParams::new(0.0, 0.0, 0.0, 0.0);
        e.step(&p).unwrap();
        assert_eq!(e.step(&p), Err(EnvError::NotReset));
        e.reset().unwrap();
        e.step(&p).unwrap();
    }

    #[test]
    fn no_contact_episode_keeps_start_angle() {
        let mut e = env();
        // zero-length sweep at (25, 0), well clear of the lever
        let rho_n = 25.0 / 15.0 - 1.0;
        let out = e.step(&SkillParams::new(rho_n, 0.0, rho_n, 0.0)).unwrap();
        let cfg = e.cfg;
        assert_eq!(out.final_angle, cfg.start_angle);
        let expected = reward_with_tol(cfg.start_angle, cfg.target_angle, cfg.success_tol);
        assert_eq!(out.reward, expected);
        assert!(!out.success);
    }

    #[test]
    fn far_segment_never_touches_lever() {
        let cfg = quiet_cfg();
        let lever = LeverState { angle: 45.0 };
        // the whole segment stays farther than lever_length + contact radius
        let a = CartesianPoint::new(-30.0, 28.0, cfg.push_z);
        let b = CartesianPoint::new(30.0, 28.0, cfg.push_z);
        assert_eq!(simulate_sweep(&a, &b, lever, &cfg).angle, 45.0);
    }

    #[test]
    fn out_of_band_segment_does_not_interact() {
        let cfg = quiet_cfg();
        let lever = LeverState { angle: 45.0 };
        let a = CartesianPoint::new(0.0, -30.0, cfg.push_z + 20.0);
        let b = CartesianPoint::new(0.0, 20.0, cfg.push_z + 20.0);
        assert_eq!(simulate_sweep(&a, &b, lever, &cfg).angle, 45.0);
    }

    #[test]
    fn push_past_end_stop_clamps_exactly() {
        let cfg = quiet_cfg();
        // lever close to the top stop; one straight push crossing it from
        // below drives it into the stop and keeps plowing past
        let lever = LeverState { angle: 265.0 };
        let rm = 0.7 * cfg.lever_length;
        let at = |world_deg: f64| {
            let w = world_deg * DEG;
            CartesianPoint::new(
                cfg.pivot[0] + rm * w.cos(),
                cfg.pivot[1] + rm * w.sin(),
                cfg.push_z,
            )
        };
        let state = simulate_sweep(&at(280.0), &at(340.0), lever, &cfg);
        assert_eq!(state.angle, cfg.pot_range);
    }

    #[test]
    fn sweep_agrees_with_fine_oracle_on_uniform_segments() {
        let cfg = quiet_cfg();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(14);
        for _ in 0..40 {
            let a = [rng.random::<f64>() * 60.0 - 30.0, rng.random::<f64>() * 60.0 - 30.0];
            let b = [rng.random::<f64>() * 60.0 - 30.0, rng.random::<f64>() * 60.0 - 30.0];
            let phi0 = rng.random::<f64>() * cfg.pot_range;
            let fast = sweep_xy(a, b, phi0, &cfg);
            let fine = crate::oracles::fine_sweep(a, b, phi0, &cfg, 1e-3);
            assert!(
                (fast - fine).abs() <= 0.1,
                "a={a:?} b={b:?} phi0={phi0} fast={fast} fine={fine}"
            );
        }
    }

    #[test]
    fn reversed_crossing_sweep_cannot_rotate_the_same_way() {
        // direction consistency holds for segments that cross the lever
        // line transversally with both endpoints clear of contact (a graze
        // that enters and leaves on one side pushes the same way from
        // either direction)
        let cfg = quiet_cfg();
        let phi0 = 135.0;
        let phi_w = (cfg.mount_angle + phi0) * DEG;
        let (lx, ly) = (phi_w.cos(), phi_w.sin());
        let cross = |p: &[f64; 2]| {
            let (rx, ry) = (p[0] - cfg.pivot[0], p[1] - cfg.pivot[1]);
            lx * ry - ly * rx
        };
        // the segment must pierce the physical lever span, not just the
        // infinite line through it
        let crosses_lever = |a: &[f64; 2], b: &[f64; 2]| {
            let (ca, cb) = (cross(a), cross(b));
            if ca.signum() == cb.signum() {
                return false;
            }
            let t = ca / (ca - cb);
            let px = a[0] + (b[0] - a[0]) * t - cfg.pivot[0];
            let py = a[1] + (b[1] - a[1]) * t - cfg.pivot[1];
            let along = px * lx + py * ly;
            along > cfg.hub_radius && along < cfg.lever_length
        };
        let clear = |p: &[f64; 2]| dist_to_lever(p[0], p[1], &cfg, phi0) > cfg.contact_radius();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 25 {
            let a = [rng.random::<f64>() * 60.0 - 30.0, rng.random::<f64>() * 60.0 - 30.0];
            let b = [rng.random::<f64>() * 60.0 - 30.0, rng.random::<f64>() * 60.0 - 30.0];
            if !clear(&a) || !clear(&b) || !crosses_lever(&a, &b) {
                continue;
            }
            let fwd = sweep_xy(a, b, phi0, &cfg) - phi0;
            if fwd.abs() < 1e-9 {
                continue;
            }
            let rev = sweep_xy(b, a, phi0, &cfg) - phi0;
            assert!(
                fwd * rev <= 1e-9,
                "both directions rotated the same way: {fwd} vs {rev} (a={a:?} b={b:?})"
            );
            checked += 1;
        }
    }

    #[test]
    fn lever_angle_stays_in_mechanical_range() {
        let cfg = quiet_cfg();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(30);
        let mut state = LeverState { angle: 45.0 };
        for _ in 0..300 {
            let a = CartesianPoint::new(
                rng.random::<f64>() * 60.0 - 30.0,
                rng.random::<f64>() * 60.0 - 30.0,
                cfg.push_z,
            );
            let b = CartesianPoint::new(
                rng.random::<f64>() * 60.0 - 30.0,
                rng.random::<f64>() * 60.0 - 30.0,
                cfg.push_z,
            );
            state = simulate_sweep(&a, &b, state, &cfg);
            assert!(state.angle >= 0.0 && state.angle <= cfg.pot_range);
        }
    }

    #[test]
    fn step_is_deterministic_without_noise() {
        let p = SkillParams::new(0.2, -0.55, 0.5, -0.1);
        let mut e1 = env();
        let mut e2 = env();
        let o1 = e1.step(&p).unwrap();
        let o2 = e2.step(&p).unwrap();
        assert_eq!(o1, o2);
    }

    #[test]
    fn noisy_readout_is_seeded() {
        let cfg = DialEnvConfig::default(); // sd = 2 counts
        let mut a = DialEnv::new(cfg, ws(), 99).unwrap();
        let mut b = DialEnv::new(cfg, ws(), 99).unwrap();
        let ra: Vec<u16> = (0..32).map(|_| a.read_adc()).collect();
        let rb: Vec<u16> = (0..32).map(|_| b.read_adc()).collect();
        assert_eq!(ra, rb);
        assert!(ra.iter().any(|v| *v != ra[0]), "noise should vary codes");
    }

    #[test]
    fn rejects_push_height_outside_workspace() {
        let cfg = DialEnvConfig {
            push_z: 10.0,
            ..quiet_cfg()
        };
        assert!(matches!(
            DialEnv::new(cfg, ws(), 0),
            Err(EnvError::BadConfig(_))
        ));
    }
}

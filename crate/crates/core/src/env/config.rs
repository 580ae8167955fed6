use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::geometry::SceneSpec;

/// Episode randomization, noise, reward and contact parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Maximum steps per episode.
    pub horizon: usize,
    /// Socket offset range in x and y: `U(−r, r)` mm.
    pub socket_xy_range: f64,
    /// Socket height offset: `U(0, r)` mm.
    pub socket_z_range: f64,
    pub socket_yaw_range: f64,
    /// Plug start offset in the socket's x–y plane, mm.
    pub plug_xy_range: f64,
    /// Plug start roll/pitch/yaw range, degrees.
    pub plug_rot_range: f64,
    /// Plug bottom height above the socket's top face at reset, mm.
    pub plug_start_height: f64,
    /// Largest plug observation noise (mm and degrees; tied numerically).
    pub plug_noise_max: f64,
    /// Largest socket observation noise (mm and degrees).
    pub socket_noise_max: f64,
    pub reward_success: f64,
    /// Penalty per mm of penetration per step. Kept below
    /// 1 / (horizon · p_allow) so any successful episode has positive return.
    pub penetration_penalty: f64,
    pub success_tr: f64,
    pub success_rot: f64,
    /// Allowed inter-penetration before contact resolution backtracks, mm.
    pub p_allow: f64,
    pub bisection_iters: usize,
    /// Per-axis action clamp, mm.
    pub action_limit_tr: f64,
    /// Per-axis action clamp, degrees.
    pub action_limit_rot: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon: 256,
            socket_xy_range: 100.0,
            socket_z_range: 50.0,
            socket_yaw_range: 5.0,
            plug_xy_range: 10.0,
            plug_rot_range: 15.0,
            plug_start_height: 10.0,
            plug_noise_max: 5.0,
            socket_noise_max: 1.0,
            reward_success: 1.0,
            penetration_penalty: 0.002,
            success_tr: 1.0,
            success_rot: 2.0,
            p_allow: 1.0,
            bisection_iters: 20,
            action_limit_tr: 2.0,
            action_limit_rot: 2.0,
        }
    }
}

impl EnvConfig {
    /// Defaults with the success and penetration tolerances tightened for
    /// scenes whose clearance is below the 2 mm default geometry.
    pub fn for_scene(scene: &SceneSpec) -> Self {
        let half = scene.tolerance / 2.0;
        Self {
            success_tr: half.min(1.0),
            p_allow: half.min(1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self, scene: &SceneSpec) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        let ranges = [
            ("socket_xy_range", self.socket_xy_range),
            ("socket_z_range", self.socket_z_range),
            ("socket_yaw_range", self.socket_yaw_range),
            ("plug_xy_range", self.plug_xy_range),
            ("plug_rot_range", self.plug_rot_range),
            ("plug_start_height", self.plug_start_height),
            ("plug_noise_max", self.plug_noise_max),
            ("socket_noise_max", self.socket_noise_max),
            ("p_allow", self.p_allow),
            ("penetration_penalty", self.penetration_penalty),
        ];
        for (name, v) in ranges {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        if !(self.success_tr > 0.0 && self.success_rot > 0.0) {
            return bad("success tolerances must be positive".into());
        }
        if self.success_tr >= scene.tolerance {
            return bad(format!(
                "success_tr ({}) must be below the scene tolerance ({})",
                self.success_tr, scene.tolerance
            ));
        }
        if !(self.action_limit_tr > 0.0 && self.action_limit_rot > 0.0) {
            return bad("action limits must be positive".into());
        }
        Ok(())
    }
}

/// Observation-noise magnitudes for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub plug_tr: f64,
    pub plug_rot: f64,
    pub socket_tr: f64,
    pub socket_rot: f64,
}

impl NoiseLevel {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Plug noise `n` mm / `n`°; the socket gets the same magnitude capped at
    /// its configured maximum, so any non-zero level carries socket noise too.
    pub fn from_plug(n: f64, cfg: &EnvConfig) -> Self {
        let s = n.min(cfg.socket_noise_max);
        Self {
            plug_tr: n,
            plug_rot: n,
            socket_tr: s,
            socket_rot: s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.plug_tr == 0.0 && self.plug_rot == 0.0 && self.socket_tr == 0.0 && self.socket_rot == 0.0
    }
}

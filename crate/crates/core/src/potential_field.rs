//! Model-based potential-field controller.
//!
//! The attractive part pulls the observed plug onto a nominal straight path
//! along the cavity axis and then along it toward the goal; the repulsive part
//! pushes the plug away from the socket when their closest samples come within
//! `th`. The two are blended per component with weights `w_tr` / `w_rot`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    closest_pair, medial_anchor_path, pose_delta, separation_lower_bound, AnchorPath, GeometryError,
    PlugSurface, Pose, SocketModel, Twist,
};

/// Distances closer than this are treated as ties when picking the nearest anchor.
const ANCHOR_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfConfig {
    /// Anchor count along the nominal path.
    pub k: usize,
    /// Height of the retract pose above the socket's top face, mm.
    pub retract_height: f64,
    /// Anchor proximity radius that switches from "return to path" to "advance", mm.
    pub switch_threshold: f64,
    /// Repulsion activation distance, mm.
    pub th: f64,
    pub w_tr: f64,
    pub w_rot: f64,
    pub max_step_tr: f64,
    pub max_step_rot: f64,
    /// Floor on the distance used to normalize the repulsive force, mm.
    pub epsilon_d: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            k: 30,
            retract_height: 10.0,
            switch_threshold: 1.0,
            th: 1.0,
            w_tr: 0.33,
            w_rot: 0.0,
            max_step_tr: 2.0,
            max_step_rot: 2.0,
            epsilon_d: 0.01,
        }
    }
}

impl PfConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidArgument(format!("pf: {m}")));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.w_tr) || !(0.0..=1.0).contains(&self.w_rot) {
            return bad("weights must lie in [0, 1]");
        }
        if !(self.epsilon_d > 0.0 && self.th > self.epsilon_d) {
            return bad("need th > epsilon_d > 0");
        }
        if !(self.max_step_tr > 0.0 && self.max_step_rot > 0.0) {
            return bad("max steps must be positive");
        }
        if !(self.switch_threshold >= 0.0 && self.retract_height > 0.0) {
            return bad("switch threshold must be >= 0 and retract height > 0");
        }
        Ok(())
    }

    /// Same configuration with different blend weights.
    pub fn with_weights(&self, w_tr: f64, w_rot: f64) -> PfConfig {
        PfConfig {
            w_tr,
            w_rot,
            ..self.clone()
        }
    }
}

/// Index of the anchor translationally closest to `obs`; ties go to the
/// anchor nearer the goal.
pub fn nearest_anchor(path: &AnchorPath, obs: &Pose) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, a) in path.anchors().iter().enumerate() {
        let d = a.translation_distance(obs);
        if d <= best.1 + ANCHOR_TIE_EPS {
            best = (i, d);
        }
    }
    best
}

/// Attractive action toward the nominal path, then along it.
pub fn attractive_action(path: &AnchorPath, obs: &Pose, cfg: &PfConfig) -> Twist {
    let (i, d) = nearest_anchor(path, obs);
    let target = if d > cfg.switch_threshold {
        &path.anchors()[i]
    } else {
        &path.anchors()[(i + 1).min(path.len() - 1)]
    };
    pose_delta(obs, target).clamp_norm(cfg.max_step_tr, cfg.max_step_rot)
}

/// Repulsive action pushing the observed plug away from the socket.
///
/// With witness points `p_P` (plug) and `p_S` (socket) at separation `d`,
/// the virtual force is `n / max(d, ε)` where `n` is the outward socket
/// normal; away from contact this equals `(p_P − p_S) / d²`, so its magnitude
/// grows as `1/d`. The rotational part maps the force through the
/// pseudo-inverse of the witness point's Jacobian: `r × F / |r|²`, with `r`
/// the lever arm from the plug origin.
pub fn repulsive_action(
    surface: &PlugSurface,
    obs_plug: &Pose,
    socket: &SocketModel,
    cfg: &PfConfig,
) -> Result<Twist, GeometryError> {
    if separation_lower_bound(surface, obs_plug, socket) > cfg.th {
        return Ok(Twist::zero());
    }
    let cp = closest_pair(surface, obs_plug, socket)?;
    if cp.distance > cfg.th {
        return Ok(Twist::zero());
    }
    let force = cp.normal / cp.distance.max(cfg.epsilon_d);
    let lever = cp.plug_point - obs_plug.translation();
    let r2 = lever.norm_squared();
    let d_rot = if r2 > 1e-12 {
        lever.cross(&force).map(f64::to_degrees) / r2
    } else {
        Vector3::zeros()
    };
    Ok(Twist::new(force, d_rot).clamp_norm(cfg.max_step_tr, cfg.max_step_rot))
}

/// Potential-field controller with its nominal path built from the observed
/// socket pose.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub cfg: PfConfig,
    pub path: AnchorPath,
    pub socket: SocketModel,
}

impl PotentialField {
    pub fn new(socket_model: &SocketModel, obs_socket: &Pose, cfg: &PfConfig) -> Result<Self, GeometryError> {
        let socket = socket_model.at(*obs_socket);
        let path = medial_anchor_path(&socket, cfg.retract_height, cfg.k)?;
        Ok(Self {
            cfg: cfg.clone(),
            path,
            socket,
        })
    }

    pub fn attractive(&self, obs_plug: &Pose) -> Twist {
        attractive_action(&self.path, obs_plug, &self.cfg)
    }

    pub fn repulsive(&self, surface: &PlugSurface, obs_plug: &Pose) -> Result<Twist, GeometryError> {
        repulsive_action(surface, obs_plug, &self.socket, &self.cfg)
    }

    pub fn action(&self, surface: &PlugSurface, obs_plug: &Pose) -> Result<PfOutput, GeometryError> {
        let attractive = self.attractive(obs_plug);
        let repulsive = self.repulsive(surface, obs_plug)?;
        let combined = blend(&attractive, &repulsive, &self.cfg);
        Ok(PfOutput {
            attractive,
            repulsive,
            combined,
        })
    }
}

/// The attractive, repulsive and blended twists of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfOutput {
    pub attractive: Twist,
    pub repulsive: Twist,
    pub combined: Twist,
}

/// Per-component convex blend followed by the step clamp.
pub fn blend(att: &Twist, rep: &Twist, cfg: &PfConfig) -> Twist {
    let tr = att.d_translation * cfg.w_tr + rep.d_translation * (1.0 - cfg.w_tr);
    let rot = att.d_rotation * cfg.w_rot + rep.d_rotation * (1.0 - cfg.w_rot);
    let out = Twist::new(tr, rot).clamp_norm(cfg.max_step_tr, cfg.max_step_rot);
    debug_assert!(out.within_limits(cfg.max_step_tr, cfg.max_step_rot));
    out
}

/// Blended potential-field action for observed plug and socket poses.
pub fn pf_action(
    socket_model: &SocketModel,
    surface: &PlugSurface,
    obs_plug: &Pose,
    obs_socket: &Pose,
    cfg: &PfConfig,
) -> Result<Twist, GeometryError> {
    Ok(PotentialField::new(socket_model, obs_socket, cfg)?
        .action(surface, obs_plug)?
        .combined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_surface, PlugModel, Primitive};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        socket: SocketModel,
        surface: PlugSurface,
        path: AnchorPath,
    }

    fn fixture() -> Fixture {
        let plug = PlugModel::new(Primitive::Cylinder, &[48.0], 50.0).unwrap();
        let socket = SocketModel::for_plug(&plug, 2.0, 25.0, [100.0, 100.0, 40.0], Pose::identity()).unwrap();
        let surface = sample_surface(&plug, 1000, 3).unwrap();
        let path = medial_anchor_path(&socket, 10.0, 30).unwrap();
        Fixture { socket, surface, path }
    }

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_translation(Vector3::new(x, y, z))
    }

    #[test]
    fn nearest_anchor_on_an_anchor() {
        let f = fixture();
        let (i, d) = nearest_anchor(&f.path, &f.path.anchors()[5]);
        assert_eq!((i, d), (5, 0.0));
    }

    #[test]
    fn nearest_anchor_tie_goes_to_goal_side() {
        let f = fixture();
        let a = f.path.anchors()[3].translation();
        let b = f.path.anchors()[4].translation();
        let mid = Pose::from_translation((a + b) / 2.0);
        let (i, d) = nearest_anchor(&f.path, &mid);
        assert_eq!(i, 4);
        assert!((d - 35.0 / 29.0 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn nearest_anchor_matches_exhaustive_search() {
        let f = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let obs = at(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-30.0..20.0),
            );
            let (i, d) = nearest_anchor(&f.path, &obs);
            let oracle = f
                .path
                .anchors()
                .iter()
                .map(|a| a.translation_distance(&obs))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d, oracle);
            assert_eq!(f.path.anchors()[i].translation_distance(&obs), oracle);
        }
    }

    #[test]
    fn attractive_far_from_path_points_back_to_it() {
        let f = fixture();
        let s_cl = f.path.anchors()[4];
        let obs = s_cl.compose(&at(5.0, 0.0, 0.0));
        let t = attractive_action(&f.path, &obs, &PfConfig::default());
        assert!((t.d_translation - Vector3::new(-2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(t.d_rotation.norm() < 1e-12);
    }

    #[test]
    fn attractive_converged_at_goal() {
        let f = fixture();
        let t = attractive_action(&f.path, f.path.goal(), &PfConfig::default());
        assert!(t.is_zero());
    }

    #[test]
    fn attractive_on_path_advances_one_spacing() {
        let f = fixture();
        let spacing = 35.0 / 29.0;
        for i in [0, 7, 20] {
            let t = attractive_action(&f.path, &f.path.anchors()[i], &PfConfig::default());
            assert!((t.d_translation - Vector3::new(0.0, 0.0, -spacing)).norm() < 1e-9);
        }
    }

    #[test]
    fn repulsion_is_zero_beyond_threshold() {
        let f = fixture();
        let cfg = PfConfig::default();
        // Plug bottom 2 mm above the top face, well to the side of the cavity.
        let obs = at(45.0, 0.0, 2.0);
        let cp = closest_pair(&f.surface, &obs, &f.socket).unwrap();
        assert!((cp.distance - 2.0).abs() < 1e-9);
        assert!(repulsive_action(&f.surface, &obs, &f.socket, &cfg).unwrap().is_zero());
    }

    #[test]
    fn repulsion_pushes_away_from_the_near_wall() {
        let f = fixture();
        let cfg = PfConfig::default();
        let obs = at(0.4, 0.0, -10.0);
        let t = repulsive_action(&f.surface, &obs, &f.socket, &cfg).unwrap();
        assert!(t.d_translation.x < 0.0, "{t:?}");
        // Oracle: dense plug sampling finds the witness on the +x side.
        let plug = PlugModel::new(Primitive::Cylinder, &[48.0], 50.0).unwrap();
        let dense = sample_surface(&plug, 100_000, 8).unwrap();
        let witness = dense
            .points
            .iter()
            .map(|p| obs.transform_point(p))
            .min_by(|a, b| f.socket.signed_distance(a).total_cmp(&f.socket.signed_distance(b)))
            .unwrap();
        assert!(witness.x > 0.0);
        assert!(t.within_limits(cfg.max_step_tr, cfg.max_step_rot));
    }

    #[test]
    fn opposite_offsets_cancel_laterally() {
        let f = fixture();
        let cfg = PfConfig::default();
        let plus = repulsive_action(&f.surface, &at(0.3, 0.0, -10.0), &f.socket, &cfg).unwrap();
        let minus = repulsive_action(&f.surface, &at(-0.3, 0.0, -10.0), &f.socket, &cfg).unwrap();
        let net = plus.d_translation + minus.d_translation;
        assert!(net.xy().norm() < 0.05 * plus.d_translation.norm(), "{net:?}");
    }

    #[test]
    fn pf_weight_extremes() {
        let f = fixture();
        let far = at(60.0, 10.0, 30.0);
        let cfg1 = PfConfig::default().with_weights(1.0, 1.0);
        let pf = PotentialField::new(&f.socket, &Pose::identity(), &cfg1).unwrap();
        let out = pf.action(&f.surface, &far).unwrap();
        assert!(out.repulsive.is_zero());
        assert_eq!(out.combined, attractive_action(&f.path, &far, &cfg1));

        let near = at(0.5, 0.0, -10.0);
        let cfg0 = PfConfig::default().with_weights(0.0, 0.0);
        let pf = PotentialField::new(&f.socket, &Pose::identity(), &cfg0).unwrap();
        let out = pf.action(&f.surface, &near).unwrap();
        assert!(!out.repulsive.is_zero());
        assert_eq!(out.combined.d_translation, out.repulsive.d_translation);
    }

    #[test]
    fn pf_default_weights_are_a_convex_combination() {
        let f = fixture();
        let cfg = PfConfig::default().with_weights(0.33, 0.5);
        let obs = Pose::from_rpy_deg(Vector3::new(0.6, 0.2, -8.0), 1.0, 0.0, 0.0);
        let pf = PotentialField::new(&f.socket, &Pose::identity(), &cfg).unwrap();
        let out = pf.action(&f.surface, &obs).unwrap();
        assert!(!out.attractive.is_zero() && !out.repulsive.is_zero());
        let (a, r) = (out.attractive.to_array(), out.repulsive.to_array());
        let mut want = [0.0; 6];
        for j in 0..3 {
            want[j] = 0.33 * a[j] + 0.67 * r[j];
            want[j + 3] = 0.5 * a[j + 3] + 0.5 * r[j + 3];
        }
        let want = Twist::from_array(want).clamp_norm(2.0, 2.0).to_array();
        for (g, w) in out.combined.to_array().iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn pf_is_deterministic() {
        let f = fixture();
        let cfg = PfConfig::default();
        let obs = Pose::from_rpy_deg(Vector3::new(0.6, 0.2, 3.0), 4.0, 2.0, 1.0);
        let a = pf_action(&f.socket, &f.surface, &obs, &Pose::identity(), &cfg).unwrap();
        let b = pf_action(&f.socket, &f.surface, &obs, &Pose::identity(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(PfConfig::default().validate().is_ok());
        assert!(PfConfig { w_tr: 1.2, ..Default::default() }.validate().is_err());
        assert!(PfConfig { th: 0.005, ..Default::default() }.validate().is_err());
        assert!(PfConfig { k: 1, ..Default::default() }.validate().is_err());
    }
}

//! Shared fixtures for the criterion benches.

use insertion_core::experiment::{scene_by_name, EASY_SCENE};
use insertion_core::geometry::{Pose, Scene};
use nalgebra::Vector3;

/// The 50 mm cylinder scene with 2 mm clearance.
pub fn easy_scene() -> Scene {
    Scene::new(scene_by_name(EASY_SCENE).expect("catalog scene")).expect("valid scene")
}

/// Plug poses relative to the opening: hovering, at the rim, and half inserted.
pub fn probe_poses(scene: &Scene) -> [(&'static str, Pose); 3] {
    let socket = scene.socket.pose;
    let at = |x: f64, z: f64| socket.compose(&Pose::from_rpy_deg(Vector3::new(x, 0.0, z), 1.0, -2.0, 3.0));
    [("free", at(3.0, 15.0)), ("rim", at(0.6, 0.5)), ("inserted", at(0.2, -15.0))]
}

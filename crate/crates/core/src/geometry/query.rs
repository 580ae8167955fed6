//! Plug–socket proximity queries: sampled plug surface against the exact
//! socket distance field.

use nalgebra::Vector3;

use super::pose::Pose;
use super::sampling::PlugSurface;
use super::shape::SocketModel;
use super::GeometryError;

/// Witness pair of the closest approach between plug and socket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPair {
    /// Plug surface sample (world frame) with the smallest socket distance.
    pub plug_point: Vector3<f64>,
    /// Projection of `plug_point` onto the socket surface.
    pub socket_point: Vector3<f64>,
    /// Separation clamped to be non-negative, mm.
    pub distance: f64,
    /// Unclamped signed distance of the witness (negative when penetrating).
    pub signed_distance: f64,
    /// Outward socket normal at `socket_point`.
    pub normal: Vector3<f64>,
    /// Index of the witness sample.
    pub sample_index: usize,
}

/// Minimum signed socket distance over all transformed samples, with the argmin.
fn min_sample_distance(surface: &PlugSurface, plug_pose: &Pose, socket: &SocketModel) -> (f64, usize) {
    // Work in the socket frame: one composed transform per sample.
    let to_socket = socket.pose.inverse().compose(plug_pose);
    let mut best = (f64::INFINITY, 0);
    for (i, p) in surface.points.iter().enumerate() {
        let local = to_socket.transform_point(p);
        let (d, _, _) = socket.local_query(&local);
        if d < best.0 {
            best = (d, i);
        }
    }
    best
}

/// Lower bound on the plug–socket separation from the bounding sphere; the
/// socket distance field is 1-Lipschitz.
pub fn separation_lower_bound(surface: &PlugSurface, plug_pose: &Pose, socket: &SocketModel) -> f64 {
    socket.signed_distance(&plug_pose.transform_point(&surface.center)) - surface.radius
}

/// Closest plug-sample / socket-surface pair.
pub fn closest_pair(
    surface: &PlugSurface,
    plug_pose: &Pose,
    socket: &SocketModel,
) -> Result<ClosestPair, GeometryError> {
    if surface.is_empty() {
        return Err(GeometryError::InvalidArgument("empty plug surface".into()));
    }
    let (signed, idx) = min_sample_distance(surface, plug_pose, socket);
    // The argmin is the deepest sample, so every sample is deeper than this.
    if signed < -socket.cavity_depth {
        return Err(GeometryError::DegenerateGeometry(format!(
            "all plug samples penetrate deeper than the cavity depth (min distance {signed:.3} mm)"
        )));
    }
    let plug_point = plug_pose.transform_point(&surface.points[idx]);
    let hit = socket.surface_hit(&plug_point);
    Ok(ClosestPair {
        plug_point,
        socket_point: hit.closest,
        distance: signed.max(0.0),
        signed_distance: signed,
        normal: hit.normal,
        sample_index: idx,
    })
}

/// Deepest penetration of any plug sample into the socket material, mm ≥ 0.
pub fn penetration_depth(surface: &PlugSurface, plug_pose: &Pose, socket: &SocketModel) -> f64 {
    if separation_lower_bound(surface, plug_pose, socket) > 0.0 {
        return 0.0;
    }
    let (d, _) = min_sample_distance(surface, plug_pose, socket);
    (-d).max(0.0)
}

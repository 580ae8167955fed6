//! Quasi-static contact handling and success checks.

use crate::geometry::{penetration_depth, pose_delta, PlugSurface, Pose, SocketModel};

/// Result of resolving a commanded motion against the socket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub pose: Pose,
    pub penetration: f64,
    /// Whether the commanded pose had to be backed off.
    pub backtracked: bool,
}

/// Accepts `candidate` if its penetration is within `p_allow`; otherwise
/// bisects along the commanded translation (keeping the commanded rotation)
/// for the furthest admissible pose. When the rotation alone already violates
/// the limit, bisects the whole motion from `previous` instead.
pub fn resolve_contact(
    surface: &PlugSurface,
    socket: &SocketModel,
    previous: &Pose,
    candidate: &Pose,
    p_allow: f64,
    iters: usize,
) -> Resolved {
    let pen = |p: &Pose| penetration_depth(surface, p, socket);
    let p = pen(candidate);
    if p <= p_allow {
        return Resolved {
            pose: *candidate,
            penetration: p,
            backtracked: false,
        };
    }

    let dt = candidate.translation() - previous.translation();
    let rot = *candidate.rotation();
    let along_translation = |s: f64| {
        Pose::new(previous.translation() + dt * s, rot).expect("rotation taken from a valid pose")
    };
    let start = along_translation(0.0);
    let start_pen = pen(&start);
    if start_pen <= p_allow {
        let (pose, penetration) = bisect(along_translation, start, start_pen, &pen, p_allow, iters);
        return Resolved {
            pose,
            penetration,
            backtracked: true,
        };
    }

    let delta = pose_delta(previous, candidate);
    let along_motion = |s: f64| previous.apply_twist(&delta.scale(s));
    let prev_pen = pen(previous);
    let (pose, penetration) = bisect(along_motion, *previous, prev_pen, &pen, p_allow, iters);
    Resolved {
        pose,
        penetration,
        backtracked: true,
    }
}

/// Largest feasible `s ∈ [0, 1)` on `path`, given that `path(0)` is feasible.
fn bisect(
    path: impl Fn(f64) -> Pose,
    start: Pose,
    start_pen: f64,
    pen: &impl Fn(&Pose) -> f64,
    p_allow: f64,
    iters: usize,
) -> (Pose, f64) {
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (start, start_pen);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let pose = path(mid);
        let p = pen(&pose);
        if p <= p_allow {
            lo = mid;
            best = (pose, p);
        } else {
            hi = mid;
        }
    }
    best
}

/// Goal reached within the translation and rotation tolerances, without
/// excessive penetration.
pub fn check_success(plug: &Pose, goal: &Pose, eps_tr: f64, eps_rot: f64, penetration: f64, p_allow: f64) -> bool {
    plug.translation_distance(goal) <= eps_tr && plug.rotation_distance_deg(goal) <= eps_rot && penetration <= p_allow
}

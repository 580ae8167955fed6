//! Fixed-size vector encodings of observations.

use crate::env::Observation;
use crate::geometry::Pose;

use super::PolicyError;

/// Translations are divided by this many millimetres so encoder entries are O(1).
pub const TRANSLATION_SCALE: f64 = 100.0;
pub const POSE_DIM: usize = 12;
pub const ACTOR_INPUT_DIM: usize = 2 * POSE_DIM;
pub const CRITIC_INPUT_DIM: usize = 6 * POSE_DIM;

/// Scaled translation followed by the row-major rotation matrix.
pub fn encode_pose(pose: &Pose, out: &mut [f64]) {
    let a = pose.to_array12();
    for i in 0..3 {
        out[i] = a[i] / TRANSLATION_SCALE;
    }
    out[3..POSE_DIM].copy_from_slice(&a[3..]);
}

/// Observed plug and socket poses.
pub fn encode_actor_obs(obs: &Observation) -> [f64; ACTOR_INPUT_DIM] {
    let mut out = [0.0; ACTOR_INPUT_DIM];
    encode_pose(&obs.plug, &mut out[..POSE_DIM]);
    encode_pose(&obs.socket, &mut out[POSE_DIM..]);
    out
}

/// Observed plug, observed socket, true plug, true socket, observed relative
/// and true relative poses; relative means the plug in the socket's frame.
pub fn encode_critic_obs(obs: &Observation) -> Result<[f64; CRITIC_INPUT_DIM], PolicyError> {
    let gt = obs.privileged.ok_or(PolicyError::MissingPrivilegedData)?;
    let blocks = [
        obs.plug,
        obs.socket,
        gt.plug,
        gt.socket,
        obs.socket.inverse().compose(&obs.plug),
        gt.socket.inverse().compose(&gt.plug),
    ];
    let mut out = [0.0; CRITIC_INPUT_DIM];
    for (chunk, pose) in out.chunks_exact_mut(POSE_DIM).zip(&blocks) {
        encode_pose(pose, chunk);
    }
    Ok(out)
}

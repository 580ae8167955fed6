//! Nominal insertion path along the cavity's medial axis.

use nalgebra::Vector3;

use super::pose::Pose;
use super::shape::SocketModel;
use super::GeometryError;

/// Anchor poses ordered from the retract pose (index 0) to the goal (last).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPath {
    anchors: Vec<Pose>,
}

impl AnchorPath {
    pub fn anchors(&self) -> &[Pose] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn goal(&self) -> &Pose {
        self.anchors.last().expect("anchor path is never empty")
    }

    pub fn retract(&self) -> &Pose {
        &self.anchors[0]
    }
}

/// Discretizes the straight retraction path along the cavity axis into `k`
/// anchors. The path starts `retract_height` above the socket's top face and
/// ends at the goal pose on the cavity floor. For the symmetric cavities
/// supported here the medial axis is the cavity's central axis.
pub fn medial_anchor_path(socket: &SocketModel, retract_height: f64, k: usize) -> Result<AnchorPath, GeometryError> {
    if k < 2 {
        return Err(GeometryError::InvalidArgument(format!("anchor count {k} < 2")));
    }
    if !(retract_height.is_finite() && retract_height > 0.0) {
        return Err(GeometryError::InvalidArgument("retract height must be positive".into()));
    }
    let top = retract_height;
    let bottom = -socket.cavity_depth;
    let last = (k - 1) as f64;
    let anchors = (0..k)
        .map(|i| {
            let t = i as f64 / last;
            let z = top + (bottom - top) * t;
            socket.pose.compose(&Pose::from_translation(Vector3::new(0.0, 0.0, z)))
        })
        .collect();
    Ok(AnchorPath { anchors })
}

//! SE(3) pose algebra and plug/socket geometric queries.

mod anchor;
mod pose;
mod query;
mod sampling;
mod shape;

pub use anchor::{medial_anchor_path, AnchorPath};
pub use pose::{pose_delta, rotation_from_axis_angle_deg, rotation_log_deg, Pose, PoseSpec, Twist};
pub use query::{closest_pair, penetration_depth, separation_lower_bound, ClosestPair};
pub use sampling::{sample_surface, Face, PlugSurface};
pub use shape::{PlugModel, Primitive, Profile, SceneSpec, SocketModel, SurfaceHit};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

/// A scene with its derived geometry, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub plug: PlugModel,
    /// Socket at its nominal (unrandomized) pose.
    pub socket: SocketModel,
    pub surface: std::sync::Arc<PlugSurface>,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Result<Self, GeometryError> {
        spec.validate()?;
        let plug = spec.plug()?;
        let socket = spec.socket()?;
        let surface = std::sync::Arc::new(sample_surface(&plug, spec.sample_count, spec.sample_seed)?);
        Ok(Self {
            spec,
            plug,
            socket,
            surface,
        })
    }
}

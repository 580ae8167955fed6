//! Plug and socket primitives with exact signed distance queries.
//!
//! Frames: the plug frame has its origin at the bottom-face centroid with the
//! plug extruded along +z. The socket frame has its origin at the centre of the
//! cavity opening on the block's top face; the block occupies `z ∈ [−H, 0]`
//! and the cavity is cut down to `z = −depth`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::{Pose, PoseSpec};
use super::GeometryError;

/// Cross-section shape shared by a plug and its cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Cylinder,
    Box,
    /// Regular triangular prism, one vertex pointing along +x.
    Triangle,
}

impl Primitive {
    pub fn dims_len(self) -> usize {
        match self {
            Primitive::Cylinder | Primitive::Triangle => 1,
            Primitive::Box => 2,
        }
    }
}

/// A convex 2D cross-section centred on the origin.
///
/// Dimensions are "widths": the diameter of a circle, the side lengths of a
/// rectangle, and the inscribed-circle diameter of a triangle. With this
/// convention a cavity `tolerance` wider than the plug leaves a uniform
/// `tolerance / 2` gap on every side when centred.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Circle { radius: f64 },
    Polygon { vertices: Vec<Vector2<f64>> },
}

impl Profile {
    pub fn new(primitive: Primitive, widths: &[f64]) -> Result<Self, GeometryError> {
        if widths.len() != primitive.dims_len() {
            return Err(GeometryError::InvalidShape(format!(
                "{primitive:?} expects {} dimension(s), got {}",
                primitive.dims_len(),
                widths.len()
            )));
        }
        if widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GeometryError::InvalidShape("dimensions must be positive".into()));
        }
        Ok(match primitive {
            Primitive::Cylinder => Profile::Circle { radius: widths[0] / 2.0 },
            Primitive::Box => {
                let (hx, hy) = (widths[0] / 2.0, widths[1] / 2.0);
                Profile::Polygon {
                    vertices: vec![
                        Vector2::new(-hx, -hy),
                        Vector2::new(hx, -hy),
                        Vector2::new(hx, hy),
                        Vector2::new(-hx, hy),
                    ],
                }
            }
            Primitive::Triangle => {
                let circumradius = widths[0];
                let vertices = (0..3)
                    .map(|i| {
                        let a = (i as f64) * 2.0 * std::f64::consts::PI / 3.0;
                        Vector2::new(circumradius * a.cos(), circumradius * a.sin())
                    })
                    .collect();
                Profile::Polygon { vertices }
            }
        })
    }

    pub fn area(&self) -> f64 {
        match self {
            Profile::Circle { radius } => std::f64::consts::PI * radius * radius,
            Profile::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        a.x * b.y - b.x * a.y
                    })
                    .sum::<f64>()
            }
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Profile::Circle { radius } => 2.0 * std::f64::consts::PI * radius,
            Profile::Polygon { vertices } => edges(vertices).map(|(a, b)| (b - a).norm()).sum(),
        }
    }

    /// Largest distance from the centre to the boundary.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Profile::Circle { radius } => *radius,
            Profile::Polygon { vertices } => vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        match self {
            Profile::Circle { .. } => &[],
            Profile::Polygon { vertices } => vertices,
        }
    }

    /// Signed distance to the boundary (negative inside), the closest boundary
    /// point, and the outward boundary normal at that point.
    pub fn boundary_query(&self, p: &Vector2<f64>) -> (f64, Vector2<f64>, Vector2<f64>) {
        match self {
            Profile::Circle { radius } => {
                let r = p.norm();
                let n = if r > 1e-15 { p / r } else { Vector2::new(1.0, 0.0) };
                (r - radius, n * *radius, n)
            }
            Profile::Polygon { vertices } => {
                let mut best_d2 = f64::INFINITY;
                let mut best_q = vertices[0];
                let mut best_n = Vector2::new(1.0, 0.0);
                let mut inside = true;
                for (a, b) in edges(vertices) {
                    let e = b - a;
                    let outward = Vector2::new(e.y, -e.x).normalize();
                    if (p - a).dot(&outward) > 0.0 {
                        inside = false;
                    }
                    let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                    let q = a + e * t;
                    let d2 = (p - q).norm_squared();
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best_q = q;
                        best_n = outward;
                    }
                }
                let d = best_d2.sqrt();
                (if inside { -d } else { d }, best_q, best_n)
            }
        }
    }

    pub fn signed_distance(&self, p: &Vector2<f64>) -> f64 {
        self.boundary_query(p).0
    }

    /// Closest point of the closed region to `p`.
    pub fn closest_in_region(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let (d, q, _) = self.boundary_query(p);
        if d <= 0.0 {
            *p
        } else {
            q
        }
    }

    /// Point on the boundary at arc length `s` (measured counter-clockwise
    /// from the first vertex, or from +x for a circle) and its outward normal.
    pub fn boundary_point(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let s = s.rem_euclid(self.perimeter());
        match self {
            Profile::Circle { radius } => {
                let a = s / radius;
                let n = Vector2::new(a.cos(), a.sin());
                (n * *radius, n)
            }
            Profile::Polygon { vertices } => {
                let mut rest = s;
                for (a, b) in edges(vertices) {
                    let len = (b - a).norm();
                    if rest <= len {
                        let e = (b - a) / len;
                        return (a + e * rest, Vector2::new(e.y, -e.x));
                    }
                    rest -= len;
                }
                let (a, b) = (vertices[vertices.len() - 1], vertices[0]);
                let e = (b - a).normalize();
                (b, Vector2::new(e.y, -e.x))
            }
        }
    }
}

fn edges(vertices: &[Vector2<f64>]) -> impl Iterator<Item = (Vector2<f64>, Vector2<f64>)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

/// Rigid plug: a prism of `profile` extruded from `z = 0` (origin at the
/// bottom-face centroid) to `z = height`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlugModel {
    pub primitive: Primitive,
    pub widths: Vec<f64>,
    pub profile: Profile,
    pub height: f64,
}

impl PlugModel {
    pub fn new(primitive: Primitive, widths: &[f64], height: f64) -> Result<Self, GeometryError> {
        if !(height.is_finite() && height > 0.0) {
            return Err(GeometryError::InvalidShape("plug height must be positive".into()));
        }
        Ok(Self {
            primitive,
            widths: widths.to_vec(),
            profile: Profile::new(primitive, widths)?,
            height,
        })
    }

    /// Exact signed distance to the plug solid, in the plug frame.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let d2 = self.profile.signed_distance(&p.xy());
        let dz = (p.z - self.height / 2.0).abs() - self.height / 2.0;
        let outside = Vector2::new(d2.max(0.0), dz.max(0.0)).norm();
        outside + d2.max(dz).min(0.0)
    }
}

/// Closest point on the socket surface to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    /// Positive outside the socket material, negative inside.
    pub signed_distance: f64,
    /// Closest surface point (world frame).
    pub closest: Vector3<f64>,
    /// Outward unit normal of the socket material at `closest` (world frame).
    pub normal: Vector3<f64>,
}

/// A rectangular block with a prismatic cavity cut into its top face.
#[derive(Debug, Clone, PartialEq)]
pub struct SocketModel {
    pub primitive: Primitive,
    pub cavity: Profile,
    pub cavity_widths: Vec<f64>,
    pub cavity_depth: f64,
    /// Half extents of the outer block in x and y, and its full height.
    pub block_half: Vector2<f64>,
    pub block_height: f64,
    pub tolerance: f64,
    pub pose: Pose,
}

impl SocketModel {
    /// Socket whose cavity is `tolerance` wider than `plug` in every dimension.
    pub fn for_plug(
        plug: &PlugModel,
        tolerance: f64,
        cavity_depth: f64,
        block: [f64; 3],
        pose: Pose,
    ) -> Result<Self, GeometryError> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(GeometryError::InvalidShape("tolerance must be positive".into()));
        }
        if !(cavity_depth.is_finite() && cavity_depth > 0.0) {
            return Err(GeometryError::InvalidShape("cavity depth must be positive".into()));
        }
        let cavity_widths: Vec<f64> = plug.widths.iter().map(|w| w + tolerance).collect();
        let cavity = Profile::new(plug.primitive, &cavity_widths)?;
        let block_half = Vector2::new(block[0] / 2.0, block[1] / 2.0);
        let block_height = block[2];
        let r = cavity.bounding_radius();
        let fits = match &cavity {
            Profile::Circle { radius } => *radius < block_half.x.min(block_half.y),
            Profile::Polygon { vertices } => vertices
                .iter()
                .all(|v| v.x.abs() < block_half.x && v.y.abs() < block_half.y),
        };
        if !fits || !(r > 0.0) {
            return Err(GeometryError::InvalidShape("cavity does not fit inside the block".into()));
        }
        if !(block_height > cavity_depth) {
            return Err(GeometryError::InvalidShape("block must be taller than the cavity depth".into()));
        }
        Ok(Self {
            primitive: plug.primitive,
            cavity,
            cavity_widths,
            cavity_depth,
            block_half,
            block_height,
            tolerance,
            pose,
        })
    }

    /// The same socket placed at a different pose.
    pub fn at(&self, pose: Pose) -> SocketModel {
        SocketModel { pose, ..self.clone() }
    }

    /// Fully inserted plug pose: plug origin at the centre of the cavity floor,
    /// orientation equal to the socket's.
    pub fn goal_pose(&self) -> Pose {
        self.pose
            .compose(&Pose::from_translation(Vector3::new(0.0, 0.0, -self.cavity_depth)))
    }

    /// Signed distance from a world point to the socket material.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.local_query(&self.pose.inverse_transform_point(p)).0
    }

    /// Closest surface point, outward normal and signed distance (world frame).
    pub fn surface_hit(&self, p: &Vector3<f64>) -> SurfaceHit {
        let local = self.pose.inverse_transform_point(p);
        let (sd, q, n) = self.local_query(&local);
        SurfaceHit {
            signed_distance: sd,
            closest: self.pose.transform_point(&q),
            normal: self.pose.rotation() * n,
        }
    }

    fn contains_local(&self, p: &Vector3<f64>) -> bool {
        let in_block = p.x.abs() <= self.block_half.x
            && p.y.abs() <= self.block_half.y
            && p.z <= 0.0
            && p.z >= -self.block_height;
        if !in_block {
            return false;
        }
        let in_cavity = p.z > -self.cavity_depth && self.cavity.signed_distance(&p.xy()) < 0.0;
        !in_cavity
    }

    /// Exact query in the socket frame: the minimum over the boundary pieces
    /// (annular top face, block sides and bottom, cavity walls, cavity floor).
    pub fn local_query(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>, Vector3<f64>) {
        let (hx, hy) = (self.block_half.x, self.block_half.y);
        let (h, depth) = (self.block_height, self.cavity_depth);
        let xy = p.xy();
        let (cav_sd, cav_q, cav_n) = self.cavity.boundary_query(&xy);

        let mut best = (f64::INFINITY, Vector3::zeros(), Vector3::zeros());
        let mut consider = |q: Vector3<f64>, n: Vector3<f64>| {
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, q, n);
            }
        };

        // Top face: block rectangle minus the open cavity.
        let top_xy = if xy.x.abs() > hx || xy.y.abs() > hy {
            Vector2::new(xy.x.clamp(-hx, hx), xy.y.clamp(-hy, hy))
        } else if cav_sd < 0.0 {
            cav_q
        } else {
            xy
        };
        consider(Vector3::new(top_xy.x, top_xy.y, 0.0), Vector3::z());
        // Bottom face.
        consider(
            Vector3::new(xy.x.clamp(-hx, hx), xy.y.clamp(-hy, hy), -h),
            -Vector3::z(),
        );
        // Side faces.
        let zc = p.z.clamp(-h, 0.0);
        consider(Vector3::new(hx, xy.y.clamp(-hy, hy), zc), Vector3::x());
        consider(Vector3::new(-hx, xy.y.clamp(-hy, hy), zc), -Vector3::x());
        consider(Vector3::new(xy.x.clamp(-hx, hx), hy, zc), Vector3::y());
        consider(Vector3::new(xy.x.clamp(-hx, hx), -hy, zc), -Vector3::y());
        // Cavity walls; the material normal points into the cavity.
        consider(
            Vector3::new(cav_q.x, cav_q.y, p.z.clamp(-depth, 0.0)),
            Vector3::new(-cav_n.x, -cav_n.y, 0.0),
        );
        // Cavity floor.
        let floor_xy = if cav_sd <= 0.0 { xy } else { cav_q };
        consider(Vector3::new(floor_xy.x, floor_xy.y, -depth), Vector3::z());

        let (d2, q, piece_normal) = best;
        let d = d2.sqrt();
        let inside = self.contains_local(p);
        let normal = if d > 1e-12 {
            if inside {
                (q - p) / d
            } else {
                (p - q) / d
            }
        } else {
            piece_normal
        };
        (if inside { -d } else { d }, q, normal)
    }
}

/// Serializable plug/socket scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub primitive: Primitive,
    /// Plug cross-section widths in mm (see [`Profile`]).
    pub plug_dims: Vec<f64>,
    pub plug_height: f64,
    /// Cavity width minus plug width, mm.
    pub tolerance: f64,
    pub cavity_depth: f64,
    /// Outer block width x, width y, height (mm).
    pub block: [f64; 3],
    /// Nominal socket pose before randomization.
    #[serde(default)]
    pub pose: PoseSpec,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_sample_seed")]
    pub sample_seed: u64,
}

fn default_sample_count() -> usize {
    1000
}

fn default_sample_seed() -> u64 {
    0x5eed
}

impl SceneSpec {
    pub fn plug(&self) -> Result<PlugModel, GeometryError> {
        PlugModel::new(self.primitive, &self.plug_dims, self.plug_height)
    }

    pub fn socket(&self) -> Result<SocketModel, GeometryError> {
        let plug = self.plug()?;
        SocketModel::for_plug(&plug, self.tolerance, self.cavity_depth, self.block, self.pose.to_pose())
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let plug = self.plug()?;
        let socket = self.socket()?;
        if self.sample_count < 4 {
            return Err(GeometryError::InvalidArgument("sample_count must be at least 4".into()));
        }
        if plug.height <= socket.cavity_depth {
            return Err(GeometryError::InvalidShape(
                "plug must be taller than the cavity is deep".into(),
            ));
        }
        Ok(())
    }
}

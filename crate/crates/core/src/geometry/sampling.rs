//! Deterministic quasi-uniform sampling of the plug surface.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::shape::{PlugModel, Profile};
use super::GeometryError;

/// Fraction of the budget reserved for the bottom rim, which is where first
/// contact with the socket happens during insertion.
const RIM_FRACTION: usize = 20;

/// Which face of the plug a sample was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Bottom,
    Top,
    /// Side face; polygon edge index, or 0 for the cylinder mantle.
    Side(usize),
    /// Bottom perimeter (shared by the bottom face and a side face).
    Rim,
}

/// Surface samples of a plug in its own frame, plus a bounding sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct PlugSurface {
    pub points: Vec<Vector3<f64>>,
    pub faces: Vec<Face>,
    pub center: Vector3<f64>,
    pub radius: f64,
    pub seed: u64,
}

impl PlugSurface {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Additive recurrence on the plastic number; low discrepancy in 2D.
struct R2 {
    state: Vector2<f64>,
}

impl R2 {
    const ALPHA: (f64, f64) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_3);

    fn new(offset: Vector2<f64>) -> Self {
        Self { state: offset }
    }

    fn next(&mut self) -> Vector2<f64> {
        self.state.x = (self.state.x + Self::ALPHA.0).fract();
        self.state.y = (self.state.y + Self::ALPHA.1).fract();
        self.state
    }
}

/// Largest-remainder apportionment of `total` samples by weight.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Samples a planar cross-section (the bottom or top cap).
fn sample_cap(profile: &Profile, n: usize, z: f64, seq: &mut R2, out: &mut Vec<Vector3<f64>>) {
    match profile {
        Profile::Circle { radius } => {
            for _ in 0..n {
                let u = seq.next();
                let r = radius * u.x.sqrt();
                let a = 2.0 * std::f64::consts::PI * u.y;
                out.push(Vector3::new(r * a.cos(), r * a.sin(), z));
            }
        }
        Profile::Polygon { vertices } => {
            // Fan of equal-weighted triangles around the centroid (regular shapes).
            let k = vertices.len();
            let areas: Vec<f64> = (0..k)
                .map(|i| {
                    let (a, b) = (vertices[i], vertices[(i + 1) % k]);
                    0.5 * (a.x * b.y - a.y * b.x).abs()
                })
                .collect();
            for (i, count) in apportion(n, &areas).into_iter().enumerate() {
                let (a, b) = (vertices[i], vertices[(i + 1) % k]);
                for _ in 0..count {
                    let u = seq.next();
                    let s = u.x.sqrt();
                    let p = a * (s * (1.0 - u.y)) + b * (s * u.y);
                    out.push(Vector3::new(p.x, p.y, z));
                }
            }
        }
    }
}

/// Draws `m` deterministic samples on the plug's boundary surface.
///
/// A small share of the budget lies on the bottom rim and always includes the
/// rim vertices of polygonal plugs. The rest is split across faces in
/// proportion to their area and laid out with a low-discrepancy sequence
/// whose offset is derived from `seed`.
pub fn sample_surface(plug: &PlugModel, m: usize, seed: u64) -> Result<PlugSurface, GeometryError> {
    if m < 4 {
        return Err(GeometryError::InvalidArgument(format!("sample count {m} < 4")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = &plug.profile;
    let h = plug.height;
    let perimeter = profile.perimeter();
    let verts = profile.vertices();

    let rim = (m / RIM_FRACTION).max(verts.len()).min(m);
    let mut points = Vec::with_capacity(m);
    let mut faces = Vec::with_capacity(m);

    // Rim: vertices first, then evenly spaced along the perimeter.
    for v in verts.iter().take(rim) {
        points.push(Vector3::new(v.x, v.y, 0.0));
        faces.push(Face::Rim);
    }
    let extra = rim - verts.len().min(rim);
    let phase: f64 = rng.random();
    for i in 0..extra {
        let (q, _) = profile.boundary_point(perimeter * (i as f64 + phase) / extra as f64);
        points.push(Vector3::new(q.x, q.y, 0.0));
        faces.push(Face::Rim);
    }

    // Area-proportional faces: bottom, top, then each side face.
    let side_lengths: Vec<f64> = match profile {
        Profile::Circle { .. } => vec![perimeter],
        Profile::Polygon { vertices } => {
            let k = vertices.len();
            (0..k).map(|i| (vertices[(i + 1) % k] - vertices[i]).norm()).collect()
        }
    };
    let mut areas = vec![profile.area(), profile.area()];
    areas.extend(side_lengths.iter().map(|l| l * h));
    let counts = apportion(m - rim, &areas);
    let mut seq = R2::new(Vector2::new(rng.random(), rng.random()));

    let before = points.len();
    sample_cap(profile, counts[0], 0.0, &mut seq, &mut points);
    faces.extend(std::iter::repeat_n(Face::Bottom, points.len() - before));
    let before = points.len();
    sample_cap(profile, counts[1], h, &mut seq, &mut points);
    faces.extend(std::iter::repeat_n(Face::Top, points.len() - before));

    let mut arc_start = 0.0;
    for (i, (len, count)) in side_lengths.iter().zip(&counts[2..]).enumerate() {
        for _ in 0..*count {
            let u = seq.next();
            let (q, _) = profile.boundary_point(arc_start + u.x * len);
            points.push(Vector3::new(q.x, q.y, u.y * h));
            faces.push(Face::Side(i));
        }
        arc_start += len;
    }
    debug_assert_eq!(points.len(), m);

    let center = Vector3::new(0.0, 0.0, h / 2.0);
    let radius = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    Ok(PlugSurface {
        points,
        faces,
        center,
        radius,
        seed,
    })
}

//! Built-in scene catalog: small plugs at sub-millimetre clearance and ~50 mm
//! plugs at three tolerance tiers.

use crate::geometry::{PoseSpec, Primitive, SceneSpec};

/// Tolerance tiers of the large-plug scenes, mm.
pub const EASY_TOLERANCE: f64 = 2.0;
pub const MEDIUM_TOLERANCE: f64 = 1.0;
pub const HARD_TOLERANCE: f64 = 0.1;

/// Name of the scene the headline checks run on.
pub const EASY_SCENE: &str = "cylinder_easy";

fn spec(name: &str, primitive: Primitive, dims: &[f64], height: f64, tolerance: f64, depth: f64, block: [f64; 3]) -> SceneSpec {
    SceneSpec {
        name: name.to_string(),
        primitive,
        plug_dims: dims.to_vec(),
        plug_height: height,
        tolerance,
        cavity_depth: depth,
        block,
        pose: PoseSpec::default(),
        sample_count: 1000,
        sample_seed: 7,
    }
}

/// Every built-in scene, small plugs first.
pub fn catalog() -> Vec<SceneSpec> {
    let small_block = [60.0, 60.0, 30.0];
    let mut out = vec![
        spec("cylinder_8", Primitive::Cylinder, &[8.0], 30.0, 0.5, 15.0, small_block),
        spec("box_12", Primitive::Box, &[12.0, 12.0], 30.0, 0.6, 15.0, small_block),
        spec("triangle_16", Primitive::Triangle, &[16.0], 30.0, 0.6, 15.0, small_block),
    ];
    let large_block = [140.0, 140.0, 50.0];
    for (shape, primitive, dims) in [
        ("cylinder", Primitive::Cylinder, vec![50.0]),
        ("box", Primitive::Box, vec![50.0, 50.0]),
        ("triangle", Primitive::Triangle, vec![50.0]),
    ] {
        for (tier, tol) in [("easy", EASY_TOLERANCE), ("medium", MEDIUM_TOLERANCE), ("hard", HARD_TOLERANCE)] {
            out.push(spec(&format!("{shape}_{tier}"), primitive, &dims, 60.0, tol, 30.0, large_block));
        }
    }
    out
}

pub fn scene_by_name(name: &str) -> Option<SceneSpec> {
    catalog().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::geometry::Scene;

    #[test]
    fn catalog_scenes_build_and_validate() {
        let all = catalog();
        assert_eq!(all.len(), 12);
        let mut names: Vec<_> = all.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 12);
        for s in all {
            EnvConfig::for_scene(&s).validate(&s).unwrap();
            Scene::new(s).unwrap();
        }
    }

    #[test]
    fn tiers_and_lookup() {
        assert_eq!(scene_by_name(EASY_SCENE).unwrap().tolerance, 2.0);
        assert_eq!(scene_by_name("box_medium").unwrap().tolerance, 1.0);
        assert_eq!(scene_by_name("triangle_hard").unwrap().tolerance, 0.1);
        assert!(scene_by_name("sphere").is_none());
        for s in catalog().iter().take(3) {
            assert!((0.5..=0.6).contains(&s.tolerance));
        }
    }
}

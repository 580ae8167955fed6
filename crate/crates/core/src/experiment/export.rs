//! Per-episode CSVs, trace files and potential-field grids.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use super::eval::{run_episode, Controller, EpisodeRecord, EvalSettings};
use super::{ExperimentError, GridConfig};
use crate::env::{write_trace_csv, InsertionEnv};
use crate::geometry::{Pose, Scene};
use crate::policy::Policy;
use crate::potential_field::{PfConfig, PotentialField};
use crate::train::Variant;

pub const EPISODE_HEADER: [&str; 12] = [
    "scene",
    "variant",
    "noise",
    "seed",
    "episode",
    "episode_seed",
    "success",
    "steps",
    "penetration",
    "return",
    "free_steps",
    "free_nonzero_rewards",
];

/// One row per episode; enough to recompute every aggregate of a cell.
pub fn write_episodes_csv<W: Write>(
    out: W,
    scene: &str,
    variant: Variant,
    noise: f64,
    episodes: &[EpisodeRecord],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EPISODE_HEADER)?;
    for e in episodes {
        w.write_record([
            scene.to_string(),
            variant.to_string(),
            noise.to_string(),
            e.seed.to_string(),
            e.episode.to_string(),
            e.episode_seed.to_string(),
            u8::from(e.success).to_string(),
            e.steps.to_string(),
            e.penetration.to_string(),
            e.return_sum.to_string(),
            e.free_steps.to_string(),
            e.free_nonzero_rewards.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes traces of the first `count` episodes of `seed` into `dir`, named
/// `trace_s{seed}_e{episode}_{success|failure}.csv`.
#[allow(clippy::too_many_arguments)]
pub fn export_trajectories(
    scene: &Scene,
    settings: &EvalSettings,
    variant: Variant,
    policy: Option<&Policy>,
    noise: f64,
    seed: u64,
    count: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut env = InsertionEnv::new(scene.clone(), settings.env.clone())?;
    let mut ctrl = Controller::new(variant, policy)?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let mut rows = Vec::new();
        let rec = run_episode(&mut env, &mut ctrl, settings, noise, seed, i, Some(&mut rows))?;
        let tag = if rec.success { "success" } else { "failure" };
        let path = dir.join(format!("trace_s{seed}_e{i:04}_{tag}.csv"));
        write_trace_csv(std::io::BufWriter::new(std::fs::File::create(&path)?), &rows)?;
        paths.push(path);
    }
    Ok(paths)
}

pub const FIELD_HEADER: [&str; 20] = [
    "y", "z", "att_dx", "att_dy", "att_dz", "att_rx", "att_ry", "att_rz", "rep_dx", "rep_dy", "rep_dz", "rep_rx",
    "rep_ry", "rep_rz", "pf_dx", "pf_dy", "pf_dz", "pf_rx", "pf_ry", "pf_rz",
];

/// Field value at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub y: f64,
    pub z: f64,
    pub attractive: [f64; 6],
    pub repulsive: [f64; 6],
    pub combined: [f64; 6],
}

fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range[0]];
    }
    (0..n)
        .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Potential field over a y–z grid in the socket's x = 0 plane. The plug
/// keeps the socket's orientation and its bottom centre sits at (0, y, z)
/// relative to the cavity opening; the socket is observed without noise.
pub fn export_field<W: Write>(scene: &Scene, pf: &PfConfig, grid: &GridConfig, out: W) -> Result<Vec<FieldRow>, ExperimentError> {
    let socket_pose = scene.spec.pose.to_pose();
    let field = PotentialField::new(&scene.socket, &socket_pose, pf)?;
    let mut rows = Vec::with_capacity(grid.ny * grid.nz);
    for z in axis(grid.z, grid.nz) {
        for y in axis(grid.y, grid.ny) {
            let plug = socket_pose.compose(&Pose::from_translation(Vector3::new(0.0, y, z)));
            let o = field.action(&scene.surface, &plug)?;
            rows.push(FieldRow {
                y,
                z,
                attractive: o.attractive.to_array(),
                repulsive: o.repulsive.to_array(),
                combined: o.combined.to_array(),
            });
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELD_HEADER)?;
    for r in &rows {
        let vals = [r.y, r.z].into_iter().chain(r.attractive).chain(r.repulsive).chain(r.combined);
        w.write_record(vals.map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(rows)
}

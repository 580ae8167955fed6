//! Evaluation matrices, result tables, trace and field exports, run manifests.

mod catalog;
mod eval;
mod export;
mod table;

pub use catalog::{catalog, scene_by_name, EASY_SCENE, EASY_TOLERANCE, HARD_TOLERANCE, MEDIUM_TOLERANCE};
pub use eval::{
    episode_seed, evaluate_seed, ActionMode, load_policy_for, run_eval, run_episode, CellResult, CellSpec, Controller, EpisodeRecord,
    EvalSettings, SuccessStats,
};
pub use export::{export_field, export_trajectories, write_episodes_csv, FieldRow, EPISODE_HEADER, FIELD_HEADER};
pub use table::{emit_table, format_cell, read_results_csv, ResultRow, RESULT_HEADER};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{EnvConfig, EnvError};
use crate::geometry::{GeometryError, SceneSpec};
use crate::policy::PolicyError;
use crate::train::{TrainConfig, TrainError, Variant};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A scene given by catalog name or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneEntry {
    Name(String),
    Spec(SceneSpec),
}

impl SceneEntry {
    pub fn resolve(&self) -> Result<SceneSpec, ExperimentError> {
        match self {
            SceneEntry::Name(n) => scene_by_name(n).ok_or_else(|| ExperimentError::UnknownScene(n.clone())),
            SceneEntry::Spec(s) => Ok(s.clone()),
        }
    }
}

/// Field-export grid in the socket frame (x = 0 plane).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub ny: usize,
    pub nz: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            y: [-20.0, 20.0],
            z: [-10.0, 30.0],
            ny: 41,
            nz: 41,
        }
    }
}

/// Top-level experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenes: Vec<SceneEntry>,
    pub variants: Vec<Variant>,
    /// Plug noise levels; n mm pairs with n degrees.
    pub noise_levels: Vec<f64>,
    pub trials: usize,
    /// One training run and one evaluation stream per seed.
    pub seeds: Vec<u64>,
    pub workers: usize,
    /// Environment override; when absent each scene gets its own defaults.
    pub env: Option<EnvConfig>,
    /// Training template; seed, variant, workers and env are set per run.
    pub train: TrainConfig,
    /// Traces written per evaluated cell.
    pub trajectories: usize,
    /// Action selection of learned policies during evaluation.
    pub eval_actions: ActionMode,
    pub grid: GridConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenes: vec![SceneEntry::Name(EASY_SCENE.to_string())],
            variants: vec![Variant::PfOnly],
            noise_levels: vec![0.0, 1.0, 5.0],
            trials: 200,
            seeds: vec![0],
            workers: 1,
            env: None,
            train: TrainConfig::default(),
            trajectories: 0,
            eval_actions: ActionMode::Sample,
            grid: GridConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn scene_specs(&self) -> Result<Vec<SceneSpec>, ExperimentError> {
        self.scenes.iter().map(SceneEntry::resolve).collect()
    }

    pub fn env_for(&self, scene: &SceneSpec) -> EnvConfig {
        self.env.clone().unwrap_or_else(|| EnvConfig::for_scene(scene))
    }

    pub fn eval_settings(&self, scene: &SceneSpec) -> EvalSettings {
        EvalSettings {
            env: self.env_for(scene),
            pf: self.train.pf.clone(),
            residual_limits: self.train.residual_limits(),
            actions: self.eval_actions,
            workers: self.workers,
        }
    }

    pub fn train_config(&self, scene: &SceneSpec, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            workers: self.workers,
            variant,
            env: self.env_for(scene),
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSpec(m.to_string()));
        if self.scenes.is_empty() || self.variants.is_empty() || self.noise_levels.is_empty() {
            return bad("scenes, variants and noise_levels must be non-empty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.noise_levels.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return bad("noise levels must be finite and non-negative");
        }
        let g = &self.grid;
        if g.ny == 0 || g.nz == 0 || !(g.y[0] <= g.y[1] && g.z[0] <= g.z[1]) {
            return bad("grid needs ny, nz ≥ 1 and ordered bounds");
        }
        let specs = self.scene_specs()?;
        let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != specs.len() {
            return bad("scene names must be distinct");
        }
        for s in &specs {
            self.env_for(s).validate(s)?;
            self.train.pf.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, so equal configs hash equally
    /// regardless of file formatting.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub verb: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub version: String,
    /// Verb-specific fields (scene, variant, noise, file checksums, ...).
    pub details: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(verb: &str, config: &ExperimentConfig, seed: u64) -> Self {
        Self {
            verb: verb.to_string(),
            config_sha256: config.hash(),
            seed,
            workers: config.workers,
            version: env!("CARGO_PKG_VERSION").to_string(),
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).expect("manifest value serializes"));
        self
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

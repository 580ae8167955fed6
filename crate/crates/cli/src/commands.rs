//! Verb implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use insertion_core::env::{write_trace_csv, EnvError, InsertionEnv};
use insertion_core::experiment::{
    emit_table, export_field, export_trajectories, load_policy_for, run_episode, run_eval, sha256_hex, write_episodes_csv,
    CellResult, CellSpec, Controller, ExperimentConfig, ExperimentError, Manifest, SceneEntry,
};
use insertion_core::geometry::{Scene, SceneSpec};
use insertion_core::policy::{save_checkpoint, CheckpointMeta, Policy, PolicyError};
use insertion_core::train::{write_log_csv, LogRow, TrainError, Trainer, Variant};

use crate::{Cli, Common, Verb};

/// Failure split by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

/// Lines printed to standard output on success.
#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: Vec<String>,
}

fn config_err(msg: impl std::fmt::Display) -> Failure {
    Failure::Config(anyhow!("{msg}"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(anyhow!("{}: {e}", path.display()))
}

fn is_config_policy_error(e: &PolicyError) -> bool {
    matches!(
        e,
        PolicyError::ChecksumMismatch | PolicyError::CorruptCheckpoint(_) | PolicyError::IncompatibleCheckpoint(_)
    )
}

fn train_failure(e: TrainError) -> Failure {
    let config = match &e {
        TrainError::UnknownVariant(_) | TrainError::InvalidConfig(_) => true,
        TrainError::Env(EnvError::InvalidConfig(_)) => true,
        TrainError::Policy(p) => is_config_policy_error(p),
        _ => false,
    };
    if config {
        Failure::Config(e.into())
    } else {
        Failure::Runtime(e.into())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let config = match &e {
            ExperimentError::Train(_) => {
                let ExperimentError::Train(t) = e else { unreachable!() };
                return train_failure(t);
            }
            ExperimentError::InvalidSpec(_) | ExperimentError::UnknownScene(_) | ExperimentError::Parse(_) => true,
            ExperimentError::Env(EnvError::InvalidConfig(_)) => true,
            ExperimentError::Policy(p) => is_config_policy_error(p),
            _ => false,
        };
        if config {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let c = &cli.common;
    match &cli.verb {
        Verb::Train => train(c),
        Verb::Eval => eval(c),
        Verb::Sweep => sweep(c),
        Verb::FieldDump => field_dump(c),
        Verb::Replay { scene, noise, episode } => replay(c, scene.as_deref(), *noise, *episode),
    }
}

/// Config file plus command-line overrides, validated.
fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(v) = &c.variant {
        let v: Variant = v.parse().map_err(config_err)?;
        cfg.variants = vec![v];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String, Failure> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    Ok(sha256_hex(bytes))
}

fn file_sha(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Writes the effective config next to the outputs so the run can be repeated.
fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<(), Failure> {
    let text = cfg.to_toml().map_err(|e| Failure::Runtime(e.into()))?;
    write_file(&dir.join("config.toml"), text.as_bytes())?;
    Ok(())
}

fn build_scene(spec: &SceneSpec) -> Result<Scene, Failure> {
    Scene::new(spec.clone()).map_err(|e| config_err(format!("scene {}: {e}", spec.name)))
}

struct TrainRun {
    policy: Policy,
    log: Vec<LogRow>,
    final_noise: f64,
    checkpoint_sha256: String,
    log_sha256: String,
}

/// Trains one (scene, variant, seed) into `dir`: `policy.ckpt`,
/// `train_log.csv` (appended per iteration) and `manifest.json`.
fn train_into(
    verb: &str,
    cfg: &ExperimentConfig,
    spec: &SceneSpec,
    scene: &Scene,
    variant: Variant,
    seed: u64,
    dir: &Path,
) -> Result<TrainRun, Failure> {
    create_dir(dir)?;
    let started = Instant::now();
    let tcfg = cfg.train_config(spec, variant, seed);
    let mut trainer = Trainer::new(tcfg, scene).map_err(train_failure)?;
    let log_path = dir.join("train_log.csv");
    let ckpt_path = dir.join("policy.ckpt");
    let mut log_file = BufWriter::new(File::create(&log_path).map_err(|e| io_err(&log_path, e))?);
    write_log_csv(&mut log_file, &[], true).map_err(train_failure)?;
    let meta_of = |t: &Trainer| CheckpointMeta {
        variant: variant.name().to_string(),
        seed,
        env_steps: t.env_steps(),
        noise: t.curriculum().n,
        beta: if variant.uses_curriculum() { t.curriculum().beta() } else { 1.0 },
    };
    let mut log = Vec::new();
    while !trainer.finished() {
        match trainer.iterate() {
            Ok(row) => {
                write_log_csv(&mut log_file, &[row], false).map_err(train_failure)?;
                log_file.flush().map_err(|e| io_err(&log_path, e))?;
                eprintln!(
                    "[{} {} s{}] iter {:>4} steps {:>8} noise {:.2} beta {:.2} success {:.3}",
                    spec.name, variant, seed, row.iteration, row.env_steps, row.noise_mm, row.beta, row.success_rate
                );
                log.push(row);
                if log.len() % 10 == 0 {
                    save_checkpoint(&ckpt_path, trainer.policy(), &meta_of(&trainer))
                        .map_err(|e| Failure::Runtime(e.into()))?;
                }
            }
            Err(TrainError::Diverged { iteration, last_good }) => {
                let _ = save_checkpoint(&ckpt_path, &last_good, &meta_of(&trainer));
                return Err(Failure::Runtime(anyhow!(
                    "training diverged at iteration {iteration}; last good policy saved to {}",
                    ckpt_path.display()
                )));
            }
            Err(e) => return Err(train_failure(e)),
        }
    }
    save_checkpoint(&ckpt_path, trainer.policy(), &meta_of(&trainer)).map_err(|e| Failure::Runtime(e.into()))?;
    let checkpoint_sha256 = file_sha(&ckpt_path)?;
    let log_sha256 = file_sha(&log_path)?;
    let final_noise = trainer.curriculum().n;
    Manifest::new(verb, cfg, seed)
        .with("scene", &spec.name)
        .with("variant", variant)
        .with("env_steps", trainer.env_steps())
        .with("iterations", log.len())
        .with("final_noise", final_noise)
        .with("train_log_sha256", &log_sha256)
        .with("checkpoint_sha256", &checkpoint_sha256)
        .with("arch", trainer.policy().arch())
        .with("wall_seconds", started.elapsed().as_secs_f64())
        .write(dir)?;
    Ok(TrainRun {
        policy: trainer.policy().clone(),
        log,
        final_noise,
        checkpoint_sha256,
        log_sha256,
    })
}

fn train(c: &Common) -> Result<Outcome, Failure> {
    let cfg = load_config(c)?;
    let variant = cfg
        .variants
        .iter()
        .copied()
        .find(|v| v.learns())
        .ok_or_else(|| config_err("no learned variant to train (pf_only has no parameters)"))?;
    let spec = cfg.scene_specs()?.remove(0);
    let scene = build_scene(&spec)?;
    let seed = cfg.seeds[0];
    create_dir(&c.out)?;
    write_config(&c.out, &cfg)?;
    let run = train_into("train", &cfg, &spec, &scene, variant, seed, &c.out)?;
    Ok(Outcome {
        summary: vec![
            format!(
                "trained {variant} on {} (seed {seed}): {} iterations, final noise {:.2}",
                spec.name,
                run.log.len(),
                run.final_noise
            ),
            format!("checkpoint {} sha256 {}", c.out.join("policy.ckpt").display(), run.checkpoint_sha256),
            format!("train log sha256 {}", run.log_sha256),
        ],
    })
}

/// Evaluates every scene × variant × noise cell. `policies_for` supplies the
/// checkpoints of a learned variant, one shared or one per seed.
fn evaluate_matrix<'p>(
    verb: &str,
    cfg: &ExperimentConfig,
    out: &Path,
    policies_for: &dyn Fn(&str, Variant) -> Vec<&'p Policy>,
) -> Result<(Vec<CellResult>, Vec<String>), Failure> {
    let mut results = Vec::new();
    let mut lines = Vec::new();
    for spec in cfg.scene_specs()? {
        let scene = build_scene(&spec)?;
        let settings = cfg.eval_settings(&spec);
        for &variant in &cfg.variants {
            let policies = if variant.learns() { policies_for(&spec.name, variant) } else { Vec::new() };
            for &noise in &cfg.noise_levels {
                let cell = CellSpec {
                    scene: spec.name.clone(),
                    variant,
                    noise,
                    trials: cfg.trials,
                    seeds: cfg.seeds.clone(),
                };
                let result = run_eval(&scene, &settings, &cell, &policies)?;
                let dir = out.join("cells").join(cell.key());
                create_dir(&dir)?;
                let mut buf = Vec::new();
                write_episodes_csv(&mut buf, &spec.name, variant, noise, &result.episodes)?;
                let episodes_sha = write_file(&dir.join("episodes.csv"), &buf)?;
                let mut manifest = Manifest::new(verb, cfg, cfg.seeds[0])
                    .with("scene", &spec.name)
                    .with("variant", variant)
                    .with("noise", noise)
                    .with("trials", cfg.trials)
                    .with("seeds", &cfg.seeds)
                    .with("episodes_sha256", episodes_sha)
                    .with("stats", &result.stats);
                if cfg.trajectories > 0 {
                    for (i, seed) in cfg.seeds.iter().enumerate() {
                        let policy = policies.get(i).or(policies.first()).copied();
                        export_trajectories(&scene, &settings, variant, policy, noise, *seed, cfg.trajectories, &dir.join("traces"))?;
                    }
                }
                if !policies.is_empty() {
                    let shas: Vec<String> = policies.iter().map(|p| sha256_hex(&param_bytes(p))).collect();
                    manifest = manifest.with("policy_param_sha256", shas);
                }
                manifest.write(&dir)?;
                lines.push(format!(
                    "{:<16} {:<26} noise {:<4} success {:.4} ± {:.4} ({}/{})",
                    spec.name,
                    variant.name(),
                    noise,
                    result.stats.mean_rate,
                    result.stats.std_rate,
                    result.stats.successes,
                    result.stats.trials
                ));
                results.push(result);
            }
        }
    }
    Ok((results, lines))
}

/// Raw little-endian parameter bytes, for fingerprinting a policy.
fn param_bytes(p: &Policy) -> Vec<u8> {
    p.params.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_tables(out: &Path, results: &[CellResult]) -> Result<(String, String), Failure> {
    let (text, csv) = emit_table(results)?;
    let csv_sha = write_file(&out.join("results.csv"), csv.as_bytes())?;
    write_file(&out.join("table.txt"), text.as_bytes())?;
    Ok((text, csv_sha))
}

fn eval(c: &Common) -> Result<Outcome, Failure> {
    let cfg = load_config(c)?;
    let learned: Vec<Variant> = cfg.variants.iter().copied().filter(|v| v.learns()).collect();
    let policy = match (learned.as_slice(), &c.checkpoint) {
        ([], _) => None,
        ([v], Some(path)) => Some(load_policy_for(path, *v).map_err(|e| match e {
            ExperimentError::Io(io) => config_err(format!("{}: {io}", path.display())),
            other => other.into(),
        })?),
        ([v], None) => return Err(config_err(format!("variant {v} needs --checkpoint"))),
        (_, _) => {
            return Err(config_err(
                "several learned variants configured; evaluate one at a time with --variant and --checkpoint",
            ))
        }
    };
    create_dir(&c.out)?;
    write_config(&c.out, &cfg)?;
    let shared: Vec<&Policy> = policy.iter().collect();
    let (results, mut lines) = evaluate_matrix("eval", &cfg, &c.out, &|_, _| shared.clone())?;
    let (text, csv_sha) = write_tables(&c.out, &results)?;
    let mut manifest = Manifest::new("eval", &cfg, cfg.seeds[0])
        .with("seeds", &cfg.seeds)
        .with("results_sha256", csv_sha);
    if let Some(path) = &c.checkpoint {
        manifest = manifest.with("checkpoint_sha256", file_sha(path)?);
    }
    manifest.write(&c.out)?;
    lines.push(String::new());
    lines.extend(text.lines().map(String::from));
    Ok(Outcome { summary: lines })
}

fn sweep(c: &Common) -> Result<Outcome, Failure> {
    let cfg = load_config(c)?;
    if c.checkpoint.is_some() {
        return Err(config_err("sweep trains its own policies; --checkpoint is not accepted"));
    }
    create_dir(&c.out)?;
    write_config(&c.out, &cfg)?;
    let mut trained: Vec<(String, Variant, Vec<Policy>)> = Vec::new();
    let mut train_shas = Vec::new();
    for spec in cfg.scene_specs()? {
        let scene = build_scene(&spec)?;
        for &variant in cfg.variants.iter().filter(|v| v.learns()) {
            let mut policies = Vec::new();
            for &seed in &cfg.seeds {
                let dir = c.out.join("train").join(format!("{}__{}__s{seed}", spec.name, variant));
                let run = train_into("sweep-train", &cfg, &spec, &scene, variant, seed, &dir)?;
                train_shas.push((dir.display().to_string(), run.log_sha256));
                policies.push(run.policy);
            }
            trained.push((spec.name.clone(), variant, policies));
        }
    }
    let lookup = |scene: &str, variant: Variant| -> Vec<&Policy> {
        trained
            .iter()
            .find(|(s, v, _)| s == scene && *v == variant)
            .map(|(_, _, p)| p.iter().collect())
            .unwrap_or_default()
    };
    let (results, mut lines) = evaluate_matrix("sweep", &cfg, &c.out, &lookup)?;
    let (text, csv_sha) = write_tables(&c.out, &results)?;
    Manifest::new("sweep", &cfg, cfg.seeds[0])
        .with("seeds", &cfg.seeds)
        .with("cells", results.len())
        .with("results_sha256", csv_sha)
        .with("train_log_sha256", train_shas)
        .write(&c.out)?;
    lines.push(String::new());
    lines.extend(text.lines().map(String::from));
    Ok(Outcome { summary: lines })
}

fn field_dump(c: &Common) -> Result<Outcome, Failure> {
    let cfg = load_config(c)?;
    create_dir(&c.out)?;
    write_config(&c.out, &cfg)?;
    let mut lines = Vec::new();
    let mut shas = Vec::new();
    for spec in cfg.scene_specs()? {
        let scene = build_scene(&spec)?;
        let mut buf = Vec::new();
        let rows = export_field(&scene, &cfg.train.pf, &cfg.grid, &mut buf)?;
        let path: PathBuf = c.out.join(format!("field_{}.csv", spec.name));
        shas.push((spec.name.clone(), write_file(&path, &buf)?));
        lines.push(format!("wrote {} ({} grid points)", path.display(), rows.len()));
    }
    Manifest::new("field-dump", &cfg, cfg.seeds[0])
        .with("grid", &cfg.grid)
        .with("field_sha256", shas)
        .write(&c.out)?;
    Ok(Outcome { summary: lines })
}

fn replay(c: &Common, scene: Option<&str>, noise: Option<f64>, episode: usize) -> Result<Outcome, Failure> {
    let cfg = load_config(c)?;
    let spec = match scene {
        Some(name) => cfg
            .scene_specs()?
            .into_iter()
            .find(|s| s.name == name)
            .map_or_else(|| SceneEntry::Name(name.to_string()).resolve(), Ok)?,
        None => cfg.scene_specs()?.remove(0),
    };
    let noise = noise.unwrap_or(cfg.noise_levels[0]);
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(config_err("noise must be finite and non-negative"));
    }
    let variant = cfg.variants[0];
    let policy = match (variant.learns(), &c.checkpoint) {
        (false, _) => None,
        (true, Some(path)) => Some(load_policy_for(path, variant)?),
        (true, None) => return Err(config_err(format!("variant {variant} needs --checkpoint"))),
    };
    let scene = build_scene(&spec)?;
    let settings = cfg.eval_settings(&spec);
    let seed = cfg.seeds[0];
    let mut env = InsertionEnv::new(scene, settings.env.clone()).map_err(|e| config_err(e))?;
    let mut ctrl = Controller::new(variant, policy.as_ref())?;
    let mut rows = Vec::new();
    let rec = run_episode(&mut env, &mut ctrl, &settings, noise, seed, episode, Some(&mut rows))?;
    create_dir(&c.out)?;
    write_config(&c.out, &cfg)?;
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &rows).map_err(|e| Failure::Runtime(e.into()))?;
    let trace_sha = write_file(&c.out.join("trace.csv"), &buf)?;
    Manifest::new("replay", &cfg, seed)
        .with("scene", &spec.name)
        .with("variant", variant)
        .with("noise", noise)
        .with("episode", episode)
        .with("episode_seed", rec.episode_seed)
        .with("success", rec.success)
        .with("steps", rec.steps)
        .with("trace_sha256", trace_sha)
        .write(&c.out)?;
    Ok(Outcome {
        summary: vec![format!(
            "{} {variant} noise {noise} seed {seed} episode {episode}: {} after {} steps",
            spec.name,
            if rec.success { "success" } else { "failure" },
            rec.steps
        )],
    })
}

//! PPO training of the residual policy with the noise/β curriculum.

mod adam;
mod agent;
mod curriculum;
mod gae;
mod log;
mod ppo;
mod rollout;

pub use adam::Adam;
pub use agent::{compose_action, ActionParts, Variant};
pub use curriculum::{curriculum_update, CurriculumConfig, CurriculumState};
pub use gae::compute_gae;
pub use log::{log_checksum, write_log_csv, LogRow, LOG_HEADER};
pub use ppo::{clip_grad_norm, normalize, ppo_update, PpoConfig, PpoProblem, UpdateStats};
pub use rollout::{BufferProblem, RolloutBuffer, RolloutSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, EnvError, NoiseLevel};
use crate::geometry::{GeometryError, Scene};
use crate::policy::{HiddenState, Policy, PolicyArch, PolicyError, PpoCoeffs};
use crate::potential_field::PfConfig;
use rollout::Worker;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("unknown variant `{0}` (expected one of pf_only, pf_residual_no_curriculum, pf_plus_learned_w, pf_residual_learned_beta, full)")]
    UnknownVariant(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("training diverged at iteration {iteration} (non-finite loss); last good parameters kept")]
    Diverged { iteration: usize, last_good: Box<Policy> },
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
}

/// Everything a training run needs besides the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Rollout worker threads; results do not depend on it.
    pub workers: usize,
    pub variant: Variant,
    pub env: EnvConfig,
    pub pf: PfConfig,
    pub policy: PolicyArch,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumConfig,
    pub residual_limit_tr: f64,
    pub residual_limit_rot: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            variant: Variant::Full,
            env: EnvConfig::default(),
            pf: PfConfig::default(),
            policy: PolicyArch::default(),
            ppo: PpoConfig::default(),
            curriculum: CurriculumConfig::default(),
            residual_limit_tr: 2.0,
            residual_limit_rot: 2.0,
        }
    }
}

impl TrainConfig {
    pub fn residual_limits(&self) -> (f64, f64) {
        (self.residual_limit_tr, self.residual_limit_rot)
    }

    /// Policy architecture with the head the variant needs.
    pub fn arch(&self) -> Option<PolicyArch> {
        self.variant.head().map(|h| self.policy.clone().with_head(h))
    }

    pub fn validate(&self, scene: &Scene) -> Result<(), TrainError> {
        self.ppo.validate()?;
        self.env.validate(&scene.spec)?;
        self.pf.validate()?;
        if self.workers == 0 {
            return Err(TrainError::InvalidConfig("workers must be at least 1".into()));
        }
        let c = &self.curriculum;
        if !(c.n_max >= 0.0 && c.step > 0.0 && c.window > 0 && c.lower_below <= c.raise_above) {
            return Err(TrainError::InvalidConfig("curriculum: need n_max ≥ 0, step > 0, window > 0, lower ≤ raise".into()));
        }
        if !(self.residual_limit_tr > 0.0 && self.residual_limit_rot > 0.0) {
            return Err(TrainError::InvalidConfig("residual limits must be positive".into()));
        }
        Ok(())
    }
}

/// Independent 64-bit stream seeds from one base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateful training loop; one [`Trainer::iterate`] is one rollout plus one
/// PPO update.
pub struct Trainer {
    cfg: TrainConfig,
    policy: Policy,
    adam: Adam,
    curriculum: CurriculumState,
    workers: Vec<Worker>,
    hidden: HiddenState,
    rng: ChaCha8Rng,
    pool: rayon::ThreadPool,
    env_steps: u64,
    iteration: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, scene: &Scene) -> Result<Self, TrainError> {
        cfg.validate(scene)?;
        let arch = cfg
            .arch()
            .ok_or_else(|| TrainError::InvalidConfig(format!("variant {} has nothing to train", cfg.variant)))?;
        let policy = Policy::new(arch, derive_seed(cfg.seed, 0));
        let adam = Adam::new(policy.params.len(), cfg.ppo.learning_rate);
        let start = if cfg.variant.uses_curriculum() { 0.0 } else { cfg.curriculum.n_max };
        let curriculum = CurriculumState::new(&cfg.curriculum, start);
        let (level, beta) = Self::level_of(&cfg, &curriculum);
        let workers = (0..cfg.ppo.num_envs)
            .map(|i| Worker::new(scene, &cfg, i, level, beta))
            .collect::<Result<Vec<_>, _>>()?;
        let hidden = policy.initial_hidden(cfg.ppo.num_envs);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| TrainError::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1)),
            cfg,
            policy,
            adam,
            curriculum,
            workers,
            hidden,
            pool,
            env_steps: 0,
            iteration: 0,
        })
    }

    fn level_of(cfg: &TrainConfig, c: &CurriculumState) -> (NoiseLevel, f64) {
        let beta = if cfg.variant.uses_curriculum() { c.beta() } else { 1.0 };
        (NoiseLevel::from_plug(c.n, &cfg.env), beta)
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn curriculum(&self) -> &CurriculumState {
        &self.curriculum
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// True once another rollout would exceed the step budget.
    pub fn finished(&self) -> bool {
        self.env_steps + self.cfg.ppo.rollout_size() as u64 > self.cfg.ppo.total_steps
    }

    /// Collects a rollout without updating; exposed for inspection.
    pub fn collect(&mut self) -> Result<(RolloutBuffer, RolloutSummary), TrainError> {
        let cfg = &self.cfg;
        let curriculum = &mut self.curriculum;
        let learns_level = cfg.variant.uses_curriculum();
        let out = rollout::collect(cfg, &self.policy, &mut self.workers, &mut self.hidden, &self.pool, |success| {
            if learns_level {
                curriculum.record(success);
            }
            Self::level_of(cfg, curriculum)
        })?;
        self.env_steps += (cfg.ppo.rollout_steps * cfg.ppo.num_envs) as u64;
        Ok(out)
    }

    pub fn iterate(&mut self) -> Result<LogRow, TrainError> {
        let (buffer, summary) = self.collect()?;
        let coeffs = PpoCoeffs {
            clip: self.cfg.ppo.clip,
            value: self.cfg.ppo.value_coef,
            entropy: self.cfg.ppo.entropy_coef,
        };
        let problem = BufferProblem {
            layout: &self.policy.layout,
            buffer: &buffer,
            coeffs,
        };
        let stats = ppo_update(&problem, &mut self.policy.params, &mut self.adam, &self.cfg.ppo, &mut self.rng)
            .map_err(|e| match e {
                TrainError::NonFiniteLoss(_) => TrainError::Diverged {
                    iteration: self.iteration,
                    last_good: Box::new(self.policy.clone()),
                },
                other => other,
            })?;
        let (_, beta) = Self::level_of(&self.cfg, &self.curriculum);
        let row = LogRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            noise_mm: self.curriculum.n,
            beta,
            success_rate: if summary.episodes > 0 {
                summary.successes as f64 / summary.episodes as f64
            } else {
                f64::NAN
            },
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            clip_frac: stats.clip_frac,
            kl: stats.approx_kl,
        };
        self.iteration += 1;
        Ok(row)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Trained policy; `None` for `pf_only`.
    pub policy: Option<Policy>,
    pub log: Vec<LogRow>,
    pub final_noise: f64,
}

/// Trains until the step budget is spent. `on_iteration` sees every log row
/// with the policy after that update.
pub fn train(
    cfg: &TrainConfig,
    scene: &Scene,
    mut on_iteration: impl FnMut(&LogRow, &Policy),
) -> Result<TrainOutput, TrainError> {
    if !cfg.variant.learns() {
        cfg.validate(scene)?;
        return Ok(TrainOutput {
            policy: None,
            log: Vec::new(),
            final_noise: 0.0,
        });
    }
    let mut trainer = Trainer::new(cfg.clone(), scene)?;
    let mut log = Vec::new();
    while !trainer.finished() {
        let row = trainer.iterate()?;
        on_iteration(&row, trainer.policy());
        log.push(row);
    }
    Ok(TrainOutput {
        final_noise: trainer.curriculum.n,
        policy: Some(trainer.policy),
        log,
    })
}

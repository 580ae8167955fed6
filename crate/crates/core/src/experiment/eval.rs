//! Seeded evaluation episodes and per-cell success statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::env::{EnvConfig, InsertionEnv, NoiseLevel, Observation, TraceRow};
use crate::geometry::{Scene, Twist};
use crate::policy::{encode_actor_obs, load_checkpoint, sample_and_logprob, HiddenState, Policy, PolicyError};
use crate::potential_field::PfConfig;
use crate::train::{compose_action, derive_seed, ActionParts, Variant};

/// Stream offset keeping evaluation starts disjoint from training streams.
const EVAL_STREAM: u64 = 1 << 32;
/// Sub-stream of an episode seed that drives sampled actions.
const ACTION_STREAM: u64 = 1;

/// Reset seed of evaluation episode `index` under `seed`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, EVAL_STREAM + index as u64)
}

/// How a learned policy picks its action during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Sample from the policy distribution with a per-episode seeded stream.
    #[default]
    Sample,
    /// Use the distribution mean.
    Mean,
}

/// Controller and environment settings shared by every episode of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub env: EnvConfig,
    pub pf: PfConfig,
    pub residual_limits: (f64, f64),
    pub actions: ActionMode,
    pub workers: usize,
}

/// One cell of an evaluation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub scene: String,
    pub variant: Variant,
    pub noise: f64,
    pub trials: usize,
    pub seeds: Vec<u64>,
}

impl CellSpec {
    /// Directory-safe identifier.
    pub fn key(&self) -> String {
        format!("{}__{}__n{}", self.scene, self.variant, self.noise)
    }
}

/// Evaluation-time acting with β = 1 for residual heads; sampled actions
/// come from a stream seeded per episode, so episodes stay reproducible.
pub struct Controller<'a> {
    variant: Variant,
    policy: Option<&'a Policy>,
    hidden: Option<HiddenState>,
    rng: ChaCha8Rng,
}

impl<'a> Controller<'a> {
    pub fn new(variant: Variant, policy: Option<&'a Policy>) -> Result<Self, ExperimentError> {
        match (variant.head(), policy) {
            (None, _) => Ok(Self {
                variant,
                policy: None,
                hidden: None,
                rng: ChaCha8Rng::seed_from_u64(0),
            }),
            (Some(_), None) => Err(ExperimentError::InvalidSpec(format!("variant {variant} needs a checkpoint"))),
            (Some(head), Some(p)) if p.arch().head != head => Err(PolicyError::IncompatibleCheckpoint(format!(
                "checkpoint head {:?} does not match variant {variant}",
                p.arch().head
            ))
            .into()),
            (Some(_), Some(p)) => Ok(Self {
                variant,
                policy: Some(p),
                hidden: Some(p.initial_hidden(1)),
                rng: ChaCha8Rng::seed_from_u64(0),
            }),
        }
    }

    /// Clears the recurrent state and reseeds the action stream.
    pub fn reset(&mut self, episode_seed: u64) {
        if let Some(p) = self.policy {
            self.hidden = Some(p.initial_hidden(1));
        }
        self.rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, ACTION_STREAM));
    }

    pub fn act(&mut self, obs: &Observation, scene: &Scene, settings: &EvalSettings) -> Result<ActionParts, ExperimentError> {
        let u = match (self.policy, self.hidden.as_mut()) {
            (Some(p), Some(h)) => {
                let (mean, log_std, next) = p.actor_forward(&encode_actor_obs(obs), h);
                *h = next;
                Some(match settings.actions {
                    ActionMode::Mean => mean,
                    ActionMode::Sample => sample_and_logprob(&mean, &log_std, &mut self.rng).0,
                })
            }
            _ => None,
        };
        let parts = compose_action(
            self.variant,
            u.as_deref(),
            1.0,
            &obs.without_privileged(),
            &scene.socket,
            &scene.surface,
            &settings.pf,
            settings.residual_limits,
            (settings.env.action_limit_tr, settings.env.action_limit_rot),
        )?;
        Ok(parts)
    }
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: usize,
    pub episode_seed: u64,
    pub success: bool,
    pub steps: usize,
    pub penetration: f64,
    pub return_sum: f64,
    /// Non-terminal steps without penetration.
    pub free_steps: usize,
    /// Of those, how many carried a nonzero reward.
    pub free_nonzero_rewards: usize,
}

fn trace_row(step: usize, obs: &Observation, parts: Option<&ActionParts>, reward: f64, penetration: f64, done: bool) -> TraceRow {
    let zero = Twist::zero().to_array();
    let truth = obs.privileged.map(|g| g.plug).unwrap_or(obs.plug);
    TraceRow {
        step,
        true_plug: truth.to_array12(),
        observed_plug: obs.plug.to_array12(),
        a_pf: parts.map_or(zero, |p| p.a_pf.to_array()),
        a_rl: parts.map_or(zero, |p| p.a_rl.to_array()),
        a_total: parts.map_or(zero, |p| p.total.to_array()),
        reward,
        penetration,
        done,
    }
}

/// Runs one episode to termination. When `trace` is given, row `t + 1`
/// holds the action taken at step `t` and the observation it produced.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &mut InsertionEnv,
    ctrl: &mut Controller,
    settings: &EvalSettings,
    noise: f64,
    seed: u64,
    episode: usize,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EpisodeRecord, ExperimentError> {
    let level = NoiseLevel::from_plug(noise, &settings.env);
    let ep_seed = episode_seed(seed, episode);
    let mut obs = env.reset(level, ep_seed);
    ctrl.reset(ep_seed);
    if let Some(t) = trace.as_deref_mut() {
        t.push(trace_row(0, &obs, None, 0.0, 0.0, false));
    }
    let scene = env.scene().clone();
    let mut rec = EpisodeRecord {
        seed,
        episode,
        episode_seed: ep_seed,
        success: false,
        steps: 0,
        penetration: 0.0,
        return_sum: 0.0,
        free_steps: 0,
        free_nonzero_rewards: 0,
    };
    loop {
        let parts = ctrl.act(&obs, &scene, settings)?;
        let out = env.step(&parts.total)?;
        rec.steps += 1;
        rec.penetration += out.info.penetration;
        rec.return_sum += out.reward;
        if !out.done && out.info.penetration == 0.0 {
            rec.free_steps += 1;
            if out.reward != 0.0 {
                rec.free_nonzero_rewards += 1;
            }
        }
        obs = out.observation;
        if let Some(t) = trace.as_deref_mut() {
            t.push(trace_row(rec.steps, &obs, Some(&parts), out.reward, out.info.penetration, out.done));
        }
        if out.done {
            rec.success = out.info.success;
            return Ok(rec);
        }
    }
}

/// Runs `trials` episodes for one seed, parallel over episodes; output is in
/// episode order whatever the worker count.
pub fn evaluate_seed(
    scene: &Scene,
    settings: &EvalSettings,
    variant: Variant,
    policy: Option<&Policy>,
    noise: f64,
    seed: u64,
    trials: usize,
) -> Result<Vec<EpisodeRecord>, ExperimentError> {
    Controller::new(variant, policy)?;
    settings.env.validate(&scene.spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers.max(1))
        .build()
        .map_err(|e| ExperimentError::InvalidSpec(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map_init(
                || InsertionEnv::new(scene.clone(), settings.env.clone()),
                |env, i| {
                    let env = env.as_mut().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
                    let mut ctrl = Controller::new(variant, policy)?;
                    run_episode(env, &mut ctrl, settings, noise, seed, i, None)
                },
            )
            .collect()
    })
}

/// Aggregate over seeds: rates are computed per seed, then averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub successes: usize,
    pub trials: usize,
    pub seed_rates: Vec<f64>,
    pub mean_rate: f64,
    /// Sample standard deviation of the per-seed rates (0 for one seed).
    pub std_rate: f64,
    /// Mean episode length over successful episodes; NaN when none succeeded.
    pub mean_steps_to_success: f64,
}

impl SuccessStats {
    /// `episodes` grouped by seed, in `seeds` order.
    pub fn from_episodes(seeds: &[u64], episodes: &[EpisodeRecord]) -> Result<Self, ExperimentError> {
        if seeds.is_empty() {
            return Err(ExperimentError::InvalidSpec("no seeds".into()));
        }
        let mut seed_rates = Vec::with_capacity(seeds.len());
        for s in seeds {
            let mine: Vec<_> = episodes.iter().filter(|e| e.seed == *s).collect();
            if mine.is_empty() {
                return Err(ExperimentError::InvalidSpec(format!("seed {s} has no episodes")));
            }
            seed_rates.push(mine.iter().filter(|e| e.success).count() as f64 / mine.len() as f64);
        }
        let k = seed_rates.len() as f64;
        let mean_rate = seed_rates.iter().sum::<f64>() / k;
        let std_rate = if seed_rates.len() > 1 {
            (seed_rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let won: Vec<_> = episodes.iter().filter(|e| e.success).collect();
        let mean_steps_to_success = if won.is_empty() {
            f64::NAN
        } else {
            won.iter().map(|e| e.steps as f64).sum::<f64>() / won.len() as f64
        };
        Ok(Self {
            successes: won.len(),
            trials: episodes.len(),
            seed_rates,
            mean_rate,
            std_rate,
            mean_steps_to_success,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: CellSpec,
    pub stats: SuccessStats,
    pub episodes: Vec<EpisodeRecord>,
}

/// Evaluates a cell. `policies` holds one checkpoint shared by every seed, or
/// one per seed in `cell.seeds` order; it is ignored for `pf_only`.
pub fn run_eval(
    scene: &Scene,
    settings: &EvalSettings,
    cell: &CellSpec,
    policies: &[&Policy],
) -> Result<CellResult, ExperimentError> {
    if cell.trials == 0 {
        return Err(ExperimentError::InvalidSpec("trials must be at least 1".into()));
    }
    if cell.seeds.is_empty() {
        return Err(ExperimentError::InvalidSpec("at least one seed is required".into()));
    }
    if cell.variant.learns() && policies.len() != 1 && policies.len() != cell.seeds.len() {
        return Err(ExperimentError::InvalidSpec(format!(
            "{} checkpoints for {} seeds",
            policies.len(),
            cell.seeds.len()
        )));
    }
    let mut episodes = Vec::with_capacity(cell.trials * cell.seeds.len());
    for (i, seed) in cell.seeds.iter().enumerate() {
        let policy = match policies.len() {
            0 => None,
            1 => Some(policies[0]),
            _ => Some(policies[i]),
        };
        let policy = policy.filter(|_| cell.variant.learns());
        episodes.extend(evaluate_seed(scene, settings, cell.variant, policy, cell.noise, *seed, cell.trials)?);
    }
    let stats = SuccessStats::from_episodes(&cell.seeds, &episodes)?;
    Ok(CellResult {
        cell: cell.clone(),
        stats,
        episodes,
    })
}

/// Loads a checkpoint and checks that it fits `variant`.
pub fn load_policy_for(path: &std::path::Path, variant: Variant) -> Result<Policy, ExperimentError> {
    let (policy, meta) = load_checkpoint(path)?;
    if meta.variant != variant.name() || Some(policy.arch().head) != variant.head() {
        return Err(PolicyError::IncompatibleCheckpoint(format!(
            "checkpoint was trained as {} but {variant} was requested",
            meta.variant
        ))
        .into());
    }
    Ok(policy)
}

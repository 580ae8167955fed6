//! Clipped-surrogate PPO update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::TrainError;
use crate::policy::LossStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    /// Samples (environment steps) per minibatch.
    pub minibatch: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Global gradient-norm clip; 0 disables it.
    pub max_grad_norm: f64,
    pub num_envs: usize,
    /// Steps collected per environment between updates.
    pub rollout_steps: usize,
    /// Recurrent segment length for truncated back-propagation.
    pub segment_len: usize,
    /// Step budget; training stops before a rollout would exceed it.
    pub total_steps: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.998,
            lambda: 0.95,
            clip: 0.2,
            epochs: 8,
            minibatch: 2048,
            learning_rate: 1e-3,
            entropy_coef: 0.0,
            value_coef: 2.0,
            max_grad_norm: 1.0,
            num_envs: 64,
            rollout_steps: 256,
            segment_len: 32,
            total_steps: 2_000_000,
        }
    }
}

impl PpoConfig {
    pub fn rollout_size(&self) -> usize {
        self.num_envs * self.rollout_steps
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(format!("ppo: {m}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("gamma and lambda must lie in (0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.epochs == 0 || self.num_envs == 0 || self.rollout_steps == 0 || self.segment_len == 0 {
            return bad("epochs, num_envs, rollout_steps and segment_len must be positive");
        }
        if self.rollout_steps % self.segment_len != 0 {
            return bad("rollout_steps must be a multiple of segment_len");
        }
        if self.minibatch == 0 || self.minibatch > self.rollout_size() {
            return bad("minibatch must be positive and at most num_envs × rollout_steps");
        }
        if self.minibatch % self.segment_len != 0 {
            return bad("minibatch must be a multiple of segment_len");
        }
        if self.total_steps < self.rollout_size() as u64 {
            return bad("total_steps must cover at least one rollout");
        }
        if !(self.learning_rate > 0.0) || self.max_grad_norm < 0.0 {
            return bad("learning_rate must be positive and max_grad_norm non-negative");
        }
        Ok(())
    }
}

/// A batch of independent units (recurrent segments, or single samples for
/// a feed-forward toy) whose PPO loss can be evaluated on any subset.
pub trait PpoProblem {
    fn units(&self) -> usize;
    fn rows_per_unit(&self) -> usize;
    /// Loss statistics on `units`; overwrites `grad` with the gradient.
    fn loss(&self, params: &[f64], units: &[usize], grad: &mut [f64]) -> LossStats;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// Runs `cfg.epochs` passes of shuffled minibatch Adam steps. On a non-finite
/// loss or gradient both `params` and `adam` are restored and an error is
/// returned.
pub fn ppo_update<P: PpoProblem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    params: &mut [f64],
    adam: &mut Adam,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, TrainError> {
    let saved = (params.to_vec(), adam.clone());
    let per_batch = (cfg.minibatch / problem.rows_per_unit()).max(1);
    let mut order: Vec<usize> = (0..problem.units()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut stats = UpdateStats::default();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(per_batch) {
            let s = problem.loss(params, chunk, &mut grad);
            if !s.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                params.copy_from_slice(&saved.0);
                *adam = saved.1;
                return Err(TrainError::NonFiniteLoss(s.total));
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(params, &grad);
            stats.policy_loss += s.policy;
            stats.value_loss += s.value;
            stats.entropy += s.entropy;
            stats.clip_frac += s.clip_frac;
            stats.approx_kl += s.approx_kl;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_frac /= k;
    stats.approx_kl /= k;
    Ok(stats)
}

pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Mean-zero, unit-variance rescaling in place.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

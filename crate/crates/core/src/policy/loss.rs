//! PPO objective over recurrent sequence batches, and the gradient contract.

use ndarray::Array2;

use super::gaussian::{entropy, log_prob};
use super::nn::{actor_backward, actor_sequence, critic_backward, critic_tape, log_std, HiddenState, Layout};
use super::PolicyError;

/// A scalar objective with an exact gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    /// Returns the loss and overwrites `grad` with its gradient at `params`.
    fn loss_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64;
    /// Loss only; used by finite-difference checks.
    fn loss(&self, params: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.loss_and_grad(params, &mut g)
    }
}

/// Gradient of `objective` at `params`; fails if the loss is not finite.
pub fn gradient<O: Objective + ?Sized>(objective: &O, params: &[f64]) -> Result<(f64, Vec<f64>), PolicyError> {
    let mut g = vec![0.0; objective.dim()];
    let loss = objective.loss_and_grad(params, &mut g);
    if !loss.is_finite() {
        return Err(PolicyError::NonFiniteLoss(loss));
    }
    Ok((loss, g))
}

/// Whole recurrent segments, time-major: row `t * batch + b` is step `t` of
/// segment `b`.
#[derive(Debug, Clone)]
pub struct SequenceBatch {
    pub steps: usize,
    pub batch: usize,
    pub actor_x: Array2<f64>,
    pub critic_x: Array2<f64>,
    /// Episode begins at this row, so the hidden state entering it is zero.
    pub starts: Vec<bool>,
    pub h0: HiddenState,
    pub actions: Array2<f64>,
    pub old_logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl SequenceBatch {
    pub fn rows(&self) -> usize {
        self.steps * self.batch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoCoeffs {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    /// Estimate of KL(old ‖ new): mean of `(ρ − 1) − ln ρ`.
    pub approx_kl: f64,
}

/// Clipped-surrogate PPO loss with a squared-error value term.
pub struct PpoLoss<'a> {
    pub layout: &'a Layout,
    pub batch: &'a SequenceBatch,
    pub coeffs: PpoCoeffs,
}

impl PpoLoss<'_> {
    /// Loss statistics, writing the gradient when `grad` is given.
    pub fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> LossStats {
        let (layout, b, c) = (self.layout, self.batch, self.coeffs);
        let n = b.rows();
        let nf = n as f64;
        let tape = actor_sequence(layout, params, b.actor_x.view(), &b.starts, &b.h0, b.steps);
        let ls = log_std(layout, params);
        let dim = ls.len();
        let inv_var: Vec<f64> = ls.iter().map(|s| (-2.0 * s).exp()).collect();

        let mut stats = LossStats::default();
        let mut dmean = Array2::zeros((n, dim));
        let mut dls = vec![0.0; dim];
        let mut clipped = 0usize;
        for r in 0..n {
            let mean = tape.mean.row(r);
            let u = b.actions.row(r);
            let lp = log_prob(u.as_slice().unwrap(), mean.as_slice().unwrap(), ls);
            let ratio = (lp - b.old_logp[r]).exp();
            let a = b.advantages[r];
            let rc = ratio.clamp(1.0 - c.clip, 1.0 + c.clip);
            let (unclipped, clip_term) = (ratio * a, rc * a);
            stats.policy -= unclipped.min(clip_term) / nf;
            if (ratio - 1.0).abs() > c.clip {
                clipped += 1;
            }
            stats.approx_kl += ((ratio - 1.0) - (lp - b.old_logp[r])) / nf;
            // The clipped branch is constant in the parameters.
            if unclipped <= clip_term {
                let dlp = -a * ratio / nf;
                for i in 0..dim {
                    let diff = u[i] - mean[i];
                    dmean[(r, i)] = dlp * diff * inv_var[i];
                    dls[i] += dlp * (diff * diff * inv_var[i] - 1.0);
                }
            }
        }
        stats.clip_frac = clipped as f64 / nf;

        let (acts, values) = critic_tape(layout, params, b.critic_x.view());
        let mut dv = vec![0.0; n];
        for r in 0..n {
            let e = values[r] - b.returns[r];
            stats.value += e * e / nf;
            dv[r] = c.value * 2.0 * e / nf;
        }
        stats.entropy = entropy(ls);
        stats.total = stats.policy + c.value * stats.value - c.entropy * stats.entropy;

        if let Some(g) = grad {
            g.fill(0.0);
            actor_backward(layout, params, &tape, &dmean, g);
            critic_backward(layout, params, &acts, &dv, g);
            let off = layout.log_std.offset;
            for i in 0..dim {
                g[off + i] += dls[i] - c.entropy;
            }
        }
        stats
    }
}

impl Objective for PpoLoss<'_> {
    fn dim(&self) -> usize {
        self.layout.len
    }

    fn loss_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(params, Some(grad)).total
    }

    fn loss(&self, params: &[f64]) -> f64 {
        self.evaluate(params, None).total
    }
}

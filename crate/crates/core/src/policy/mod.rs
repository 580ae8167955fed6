//! Residual actor, privileged critic, observation encodings and the Gaussian
//! action head.

mod checkpoint;
mod encode;
mod gaussian;
mod loss;
pub mod nn;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointMeta};
pub use encode::{
    encode_actor_obs, encode_critic_obs, encode_pose, ACTOR_INPUT_DIM, CRITIC_INPUT_DIM, POSE_DIM, TRANSLATION_SCALE,
};
pub use gaussian::{combine_residual, decode_residual, entropy, log_prob, sample_and_logprob, sigmoid};
pub use loss::{gradient, LossStats, Objective, PpoCoeffs, PpoLoss, SequenceBatch};
pub use nn::{HeadKind, HiddenState, Layout, PolicyArch};

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("observation lacks the privileged ground-truth fields")]
    MissingPrivilegedData,
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint does not fit this model: {0}")]
    IncompatibleCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Actor and critic parameters with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub layout: Layout,
    pub params: Vec<f64>,
}

impl Policy {
    /// Freshly initialized weights drawn from `seed`.
    pub fn new(arch: PolicyArch, seed: u64) -> Self {
        let layout = Layout::new(&arch);
        let params = layout.init_params(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { layout, params }
    }

    pub fn zeros(arch: PolicyArch) -> Self {
        let layout = Layout::new(&arch);
        let params = vec![0.0; layout.len];
        Self { layout, params }
    }

    pub fn from_params(arch: PolicyArch, params: Vec<f64>) -> Result<Self, PolicyError> {
        let layout = Layout::new(&arch);
        if params.len() != layout.len {
            return Err(PolicyError::IncompatibleCheckpoint(format!(
                "{} parameters for an architecture of {}",
                params.len(),
                layout.len
            )));
        }
        Ok(Self { layout, params })
    }

    pub fn arch(&self) -> &PolicyArch {
        &self.layout.arch
    }

    pub fn log_std(&self) -> &[f64] {
        nn::log_std(&self.layout, &self.params)
    }

    pub fn initial_hidden(&self, batch: usize) -> HiddenState {
        HiddenState::zeros(self.arch(), batch)
    }

    /// Single-observation actor step: `(mean, log_std, next hidden state)`.
    pub fn actor_forward(&self, x: &[f64], h: &HiddenState) -> (Vec<f64>, Vec<f64>, HiddenState) {
        let mut next = h.clone();
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let mean = nn::actor_step(&self.layout, &self.params, xv, &mut next, &[false]);
        (mean.into_raw_vec_and_offset().0, self.log_std().to_vec(), next)
    }

    /// Batched actor step; `starts` marks rows that begin a new episode.
    pub fn actor_batch(&self, x: ArrayView2<f64>, h: &mut HiddenState, starts: &[bool]) -> ndarray::Array2<f64> {
        nn::actor_step(&self.layout, &self.params, x, h, starts)
    }

    pub fn critic_forward(&self, x: &[f64]) -> f64 {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        nn::critic_values(&self.layout, &self.params, xv)[0]
    }

    pub fn critic_batch(&self, x: ArrayView2<f64>) -> Vec<f64> {
        nn::critic_values(&self.layout, &self.params, x)
    }
}

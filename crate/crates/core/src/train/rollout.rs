//! Parallel rollout collection into recurrent-segment buffers.

use ndarray::{s, Array2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::agent::{compose_action, ActionParts, Variant};
use super::gae::compute_gae;
use super::ppo::{normalize, PpoProblem};
use super::{derive_seed, TrainConfig, TrainError};
use crate::env::{InsertionEnv, NoiseLevel, Observation};
use crate::geometry::Scene;
use crate::policy::{
    encode_actor_obs, encode_critic_obs, nn, sample_and_logprob, HiddenState, Layout, LossStats, Policy, PpoCoeffs,
    PpoLoss, SequenceBatch, ACTOR_INPUT_DIM, CRITIC_INPUT_DIM,
};

/// One environment plus its private random stream.
pub(crate) struct Worker {
    env: InsertionEnv,
    rng: ChaCha8Rng,
    obs: Observation,
    start: bool,
    beta: f64,
}

struct StepResult {
    u: Vec<f64>,
    logp: f64,
    parts: ActionParts,
    reward: f64,
    done: bool,
    success: bool,
}

impl Worker {
    pub(crate) fn new(scene: &Scene, cfg: &TrainConfig, index: usize, level: NoiseLevel, beta: f64) -> Result<Self, TrainError> {
        let env = InsertionEnv::new(scene.clone(), cfg.env.clone())?;
        let mut w = Self {
            env,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1000 + index as u64)),
            obs: Observation {
                step: 0,
                plug: Default::default(),
                socket: Default::default(),
                privileged: None,
            },
            start: true,
            beta,
        };
        w.reset(level, beta);
        Ok(w)
    }

    fn reset(&mut self, level: NoiseLevel, beta: f64) {
        let seed = self.rng.next_u64();
        self.obs = self.env.reset(level, seed);
        self.start = true;
        self.beta = beta;
    }

    fn step(&mut self, cfg: &TrainConfig, variant: Variant, mean: &[f64], log_std: &[f64]) -> Result<StepResult, TrainError> {
        let (u, logp) = sample_and_logprob(mean, log_std, &mut self.rng);
        let scene = self.env.scene();
        let parts = compose_action(
            variant,
            Some(&u),
            self.beta,
            &self.obs,
            &scene.socket,
            &scene.surface,
            &cfg.pf,
            cfg.residual_limits(),
            (cfg.env.action_limit_tr, cfg.env.action_limit_rot),
        )?;
        let out = self.env.step(&parts.total)?;
        self.obs = out.observation;
        self.start = false;
        Ok(StepResult {
            u,
            logp,
            parts,
            reward: out.reward,
            done: out.done,
            success: out.info.success,
        })
    }
}

/// Time-major rollout storage: row `t * envs + e`.
pub struct RolloutBuffer {
    pub steps: usize,
    pub envs: usize,
    pub segment_len: usize,
    pub actor_x: Array2<f64>,
    pub critic_x: Array2<f64>,
    pub starts: Vec<bool>,
    pub actions: Array2<f64>,
    pub logp: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub a_pf: Vec<[f64; 6]>,
    pub a_total: Vec<[f64; 6]>,
    /// Hidden state entering each segment, one per segment index.
    pub segment_h0: Vec<HiddenState>,
    pub bootstrap: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    fn new(steps: usize, envs: usize, segment_len: usize, action_dim: usize) -> Self {
        let rows = steps * envs;
        Self {
            steps,
            envs,
            segment_len,
            actor_x: Array2::zeros((rows, ACTOR_INPUT_DIM)),
            critic_x: Array2::zeros((rows, CRITIC_INPUT_DIM)),
            starts: vec![false; rows],
            actions: Array2::zeros((rows, action_dim)),
            logp: vec![0.0; rows],
            values: vec![0.0; rows],
            rewards: vec![0.0; rows],
            dones: vec![false; rows],
            a_pf: vec![[0.0; 6]; rows],
            a_total: vec![[0.0; 6]; rows],
            segment_h0: Vec::new(),
            bootstrap: vec![0.0; envs],
            advantages: vec![0.0; rows],
            returns: vec![0.0; rows],
        }
    }

    /// Per-environment GAE, then advantage normalization over the whole buffer.
    pub fn finish(&mut self, gamma: f64, lambda: f64) {
        let (steps, envs) = (self.steps, self.envs);
        for e in 0..envs {
            let idx: Vec<usize> = (0..steps).map(|t| t * envs + e).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (adv, ret) = compute_gae(&r, &v, &d, self.bootstrap[e], gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = adv[k];
                self.returns[i] = ret[k];
            }
        }
        normalize(&mut self.advantages);
    }

    pub fn segments(&self) -> usize {
        (self.steps / self.segment_len) * self.envs
    }

    /// Sequence batch of the given segments (unit `k * envs + e` is segment
    /// `k` of environment `e`).
    pub fn sequence_batch(&self, units: &[usize]) -> SequenceBatch {
        let (l, b) = (self.segment_len, units.len());
        let rows = l * b;
        let src: Vec<usize> = (0..l)
            .flat_map(|t| units.iter().map(move |&u| (u / self.envs * l + t) * self.envs + u % self.envs))
            .collect();
        let pick = |a: &Array2<f64>| a.select(ndarray::Axis(0), &src);
        let gather = |v: &Vec<f64>| src.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let parts: Vec<HiddenState> = units
            .iter()
            .map(|&u| self.segment_h0[u / self.envs].select(&[u % self.envs]))
            .collect();
        let h0 = if parts.first().is_some_and(|p| !p.h.is_empty()) {
            HiddenState::concat(&parts)
        } else {
            HiddenState { h: vec![], c: vec![] }
        };
        debug_assert_eq!(src.len(), rows);
        SequenceBatch {
            steps: l,
            batch: b,
            actor_x: pick(&self.actor_x),
            critic_x: pick(&self.critic_x),
            starts: src.iter().map(|&i| self.starts[i]).collect(),
            h0,
            actions: pick(&self.actions),
            old_logp: gather(&self.logp),
            advantages: gather(&self.advantages),
            returns: gather(&self.returns),
        }
    }
}

/// PPO problem over a finished rollout buffer.
pub struct BufferProblem<'a> {
    pub layout: &'a Layout,
    pub buffer: &'a RolloutBuffer,
    pub coeffs: PpoCoeffs,
}

impl PpoProblem for BufferProblem<'_> {
    fn units(&self) -> usize {
        self.buffer.segments()
    }

    fn rows_per_unit(&self) -> usize {
        self.buffer.segment_len
    }

    fn loss(&self, params: &[f64], units: &[usize], grad: &mut [f64]) -> LossStats {
        let batch = self.buffer.sequence_batch(units);
        PpoLoss {
            layout: self.layout,
            batch: &batch,
            coeffs: self.coeffs,
        }
        .evaluate(params, Some(grad))
    }
}

/// Episode outcomes seen during a rollout, in completion order.
#[derive(Debug, Default, Clone)]
pub struct RolloutSummary {
    pub episodes: usize,
    pub successes: usize,
}

/// Collects `cfg.ppo.rollout_steps` steps from every worker. `on_done` is
/// called in environment order for each finished episode and returns the
/// noise level and β for the replacement episode.
pub(crate) fn collect(
    cfg: &TrainConfig,
    policy: &Policy,
    workers: &mut [Worker],
    hidden: &mut HiddenState,
    pool: &rayon::ThreadPool,
    mut on_done: impl FnMut(bool) -> (NoiseLevel, f64),
) -> Result<(RolloutBuffer, RolloutSummary), TrainError> {
    let ppo = &cfg.ppo;
    let (steps, envs) = (ppo.rollout_steps, workers.len());
    let dim = policy.arch().action_dim();
    let mut buf = RolloutBuffer::new(steps, envs, ppo.segment_len, dim);
    let mut summary = RolloutSummary::default();
    let log_std = policy.log_std().to_vec();
    for t in 0..steps {
        if t % ppo.segment_len == 0 {
            buf.segment_h0.push(hidden.clone());
        }
        let r0 = t * envs;
        for (e, w) in workers.iter().enumerate() {
            buf.actor_x.row_mut(r0 + e).assign(&ndarray::ArrayView1::from(&encode_actor_obs(&w.obs)));
            buf.critic_x.row_mut(r0 + e).assign(&ndarray::ArrayView1::from(&encode_critic_obs(&w.obs)?));
            buf.starts[r0 + e] = w.start;
        }
        let x = buf.actor_x.slice(s![r0..r0 + envs, ..]);
        let means = nn::actor_step(&policy.layout, &policy.params, x, hidden, &buf.starts[r0..r0 + envs]);
        let values = policy.critic_batch(buf.critic_x.slice(s![r0..r0 + envs, ..]));
        let results: Vec<Result<StepResult, TrainError>> = pool.install(|| {
            workers
                .par_iter_mut()
                .enumerate()
                .map(|(e, w)| w.step(cfg, cfg.variant, means.row(e).as_slice().unwrap(), &log_std))
                .collect()
        });
        for (e, res) in results.into_iter().enumerate() {
            let r = res?;
            let row = r0 + e;
            buf.actions.row_mut(row).assign(&ndarray::ArrayView1::from(&r.u));
            buf.logp[row] = r.logp;
            buf.values[row] = values[e];
            buf.rewards[row] = r.reward;
            buf.dones[row] = r.done;
            buf.a_pf[row] = r.parts.a_pf.to_array();
            buf.a_total[row] = r.parts.total.to_array();
            if r.done {
                summary.episodes += 1;
                summary.successes += usize::from(r.success);
                let (level, beta) = on_done(r.success);
                workers[e].reset(level, beta);
            }
        }
    }
    let cx: Vec<f64> = workers
        .iter()
        .map(|w| encode_critic_obs(&w.obs).map(|a| a.to_vec()))
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    let cx = Array2::from_shape_vec((envs, CRITIC_INPUT_DIM), cx).expect("one row per env");
    buf.bootstrap = policy.critic_batch(cx.view());
    buf.finish(ppo.gamma, ppo.lambda);
    Ok((buf, summary))
}

//! Flat-parameter actor/critic networks with hand-written reverse mode.
//!
//! All parameters live in one `Vec<f64>`; [`Layout`] maps each weight block to
//! a slice of it. Batched tensors are row-major `(rows, features)` arrays. In
//! sequence batches row `t * batch + b` holds time step `t` of sequence `b`.

use nalgebra::DMatrix;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::encode::{ACTOR_INPUT_DIM, CRITIC_INPUT_DIM};

/// What the actor's Gaussian head parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Six residual twist components, squashed to [−1, 1].
    Residual,
    /// Two potential-field weight logits (translation, rotation).
    Weights,
    /// Six squashed residual components plus one scale logit.
    ResidualWithScale,
}

impl HeadKind {
    pub fn dim(self) -> usize {
        match self {
            HeadKind::Residual => 6,
            HeadKind::Weights => 2,
            HeadKind::ResidualWithScale => 7,
        }
    }

    /// Whether output `i` passes through `tanh`.
    pub fn squashed(self, i: usize) -> bool {
        match self {
            HeadKind::Weights => false,
            _ => i < 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyArch {
    pub trunk: Vec<usize>,
    /// LSTM layer widths; empty for a feed-forward actor.
    pub recurrent: Vec<usize>,
    pub head: HeadKind,
    pub critic: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PolicyArch {
    fn default() -> Self {
        Self {
            trunk: vec![64, 64, 64],
            recurrent: vec![64, 64],
            head: HeadKind::Residual,
            critic: vec![64, 64, 64],
            init_log_std: 0.6f64.ln(),
        }
    }
}

impl PolicyArch {
    pub fn feed_forward(mut self) -> Self {
        self.recurrent.clear();
        self
    }

    pub fn with_head(mut self, head: HeadKind) -> Self {
        self.head = head;
        self
    }

    pub fn action_dim(&self) -> usize {
        self.head.dim()
    }

    pub fn is_recurrent(&self) -> bool {
        !self.recurrent.is_empty()
    }
}

/// A `rows × cols` block of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn view<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), &p[self.offset..self.offset + self.len()])
            .expect("block lies inside the parameter vector")
    }

    pub fn view_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut p[self.offset..self.offset + self.len()])
            .expect("block lies inside the parameter vector")
    }
}

/// Affine layer `y = x Wᵀ + b`, `W` stored `(out, in)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: Block,
    pub b: Block,
}

/// LSTM layer with gates ordered (input, forget, cell, output).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w_ih: Block,
    pub w_hh: Block,
    pub b: Block,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub arch: PolicyArch,
    pub trunk: Vec<Dense>,
    pub lstm: Vec<Lstm>,
    pub head: Dense,
    pub log_std: Block,
    pub critic: Vec<Dense>,
    pub critic_out: Dense,
    pub len: usize,
}

struct Alloc(usize);

impl Alloc {
    fn block(&mut self, rows: usize, cols: usize) -> Block {
        let b = Block {
            offset: self.0,
            rows,
            cols,
        };
        self.0 += rows * cols;
        b
    }

    fn dense(&mut self, input: usize, output: usize) -> Dense {
        Dense {
            w: self.block(output, input),
            b: self.block(1, output),
        }
    }
}

impl Layout {
    pub fn new(arch: &PolicyArch) -> Self {
        let mut a = Alloc(0);
        let mut width = ACTOR_INPUT_DIM;
        let mut trunk = Vec::new();
        for &w in &arch.trunk {
            trunk.push(a.dense(width, w));
            width = w;
        }
        let mut lstm = Vec::new();
        for &h in &arch.recurrent {
            lstm.push(Lstm {
                w_ih: a.block(4 * h, width),
                w_hh: a.block(4 * h, h),
                b: a.block(1, 4 * h),
                hidden: h,
            });
            width = h;
        }
        let head = a.dense(width, arch.action_dim());
        let log_std = a.block(1, arch.action_dim());
        let mut critic = Vec::new();
        let mut width = CRITIC_INPUT_DIM;
        for &w in &arch.critic {
            critic.push(a.dense(width, w));
            width = w;
        }
        let critic_out = a.dense(width, 1);
        Self {
            arch: arch.clone(),
            trunk,
            lstm,
            head,
            log_std,
            critic,
            critic_out,
            len: a.0,
        }
    }

    /// Orthogonal weights (gain √2 in hidden layers, 0.01 at the actor head,
    /// 1 at the critic output), zero biases, constant log-std.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.len];
        let hidden_gain = std::f64::consts::SQRT_2;
        for d in &self.trunk {
            orthogonal(d.w, hidden_gain, rng, &mut p);
        }
        for l in &self.lstm {
            orthogonal(l.w_ih, 1.0, rng, &mut p);
            orthogonal(l.w_hh, 1.0, rng, &mut p);
        }
        orthogonal(self.head.w, 0.01, rng, &mut p);
        for d in &self.critic {
            orthogonal(d.w, hidden_gain, rng, &mut p);
        }
        orthogonal(self.critic_out.w, 1.0, rng, &mut p);
        p[self.log_std.offset..self.log_std.offset + self.log_std.len()].fill(self.arch.init_log_std);
        p
    }
}

fn orthogonal<R: Rng + ?Sized>(block: Block, gain: f64, rng: &mut R, p: &mut [f64]) {
    let (r, c) = (block.rows, block.cols);
    let (tall, short) = (r.max(c), r.min(c));
    let g = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rd = qr.r();
    // Sign fix makes the draw uniform over orthogonal matrices.
    for j in 0..short {
        if rd[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut v = block.view_mut(p);
    for i in 0..r {
        for j in 0..c {
            v[(i, j)] = gain * if r >= c { q[(i, j)] } else { q[(j, i)] };
        }
    }
}

/// Per-layer LSTM output and cell memories for a batch of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Array2<f64>>,
    pub c: Vec<Array2<f64>>,
}

impl HiddenState {
    pub fn zeros(arch: &PolicyArch, batch: usize) -> Self {
        let mk = || arch.recurrent.iter().map(|&h| Array2::zeros((batch, h))).collect();
        Self { h: mk(), c: mk() }
    }

    pub fn batch(&self) -> usize {
        self.h.first().map_or(0, |a| a.nrows())
    }

    /// Zeroes the rows whose flag is set.
    pub fn reset_rows(&mut self, rows: &[bool]) {
        for a in self.h.iter_mut().chain(self.c.iter_mut()) {
            for (i, &r) in rows.iter().enumerate() {
                if r {
                    a.row_mut(i).fill(0.0);
                }
            }
        }
    }

    /// Hidden state of the listed rows, in order.
    pub fn select(&self, rows: &[usize]) -> HiddenState {
        let pick = |v: &Vec<Array2<f64>>| v.iter().map(|a| a.select(Axis(0), rows)).collect();
        HiddenState {
            h: pick(&self.h),
            c: pick(&self.c),
        }
    }

    /// Stacks single- or multi-row states along the batch axis.
    pub fn concat(parts: &[HiddenState]) -> HiddenState {
        let layers = parts.first().map_or(0, |p| p.h.len());
        let cat = |get: &dyn Fn(&HiddenState) -> &Vec<Array2<f64>>| {
            (0..layers)
                .map(|l| {
                    let views: Vec<_> = parts.iter().map(|p| get(p)[l].view()).collect();
                    ndarray::concatenate(Axis(0), &views).expect("matching widths")
                })
                .collect()
        };
        HiddenState {
            h: cat(&|p| &p.h),
            c: cat(&|p| &p.c),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(x: &ArrayView2<f64>, d: &Dense, p: &[f64]) -> Array2<f64> {
    x.dot(&d.w.view(p).t()) + &d.b.view(p)
}

/// Accumulates the parameter gradient of an affine layer and returns `∂/∂x`.
fn affine_backward(dy: &Array2<f64>, x: &ArrayView2<f64>, d: &Dense, p: &[f64], g: &mut [f64]) -> Array2<f64> {
    general_mat_mul(1.0, &dy.t(), x, 1.0, &mut d.w.view_mut(g));
    let mut gb = d.b.view_mut(g);
    gb.row_mut(0).scaled_add(1.0, &dy.sum_axis(Axis(0)));
    dy.dot(&d.w.view(p))
}

fn tanh_layers(x: ArrayView2<f64>, layers: &[Dense], p: &[f64]) -> Vec<Array2<f64>> {
    let mut acts = vec![x.to_owned()];
    for d in layers {
        let y = affine(&acts.last().unwrap().view(), d, p).mapv_into(f64::tanh);
        acts.push(y);
    }
    acts
}

fn tanh_layers_backward(mut dy: Array2<f64>, acts: &[Array2<f64>], layers: &[Dense], p: &[f64], g: &mut [f64]) {
    for (l, d) in layers.iter().enumerate().rev() {
        dy.zip_mut_with(&acts[l + 1], |dv, &y| *dv *= 1.0 - y * y);
        dy = affine_backward(&dy, &acts[l].view(), d, p, g);
    }
}

fn squash_head(z: &mut Array2<f64>, head: HeadKind) {
    for (j, mut col) in z.columns_mut().into_iter().enumerate() {
        if head.squashed(j) {
            col.mapv_inplace(f64::tanh);
        }
    }
}

/// One actor step for a batch of environments; returns the action means and
/// advances `hidden` in place. Rows flagged in `starts` begin a new episode
/// and see a zero hidden state.
pub fn actor_step(layout: &Layout, p: &[f64], x: ArrayView2<f64>, hidden: &mut HiddenState, starts: &[bool]) -> Array2<f64> {
    let acts = tanh_layers(x, &layout.trunk, p);
    let mut z = acts.last().unwrap().clone();
    hidden.reset_rows(starts);
    for (l, cell) in layout.lstm.iter().enumerate() {
        let a = affine(&z.view(), &Dense { w: cell.w_ih, b: cell.b }, p) + hidden.h[l].dot(&cell.w_hh.view(p).t());
        let hs = cell.hidden;
        let mut c = hidden.c[l].clone();
        let mut h = Array2::zeros(c.raw_dim());
        for r in 0..a.nrows() {
            for k in 0..hs {
                let i = sigmoid(a[(r, k)]);
                let f = sigmoid(a[(r, hs + k)]);
                let gg = a[(r, 2 * hs + k)].tanh();
                let o = sigmoid(a[(r, 3 * hs + k)]);
                c[(r, k)] = f * c[(r, k)] + i * gg;
                h[(r, k)] = o * c[(r, k)].tanh();
            }
        }
        hidden.c[l] = c;
        hidden.h[l] = h.clone();
        z = h;
    }
    let mut mean = affine(&z.view(), &layout.head, p);
    squash_head(&mut mean, layout.arch.head);
    mean
}

pub fn log_std<'a>(layout: &Layout, p: &'a [f64]) -> &'a [f64] {
    &p[layout.log_std.offset..layout.log_std.offset + layout.log_std.len()]
}

/// Critic values for a batch of privileged encodings.
pub fn critic_values(layout: &Layout, p: &[f64], x: ArrayView2<f64>) -> Vec<f64> {
    let acts = tanh_layers(x, &layout.critic, p);
    affine(&acts.last().unwrap().view(), &layout.critic_out, p).into_raw_vec_and_offset().0
}

/// Cached activations of one LSTM layer over a sequence batch.
struct LstmCache {
    input: Array2<f64>,
    /// Post-nonlinearity gates `(rows, 4H)`.
    gates: Array2<f64>,
    c: Array2<f64>,
    /// Hidden and cell inputs after episode-start masking.
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    out: Array2<f64>,
}

/// Actor forward pass over a sequence batch with everything the backward
/// pass needs.
pub struct ActorTape {
    steps: usize,
    batch: usize,
    trunk: Vec<Array2<f64>>,
    lstm: Vec<LstmCache>,
    keep: Vec<f64>,
    pub mean: Array2<f64>,
}

pub fn actor_sequence(layout: &Layout, p: &[f64], x: ArrayView2<f64>, starts: &[bool], h0: &HiddenState, steps: usize) -> ActorTape {
    let rows = x.nrows();
    assert_eq!(rows % steps.max(1), 0);
    let batch = rows / steps;
    let keep: Vec<f64> = starts.iter().map(|&s| if s { 0.0 } else { 1.0 }).collect();
    let trunk = tanh_layers(x, &layout.trunk, p);
    let mut z = trunk.last().unwrap().clone();
    let mut lstm = Vec::with_capacity(layout.lstm.len());
    for (l, cell) in layout.lstm.iter().enumerate() {
        let hs = cell.hidden;
        let pre = affine(&z.view(), &Dense { w: cell.w_ih, b: cell.b }, p);
        let w_hh = cell.w_hh.view(p);
        let mut gates = Array2::zeros((rows, 4 * hs));
        let mut c_all = Array2::zeros((rows, hs));
        let mut h_prev_all = Array2::zeros((rows, hs));
        let mut c_prev_all = Array2::zeros((rows, hs));
        let mut out = Array2::zeros((rows, hs));
        let mut h = h0.h[l].clone();
        let mut c = h0.c[l].clone();
        for t in 0..steps {
            let r0 = t * batch;
            for b in 0..batch {
                let k = keep[r0 + b];
                h.row_mut(b).mapv_inplace(|v| v * k);
                c.row_mut(b).mapv_inplace(|v| v * k);
            }
            h_prev_all.slice_mut(s![r0..r0 + batch, ..]).assign(&h);
            c_prev_all.slice_mut(s![r0..r0 + batch, ..]).assign(&c);
            let a = &pre.slice(s![r0..r0 + batch, ..]) + &h.dot(&w_hh.t());
            for b in 0..batch {
                for j in 0..hs {
                    let i = sigmoid(a[(b, j)]);
                    let f = sigmoid(a[(b, hs + j)]);
                    let g = a[(b, 2 * hs + j)].tanh();
                    let o = sigmoid(a[(b, 3 * hs + j)]);
                    let cn = f * c[(b, j)] + i * g;
                    let hn = o * cn.tanh();
                    let row = r0 + b;
                    gates[(row, j)] = i;
                    gates[(row, hs + j)] = f;
                    gates[(row, 2 * hs + j)] = g;
                    gates[(row, 3 * hs + j)] = o;
                    c_all[(row, j)] = cn;
                    out[(row, j)] = hn;
                    c[(b, j)] = cn;
                    h[(b, j)] = hn;
                }
            }
        }
        let next = out.clone();
        lstm.push(LstmCache {
            input: z,
            gates,
            c: c_all,
            h_prev: h_prev_all,
            c_prev: c_prev_all,
            out,
        });
        z = next;
    }
    let mut mean = affine(&z.view(), &layout.head, p);
    squash_head(&mut mean, layout.arch.head);
    ActorTape {
        steps,
        batch,
        trunk,
        lstm,
        keep,
        mean,
    }
}

/// Back-propagates `∂L/∂mean` through the actor, accumulating into `g`.
/// Gradients into the stored initial hidden state are dropped.
pub fn actor_backward(layout: &Layout, p: &[f64], tape: &ActorTape, dmean: &Array2<f64>, g: &mut [f64]) {
    let head = layout.arch.head;
    let mut dz = dmean.clone();
    for (j, mut col) in dz.columns_mut().into_iter().enumerate() {
        if head.squashed(j) {
            col.zip_mut_with(&tape.mean.column(j), |d, &m| *d *= 1.0 - m * m);
        }
    }
    let head_in = match tape.lstm.last() {
        Some(c) => c.out.view(),
        None => tape.trunk.last().unwrap().view(),
    };
    let mut dout = affine_backward(&dz, &head_in, &layout.head, p, g);

    let (steps, batch) = (tape.steps, tape.batch);
    for (l, cell) in layout.lstm.iter().enumerate().rev() {
        let cache = &tape.lstm[l];
        let hs = cell.hidden;
        let w_hh = cell.w_hh.view(p);
        let mut da = Array2::zeros((steps * batch, 4 * hs));
        let mut dh_next = Array2::<f64>::zeros((batch, hs));
        let mut dc_next = Array2::<f64>::zeros((batch, hs));
        for t in (0..steps).rev() {
            let r0 = t * batch;
            for b in 0..batch {
                let row = r0 + b;
                for j in 0..hs {
                    let i = cache.gates[(row, j)];
                    let f = cache.gates[(row, hs + j)];
                    let gg = cache.gates[(row, 2 * hs + j)];
                    let o = cache.gates[(row, 3 * hs + j)];
                    let tc = cache.c[(row, j)].tanh();
                    let dh = dout[(row, j)] + dh_next[(b, j)];
                    let dc = dc_next[(b, j)] + dh * o * (1.0 - tc * tc);
                    da[(row, j)] = dc * gg * i * (1.0 - i);
                    da[(row, hs + j)] = dc * cache.c_prev[(row, j)] * f * (1.0 - f);
                    da[(row, 2 * hs + j)] = dc * i * (1.0 - gg * gg);
                    da[(row, 3 * hs + j)] = dh * tc * o * (1.0 - o);
                    dc_next[(b, j)] = dc * f;
                }
            }
            let da_t = da.slice(s![r0..r0 + batch, ..]);
            dh_next = da_t.dot(&w_hh);
            for b in 0..batch {
                let k = tape.keep[r0 + b];
                dh_next.row_mut(b).mapv_inplace(|v| v * k);
                dc_next.row_mut(b).mapv_inplace(|v| v * k);
            }
        }
        general_mat_mul(1.0, &da.t(), &cache.h_prev, 1.0, &mut cell.w_hh.view_mut(g));
        dout = affine_backward(&da, &cache.input.view(), &Dense { w: cell.w_ih, b: cell.b }, p, g);
    }
    tanh_layers_backward(dout, &tape.trunk, &layout.trunk, p, g);
}

/// Critic forward with activations kept for the backward pass.
pub fn critic_tape(layout: &Layout, p: &[f64], x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<f64>) {
    let acts = tanh_layers(x, &layout.critic, p);
    let v = affine(&acts.last().unwrap().view(), &layout.critic_out, p);
    (acts, v.into_raw_vec_and_offset().0)
}

pub fn critic_backward(layout: &Layout, p: &[f64], acts: &[Array2<f64>], dv: &[f64], g: &mut [f64]) {
    let dy = Array2::from_shape_vec((dv.len(), 1), dv.to_vec()).expect("one value per row");
    let dh = affine_backward(&dy, &acts.last().unwrap().view(), &layout.critic_out, p, g);
    tanh_layers_backward(dh, acts, &layout.critic, p, g);
}

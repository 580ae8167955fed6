//! Diagonal Gaussian action head and residual decoding.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::Twist;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of `u` under `N(mean, diag(exp(log_std))²)`.
pub fn log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((u, m), s)| {
            let z = (u - m) * (-s).exp();
            -0.5 * z * z - s - HALF_LN_2PI
        })
        .sum()
}

/// Draws `u` from the head's Gaussian and returns it with its log density.
pub fn sample_and_logprob<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let u: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, s)| {
            let e: f64 = rng.sample(StandardNormal);
            m + s.exp() * e
        })
        .collect();
    let lp = log_prob(&u, mean, log_std);
    (u, lp)
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + HALF_LN_2PI + 0.5).sum()
}

/// Residual twist from the first six head outputs, each clamped to [−1, 1]
/// and scaled to the residual limits.
pub fn decode_residual(u: &[f64], limit_tr: f64, limit_rot: f64) -> Twist {
    let c = |i: usize| u[i].clamp(-1.0, 1.0);
    Twist::new(
        Vector3::new(c(0), c(1), c(2)) * limit_tr,
        Vector3::new(c(3), c(4), c(5)) * limit_rot,
    )
}

/// `a_pf + β·a_rl`, clamped per axis to the environment's action limits.
pub fn combine_residual(a_pf: &Twist, a_rl: &Twist, beta: f64, limit_tr: f64, limit_rot: f64) -> Twist {
    if beta == 0.0 {
        return *a_pf;
    }
    (*a_pf + a_rl.scale(beta)).clamp_per_axis(limit_tr, limit_rot)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use marl_core::nn::{Grads, Params};
use marl_core::replay::Transition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Gradients below this magnitude are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct FdReport {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: (usize, usize, f64, f64),
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Central differences on `coords` scalars drawn uniformly over all
/// parameters of `params`, compared with `analytic`.
pub fn fd_check<P: Params + Clone>(
    params: &P,
    analytic: &Grads,
    coords: usize,
    seed: u64,
    loss: impl Fn(&P) -> f64,
) -> FdReport {
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut r = rng(seed);
    let mut report = FdReport { checked: 0, max_rel: 0.0, worst: (0, 0, 0.0, 0.0) };
    for _ in 0..coords {
        let mut flat = r.random_range(0..total);
        let mut k = 0;
        while flat >= sizes[k] {
            flat -= sizes[k];
            k += 1;
        }
        let mut plus = params.clone();
        plus.tensors_mut()[k].data_mut()[flat] += FD_STEP;
        let mut minus = params.clone();
        minus.tensors_mut()[k].data_mut()[flat] -= FD_STEP;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP);
        let a = analytic.tensors()[k].data()[flat];
        let rel = relative_error(a, numeric);
        if rel > report.max_rel {
            report.max_rel = rel;
            report.worst = (k, flat, a, numeric);
        }
        report.checked += 1;
    }
    report
}

pub fn random_vec(r: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn random_transition(r: &mut impl Rng, obs_dims: &[usize]) -> Transition {
    Transition {
        obs: obs_dims.iter().map(|&d| random_vec(r, d, 1.0)).collect(),
        actions: obs_dims.iter().map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect(),
        rewards: obs_dims.iter().map(|_| r.random_range(-2.0..0.0)).collect(),
        next_obs: obs_dims.iter().map(|&d| random_vec(r, d, 1.0)).collect(),
        done: r.random_bool(0.1),
    }
}

/// `sum_k gamma^k r_k`, evaluated by Horner's rule from the back.
pub fn discounted(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson statistic of observed counts against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

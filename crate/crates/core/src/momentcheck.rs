//! Monte Carlo checks of the moment bound
//! `E|⟨h, ε − b⟩|^γ ≤ C_γ ‖h‖^γ (1 + ‖b‖^γ)` and of uniform integrability of
//! `⟨h, ε − b⟩²` over bounded strategies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::market::ShiftVector;
use crate::scenario::{sample_iid, SourceMarginal};
use crate::{Error, Result};

/// Thresholds `K` of the tail curve.
pub const TAIL_LEVELS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRatio {
    pub ratio: f64,
    /// Standard error of the Monte Carlo ratio.
    pub std_error: f64,
    /// Exact ratio from the second-moment identity (only for `γ = 2`).
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub gamma: f64,
    pub max_ratio: f64,
    pub directions: Vec<DirectionRatio>,
    /// `(K, max over sampled h with ‖h‖ = c of E[V² 1{|V| > K}])`.
    pub tail_curve: Vec<(f64, f64)>,
    pub tail_radius: f64,
    pub n_mc: usize,
    pub seed: u64,
}

/// Per-direction seed derived from the run seed and the direction index
/// (splitmix64 finalizer).
pub fn subseed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unit vector drawn uniformly from the sphere in `R^n`.
pub fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `(‖h‖² + ⟨h, b⟩²) / (‖h‖² (1 + ‖b‖²))`, the exact ratio at `γ = 2`.
pub fn exact_second_moment_ratio(h: &[f64], shift: &ShiftVector) -> f64 {
    let hh: f64 = h.iter().map(|v| v * v).sum();
    let hb: f64 = h.iter().zip(shift.as_slice()).map(|(h, b)| h * b).sum();
    (hh + hb * hb) / (hh * (1.0 + shift.norm_sq()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentOptions {
    /// Norm of the strategies used for the tail curve.
    pub tail_radius: f64,
    pub tail_levels: Vec<f64>,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            tail_radius: 1.0,
            tail_levels: TAIL_LEVELS.to_vec(),
        }
    }
}

/// Estimates the moment ratio for `n_h` random unit strategies from `n_mc`
/// i.i.d. samples of the sources. The same sample is shared by all
/// directions.
pub fn moment_ratio_scan(
    marginals: &[SourceMarginal],
    shift: &ShiftVector,
    gamma: f64,
    n_h: usize,
    n_mc: usize,
    seed: u64,
) -> Result<MomentReport> {
    moment_ratio_scan_with(marginals, shift, gamma, n_h, n_mc, seed, &MomentOptions::default())
}

pub fn moment_ratio_scan_with(
    marginals: &[SourceMarginal],
    shift: &ShiftVector,
    gamma: f64,
    n_h: usize,
    n_mc: usize,
    seed: u64,
    opts: &MomentOptions,
) -> Result<MomentReport> {
    if !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(Error::validation("moment order must be at least 2"));
    }
    if n_h == 0 || n_mc < 2 {
        return Err(Error::validation("need at least one direction and two samples"));
    }
    let n = marginals.len();
    if shift.len() != n {
        return Err(Error::dim("shift length", n, shift.len()));
    }
    if !(opts.tail_radius > 0.0) || opts.tail_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("tail radius must be positive and levels increasing"));
    }
    let sample = sample_iid(marginals, n_mc, seed)?;
    let b = shift.as_slice();
    let denom = 1.0 + shift.norm().powf(gamma);
    let c = opts.tail_radius;
    let per_h: Vec<(DirectionRatio, Vec<f64>)> = (0..n_h)
        .into_par_iter()
        .map(|j| {
            let h = random_unit(n, subseed(seed, j as u64));
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut tails = vec![0.0; opts.tail_levels.len()];
            for row in sample.rows() {
                let v: f64 = h.iter().zip(row).zip(b).map(|((h, e), b)| h * (e - b)).sum();
                let m = v.abs().powf(gamma);
                sum += m;
                sum_sq += m * m;
                let vc = c * v;
                for (t, &k) in tails.iter_mut().zip(&opts.tail_levels) {
                    if vc.abs() > k {
                        *t += vc * vc;
                    }
                }
            }
            let nf = n_mc as f64;
            let mean = sum / nf;
            let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            let ratio = DirectionRatio {
                ratio: mean / denom,
                std_error: (var / nf).sqrt() / denom,
                exact: (gamma == 2.0).then(|| exact_second_moment_ratio(&h, shift)),
            };
            (ratio, tails.into_iter().map(|t| t / nf).collect())
        })
        .collect();
    let max_ratio = per_h.iter().map(|(r, _)| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let tail_curve = opts
        .tail_levels
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, per_h.iter().map(|(_, t)| t[i]).fold(0.0, f64::max)))
        .collect();
    Ok(MomentReport {
        gamma,
        max_ratio,
        directions: per_h.into_iter().map(|(r, _)| r).collect(),
        tail_curve,
        tail_radius: c,
        n_mc,
        seed,
    })
}

//! Finite probability spaces of independent normalized sources.
//!
//! Independence is only ever obtained by building the full product of the
//! per-source marginals; arbitrary joint laws are not representable.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Tolerance applied to user-supplied marginals.
pub const INPUT_TOL: f64 = 1e-12;
/// Tolerance applied to moments of derived spaces.
pub const DERIVED_TOL: f64 = 1e-10;
/// Default cap on the number of outcomes of a product space.
pub const DEFAULT_OUTCOME_CAP: usize = 1 << 20;

/// Discrete law of one source: finitely many support points with positive
/// probabilities, mean 0 and variance 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMarginal {
    points: Vec<f64>,
    probs: Vec<f64>,
}

impl SourceMarginal {
    pub fn new(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if points.len() != probs.len() {
            return Err(Error::dim("marginal probs", points.len(), probs.len()));
        }
        if points.len() < 2 {
            return Err(Error::validation("a marginal needs at least 2 support points"));
        }
        if points.iter().chain(&probs).any(|v| !v.is_finite()) {
            return Err(Error::validation("marginal entries must be finite"));
        }
        if let Some(p) = probs.iter().find(|&&p| p <= 0.0) {
            return Err(Error::validation(format!(
                "marginal probabilities must be strictly positive, found {p}"
            )));
        }
        let m = Self { points, probs };
        let total: f64 = m.probs.iter().sum();
        if (total - 1.0).abs() > INPUT_TOL {
            return Err(Error::validation(format!(
                "marginal probabilities sum to {total}, not 1"
            )));
        }
        let mean = m.moment(1);
        if mean.abs() > INPUT_TOL {
            return Err(Error::validation(format!("marginal mean is {mean}, not 0")));
        }
        let var = m.moment(2);
        if (var - 1.0).abs() > INPUT_TOL {
            return Err(Error::validation(format!("marginal variance is {var}, not 1")));
        }
        Ok(m)
    }

    /// The symmetric two-point law on ±1.
    pub fn rademacher() -> Self {
        Self {
            points: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Raw moment `E[ε^k]`.
    pub fn moment(&self, k: i32) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| p * x.powi(k))
            .sum()
    }

    pub fn min_point(&self) -> f64 {
        self.points.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_point(&self) -> f64 {
        self.points.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Probability of `{ε > t}`.
    pub fn prob_above(&self, t: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .filter(|(x, _)| **x > t)
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability of `{ε < t}`.
    pub fn prob_below(&self, t: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .filter(|(x, _)| **x < t)
            .map(|(_, p)| p)
            .sum()
    }
}

/// `k`-point discretization of a standard Gaussian by Gauss–Hermite
/// quadrature (probabilists' weight), rescaled so that mean and variance are
/// exact.
///
/// Nodes are the eigenvalues of the Jacobi matrix of the Hermite recurrence
/// and weights the squared first components of its eigenvectors
/// (Golub–Welsch). The rule integrates polynomials up to degree `2k − 1`
/// exactly.
pub fn gauss_quantize(k: usize) -> Result<SourceMarginal> {
    if k < 2 {
        return Err(Error::validation(format!("gauss_quantize needs k >= 2, got {k}")));
    }
    let jacobi = DMatrix::<f64>::from_fn(k, k, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<(f64, f64)> = (0..k)
        .map(|c| (eig.eigenvalues[c], eig.eigenvectors[(0, c)].powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Enforce the exact reflection symmetry of the rule.
    let mut points = vec![0.0; k];
    let mut probs = vec![0.0; k];
    for i in 0..k {
        let j = k - 1 - i;
        points[i] = 0.5 * (nodes[i].0 - nodes[j].0);
        probs[i] = 0.5 * (nodes[i].1 + nodes[j].1);
    }
    if k % 2 == 1 {
        points[k / 2] = 0.0;
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let var: f64 = points.iter().zip(&probs).map(|(x, p)| p * x * x).sum();
    let scale = var.sqrt();
    points.iter_mut().for_each(|x| *x /= scale);
    SourceMarginal::new(points, probs)
}

/// Product probability space of `N` independent sources.
///
/// Outcomes are stored row-major: outcome `ω` has probability `probs[ω]` and
/// realization `realizations[ω * N .. (ω + 1) * N]`. Source 0 varies slowest.
#[derive(Debug, Clone)]
pub struct ScenarioSpace {
    n_sources: usize,
    probs: Vec<f64>,
    realizations: Vec<f64>,
    marginals: Vec<SourceMarginal>,
}

impl ScenarioSpace {
    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn realization(&self, omega: usize) -> &[f64] {
        &self.realizations[omega * self.n_sources..(omega + 1) * self.n_sources]
    }

    pub fn outcomes(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.probs
            .iter()
            .copied()
            .zip(self.realizations.chunks_exact(self.n_sources))
    }

    pub fn marginals(&self) -> &[SourceMarginal] {
        &self.marginals
    }

    /// `E[f(ε)]` under the reference measure.
    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.outcomes().map(|(p, eps)| p * f(eps)).sum()
    }

    /// `Σ_ω q_ω f(ε(ω))` for arbitrary weights `q`.
    pub fn weighted_sum(&self, q: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        q.iter()
            .zip(self.realizations.chunks_exact(self.n_sources))
            .map(|(w, eps)| w * f(eps))
            .sum()
    }

    /// Largest deviation from the normalization moments: per-source mean 0,
    /// variance 1, pairwise zero correlation, total mass 1.
    pub fn moment_defect(&self) -> f64 {
        let n = self.n_sources;
        let mut worst = (self.probs.iter().sum::<f64>() - 1.0).abs();
        for i in 0..n {
            worst = worst.max(self.expectation(|e| e[i]).abs());
            worst = worst.max((self.expectation(|e| e[i] * e[i]) - 1.0).abs());
            for j in (i + 1)..n {
                worst = worst.max(self.expectation(|e| e[i] * e[j]).abs());
            }
        }
        worst
    }
}

/// Full product space of the given marginals with the default outcome cap.
pub fn build_product_space(marginals: &[SourceMarginal]) -> Result<ScenarioSpace> {
    build_product_space_capped(marginals, DEFAULT_OUTCOME_CAP)
}

pub fn build_product_space_capped(
    marginals: &[SourceMarginal],
    cap: usize,
) -> Result<ScenarioSpace> {
    if marginals.is_empty() {
        return Err(Error::validation("a scenario space needs at least one source"));
    }
    let count = marginals
        .iter()
        .try_fold(1u128, |acc, m| acc.checked_mul(m.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::SizeCap { count, cap });
    }
    let n = marginals.len();
    let total = count as usize;
    let mut probs = Vec::with_capacity(total);
    let mut realizations = Vec::with_capacity(total * n);
    let mut index = vec![0usize; n];
    for _ in 0..total {
        let mut p = 1.0;
        for (m, &k) in marginals.iter().zip(&index) {
            p *= m.probs[k];
            realizations.push(m.points[k]);
        }
        probs.push(p);
        // odometer, last source fastest
        for i in (0..n).rev() {
            index[i] += 1;
            if index[i] < marginals[i].len() {
                break;
            }
            index[i] = 0;
        }
    }
    let space = ScenarioSpace {
        n_sources: n,
        probs,
        realizations,
        marginals: marginals.to_vec(),
    };
    let defect = space.moment_defect();
    if defect > DERIVED_TOL {
        return Err(Error::validation(format!(
            "product space moment defect {defect:e} exceeds {DERIVED_TOL:e}"
        )));
    }
    Ok(space)
}

/// I.i.d. draws of the source vector, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n_samples: usize,
    n_sources: usize,
    draws: Vec<f64>,
    seed: u64,
}

impl SampleMatrix {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.draws[s * self.n_sources..(s + 1) * self.n_sources]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.draws.chunks_exact(self.n_sources)
    }

    pub fn column_mean(&self, i: usize) -> f64 {
        self.rows().map(|r| r[i]).sum::<f64>() / self.n_samples as f64
    }

    pub fn column_second_moment(&self, i: usize) -> f64 {
        self.rows().map(|r| r[i] * r[i]).sum::<f64>() / self.n_samples as f64
    }
}

/// Draws `n_samples` independent source vectors from a generator seeded with
/// `seed`.
pub fn sample_iid(marginals: &[SourceMarginal], n_samples: usize, seed: u64) -> Result<SampleMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_iid_with(marginals, n_samples, &mut rng).map(|mut m| {
        m.seed = seed;
        m
    })
}

pub(crate) fn sample_iid_with(
    marginals: &[SourceMarginal],
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampleMatrix> {
    if n_samples == 0 {
        return Err(Error::validation("n_samples must be at least 1"));
    }
    if marginals.is_empty() {
        return Err(Error::validation("need at least one marginal"));
    }
    let samplers = marginals
        .iter()
        .map(|m| WeightedIndex::new(m.probs()).map_err(|e| Error::validation(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let n = marginals.len();
    let mut draws = Vec::with_capacity(n_samples * n);
    for _ in 0..n_samples {
        for (m, w) in marginals.iter().zip(&samplers) {
            draws.push(m.points[w.sample(rng)]);
        }
    }
    Ok(SampleMatrix {
        n_samples,
        n_sources: n,
        draws,
        seed: 0,
    })
}

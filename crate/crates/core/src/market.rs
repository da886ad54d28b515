//! Asset model, shift reparametrization and portfolio payoffs.
//!
//! Asset `i` has return `μ_i + β̄_i ε_i` for factor assets (`i < m`) and
//! `μ_i + Σ_j β_i^j ε_j + β̄_i ε_i` otherwise. With the shift `b` the returns
//! become linear in `ε − b`, so a dollar exposure vector `h` in the
//! normalized sources pays `x + Σ h_i (ε_i − b_i)`.
//!
//! A share-count portfolio `φ` in the original assets corresponds to
//! `h_i = φ_i S_0^i β̄_i` once factor loadings are folded into the factor
//! exposures; everything downstream works in `h` directly.

use crate::scenario::ScenarioSpace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    pub mu: f64,
    pub beta_bar: f64,
    /// Factor loadings `β_i^j`, `j < m`. Empty for factor assets.
    pub loadings: Vec<f64>,
}

impl Asset {
    pub fn factor(mu: f64, beta_bar: f64) -> Self {
        Self {
            mu,
            beta_bar,
            loadings: Vec::new(),
        }
    }

    pub fn loaded(mu: f64, beta_bar: f64, loadings: Vec<f64>) -> Self {
        Self {
            mu,
            beta_bar,
            loadings,
        }
    }
}

/// One-step APT model with `m` factors. Asset `i` is driven by source `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AptModel {
    m: usize,
    assets: Vec<Asset>,
}

impl AptModel {
    pub fn new(m: usize, assets: Vec<Asset>) -> Result<Self> {
        if m > assets.len() {
            return Err(Error::validation(format!(
                "factor count {m} exceeds asset count {}",
                assets.len()
            )));
        }
        for (i, a) in assets.iter().enumerate() {
            if a.beta_bar == 0.0 || !a.beta_bar.is_finite() || !a.mu.is_finite() {
                return Err(Error::validation(format!(
                    "asset {i}: beta_bar must be finite and nonzero, mu finite"
                )));
            }
            let want = if i < m { 0 } else { m };
            if a.loadings.len() != want {
                return Err(Error::validation(format!(
                    "asset {i}: expected {want} factor loadings, got {}",
                    a.loadings.len()
                )));
            }
            if a.loadings.iter().any(|l| !l.is_finite()) {
                return Err(Error::validation(format!("asset {i}: loadings must be finite")));
            }
        }
        Ok(Self { m, assets })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }
}

/// The shift vector `b` and its squared ℓ2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftVector {
    b: Vec<f64>,
    norm_sq: f64,
}

impl ShiftVector {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("shift entries must be finite"));
        }
        let norm_sq = b.iter().map(|v| v * v).sum();
        Ok(Self { b, norm_sq })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            b: vec![0.0; n],
            norm_sq: 0.0,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

/// Computes `b` from the model parameters.
pub fn reparametrize(model: &AptModel) -> ShiftVector {
    let m = model.m;
    let a = &model.assets;
    let b = a
        .iter()
        .enumerate()
        .map(|(i, ai)| {
            let own = -ai.mu / ai.beta_bar;
            if i < m {
                own
            } else {
                own + ai
                    .loadings
                    .iter()
                    .enumerate()
                    .map(|(j, beta)| a[j].mu * beta / (a[j].beta_bar * ai.beta_bar))
                    .sum::<f64>()
            }
        })
        .collect();
    ShiftVector::new(b).expect("finite model parameters give a finite shift")
}

/// Per-outcome asset returns evaluated in both parametrizations.
#[derive(Debug, Clone)]
pub struct ReturnMatrix {
    n_assets: usize,
    /// `μ_i + Σ_j β_i^j ε_j + β̄_i ε_i`, row-major by outcome.
    pub direct: Vec<f64>,
    /// `Σ_j β_i^j (ε_j − b_j) + β̄_i (ε_i − b_i)`, row-major by outcome.
    pub shifted: Vec<f64>,
}

impl ReturnMatrix {
    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn get(&self, omega: usize, asset: usize) -> f64 {
        self.direct[omega * self.n_assets + asset]
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.direct
            .iter()
            .zip(&self.shifted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn returns(model: &AptModel, space: &ScenarioSpace, shift: &ShiftVector) -> Result<ReturnMatrix> {
    let n = model.n_assets();
    if space.n_sources() != n {
        return Err(Error::dim("sources vs assets", n, space.n_sources()));
    }
    if shift.len() != n {
        return Err(Error::dim("shift length", n, shift.len()));
    }
    let b = shift.as_slice();
    let m = model.m;
    let mut direct = Vec::with_capacity(space.len() * n);
    let mut shifted = Vec::with_capacity(space.len() * n);
    for (_, eps) in space.outcomes() {
        for (i, a) in model.assets.iter().enumerate() {
            let mut r1 = a.mu + a.beta_bar * eps[i];
            let mut r2 = a.beta_bar * (eps[i] - b[i]);
            if i >= m {
                for (j, beta) in a.loadings.iter().enumerate() {
                    r1 += beta * eps[j];
                    r2 += beta * (eps[j] - b[j]);
                }
            }
            direct.push(r1);
            shifted.push(r2);
        }
    }
    Ok(ReturnMatrix {
        n_assets: n,
        direct,
        shifted,
    })
}

/// Exposures `h` to the normalized sources plus initial wealth `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub h: Vec<f64>,
    pub x: f64,
}

impl Portfolio {
    pub fn new(h: Vec<f64>, x: f64) -> Self {
        Self { h, x }
    }

    pub fn cash(n: usize, x: f64) -> Self {
        Self { h: vec![0.0; n], x }
    }

    pub fn l2_norm(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.h.iter().all(|v| v.is_finite())
    }
}

/// `V^{x,h}(ω) = x + Σ_i h_i (ε_i(ω) − b_i)` for every outcome.
pub fn portfolio_value(p: &Portfolio, space: &ScenarioSpace, shift: &ShiftVector) -> Result<Vec<f64>> {
    let n = space.n_sources();
    if p.h.len() != n {
        return Err(Error::dim("portfolio length", n, p.h.len()));
    }
    if shift.len() != n {
        return Err(Error::dim("shift length", n, shift.len()));
    }
    let b = shift.as_slice();
    Ok(space
        .outcomes()
        .map(|(_, eps)| p.x + p.h.iter().zip(eps).zip(b).map(|((h, e), b)| h * (e - b)).sum::<f64>())
        .collect())
}

/// `E⟨h, ε − b⟩²` by direct summation over the space.
pub fn second_moment(h: &[f64], shift: &ShiftVector, space: &ScenarioSpace) -> Result<f64> {
    let n = space.n_sources();
    if h.len() != n {
        return Err(Error::dim("h length", n, h.len()));
    }
    if shift.len() != n {
        return Err(Error::dim("shift length", n, shift.len()));
    }
    let b = shift.as_slice();
    Ok(space.expectation(|eps| {
        let v: f64 = h.iter().zip(eps).zip(b).map(|((h, e), b)| h * (e - b)).sum();
        v * v
    }))
}

/// Closed form of [`second_moment`] for independent normalized sources:
/// `‖h‖² + ⟨h, b⟩²` (variance plus squared mean).
pub fn second_moment_closed_form(h: &[f64], shift: &ShiftVector) -> f64 {
    let norm_sq: f64 = h.iter().map(|v| v * v).sum();
    let hb: f64 = h.iter().zip(shift.as_slice()).map(|(h, b)| h * b).sum();
    norm_sq + hb * hb
}

/// Ordered, duplicate-free set of source indices (0-based) a strategy may
/// trade.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssetSubset(Vec<usize>);

impl AssetSubset {
    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// The first `n` sources.
    pub fn first(n: usize) -> Self {
        Self::all(n)
    }

    pub fn new(mut indices: Vec<usize>, n_sources: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::validation("asset subset must be nonempty"));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= n_sources) {
            return Err(Error::validation(format!(
                "asset index {i} out of range for {n_sources} sources"
            )));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check(&self, n_sources: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= n_sources) {
            Some(&i) => Err(Error::validation(format!(
                "asset index {i} out of range for {n_sources} sources"
            ))),
            None if self.0.is_empty() => Err(Error::validation("asset subset must be nonempty")),
            None => Ok(()),
        }
    }

    /// Embeds exposures on the subset into a full-length vector.
    pub fn embed(&self, h_sub: &[f64], n_sources: usize) -> Vec<f64> {
        let mut h = vec![0.0; n_sources];
        for (&i, &v) in self.0.iter().zip(h_sub) {
            h[i] = v;
        }
        h
    }
}

/// Matrix of excess source values `a_ω = (ε_i(ω) − b_i)_{i ∈ subset}`, one
/// row per outcome. Every LP and the utility solver work on this matrix.
#[derive(Debug, Clone)]
pub struct ExcessReturns {
    cols: usize,
    data: Vec<f64>,
    probs: Vec<f64>,
}

impl ExcessReturns {
    pub fn new(space: &ScenarioSpace, shift: &ShiftVector, subset: &AssetSubset) -> Result<Self> {
        let n = space.n_sources();
        if shift.len() != n {
            return Err(Error::dim("shift length", n, shift.len()));
        }
        subset.check(n)?;
        let b = shift.as_slice();
        let idx = subset.indices();
        let mut data = Vec::with_capacity(space.len() * idx.len());
        for (_, eps) in space.outcomes() {
            data.extend(idx.iter().map(|&i| eps[i] - b[i]));
        }
        Ok(Self {
            cols: idx.len(),
            data,
            probs: space.probs().to_vec(),
        })
    }

    pub fn rows(&self) -> usize {
        self.probs.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, omega: usize) -> &[f64] {
        &self.data[omega * self.cols..(omega + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `⟨h, a_ω⟩` for every outcome.
    pub fn gains(&self, h: &[f64]) -> Vec<f64> {
        self.iter_rows()
            .map(|a| a.iter().zip(h).map(|(a, h)| a * h).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_product_space, SourceMarginal};

    fn example_model() -> AptModel {
        AptModel::new(1, vec![Asset::factor(0.1, 1.0), Asset::loaded(0.2, 2.0, vec![1.0])]).unwrap()
    }

    #[test]
    fn zero_drift_gives_zero_shift() {
        let model =
            AptModel::new(1, vec![Asset::factor(0.0, 1.5), Asset::loaded(0.0, -2.0, vec![0.3])]).unwrap();
        assert!(reparametrize(&model).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shift_of_one_factor_example() {
        let b = reparametrize(&example_model());
        // b_1 = -0.1, b_2 = -0.2/2 + 0.1 * 1 / (1 * 2) = -0.05
        assert!((b.as_slice()[0] + 0.1).abs() < 1e-15);
        assert!((b.as_slice()[1] + 0.05).abs() < 1e-15);
        assert!((b.norm_sq() - (0.01 + 0.0025)).abs() < 1e-15);
    }

    #[test]
    fn single_factor_asset_shift() {
        let model = AptModel::new(1, vec![Asset::factor(-0.3, 3.0)]).unwrap();
        assert!((reparametrize(&model).as_slice()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn model_validation() {
        assert!(AptModel::new(1, vec![Asset::factor(0.1, 0.0)]).is_err());
        assert!(AptModel::new(2, vec![Asset::factor(0.1, 1.0)]).is_err());
        assert!(AptModel::new(1, vec![Asset::factor(0.1, 1.0), Asset::factor(0.1, 1.0)]).is_err());
    }

    #[test]
    fn returns_agree_at_plus_plus() {
        let model = example_model();
        let shift = reparametrize(&model);
        let r = SourceMarginal::rademacher();
        let space = build_product_space(&[r.clone(), r]).unwrap();
        let ret = returns(&model, &space, &shift).unwrap();
        // outcome 3 is (+1, +1)
        assert_eq!(space.realization(3), &[1.0, 1.0]);
        assert!((ret.get(3, 0) - 1.1).abs() < 1e-15);
        assert!((ret.shifted[3 * 2] - 1.1).abs() < 1e-15);
        assert!(ret.max_discrepancy() < 1e-12);
    }

    #[test]
    fn portfolio_value_examples() {
        let r = SourceMarginal::rademacher();
        let space1 = build_product_space(&[r.clone()]).unwrap();
        let v = portfolio_value(&Portfolio::new(vec![1.0], 0.0), &space1, &ShiftVector::zeros(1)).unwrap();
        assert_eq!(v, vec![-1.0, 1.0]);
        let v0 = portfolio_value(&Portfolio::cash(1, 2.5), &space1, &ShiftVector::zeros(1)).unwrap();
        assert_eq!(v0, vec![2.5, 2.5]);

        let space2 = build_product_space(&[r.clone(), r]).unwrap();
        let shift = ShiftVector::new(vec![-0.1, 0.0]).unwrap();
        let v = portfolio_value(&Portfolio::new(vec![1.0, -2.0], 1.0), &space2, &shift).unwrap();
        // outcome 2 is (+1, -1)
        assert_eq!(space2.realization(2), &[1.0, -1.0]);
        assert!((v[2] - 4.1).abs() < 1e-14);
        assert!(portfolio_value(&Portfolio::cash(3, 0.0), &space2, &shift).is_err());
    }

    #[test]
    fn second_moment_examples() {
        let space = build_product_space(&[SourceMarginal::rademacher()]).unwrap();
        let m = second_moment(&[1.0], &ShiftVector::zeros(1), &space).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        let m = second_moment(&[1.0], &ShiftVector::new(vec![0.5]).unwrap(), &space).unwrap();
        assert!((m - 1.25).abs() < 1e-15);
    }

    #[test]
    fn subset_validation_and_embedding() {
        assert!(AssetSubset::new(vec![], 3).is_err());
        assert!(AssetSubset::new(vec![3], 3).is_err());
        let s = AssetSubset::new(vec![2, 0, 2], 3).unwrap();
        assert_eq!(s.indices(), &[0, 2]);
        assert_eq!(s.embed(&[1.0, 2.0], 3), vec![1.0, 0.0, 2.0]);
    }
}

//! Superreplication prices from the hedging LP and from the dual
//! martingale-measure LP.

use num::BigRational;
use rayon::prelude::*;

use crate::arbitrage::MartingaleMeasure;
use crate::lp::{solve_lp, LinearProgram, LpOptions, LpStatus, RowSense, Sense};
use crate::market::{AssetSubset, ExcessReturns, Portfolio, ShiftVector};
use crate::scenario::ScenarioSpace;
use crate::{Error, Result};

/// Payoff `G` as a vector over the outcomes of a scenario space.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    payoff: Vec<f64>,
    nonneg: bool,
}

impl Claim {
    pub fn new(payoff: Vec<f64>) -> Result<Self> {
        if payoff.is_empty() {
            return Err(Error::validation("claim has no outcomes"));
        }
        if let Some(i) = payoff.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("claim payoff at outcome {i} is not finite")));
        }
        let nonneg = payoff.iter().all(|&v| v >= 0.0);
        Ok(Self { payoff, nonneg })
    }

    /// Builds `G(ω) = f(ε(ω))` over the outcomes of `space`.
    pub fn from_fn(space: &ScenarioSpace, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(space.outcomes().map(|(_, eps)| f(eps)).collect())
    }

    pub fn constant(space: &ScenarioSpace, c: f64) -> Result<Self> {
        Self::new(vec![c; space.len()])
    }

    /// `G = Σ c_i ε_i`; missing trailing coefficients are zero.
    pub fn series(space: &ScenarioSpace, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() > space.n_sources() {
            return Err(Error::dim("series coefficients", space.n_sources(), coeffs.len()));
        }
        Self::from_fn(space, |eps| coeffs.iter().zip(eps).map(|(c, e)| c * e).sum())
    }

    /// `G = (Σ w_i ε_i − K)_+`.
    pub fn call_on_sum(space: &ScenarioSpace, weights: &[f64], strike: f64) -> Result<Self> {
        if weights.len() > space.n_sources() {
            return Err(Error::dim("call weights", space.n_sources(), weights.len()));
        }
        Self::from_fn(space, |eps| {
            let s: f64 = weights.iter().zip(eps).map(|(w, e)| w * e).sum();
            (s - strike).max(0.0)
        })
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn len(&self) -> usize {
        self.payoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoff.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn plus_cash(&self, c: f64) -> Result<Self> {
        Self::new(self.payoff.iter().map(|v| v + c).collect())
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.payoff.iter().map(|v| v * lambda).collect())
    }

    pub(crate) fn check(&self, space: &ScenarioSpace) -> Result<()> {
        if self.payoff.len() != space.len() {
            return Err(Error::dim("claim length", space.len(), self.payoff.len()));
        }
        Ok(())
    }
}

/// Result of the hedging LP.
#[derive(Debug, Clone)]
pub struct Superhedge {
    /// `+∞` when no superhedge exists on the subset.
    pub price: f64,
    /// Exposures over all sources (zero off the subset) with `x = price`.
    pub hedge: Option<Portfolio>,
    pub exact_price: Option<BigRational>,
    pub iterations: usize,
}

impl Superhedge {
    /// `min_ω (V^{price,h}(ω) − G(ω))`.
    pub fn shortfall(&self, space: &ScenarioSpace, shift: &ShiftVector, g: &Claim) -> Result<f64> {
        let Some(p) = &self.hedge else {
            return Ok(f64::NEG_INFINITY);
        };
        let v = crate::market::portfolio_value(p, space, shift)?;
        Ok(v.iter()
            .zip(g.payoff())
            .map(|(v, g)| v - g)
            .fold(f64::INFINITY, f64::min))
    }
}

fn hedging_lp(er: &ExcessReturns, g: &[f64]) -> LinearProgram {
    let k = er.cols();
    let mut obj = vec![0.0; k + 1];
    obj[0] = 1.0;
    let mut lp = LinearProgram::new(Sense::Minimize, obj);
    for j in 0..=k {
        lp.set_free(j);
    }
    for (a, &gw) in er.iter_rows().zip(g) {
        let mut row = Vec::with_capacity(k + 1);
        row.push(1.0);
        row.extend_from_slice(a);
        lp.add_row(row, RowSense::Ge, gw);
    }
    // (max G, 0) superhedges, so the simplex starts feasible
    let mut start = vec![0.0; k + 1];
    start[0] = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lp.with_start(start);
    lp
}

/// Least initial wealth `x` with `x + Σ_{i∈subset} h_i (ε_i − b_i) ≥ G` in
/// every outcome, together with an attaining hedge.
///
/// An unbounded hedging LP means cash can be created from nothing, which is
/// reported as [`Error::Arbitrage`].
pub fn superreplicate(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    g: &Claim,
    subset: &AssetSubset,
    opts: &LpOptions,
) -> Result<Superhedge> {
    g.check(space)?;
    let er = ExcessReturns::new(space, shift, subset)?;
    superreplicate_excess(&er, g.payoff(), subset, space.n_sources(), opts)
}

pub(crate) fn superreplicate_excess(
    er: &ExcessReturns,
    g: &[f64],
    subset: &AssetSubset,
    n_sources: usize,
    opts: &LpOptions,
) -> Result<Superhedge> {
    let sol = solve_lp(&hedging_lp(er, g), opts)?;
    match sol.status {
        LpStatus::Optimal => {
            let price = sol.primal[0];
            let h = subset.embed(&sol.primal[1..], n_sources);
            Ok(Superhedge {
                price,
                hedge: Some(Portfolio::new(h, price)),
                exact_price: sol.exact_objective,
                iterations: sol.iterations,
            })
        }
        LpStatus::Infeasible => Ok(Superhedge {
            price: f64::INFINITY,
            hedge: None,
            exact_price: None,
            iterations: sol.iterations,
        }),
        LpStatus::Unbounded => Err(Error::Arbitrage(
            "hedging LP is unbounded: a zero-cost nonnegative gain exists".into(),
        )),
    }
}

#[derive(Debug, Clone)]
pub struct DualPrice {
    pub value: f64,
    /// Optimal weights; nonnegative but possibly zero on some outcomes.
    pub q: Vec<f64>,
    pub exact_value: Option<BigRational>,
    pub iterations: usize,
}

/// `max E_q G` over probability weights `q ≥ 0` with `E_q (ε_i − b_i) = 0` on
/// the subset.
pub fn dual_price(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    g: &Claim,
    subset: &AssetSubset,
    opts: &LpOptions,
) -> Result<DualPrice> {
    g.check(space)?;
    let er = ExcessReturns::new(space, shift, subset)?;
    let n_out = er.rows();
    let mut lp = LinearProgram::new(Sense::Maximize, g.payoff().to_vec());
    lp.add_row(vec![1.0; n_out], RowSense::Eq, 1.0);
    for i in 0..er.cols() {
        let row: Vec<f64> = er.iter_rows().map(|a| a[i]).collect();
        lp.add_row(row, RowSense::Eq, 0.0);
    }
    let sol = solve_lp(&lp, opts)?;
    match sol.status {
        LpStatus::Optimal => Ok(DualPrice {
            value: sol.objective,
            q: sol.primal,
            exact_value: sol.exact_objective,
            iterations: sol.iterations,
        }),
        LpStatus::Infeasible => Err(Error::NoMartingaleMeasure(
            "moment system has no solution; run the arbitrage check".into(),
        )),
        LpStatus::Unbounded => Err(Error::Inconsistent("dual price LP over a simplex is unbounded".into())),
    }
}

#[derive(Debug, Clone)]
pub struct PriceReport {
    pub primal_price: f64,
    pub dual_price: f64,
    pub hedge: Option<Portfolio>,
    pub gap: f64,
    /// Exact `|primal − dual|` in rational mode.
    pub exact_gap: Option<BigRational>,
    /// Dual optimizer, when it is strictly positive.
    pub binding_measure: Option<MartingaleMeasure>,
    pub dual_weights: Vec<f64>,
}

/// Runs both LPs and compares them.
pub fn duality_report(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    g: &Claim,
    subset: &AssetSubset,
    opts: &LpOptions,
) -> Result<PriceReport> {
    let primal = superreplicate(space, shift, g, subset, opts)?;
    let dual = dual_price(space, shift, g, subset, opts)?;
    let gap = if primal.price.is_finite() {
        (primal.price - dual.value).abs()
    } else {
        f64::INFINITY
    };
    let exact_gap = match (&primal.exact_price, &dual.exact_value) {
        (Some(p), Some(d)) => Some(num::Signed::abs(&(p - d))),
        _ => None,
    };
    let min_q = dual.q.iter().copied().fold(f64::INFINITY, f64::min);
    let binding_measure = (min_q > 0.0).then(|| MartingaleMeasure {
        q: dual.q.clone(),
        min_weight: min_q,
    });
    Ok(PriceReport {
        primal_price: primal.price,
        dual_price: dual.value,
        hedge: primal.hedge,
        gap,
        exact_gap,
        binding_measure,
        dual_weights: dual.q,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationPoint {
    pub n: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationCurve {
    pub points: Vec<TruncationPoint>,
    /// Price with every source tradable.
    pub full_price: f64,
}

/// Superreplication prices when only the first `n` sources trade, for each
/// `n` in `n_list`.
pub fn truncation_curve(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    g: &Claim,
    n_list: &[usize],
    opts: &LpOptions,
) -> Result<TruncationCurve> {
    let n_src = space.n_sources();
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("truncation levels must be strictly increasing"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n == 0 || n > n_src) {
        return Err(Error::validation(format!(
            "truncation level {n} outside 1..={n_src}"
        )));
    }
    let points = n_list
        .par_iter()
        .map(|&n| {
            let subset = AssetSubset::first(n);
            let primal = superreplicate(space, shift, g, &subset, opts)?.price;
            let dual = dual_price(space, shift, g, &subset, opts)?.value;
            Ok(TruncationPoint {
                n,
                primal,
                dual,
                gap: (primal - dual).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let full_price = superreplicate(space, shift, g, &AssetSubset::all(n_src), opts)?.price;
    Ok(TruncationCurve { points, full_price })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_product_space, gauss_quantize, SourceMarginal};
    use crate::LpOptions;

    fn rademacher(n: usize) -> ScenarioSpace {
        build_product_space(&vec![SourceMarginal::rademacher(); n]).unwrap()
    }

    fn harmonic(space: &ScenarioSpace, n: usize) -> Claim {
        let c: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
        Claim::series(space, &c).unwrap()
    }

    #[test]
    fn cash_claim_costs_its_value() {
        let s = rademacher(3);
        let b = ShiftVector::zeros(3);
        let g = Claim::constant(&s, 2.5).unwrap();
        let r = superreplicate(&s, &b, &g, &AssetSubset::all(3), &LpOptions::default()).unwrap();
        assert!((r.price - 2.5).abs() < 1e-12);
        assert!(r.hedge.unwrap().l2_norm() < 1e-12);
        let d = dual_price(&s, &b, &g, &AssetSubset::all(3), &LpOptions::default()).unwrap();
        assert!((d.value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_source_is_replicated() {
        let s = rademacher(2);
        let b = ShiftVector::zeros(2);
        let g = Claim::series(&s, &[1.0]).unwrap();
        let r = superreplicate(&s, &b, &g, &AssetSubset::all(2), &LpOptions::default()).unwrap();
        assert!(r.price.abs() < 1e-12);
        let h = r.hedge.unwrap().h;
        assert!((h[0] - 1.0).abs() < 1e-12 && h[1].abs() < 1e-12);
        let d = dual_price(&s, &b, &g, &AssetSubset::all(2), &LpOptions::default()).unwrap();
        assert!(d.value.abs() < 1e-12);
    }

    #[test]
    fn partial_hedge_of_harmonic_series() {
        let s = rademacher(5);
        let b = ShiftVector::zeros(5);
        let g = harmonic(&s, 5);
        let sub = AssetSubset::new(vec![0, 1], 5).unwrap();
        let expected = 1.0 / 3.0 + 1.0 / 4.0 + 1.0 / 5.0;
        let rep = duality_report(&s, &b, &g, &sub, &LpOptions::default()).unwrap();
        assert!((rep.primal_price - expected).abs() < 1e-12);
        assert!((rep.dual_price - expected).abs() < 1e-12);
        let h = rep.hedge.unwrap().h;
        assert!((h[0] - 1.0).abs() < 1e-9 && (h[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rational_mode_gives_exact_fraction() {
        let s = rademacher(5);
        let b = ShiftVector::zeros(5);
        let g = harmonic(&s, 5);
        let sub = AssetSubset::new(vec![0, 1], 5).unwrap();
        let rep = duality_report(&s, &b, &g, &sub, &LpOptions::rational()).unwrap();
        assert_eq!(rep.exact_gap, Some(BigRational::from_integer(0.into())));
        assert!((rep.primal_price - 47.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn call_on_three_point_source() {
        // hand solution: the payoff is convex in ε, so the superhedge is the
        // chord through the extreme points and the dual puts weight on them
        let m = gauss_quantize(3).unwrap();
        let s = build_product_space(&[m]).unwrap();
        let b = ShiftVector::new(vec![0.3]).unwrap();
        let g = Claim::call_on_sum(&s, &[1.0], 0.3).unwrap();
        let lo = -(3f64.sqrt()) - 0.3;
        let hi = 3f64.sqrt() - 0.3;
        // line through (lo, 0) and (hi, hi), evaluated at excess 0
        let expected = hi * (0.0 - lo) / (hi - lo);
        let rep = duality_report(&s, &b, &g, &AssetSubset::all(1), &LpOptions::default()).unwrap();
        assert!((rep.primal_price - expected).abs() < 1e-12, "{}", rep.primal_price);
        assert!(rep.gap < 1e-12);
    }

    #[test]
    fn zero_claim_prices_to_zero() {
        let s = rademacher(2);
        let b = ShiftVector::new(vec![0.2, -0.1]).unwrap();
        let g = Claim::constant(&s, 0.0).unwrap();
        let rep = duality_report(&s, &b, &g, &AssetSubset::all(2), &LpOptions::default()).unwrap();
        assert!(rep.primal_price.abs() < 1e-12 && rep.dual_price.abs() < 1e-12);
    }

    #[test]
    fn truncation_of_harmonic_series() {
        let s = rademacher(8);
        let b = ShiftVector::zeros(8);
        let g = harmonic(&s, 8);
        let ns: Vec<usize> = (1..=8).collect();
        let curve = truncation_curve(&s, &b, &g, &ns, &LpOptions::default()).unwrap();
        assert!(curve.full_price.abs() < 1e-10);
        for p in &curve.points {
            let tail: f64 = (p.n + 1..=8).map(|j| 1.0 / j as f64).sum();
            assert!((p.primal - tail).abs() < 1e-10, "n={} {} vs {}", p.n, p.primal, tail);
            assert!(p.gap < 1e-10);
        }
    }

    #[test]
    fn arbitrage_makes_hedging_lp_unbounded() {
        let s = rademacher(1);
        let b = ShiftVector::new(vec![-2.0]).unwrap();
        let g = Claim::constant(&s, 1.0).unwrap();
        let err = superreplicate(&s, &b, &g, &AssetSubset::all(1), &LpOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "arbitrage");
        let err = dual_price(&s, &b, &g, &AssetSubset::all(1), &LpOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "infeasible");
    }

    #[test]
    fn claim_validation() {
        let s = rademacher(2);
        assert!(Claim::new(vec![1.0, f64::NAN]).is_err());
        assert!(Claim::series(&s, &[1.0, 2.0, 3.0]).is_err());
        let g = Claim::new(vec![1.0; 3]).unwrap();
        let err = superreplicate(&s, &ShiftVector::zeros(2), &g, &AssetSubset::all(2), &LpOptions::default());
        assert!(err.is_err());
        assert!(Claim::call_on_sum(&s, &[1.0, 1.0], 0.0).unwrap().is_nonneg());
        assert!(!Claim::series(&s, &[1.0]).unwrap().is_nonneg());
    }

    #[test]
    fn truncation_levels_validated() {
        let s = rademacher(2);
        let g = Claim::constant(&s, 1.0).unwrap();
        let b = ShiftVector::zeros(2);
        assert!(truncation_curve(&s, &b, &g, &[2, 1], &LpOptions::default()).is_err());
        assert!(truncation_curve(&s, &b, &g, &[0], &LpOptions::default()).is_err());
        assert!(truncation_curve(&s, &b, &g, &[3], &LpOptions::default()).is_err());
    }
}

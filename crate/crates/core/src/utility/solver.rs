//! Log-barrier Newton method for `max_h E U(x + ⟨h, ε − b⟩ − G)` subject to
//! `x + ⟨h, ε − b⟩ ≥ G` in every outcome.
//!
//! The solver minimizes a convex, increasing transform of `−E U` measured in
//! wealth units: `(1/γ) log E e^{−γ W}` for CARA (the negative certainty
//! equivalent) and `−E U(W)` otherwise. This keeps Newton steps well scaled
//! at large risk aversion, where `E U` itself is flat to machine precision.

use nalgebra::{DMatrix, DVector};

use super::{UtilityFamily, UtilityFunction};
use crate::lp::LpOptions;
use crate::market::{portfolio_value, AssetSubset, ExcessReturns, Portfolio, ShiftVector};
use crate::pricing::{superreplicate_excess, Claim};
use crate::scenario::ScenarioSpace;
use crate::{Error, Result};

const MU_START: f64 = 1e-1;
const MU_END: f64 = 1e-9;
const MU_FACTOR: f64 = 10.0;
const FRACTION_TO_BOUNDARY: f64 = 0.995;
const ARMIJO: f64 = 1e-4;
const REL_WEALTH_STEP: f64 = 1e-6;
/// Wealths below this (relative to `1 + |x|`) count as binding constraints.
const ACTIVE_WEALTH: f64 = 1e-7;
/// Stationarity above this after the last barrier stage is a failure.
const KKT_FAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// A barrier stage ends once the Newton step is this small relative to
    /// `1 + |h|_∞` and moves no wealth by more than a `1e-6` fraction.
    pub tol: f64,
    pub max_newton_per_stage: usize,
    /// Keep every Newton iterate in the solution.
    pub record_iterates: bool,
    pub lp: LpOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_newton_per_stage: 200,
            record_iterates: false,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySolution {
    /// Optimal exposures over all sources, with the initial wealth as `x`.
    pub h_star: Portfolio,
    /// `E U(V^{x,h*} − G)`, or `−∞` when no superhedge exists at `x`.
    pub value: f64,
    /// Sure wealth with the same utility as the optimum.
    pub certainty_equivalent: f64,
    /// Stationarity of the final barrier point relative to `1 + |∇f|_∞`,
    /// or the complementarity gap if larger.
    pub kkt_residual: f64,
    /// `min_ω (V^{x,h*}(ω) − G(ω))`.
    pub feasible_margin: f64,
    pub feasible: bool,
    pub newton_steps: usize,
    /// Exposures visited by the solver (over all sources).
    pub iterates: Vec<Vec<f64>>,
}

/// A claim on a market, with its superhedge computed once so that many
/// wealth levels or utilities can be solved cheaply.
#[derive(Debug, Clone)]
pub struct UtilityProblem {
    er: ExcessReturns,
    g: Vec<f64>,
    subset: AssetSubset,
    n_sources: usize,
    price: f64,
    hedge: Vec<f64>,
}

impl UtilityProblem {
    pub fn new(
        space: &ScenarioSpace,
        shift: &ShiftVector,
        g: &Claim,
        subset: &AssetSubset,
        lp: &LpOptions,
    ) -> Result<Self> {
        g.check(space)?;
        let er = ExcessReturns::new(space, shift, subset)?;
        let sh = superreplicate_excess(&er, g.payoff(), subset, space.n_sources(), lp)?;
        let hedge = match &sh.hedge {
            Some(p) => subset.indices().iter().map(|&i| p.h[i]).collect(),
            None => vec![0.0; subset.len()],
        };
        Ok(Self {
            er,
            g: g.payoff().to_vec(),
            subset: subset.clone(),
            n_sources: space.n_sources(),
            price: sh.price,
            hedge,
        })
    }

    /// Superreplication price of the claim on the subset.
    pub fn superhedge_price(&self) -> f64 {
        self.price
    }

    fn wealth(&self, x: f64, h: &[f64]) -> Vec<f64> {
        self.er
            .iter_rows()
            .zip(&self.g)
            .map(|(a, g)| x + a.iter().zip(h).map(|(a, h)| a * h).sum::<f64>() - g)
            .collect()
    }

    /// `E U(x + ⟨h, a⟩ − G)` with `h` over the subset.
    pub fn objective(&self, u: &UtilityFunction, x: f64, h: &[f64]) -> f64 {
        self.wealth(x, h)
            .iter()
            .zip(self.er.probs())
            .map(|(&w, p)| p * u.eval(w))
            .sum()
    }

    pub fn gradient(&self, u: &UtilityFunction, x: f64, h: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; h.len()];
        for ((a, w), p) in self.er.iter_rows().zip(self.wealth(x, h)).zip(self.er.probs()) {
            let d = p * u.derivative(w);
            for (gk, ak) in grad.iter_mut().zip(a) {
                *gk += d * ak;
            }
        }
        grad
    }

    /// Transformed objective, gradient and Hessian at wealth vector `w`.
    fn transformed(&self, u: &UtilityFunction, w: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.er.cols();
        let probs = self.er.probs();
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        match u.family() {
            UtilityFamily::Cara => {
                let gamma = u.risk_param();
                let z: Vec<f64> = w.iter().zip(probs).map(|(w, p)| p.ln() - gamma * w).collect();
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|z| (z - zmax).exp()).collect();
                let total: f64 = e.iter().sum();
                let f = (zmax + total.ln()) / gamma;
                let mut mean = DVector::zeros(k);
                for (a, ei) in self.er.iter_rows().zip(&e) {
                    let pi = ei / total;
                    let av = DVector::from_column_slice(a);
                    mean += &av * pi;
                    hess += &av * av.transpose() * pi;
                }
                hess -= &mean * mean.transpose();
                hess *= gamma;
                grad -= mean;
                (f, grad, hess)
            }
            _ => {
                let mut f = 0.0;
                for ((a, &wi), p) in self.er.iter_rows().zip(w).zip(probs) {
                    f -= p * u.eval(wi);
                    let av = DVector::from_column_slice(a);
                    grad -= &av * (p * u.derivative(wi));
                    hess -= &av * av.transpose() * (p * u.second_derivative(wi));
                }
                (f, grad, hess)
            }
        }
    }

    /// Stationarity and complementarity of `(h, λ)`. The multipliers implied
    /// by the barrier are `μp/w`; for wealths within rounding of zero that
    /// ratio is inaccurate, so those are also estimated by least squares and
    /// the better nonnegative choice is kept.
    fn kkt_residual(&self, g: &DVector<f64>, w: &[f64], mu: f64, x: f64) -> f64 {
        let probs = self.er.probs();
        let barrier: Vec<f64> = w.iter().zip(probs).map(|(w, p)| mu * p / w).collect();
        let residual = |lambda: &[f64]| {
            let mut station = g.clone();
            let mut comp = 0f64;
            for ((a, l), wi) in self.er.iter_rows().zip(lambda).zip(w) {
                station -= DVector::from_column_slice(a) * *l;
                comp = comp.max(l * wi);
            }
            (station.amax() / (1.0 + g.amax())).max(comp)
        };
        let base = residual(&barrier);
        let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] <= ACTIVE_WEALTH * (1.0 + x.abs())).collect();
        if active.is_empty() {
            return base;
        }
        let mut rhs = g.clone();
        for (i, a) in self.er.iter_rows().enumerate() {
            if !active.contains(&i) {
                rhs -= DVector::from_column_slice(a) * barrier[i];
            }
        }
        let mut a_act = DMatrix::zeros(self.er.cols(), active.len());
        for (c, &i) in active.iter().enumerate() {
            a_act.set_column(c, &DVector::from_column_slice(self.er.row(i)));
        }
        let Ok(sol) = a_act.svd(true, true).solve(&rhs, 1e-12) else {
            return base;
        };
        if sol.iter().any(|&l| l < 0.0) {
            return base;
        }
        let mut refined = barrier;
        for (c, &i) in active.iter().enumerate() {
            refined[i] = sol[c];
        }
        base.min(residual(&refined))
    }

    fn merit(&self, u: &UtilityFunction, x: f64, h: &[f64], mu: f64) -> Option<f64> {
        let w = self.wealth(x, h);
        if w.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let (f, _, _) = self.transformed(u, &w);
        let barrier: f64 = w.iter().zip(self.er.probs()).map(|(w, p)| p * w.ln()).sum();
        let m = f - mu * barrier;
        m.is_finite().then_some(m)
    }

    /// Maximizes expected utility at initial wealth `x`.
    pub fn solve(&self, u: &UtilityFunction, x: f64, opts: &SolverOptions) -> Result<UtilitySolution> {
        self.solve_from(u, x, None, opts)
    }

    /// As [`solve`](Self::solve), starting from `start` (over the subset) when
    /// it is strictly feasible at `x`.
    pub fn solve_from(
        &self,
        u: &UtilityFunction,
        x: f64,
        start: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<UtilitySolution> {
        if !x.is_finite() {
            return Err(Error::validation("initial wealth must be finite"));
        }
        let k = self.er.cols();
        let scale = 1.0 + x.abs().max(self.price.abs());
        if !(self.price.is_finite() && x >= self.price - 1e-12 * scale) {
            return Ok(UtilitySolution {
                h_star: Portfolio::cash(self.n_sources, x),
                value: f64::NEG_INFINITY,
                certainty_equivalent: f64::NEG_INFINITY,
                kkt_residual: 0.0,
                feasible_margin: x - self.price,
                feasible: false,
                newton_steps: 0,
                iterates: Vec::new(),
            });
        }
        // at the superhedging price the feasible set has no interior; solve a
        // relaxation whose wealth sits a hair above the price
        let x_eff = x.max(self.price + 1e-10 * scale);
        let mut h: Vec<f64> = match start {
            Some(s) if s.len() == k && self.wealth(x_eff, s).iter().all(|&w| w > 0.0) => s.to_vec(),
            _ => self.hedge.clone(),
        };
        let mut iterates = Vec::new();
        if opts.record_iterates {
            iterates.push(self.subset.embed(&h, self.n_sources));
        }
        let mut steps = 0usize;
        let mut mu = MU_START;
        loop {
            for _ in 0..opts.max_newton_per_stage {
                let w = self.wealth(x_eff, &h);
                let (_, mut g, mut hess) = self.transformed(u, &w);
                for ((a, wi), p) in self.er.iter_rows().zip(&w).zip(self.er.probs()) {
                    let av = DVector::from_column_slice(a);
                    g -= &av * (mu * p / wi);
                    hess += &av * av.transpose() * (mu * p / (wi * wi));
                }
                let d = newton_direction(&hess, &g)?;
                let decrement = -g.dot(&d);
                let dw: Vec<f64> = self
                    .er
                    .iter_rows()
                    .map(|a| a.iter().zip(d.iter()).map(|(a, d)| a * d).sum())
                    .collect();
                let h_scale = 1.0 + h.iter().fold(0f64, |m, v| m.max(v.abs()));
                // near an active constraint the wealth is tiny and a step
                // that is negligible for h can still change the implied
                // multiplier μp/w a lot, so small steps must also be small
                // relative to every wealth
                let rel_dw = dw.iter().zip(&w).fold(0f64, |m, (dw, w)| m.max(dw.abs() / w));
                let small = d.amax() <= opts.tol * h_scale && rel_dw <= REL_WEALTH_STEP;
                if small || d.amax() <= 4.0 * f64::EPSILON * h_scale || decrement <= 0.0 {
                    break;
                }
                // largest step keeping every wealth positive
                let mut step = 1.0f64;
                for (wi, dwi) in w.iter().zip(&dw) {
                    if *dwi < 0.0 {
                        step = step.min(-FRACTION_TO_BOUNDARY * wi / dwi);
                    }
                }
                let m0 = self
                    .merit(u, x_eff, &h, mu)
                    .ok_or_else(|| Error::Inconsistent("barrier iterate left the feasible set".into()))?;
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = h.iter().zip(d.iter()).map(|(h, d)| h + step * d).collect();
                    if let Some(m) = self.merit(u, x_eff, &trial, mu) {
                        // slack for rounding in the merit near the optimum
                        if m <= m0 - ARMIJO * step * decrement + 4.0 * f64::EPSILON * m0.abs() {
                            h = trial;
                            accepted = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                steps += 1;
                if opts.record_iterates {
                    iterates.push(self.subset.embed(&h, self.n_sources));
                }
                if !accepted {
                    // no decrease at machine precision; the stage is done
                    break;
                }
            }
            if mu <= MU_END {
                break;
            }
            mu = (mu / MU_FACTOR).max(MU_END);
        }

        let w = self.wealth(x_eff, &h);
        let (f, g, _) = self.transformed(u, &w);
        let kkt = self.kkt_residual(&g, &w, mu, x_eff);
        if !(kkt <= KKT_FAIL) {
            return Err(Error::NonConvergence {
                reason: "utility maximization did not reach stationarity".into(),
                residual: kkt,
            });
        }
        let w_actual = self.wealth(x, &h);
        let value: f64 = w_actual
            .iter()
            .zip(self.er.probs())
            .map(|(&w, p)| p * u.eval(w))
            .sum();
        let ce = match u.family() {
            UtilityFamily::Cara if x_eff == x => -f,
            _ => u.inverse(value),
        };
        let margin = w_actual.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(UtilitySolution {
            h_star: Portfolio::new(self.subset.embed(&h, self.n_sources), x),
            value,
            certainty_equivalent: ce,
            kkt_residual: kkt,
            feasible_margin: margin,
            feasible: true,
            newton_steps: steps,
            iterates,
        })
    }
}

fn newton_direction(hess: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let k = g.len();
    let trace = (0..k).map(|i| hess[(i, i)].abs()).sum::<f64>().max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = hess.clone();
        for i in 0..k {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(-ch.solve(g));
        }
        ridge = if ridge == 0.0 { 1e-14 * trace / k as f64 } else { ridge * 100.0 };
    }
    Err(Error::NonConvergence {
        reason: "Newton system is not positive definite".into(),
        residual: g.amax(),
    })
}

/// Maximizes `E U(x + Σ_{i∈subset} h_i (ε_i − b_i) − G)` over superhedging
/// strategies.
pub fn maximize_utility(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    u: &UtilityFunction,
    g: &Claim,
    x: f64,
    subset: &AssetSubset,
    opts: &SolverOptions,
) -> Result<UtilitySolution> {
    UtilityProblem::new(space, shift, g, subset, &opts.lp)?.solve(u, x, opts)
}

/// `E U(V^{x,h} − G)` for `h` over all sources.
pub fn expected_utility(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    u: &UtilityFunction,
    g: &Claim,
    x: f64,
    h: &[f64],
) -> Result<f64> {
    g.check(space)?;
    let v = portfolio_value(&Portfolio::new(h.to_vec(), x), space, shift)?;
    Ok(v.iter()
        .zip(g.payoff())
        .zip(space.probs())
        .map(|((v, g), p)| p * u.eval(v - g))
        .sum())
}

/// Gradient in `h` of [`expected_utility`].
pub fn expected_utility_gradient(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    u: &UtilityFunction,
    g: &Claim,
    x: f64,
    h: &[f64],
) -> Result<Vec<f64>> {
    g.check(space)?;
    let v = portfolio_value(&Portfolio::new(h.to_vec(), x), space, shift)?;
    let b = shift.as_slice();
    let mut grad = vec![0.0; h.len()];
    for (((eps, p), v), gw) in space
        .outcomes()
        .map(|(_, e)| e)
        .zip(space.probs())
        .zip(&v)
        .zip(g.payoff())
    {
        let d = p * u.derivative(v - gw);
        for (i, gi) in grad.iter_mut().enumerate() {
            *gi += d * (eps[i] - b[i]);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_product_space, gauss_quantize, SourceMarginal};

    fn rade(n: usize) -> ScenarioSpace {
        build_product_space(&vec![SourceMarginal::rademacher(); n]).unwrap()
    }

    #[test]
    fn closed_form_first_order_condition() {
        let s = rade(1);
        let b = ShiftVector::new(vec![-0.5]).unwrap();
        let g = Claim::constant(&s, 0.0).unwrap();
        for gamma in [1.0, 3.0, 40.0] {
            let u = UtilityFunction::cara(gamma).unwrap();
            let sol = maximize_utility(&s, &b, &u, &g, 1.0, &AssetSubset::all(1), &SolverOptions::default()).unwrap();
            let expected = 3f64.ln() / (2.0 * gamma);
            assert!((sol.h_star.h[0] - expected).abs() < 1e-8, "γ={gamma}: {}", sol.h_star.h[0]);
            assert!(sol.kkt_residual < 1e-8);
            assert!(sol.feasible_margin > 0.0);
        }
    }

    #[test]
    fn symmetric_market_holds_cash() {
        let s = build_product_space(&[gauss_quantize(3).unwrap(), SourceMarginal::rademacher()]).unwrap();
        let b = ShiftVector::zeros(2);
        let g = Claim::constant(&s, 0.0).unwrap();
        for u in [
            UtilityFunction::cara(2.0).unwrap(),
            UtilityFunction::crra(3.0).unwrap(),
            UtilityFunction::log(),
        ] {
            let sol = maximize_utility(&s, &b, &u, &g, 1.5, &AssetSubset::all(2), &SolverOptions::default()).unwrap();
            assert!(sol.h_star.l2_norm() < 1e-9, "{u:?}");
            assert!((sol.value - u.eval(1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn below_superhedge_price_is_minus_infinity() {
        let s = rade(1);
        let b = ShiftVector::zeros(1);
        let g = Claim::call_on_sum(&s, &[1.0], 0.0).unwrap();
        let u = UtilityFunction::cara(1.0).unwrap();
        let sol = maximize_utility(&s, &b, &u, &g, 0.4, &AssetSubset::all(1), &SolverOptions::default()).unwrap();
        assert!(!sol.feasible);
        assert_eq!(sol.value, f64::NEG_INFINITY);
    }

    #[test]
    fn at_the_price_matches_grid_search() {
        // one 3-point source, G = ε_+; at x = π the feasible set is a segment
        let m = gauss_quantize(3).unwrap();
        let s = build_product_space(&[m]).unwrap();
        let b = ShiftVector::zeros(1);
        let g = Claim::call_on_sum(&s, &[1.0], 0.0).unwrap();
        let u = UtilityFunction::cara(2.0).unwrap();
        let prob = UtilityProblem::new(&s, &b, &g, &AssetSubset::all(1), &LpOptions::default()).unwrap();
        let pi = prob.superhedge_price();
        let sol = prob.solve(&u, pi, &SolverOptions::default()).unwrap();
        assert!(sol.feasible_margin > -1e-9 && sol.feasible_margin < 1e-6);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=200_000 {
            let h = -1.0 + 2.0 * i as f64 / 200_000.0;
            let v = prob.objective(&u, pi, &[h]);
            if v.is_finite() {
                best = best.max(v);
            }
        }
        assert!((sol.value - best).abs() < 1e-6, "{} vs {}", sol.value, best);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = build_product_space(&[gauss_quantize(3).unwrap(), SourceMarginal::rademacher()]).unwrap();
        let b = ShiftVector::new(vec![0.1, -0.2]).unwrap();
        let g = Claim::call_on_sum(&s, &[0.5, 0.5], 0.0).unwrap();
        let u = UtilityFunction::crra(2.0).unwrap();
        let h = [0.1, -0.05];
        let grad = expected_utility_gradient(&s, &b, &u, &g, 3.0, &h).unwrap();
        for i in 0..2 {
            let e = 1e-6;
            let mut hp = h;
            let mut hm = h;
            hp[i] += e;
            hm[i] -= e;
            let fd = (expected_utility(&s, &b, &u, &g, 3.0, &hp).unwrap()
                - expected_utility(&s, &b, &u, &g, 3.0, &hm).unwrap())
                / (2.0 * e);
            assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1e-3));
        }
        let prob = UtilityProblem::new(&s, &b, &g, &AssetSubset::all(2), &LpOptions::default()).unwrap();
        let pg = prob.gradient(&u, 3.0, &h);
        for i in 0..2 {
            assert!((pg[i] - grad[i]).abs() < 1e-14);
        }
        assert!((prob.objective(&u, 3.0, &h) - expected_utility(&s, &b, &u, &g, 3.0, &h).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn value_increases_with_wealth() {
        let s = rade(2);
        let b = ShiftVector::new(vec![0.1, -0.1]).unwrap();
        let g = Claim::call_on_sum(&s, &[1.0, 1.0], 0.0).unwrap();
        let u = UtilityFunction::log();
        let prob = UtilityProblem::new(&s, &b, &g, &AssetSubset::all(2), &LpOptions::default()).unwrap();
        let mut last = f64::NEG_INFINITY;
        for x in [1.2, 1.5, 2.0, 3.0] {
            let sol = prob.solve(&u, x, &SolverOptions::default()).unwrap();
            assert!(sol.value > last);
            last = sol.value;
        }
    }

    #[test]
    fn large_risk_aversion_stays_well_scaled() {
        let s = rade(2);
        let b = ShiftVector::zeros(2);
        let g = Claim::call_on_sum(&s, &[1.0, 1.0], 0.0).unwrap();
        let u = UtilityFunction::cara(4096.0).unwrap();
        let sol = maximize_utility(&s, &b, &u, &g, 1.5, &AssetSubset::all(2), &SolverOptions::default()).unwrap();
        assert!(sol.kkt_residual < 1e-6);
        assert!(sol.certainty_equivalent.is_finite());
        // the superhedge guarantees x − π = 0.5; risk aversion leaves little more
        assert!(sol.certainty_equivalent >= 0.5 - 1e-9);
        assert!(sol.certainty_equivalent <= 0.5 + 1e-3);
    }
}

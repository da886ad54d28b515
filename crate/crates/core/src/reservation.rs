//! Utility-indifference (reservation) prices for the seller of a claim and
//! their approach to the superreplication price as risk aversion grows.
//!
//! Utility levels are compared on the certainty-equivalent scale, which is a
//! strictly increasing transform of expected utility and stays well
//! conditioned for large risk aversion.

use std::time::Instant;

use rayon::prelude::*;

use crate::market::{AssetSubset, ShiftVector};
use crate::pricing::Claim;
use crate::scenario::ScenarioSpace;
use crate::utility::{SolverOptions, UtilityFamily, UtilityFunction, UtilityProblem, UtilitySolution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReservationOptions {
    /// Bisection stops once the bracket is this narrow.
    pub tol: f64,
    pub solver: SolverOptions,
}

impl Default for ReservationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndifferenceResult {
    /// Upper end of the final bracket: the least compensation found that
    /// leaves the seller no worse off.
    pub price: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// `u(0, x)`.
    pub u_ref: f64,
    /// Certainty equivalent of `u(0, x)`.
    pub ce_ref: f64,
    pub superhedge_price: f64,
}

struct Bisection<'a> {
    problem: UtilityProblem,
    subset: AssetSubset,
    u: &'a UtilityFunction,
    x: f64,
    solver: &'a SolverOptions,
    warm: Option<Vec<f64>>,
}

impl Bisection<'_> {
    fn level(&mut self, z: f64) -> Result<UtilitySolution> {
        let sol = self
            .problem
            .solve_from(self.u, self.x + z, self.warm.as_deref(), self.solver)?;
        if sol.feasible {
            let h = &sol.h_star.h;
            self.warm = Some(self.subset.indices().iter().map(|&i| h[i]).collect());
        }
        Ok(sol)
    }
}

/// `inf {z : u(G, x + z) ≥ u(0, x)}` by bisection over `[0, π(G)]`.
pub fn reservation_price(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    u: &UtilityFunction,
    g: &Claim,
    x: f64,
    subset: &AssetSubset,
    opts: &ReservationOptions,
) -> Result<IndifferenceResult> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Precondition("reservation price needs positive initial wealth".into()));
    }
    if !g.is_nonneg() {
        return Err(Error::Precondition("reservation price needs a nonnegative claim".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::validation("bisection tolerance must be positive"));
    }
    let zero = Claim::constant(space, 0.0)?;
    let reference = UtilityProblem::new(space, shift, &zero, subset, &opts.solver.lp)?.solve(u, x, &opts.solver)?;
    let (u_ref, ce_ref) = (reference.value, reference.certainty_equivalent);

    let problem = UtilityProblem::new(space, shift, g, subset, &opts.solver.lp)?;
    let pi = problem.superhedge_price();
    if pi == f64::INFINITY {
        return Ok(IndifferenceResult {
            price: f64::INFINITY,
            bracket: (0.0, f64::INFINITY),
            iterations: 0,
            u_ref,
            ce_ref,
            superhedge_price: pi,
        });
    }
    let mut b = Bisection {
        problem,
        subset: subset.clone(),
        u,
        x,
        solver: &opts.solver,
        warm: None,
    };
    let pi_clamped = pi.max(0.0);
    let top = b.level(pi_clamped)?;
    if top.certainty_equivalent < ce_ref - opts.tol / 10.0 {
        return Err(Error::Inconsistent(format!(
            "selling at the superhedging price lowers utility (certainty equivalent {} < {})",
            top.certainty_equivalent, ce_ref
        )));
    }
    let bottom = b.level(0.0)?;
    if bottom.certainty_equivalent >= ce_ref {
        return Ok(IndifferenceResult {
            price: 0.0,
            bracket: (0.0, 0.0),
            iterations: 0,
            u_ref,
            ce_ref,
            superhedge_price: pi,
        });
    }
    let (mut lo, mut hi) = (0.0, pi_clamped);
    let (mut ce_lo, mut ce_hi) = (bottom.certainty_equivalent, top.certainty_equivalent);
    let mut iterations = 0;
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let ce = b.level(mid)?.certainty_equivalent;
        // z ↦ u(G, x + z) is nondecreasing; a violation beyond solver noise
        // means the inner solves are unreliable
        if ce < ce_lo - opts.tol / 10.0 || ce > ce_hi + opts.tol / 10.0 {
            return Err(Error::Inconsistent(format!(
                "utility is not monotone in wealth at z = {mid}"
            )));
        }
        if ce >= ce_ref {
            hi = mid;
            ce_hi = ce;
        } else {
            lo = mid;
            ce_lo = ce;
        }
        iterations += 1;
    }
    Ok(IndifferenceResult {
        price: hi,
        bracket: (lo, hi),
        iterations,
        u_ref,
        ce_ref,
        superhedge_price: pi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub gamma: f64,
    pub price: f64,
    pub pi: f64,
    pub gap: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
}

/// Reservation prices along an increasing chain of risk-aversion parameters,
/// each compared with the superreplication price.
#[allow(clippy::too_many_arguments)]
pub fn convergence_experiment(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    g: &Claim,
    x: f64,
    family: UtilityFamily,
    risk_params: &[f64],
    subset: &AssetSubset,
    opts: &ReservationOptions,
) -> Result<Vec<ConvergenceRow>> {
    if risk_params.is_empty() {
        return Err(Error::validation("risk-aversion chain is empty"));
    }
    if risk_params.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("risk-aversion chain must be strictly increasing"));
    }
    risk_params
        .par_iter()
        .map(|&gamma| {
            let start = Instant::now();
            let u = UtilityFunction::new(family, gamma, 1.0)?;
            let r = reservation_price(space, shift, &u, g, x, subset, opts)?;
            Ok(ConvergenceRow {
                gamma,
                price: r.price,
                pi: r.superhedge_price,
                gap: r.superhedge_price - r.price,
                iterations: r.iterations,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

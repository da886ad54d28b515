//! Built-in suite of small cases with known answers.

use apt_core::arbitrage::{check_aoa, check_signs, find_martingale_measure, quantitative_alpha, verify_zero_cost, AlphaBudget};
use apt_core::lp::{solve_lp, LinearProgram, RowSense, Sense};
use apt_core::market::{portfolio_value, reparametrize, second_moment};
use apt_core::momentcheck::moment_ratio_scan;
use apt_core::pricing::{dual_price, superreplicate, truncation_curve};
use apt_core::reservation::{convergence_experiment, reservation_price, ReservationOptions};
use apt_core::scenario::{build_product_space, gauss_quantize, sample_iid};
use apt_core::utility::{maximize_utility, SolverOptions};
use apt_core::{
    AptModel, Asset, AssetSubset, Claim, LpOptions, Portfolio, ScenarioSpace, ShiftVector, SourceMarginal,
    UtilityFamily, UtilityFunction,
};

use crate::commands::{superreplicate_cmd, RunOptions};
use crate::error::CliResult;
use crate::output::num;
use crate::spec::MarketSpec;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

struct Suite(Vec<Check>);

impl Suite {
    fn close(&mut self, name: &'static str, expected: f64, observed: f64, tol: f64) {
        let pass = (expected - observed).abs() <= tol || expected == observed;
        self.0.push(Check {
            name,
            expected: num(expected),
            observed: num(observed),
            pass,
        });
    }

    fn truth(&mut self, name: &'static str, expected: bool, observed: bool) {
        self.0.push(Check {
            name,
            expected: expected.to_string(),
            observed: observed.to_string(),
            pass: expected == observed,
        });
    }
}

const TOL: f64 = 1e-9;

fn rademacher(n: usize) -> CliResult<ScenarioSpace> {
    Ok(build_product_space(&vec![SourceMarginal::rademacher(); n])?)
}

pub fn run(seed: u64) -> CliResult<Vec<Check>> {
    let mut s = Suite(Vec::new());
    let lp = LpOptions::default();
    let r2 = rademacher(2)?;
    let r1 = rademacher(1)?;
    let b0 = ShiftVector::zeros(2);
    let all2 = AssetSubset::all(2);

    // scenario
    s.close("product_space_outcomes", 4.0, r2.len() as f64, 0.0);
    let worst = r2.probs().iter().map(|p| (p - 0.25).abs()).fold(0.0, f64::max);
    s.close("product_space_uniform", 0.0, worst, 1e-15);
    let m = SourceMarginal::rademacher();
    s.close("rademacher_mean", 0.0, m.moment(1), 1e-15);
    s.close("rademacher_variance", 1.0, m.moment(2), 1e-15);
    let mut worst_defect: f64 = 0.0;
    for k in 2..=8 {
        let q = gauss_quantize(k)?;
        worst_defect = worst_defect.max((q.moment(1)).abs()).max((q.moment(2) - 1.0).abs());
    }
    s.close("gauss_quantize_moments", 0.0, worst_defect, 1e-10);
    let three = vec![SourceMarginal::rademacher(), gauss_quantize(3)?, gauss_quantize(4)?];
    let a = sample_iid(&three, 64, seed)?;
    let b = sample_iid(&three, 64, seed)?;
    s.truth("sample_iid_deterministic", true, a == b);
    s.close("sample_iid_columns", 3.0, a.n_sources() as f64, 0.0);

    // market
    let model = AptModel::new(1, vec![Asset::factor(0.0, 1.0), Asset::loaded(0.0, 2.0, vec![0.5])])?;
    s.close("zero_drift_shift", 0.0, reparametrize(&model).norm(), 0.0);
    let v = portfolio_value(&Portfolio::cash(2, 0.3), &r2, &b0)?;
    s.close("cash_portfolio_value", 0.0, v.iter().map(|v| (v - 0.3).abs()).fold(0.0, f64::max), 0.0);
    let v = portfolio_value(&Portfolio::new(vec![1.0], 0.0), &r1, &ShiftVector::zeros(1))?;
    s.close("unit_portfolio_spread", 2.0, v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - v.iter().fold(f64::INFINITY, |a, &b| a.min(b)), 0.0);
    let h = [0.6, 0.8];
    s.close("isometry_second_moment", 1.0, second_moment(&h, &b0, &r2)?, 1e-12);

    // lp
    let mut p = LinearProgram::new(Sense::Maximize, vec![1.0]);
    p.add_row(vec![1.0], RowSense::Le, 3.0);
    s.close("lp_single_bound", 3.0, solve_lp(&p, &lp).map(|s| s.objective).unwrap_or(f64::NAN), TOL);
    let mut p = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
    p.add_row(vec![1.0, 1.0], RowSense::Le, 1.0);
    s.close("lp_simplex_face", 1.0, solve_lp(&p, &lp).map(|s| s.objective).unwrap_or(f64::NAN), TOL);

    // arbitrage
    s.truth("signs_symmetric", true, check_signs(&r1, &ShiftVector::zeros(1))?[0]);
    s.truth("signs_shift_outside_support", false, check_signs(&r1, &ShiftVector::new(vec![1.5])?)?[0]);
    s.truth("aoa_symmetric", true, check_aoa(&r2, &b0, &all2, &lp)?.holds);
    let bad = ShiftVector::new(vec![2.0])?;
    let pre = quantitative_alpha(&r1, &bad, &AssetSubset::all(1), &AlphaBudget::default(), &lp);
    s.truth(
        "alpha_needs_no_arbitrage",
        true,
        matches!(&pre, Err(e) if e.kind() == "precondition"),
    );
    let q = find_martingale_measure(&r2, &b0, &all2, &lp)?;
    s.truth("martingale_measure_positive", true, q.min_weight >= 0.25 - TOL);
    let none = find_martingale_measure(&r1, &bad, &AssetSubset::all(1), &lp);
    s.truth("martingale_measure_infeasible", true, matches!(&none, Err(e) if e.kind() == "infeasible"));
    s.close("zero_cost_null_strategy", 0.0, verify_zero_cost(&r2, &b0, &q, &[0.0, 0.0])?, TOL);
    s.close("zero_cost_unit_strategy", 0.0, verify_zero_cost(&r2, &b0, &q, &[1.0, 0.0])?, TOL);

    // pricing
    let c = 0.7;
    let cash = Claim::constant(&r2, c)?;
    let sh = superreplicate(&r2, &b0, &cash, &all2, &lp)?;
    s.close("superhedge_cash_price", c, sh.price, TOL);
    let hn = sh.hedge.as_ref().map(|h| h.l2_norm()).unwrap_or(f64::NAN);
    s.close("superhedge_cash_hedge", 0.0, hn, TOL);
    let eps1 = Claim::series(&r2, &[1.0, 0.0])?;
    let sh = superreplicate(&r2, &b0, &eps1, &all2, &lp)?;
    s.close("superhedge_replicable_price", 0.0, sh.price, TOL);
    let h1 = sh.hedge.as_ref().map(|h| h.h[0]).unwrap_or(f64::NAN);
    s.close("superhedge_replicable_hedge", 1.0, h1, TOL);
    s.close("dual_cash", c, dual_price(&r2, &b0, &cash, &all2, &lp)?.value, TOL);
    s.close("dual_replicable", 0.0, dual_price(&r2, &b0, &eps1, &all2, &lp)?.value, TOL);
    let zero = Claim::constant(&r2, 0.0)?;
    let zp = superreplicate(&r2, &b0, &zero, &all2, &lp)?.price;
    let zd = dual_price(&r2, &b0, &zero, &all2, &lp)?.value;
    s.close("zero_claim_both_prices", 0.0, zp.abs().max(zd.abs()), TOL);
    let curve = truncation_curve(&r2, &b0, &cash, &[1, 2], &lp)?;
    let dev = curve.points.iter().map(|p| (p.primal - c).abs()).fold(0.0, f64::max);
    s.close("truncation_cash", 0.0, dev, TOL);

    // utility
    let utils = [
        UtilityFunction::cara(2.0)?,
        UtilityFunction::crra(3.0)?,
        UtilityFunction::log(),
    ];
    let norm = utils
        .iter()
        .map(|u| u.eval(1.0).abs().max((u.derivative(1.0) - 1.0).abs()))
        .fold(0.0, f64::max);
    s.close("utility_normalization", 0.0, norm, 1e-15);
    let sol = maximize_utility(&r2, &b0, &utils[0], &zero, 1.3, &all2, &SolverOptions::default())?;
    s.close("symmetric_market_holds_cash", 0.0, sol.h_star.l2_norm(), 1e-7);
    s.close("symmetric_market_value", utils[0].eval(1.3), sol.value, 1e-9);

    // reservation
    let ropts = ReservationOptions::default();
    let r = reservation_price(&r2, &b0, &utils[0], &zero, 1.0, &all2, &ropts)?;
    s.close("reservation_zero_claim", 0.0, r.price, 0.0);
    let mut worst: f64 = 0.0;
    for u in &utils {
        let r = reservation_price(&r2, &b0, u, &cash, 1.0, &all2, &ropts)?;
        worst = worst.max((r.price - c).abs());
    }
    s.close("reservation_cash_translation", 0.0, worst, ropts.tol);
    let rows = convergence_experiment(&r2, &b0, &zero, 1.0, UtilityFamily::Cara, &[1.0, 4.0, 16.0], &all2, &ropts)?;
    s.close("convergence_zero_claim", 0.0, rows.iter().map(|r| r.price.abs()).fold(0.0, f64::max), 0.0);

    // momentcheck: E⟨h, ε⟩² = 1 exactly for unit h and b = 0
    let rep = moment_ratio_scan(&vec![SourceMarginal::rademacher(); 4], &ShiftVector::zeros(4), 2.0, 16, 4000, seed)?;
    let exact = rep.directions.iter().map(|d| (d.exact.unwrap_or(f64::NAN) - 1.0).abs()).fold(0.0, f64::max);
    s.close("moment_exact_isometry", 0.0, exact, 1e-12);
    let z = rep
        .directions
        .iter()
        .map(|d| ((d.ratio - 1.0) / d.std_error.max(1e-300)).abs())
        .fold(0.0, f64::max);
    s.truth("moment_isometry_within_mc_error", true, z <= 5.0);

    // cli: the bundled cash-claim market end to end
    let spec = MarketSpec::from_json(CASH_SPEC)?;
    let out = superreplicate_cmd(&spec, &RunOptions::default())?;
    let row = &out.tables[0].rows[0];
    let primal: f64 = row[1].parse().unwrap_or(f64::NAN);
    let dual: f64 = row[2].parse().unwrap_or(f64::NAN);
    s.close("cli_cash_claim_primal", 0.7, primal, TOL);
    s.close("cli_cash_claim_dual", 0.7, dual, TOL);

    Ok(s.0)
}

/// Same contents as `specs/cash_claim.json`.
pub const CASH_SPEC: &str = r#"{
  "spec_version": 1,
  "sources": [{"rademacher": true, "count": 2}],
  "model": {"b": [0.0, 0.0]},
  "claim": {"constant": 0.7}
}"#;

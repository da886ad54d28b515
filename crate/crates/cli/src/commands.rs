//! One function per subcommand. Each returns the CSV tables it produced and
//! a short human-readable summary; writing files is left to the caller.

use std::fmt::Write as _;
use std::time::Instant;

use apt_core::arbitrage::{arbitrage_report, AlphaBudget};
use apt_core::momentcheck::{moment_ratio_scan_with, MomentOptions};
use apt_core::pricing::{duality_report, dual_price, superreplicate, truncation_curve};
use apt_core::reservation::{convergence_experiment, reservation_price, ConvergenceRow, ReservationOptions};
use apt_core::utility::{maximize_utility, SolverOptions};
use apt_core::{Claim, LpOptions, UtilityFunction};

use crate::error::{CliError, CliResult};
use crate::output::{flag, hedge_table, num, Table};
use crate::selftest;
use crate::spec::MarketSpec;

pub const DEFAULT_BISECTION_TOL: f64 = 1e-4;

/// Settings from the command line that override or complement the market file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub rational: bool,
    /// Write measured wall-clock times into `runtime_ms`; otherwise the
    /// column is 0 so reruns stay byte-identical.
    pub timing: bool,
}

impl RunOptions {
    fn lp(&self) -> LpOptions {
        if self.rational {
            LpOptions::rational()
        } else {
            LpOptions::default()
        }
    }

    fn seed(&self, spec: &MarketSpec) -> u64 {
        self.seed.or(spec.seed).unwrap_or(0)
    }

    fn tol(&self, spec: &MarketSpec) -> CliResult<f64> {
        let t = self.tol.or(spec.tolerance).unwrap_or(DEFAULT_BISECTION_TOL);
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::validation("tolerance must be positive"));
        }
        Ok(t)
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            lp: self.lp(),
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub tables: Vec<Table>,
    /// Raised after the tables are written.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(summary: String, tables: Vec<Table>) -> Self {
        Self {
            summary,
            tables,
            failure: None,
        }
    }
}

pub fn check_arbitrage(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let mut budget = AlphaBudget {
        seed: opts.seed(spec),
        ..AlphaBudget::default()
    };
    if let Some(d) = spec.alpha.as_ref().and_then(|a| a.directions) {
        budget.directions = d;
    }
    let r = arbitrage_report(&m.space, &m.shift, &m.subset, &budget, &opts.lp())?;

    let mut main = Table::new(
        "check-arbitrage",
        &["aoa_holds", "alpha_lower_bound", "alpha_estimate", "alpha_certified"],
    );
    main.push(vec![
        flag(r.aoa_holds),
        num(r.alpha_lower_bound),
        num(r.alpha_estimate),
        flag(r.alpha_certified),
    ]);
    let mut signs = Table::new("check-arbitrage-signs", &["source", "sign_ok"]);
    for (i, ok) in r.sign_condition_ok.iter().enumerate() {
        signs.push(vec![(i + 1).to_string(), flag(*ok)]);
    }
    let mut tables = vec![main, signs];

    let mut s = String::new();
    let _ = writeln!(s, "no arbitrage on subset   {}", r.aoa_holds);
    let bad: Vec<String> = r
        .sign_condition_ok
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    let _ = writeln!(
        s,
        "sign condition           {}",
        if bad.is_empty() { "ok".to_string() } else { format!("fails for sources {}", bad.join(" ")) }
    );
    let _ = writeln!(
        s,
        "alpha                    {:.6} ({})",
        r.alpha_estimate,
        if r.alpha_certified { "certified" } else { "heuristic" }
    );
    if let Some(w) = &r.witness {
        let _ = writeln!(s, "arbitrage witness h      {}", fmt_vec(&w.h));
        tables.push(hedge_table("check-arbitrage-witness", &w.h));
    }
    let _ = writeln!(
        s,
        "report aoa_holds={} alpha_lower_bound={} alpha_estimate={} alpha_certified={}",
        r.aoa_holds,
        num(r.alpha_lower_bound),
        num(r.alpha_estimate),
        r.alpha_certified
    );
    Ok(Outcome::ok(s, tables))
}

const PRICE_COLUMNS: [&str; 4] = ["n", "primal", "dual", "gap"];

pub fn superreplicate_cmd(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let g = spec.claim(&m.space)?;
    let r = duality_report(&m.space, &m.shift, &g, &m.subset, &opts.lp())?;
    let mut main = Table::new("superreplicate", &PRICE_COLUMNS);
    main.push(vec![m.subset.len().to_string(), num(r.primal_price), num(r.dual_price), num(r.gap)]);
    let mut tables = vec![main];
    let mut s = format!(
        "superreplication price  {}\nmartingale-measure sup  {}\ngap                     {:e}\n",
        r.primal_price, r.dual_price, r.gap
    );
    if let Some(h) = &r.hedge {
        let _ = writeln!(s, "hedge h                 {}", fmt_vec(&h.h));
        tables.push(hedge_table("superreplicate-hedge", &h.h));
    }
    if let Some(e) = &r.exact_gap {
        let _ = writeln!(s, "exact gap               {e}");
    }
    Ok(Outcome::ok(s, tables))
}

pub fn dual_price_cmd(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let g = spec.claim(&m.space)?;
    let lp = opts.lp();
    let d = dual_price(&m.space, &m.shift, &g, &m.subset, &lp)?;
    let p = superreplicate(&m.space, &m.shift, &g, &m.subset, &lp)?.price;
    let gap = (p - d.value).abs();
    let mut main = Table::new("dual-price", &PRICE_COLUMNS);
    main.push(vec![m.subset.len().to_string(), num(p), num(d.value), num(gap)]);
    let mut q = Table::new("dual-price-measure", &["omega", "q"]);
    for (i, w) in d.q.iter().enumerate() {
        q.push(vec![(i + 1).to_string(), num(*w)]);
    }
    let s = format!(
        "martingale-measure sup  {}\nsuperreplication price  {}\ngap                     {:e}\n",
        d.value, p, gap
    );
    Ok(Outcome::ok(s, vec![main, q]))
}

pub fn truncation_curve_cmd(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let g = spec.claim(&m.space)?;
    let levels = spec
        .truncation
        .clone()
        .unwrap_or_else(|| (1..=m.space.n_sources()).collect());
    let c = truncation_curve(&m.space, &m.shift, &g, &levels, &opts.lp())?;
    let mut t = Table::new("truncation-curve", &PRICE_COLUMNS);
    let mut s = format!("full-market price {}\n   n  primal\n", c.full_price);
    for p in &c.points {
        t.push(vec![p.n.to_string(), num(p.primal), num(p.dual), num(p.gap)]);
        let _ = writeln!(s, "{:>4}  {}", p.n, p.primal);
    }
    Ok(Outcome::ok(s, vec![t]))
}

fn utility_fn(spec: &MarketSpec, param: f64) -> CliResult<UtilityFunction> {
    let u = spec.utility()?;
    Ok(UtilityFunction::new(u.family()?, param, u.x0.unwrap_or(1.0))?)
}

fn claim_or_zero(spec: &MarketSpec, space: &apt_core::ScenarioSpace) -> CliResult<Claim> {
    if spec.claim.is_some() {
        spec.claim(space)
    } else {
        Ok(Claim::constant(space, 0.0)?)
    }
}

pub fn maximize_utility_cmd(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let g = claim_or_zero(spec, &m.space)?;
    let x = spec.wealth()?;
    let u = utility_fn(spec, spec.utility()?.param()?)?;
    let sol = maximize_utility(&m.space, &m.shift, &u, &g, x, &m.subset, &opts.solver())?;
    let mut main = Table::new(
        "maximize-utility",
        &[
            "family",
            "risk_param",
            "x",
            "value",
            "certainty_equivalent",
            "kkt_residual",
            "feasible",
            "feasible_margin",
            "newton_steps",
        ],
    );
    main.push(vec![
        u.family().name().into(),
        num(u.risk_param()),
        num(x),
        num(sol.value),
        num(sol.certainty_equivalent),
        num(sol.kkt_residual),
        flag(sol.feasible),
        num(sol.feasible_margin),
        sol.newton_steps.to_string(),
    ]);
    let mut tables = vec![main];
    let mut s = String::new();
    if sol.feasible {
        let _ = writeln!(s, "h*              {}", fmt_vec(&sol.h_star.h));
        tables.push(hedge_table("maximize-utility-hedge", &sol.h_star.h));
    } else {
        let _ = writeln!(s, "wealth is below the superreplication price; no admissible strategy");
    }
    let _ = writeln!(s, "value           {}", sol.value);
    let _ = writeln!(s, "KKT residual    {:e}", sol.kkt_residual);
    Ok(Outcome::ok(s, tables))
}

const CONVERGENCE_COLUMNS: [&str; 6] = ["gamma", "price", "pi", "gap", "iterations", "runtime_ms"];

fn convergence_table(name: &str, rows: &[ConvergenceRow], timing: bool) -> (Table, String) {
    let mut t = Table::new(name, &CONVERGENCE_COLUMNS);
    let mut s = String::from("       gamma         price            pi           gap  iters  ms\n");
    for r in rows {
        let ms = if timing { r.runtime_ms } else { 0.0 };
        t.push(vec![
            num(r.gamma),
            num(r.price),
            num(r.pi),
            num(r.gap),
            r.iterations.to_string(),
            num(ms),
        ]);
        let _ = writeln!(
            s,
            "{:>12.6} {:>13.8} {:>13.8} {:>13.8} {:>6} {:.0}",
            r.gamma, r.price, r.pi, r.gap, r.iterations, r.runtime_ms
        );
    }
    (t, s)
}

fn reservation_opts(spec: &MarketSpec, opts: &RunOptions) -> CliResult<ReservationOptions> {
    Ok(ReservationOptions {
        tol: opts.tol(spec)?,
        solver: opts.solver(),
    })
}

pub fn reservation_price_cmd(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let g = spec.claim(&m.space)?;
    let x = spec.wealth()?;
    let param = spec.utility()?.param()?;
    let u = utility_fn(spec, param)?;
    let start = Instant::now();
    let r = reservation_price(&m.space, &m.shift, &u, &g, x, &m.subset, &reservation_opts(spec, opts)?)?;
    let row = ConvergenceRow {
        gamma: u.risk_param(),
        price: r.price,
        pi: r.superhedge_price,
        gap: r.superhedge_price - r.price,
        iterations: r.iterations,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let (t, mut s) = convergence_table("reservation-price", &[row], opts.timing);
    let _ = writeln!(s, "bracket [{}, {}]", r.bracket.0, r.bracket.1);
    Ok(Outcome::ok(s, vec![t]))
}

pub fn convergence_cmd(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let m = spec.market()?;
    let g = spec.claim(&m.space)?;
    let x = spec.wealth()?;
    let u = spec.utility()?;
    let chain = match (&u.param_chain, u.param) {
        (Some(c), _) => c.clone(),
        (None, Some(p)) => vec![p],
        (None, None) => return Err(CliError::validation("utility.param_chain is required")),
    };
    if u.x0.is_some_and(|x0| x0 != 1.0) {
        return Err(CliError::validation("convergence normalizes utilities at x0 = 1"));
    }
    let rows = convergence_experiment(
        &m.space,
        &m.shift,
        &g,
        x,
        u.family()?,
        &chain,
        &m.subset,
        &reservation_opts(spec, opts)?,
    )?;
    let (t, s) = convergence_table("convergence", &rows, opts.timing);
    Ok(Outcome::ok(s, vec![t]))
}

pub fn moment_check(spec: &MarketSpec, opts: &RunOptions) -> CliResult<Outcome> {
    let marginals = spec.marginals()?;
    let shift = spec.shift(marginals.len())?;
    let mc = spec
        .moment
        .as_ref()
        .ok_or_else(|| CliError::validation("moment-check needs a moment block"))?;
    let mopts = MomentOptions {
        tail_radius: mc.tail_radius.unwrap_or(1.0),
        ..MomentOptions::default()
    };
    let seed = opts.seed(spec);
    let r = moment_ratio_scan_with(&marginals, &shift, mc.gamma, mc.n_h, mc.n_mc, seed, &mopts)?;

    let mut main = Table::new(
        "moment-check",
        &["gamma", "max_ratio", "n_h", "n_mc", "seed", "tail_radius"],
    );
    main.push(vec![
        num(r.gamma),
        num(r.max_ratio),
        mc.n_h.to_string(),
        r.n_mc.to_string(),
        r.seed.to_string(),
        num(r.tail_radius),
    ]);
    let mut dirs = Table::new("moment-check-directions", &["direction", "ratio", "std_error", "exact"]);
    for (i, d) in r.directions.iter().enumerate() {
        dirs.push(vec![
            (i + 1).to_string(),
            num(d.ratio),
            num(d.std_error),
            d.exact.map(num).unwrap_or_default(),
        ]);
    }
    let mut tail = Table::new("moment-check-tail", &["level", "tail_second_moment"]);
    let mut s = format!("gamma {}  max ratio {:.6}  ({} directions, {} samples)\n", r.gamma, r.max_ratio, mc.n_h, r.n_mc);
    for (k, v) in &r.tail_curve {
        tail.push(vec![num(*k), num(*v)]);
        let _ = writeln!(s, "tail K={k:<3} {v:.6e}");
    }
    Ok(Outcome::ok(s, vec![main, dirs, tail]))
}

pub fn selftest_cmd(opts: &RunOptions) -> CliResult<Outcome> {
    let checks = selftest::run(opts.seed.unwrap_or(0))?;
    let mut t = Table::new("selftest", &["check", "expected", "observed", "pass"]);
    let mut failed = Vec::new();
    for c in &checks {
        t.push(vec![c.name.into(), c.expected.clone(), c.observed.clone(), flag(c.pass)]);
        if !c.pass {
            failed.push(c.name);
        }
    }
    let summary = if failed.is_empty() {
        format!("selftest: {} checks passed\n", checks.len())
    } else {
        format!("selftest: {} of {} checks failed: {}\n", failed.len(), checks.len(), failed.join(", "))
    };
    let failure = (!failed.is_empty()).then(|| CliError::numerical(format!("{} selftest checks failed", failed.len())));
    Ok(Outcome {
        summary,
        tables: vec![t],
        failure,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.8}")).collect();
    format!("[{}]", parts.join(", "))
}

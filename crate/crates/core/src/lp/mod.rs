//! Dense linear programming for the small problems this crate produces.
//!
//! A [`LinearProgram`] with arbitrary row senses and variable bounds is
//! rewritten into standard equality form and solved by the two-phase revised
//! simplex in `simplex.rs`, in either `f64` or exact rational arithmetic.
//! Every optimal solution comes back with primal, dual and complementarity
//! residuals measured on the standard form.

mod scalar;
mod simplex;

use num::BigRational;
use thiserror::Error;

pub use scalar::LpScalar;
use simplex::{Outcome, StandardForm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("program has {nonzeros} nonzeros, cap is {cap}")]
    DimensionCap { nonzeros: usize, cap: usize },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
}

impl LpError {
    pub fn kind(&self) -> &'static str {
        match self {
            LpError::Malformed(_) | LpError::DimensionCap { .. } => "validation",
            LpError::NumericalBreakdown(_) | LpError::IterationLimit(_) => "numerical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `opt c·x` subject to dense rows and per-variable bounds (infinite bounds
/// allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start: Option<Vec<f64>>,
}

impl LinearProgram {
    /// New program over `objective.len()` variables, all nonnegative.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            start: None,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) -> &mut Self {
        self.rows.push(Constraint { coeffs, sense, rhs });
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn set_free(&mut self, j: usize) -> &mut Self {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Reference point for free variables: a free `x_j` is written as
    /// `start_j + x⁺ − x⁻`. When the point is feasible every inequality row
    /// starts with a feasible slack and phase one is skipped.
    pub fn with_start(&mut self, start: Vec<f64>) -> &mut Self {
        self.start = Some(start);
        self
    }

    /// Same program with its rows in a different order.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let mut p = self.clone();
        p.rows = order.iter().map(|&i| self.rows[i].clone()).collect();
        p
    }

    fn validate(&self, cap: usize) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("objective coefficients must be finite".into()));
        }
        let mut nonzeros = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has non-finite entries")));
            }
            nonzeros += row.coeffs.iter().filter(|v| **v != 0.0).count();
        }
        if nonzeros > cap {
            return Err(LpError::DimensionCap { nonzeros, cap });
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        if let Some(s) = &self.start {
            if s.len() != n || s.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed("start point has wrong length or non-finite entries".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    #[default]
    Float,
    /// Exact rational arithmetic; meant for certification on tiny instances.
    Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptions {
    pub arithmetic: Arithmetic,
    pub max_nonzeros: usize,
    pub max_iterations: usize,
    /// Residual thresholds an optimal float solution must meet.
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub complementarity_tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            arithmetic: Arithmetic::Float,
            max_nonzeros: 1_000_000,
            max_iterations: 200_000,
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            complementarity_tol: 1e-8,
        }
    }
}

impl LpOptions {
    pub fn rational() -> Self {
        Self {
            arithmetic: Arithmetic::Rational,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Shadow price `∂ objective / ∂ rhs_i` of each row.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Exact objective value in rational mode.
    pub exact_objective: Option<BigRational>,
    /// Exact dual objective `b·y` in rational mode.
    pub exact_dual_objective: Option<BigRational>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs()
    }
}

/// How an original variable is expressed through standard-form columns:
/// `x = offset + sign_plus * col_plus − col_minus`.
#[derive(Debug, Clone)]
struct VarMap {
    offset: f64,
    plus: usize,
    plus_sign: f64,
    minus: Option<usize>,
}

struct Converted<T> {
    sf: StandardForm<T>,
    vars: Vec<VarMap>,
    /// Sign applied to original row `i` when it became standard row `i`.
    row_sign: Vec<f64>,
    obj_offset: T,
    obj_sign: f64,
}

fn convert<T: LpScalar>(p: &LinearProgram) -> Converted<T> {
    let n = p.n_vars();
    let mut n_cols = 0usize;
    let mut vars = Vec::with_capacity(n);
    // (column, upper bound) rows for bounded columns
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        let mut col = || {
            n_cols += 1;
            n_cols - 1
        };
        let map = if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let offset = p.start.as_ref().map_or(0.0, |s| s[j]);
            VarMap {
                offset,
                plus: col(),
                plus_sign: 1.0,
                minus: Some(col()),
            }
        } else if l >= 0.0 {
            let c = col();
            if u.is_finite() {
                bound_rows.push((c, u - l));
            }
            VarMap {
                offset: l,
                plus: c,
                plus_sign: 1.0,
                minus: None,
            }
        } else if u > 0.0 {
            // l < 0 < u: split so that zero stays representable at the origin
            let plus = col();
            let minus = col();
            if u.is_finite() {
                bound_rows.push((plus, u));
            }
            if l.is_finite() {
                bound_rows.push((minus, -l));
            }
            VarMap {
                offset: 0.0,
                plus,
                plus_sign: 1.0,
                minus: Some(minus),
            }
        } else {
            // u <= 0: x = u − x'
            let c = col();
            if l.is_finite() {
                bound_rows.push((c, u - l));
            }
            VarMap {
                offset: u,
                plus: c,
                plus_sign: -1.0,
                minus: None,
            }
        };
        vars.push(map);
    }
    let structural = n_cols;
    let m = p.rows.len() + bound_rows.len();
    let n_slack = p.rows.iter().filter(|r| r.sense != RowSense::Eq).count() + bound_rows.len();
    let total = structural + n_slack;

    let mut a = vec![T::zero(); m * total];
    let mut b = vec![T::zero(); m];
    let mut start = vec![None; m];
    let mut row_sign = Vec::with_capacity(p.rows.len());
    let offsets: Vec<T> = vars.iter().map(|v| T::from_f64(v.offset)).collect();
    let mut next_slack = structural;
    for (i, row) in p.rows.iter().enumerate() {
        let mut rhs = T::from_f64(row.rhs);
        for (j, &coef) in row.coeffs.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let cf = T::from_f64(coef);
            let v = &vars[j];
            rhs = rhs - cf.clone() * offsets[j].clone();
            a[i * total + v.plus] = cf.clone() * T::from_f64(v.plus_sign);
            if let Some(mc) = v.minus {
                a[i * total + mc] = -cf;
            }
        }
        let slack = match row.sense {
            RowSense::Le => Some((next_slack, T::one())),
            RowSense::Ge => Some((next_slack, -T::one())),
            RowSense::Eq => None,
        };
        if let Some((s, v)) = &slack {
            a[i * total + s] = v.clone();
            next_slack += 1;
        }
        // Flip negative rows, and zero-rhs `≥` rows so their slack can start basic.
        let flip = rhs < T::zero() || (rhs.is_zero() && row.sense == RowSense::Ge);
        let sign = if flip { -1.0 } else { 1.0 };
        if sign < 0.0 {
            for v in &mut a[i * total..(i + 1) * total] {
                *v = -v.clone();
            }
            rhs = -rhs;
        }
        if let Some((s, _)) = slack {
            if a[i * total + s] == T::one() {
                start[i] = Some(s);
            }
        }
        b[i] = rhs;
        row_sign.push(sign);
    }
    for (k, (c, ub)) in bound_rows.iter().enumerate() {
        let i = p.rows.len() + k;
        a[i * total + c] = T::one();
        a[i * total + next_slack] = T::one();
        start[i] = Some(next_slack);
        next_slack += 1;
        b[i] = T::from_f64(*ub);
    }
    let obj_sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![T::zero(); total];
    let mut obj_offset = T::zero();
    for (j, &cj) in p.objective.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        let cf = T::from_f64(cj * obj_sign);
        let v = &vars[j];
        obj_offset = obj_offset + cf.clone() * offsets[j].clone();
        c[v.plus] = cf.clone() * T::from_f64(v.plus_sign);
        if let Some(mc) = v.minus {
            c[mc] = -cf;
        }
    }
    Converted {
        sf: StandardForm {
            m,
            n: total,
            a,
            b,
            c,
            start,
        },
        vars,
        row_sign,
        obj_offset,
        obj_sign,
    }
}

/// Solves `p`, certifying residuals of optimal solutions.
pub fn solve_lp(p: &LinearProgram, opts: &LpOptions) -> Result<LpSolution, LpError> {
    p.validate(opts.max_nonzeros)?;
    match opts.arithmetic {
        Arithmetic::Float => solve_with::<f64>(p, opts),
        Arithmetic::Rational => solve_with::<BigRational>(p, opts),
    }
}

fn solve_with<T: LpScalar>(p: &LinearProgram, opts: &LpOptions) -> Result<LpSolution, LpError> {
    let conv = convert::<T>(p);
    let sf = &conv.sf;
    let res = simplex::solve(sf, opts.max_iterations)?;
    let n = p.n_vars();
    let status = match res.outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            status,
            primal: vec![f64::NAN; n],
            duals: vec![f64::NAN; p.rows.len()],
            objective: match (status, p.sense) {
                (LpStatus::Unbounded, Sense::Minimize) => f64::NEG_INFINITY,
                (LpStatus::Unbounded, Sense::Maximize) => f64::INFINITY,
                (_, Sense::Minimize) => f64::INFINITY,
                (_, Sense::Maximize) => f64::NEG_INFINITY,
            },
            dual_objective: f64::NAN,
            residuals: Residuals::default(),
            iterations: res.iterations,
            exact_objective: None,
            exact_dual_objective: None,
        });
    }

    // standard-form objective, dual objective and residuals, in T
    let std_obj: T = sf
        .c
        .iter()
        .zip(&res.x)
        .fold(T::zero(), |acc, (c, x)| acc + c.clone() * x.clone());
    let std_dual: T = sf
        .b
        .iter()
        .zip(&res.y)
        .fold(T::zero(), |acc, (b, y)| acc + b.clone() * y.clone());
    let mut primal_res = 0f64;
    for i in 0..sf.m {
        let ax = (0..sf.n).fold(T::zero(), |acc, j| {
            let a = &sf.a[i * sf.n + j];
            if a.is_zero() {
                acc
            } else {
                acc + a.clone() * res.x[j].clone()
            }
        });
        let r = (ax - sf.b[i].clone()).abs().to_f64() / (1.0 + sf.b[i].abs().to_f64());
        primal_res = primal_res.max(r);
    }
    let mut dual_res = 0f64;
    let mut comp = 0f64;
    for j in 0..sf.n {
        let mut d = sf.c[j].clone();
        for i in 0..sf.m {
            let a = &sf.a[i * sf.n + j];
            if !a.is_zero() {
                d = d - res.y[i].clone() * a.clone();
            }
        }
        let xj = res.x[j].to_f64();
        primal_res = primal_res.max((-xj).max(0.0));
        let df = d.to_f64();
        dual_res = dual_res.max((-df).max(0.0));
        comp = comp.max((xj * df).abs());
    }
    let residuals = Residuals {
        primal: primal_res,
        dual: dual_res,
        complementarity: comp,
    };

    let xs: Vec<f64> = res.x.iter().map(|v| v.to_f64()).collect();
    let primal: Vec<f64> = conv
        .vars
        .iter()
        .map(|v| v.offset + v.plus_sign * xs[v.plus] - v.minus.map_or(0.0, |c| xs[c]))
        .collect();
    let duals: Vec<f64> = conv
        .row_sign
        .iter()
        .zip(&res.y)
        .map(|(s, y)| conv.obj_sign * s * y.to_f64())
        .collect();
    let total_obj = std_obj + conv.obj_offset.clone();
    let total_dual = std_dual + conv.obj_offset;
    let objective = conv.obj_sign * total_obj.to_f64();
    let dual_objective = conv.obj_sign * total_dual.to_f64();
    let exact_objective = total_obj.to_rational().map(|v| v * BigRational::from_float(conv.obj_sign).expect("sign"));
    let exact_dual_objective =
        total_dual.to_rational().map(|v| v * BigRational::from_float(conv.obj_sign).expect("sign"));

    if !T::EXACT
        && (residuals.primal > opts.primal_tol
            || residuals.dual > opts.dual_tol
            || residuals.complementarity > opts.complementarity_tol)
    {
        return Err(LpError::NumericalBreakdown(format!(
            "optimal basis fails certification: primal {:e}, dual {:e}, complementarity {:e}",
            residuals.primal, residuals.dual, residuals.complementarity
        )));
    }
    Ok(LpSolution {
        status,
        primal,
        duals,
        objective,
        dual_objective,
        residuals,
        iterations: res.iterations,
        exact_objective,
        exact_dual_objective,
    })
}

//! Normalized concave utility families and expected-utility maximization
//! under a superhedging constraint.
//!
//! Every family is rescaled affinely so that `U(x0) = 0` and `U'(x0) = 1`.
//! Arguments below zero have utility `−∞`.

mod solver;

pub use solver::{
    expected_utility, expected_utility_gradient, maximize_utility, SolverOptions, UtilityProblem,
    UtilitySolution,
};

use crate::{Error, Result};

/// Risk parameters above this are rejected; exponentials saturate well before.
pub const MAX_RISK_PARAM: f64 = 1_048_576.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityFamily {
    /// Constant absolute risk aversion `γ`.
    Cara,
    /// Constant relative risk aversion `ρ` (`ρ = 1` is the logarithm).
    Crra,
    Log,
}

impl UtilityFamily {
    pub fn name(self) -> &'static str {
        match self {
            UtilityFamily::Cara => "cara",
            UtilityFamily::Crra => "crra",
            UtilityFamily::Log => "log",
        }
    }
}

impl std::str::FromStr for UtilityFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cara" => Ok(UtilityFamily::Cara),
            "crra" => Ok(UtilityFamily::Crra),
            "log" => Ok(UtilityFamily::Log),
            other => Err(Error::validation(format!("unknown utility family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityFunction {
    family: UtilityFamily,
    risk_param: f64,
    x0: f64,
}

impl UtilityFunction {
    pub fn new(family: UtilityFamily, risk_param: f64, x0: f64) -> Result<Self> {
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(Error::validation("normalization point x0 must be positive"));
        }
        let risk_param = match family {
            UtilityFamily::Log => 1.0,
            _ => risk_param,
        };
        if !(risk_param.is_finite() && risk_param > 0.0) {
            return Err(Error::validation("risk parameter must be positive"));
        }
        if risk_param > MAX_RISK_PARAM {
            return Err(Error::validation(format!(
                "risk parameter {risk_param} exceeds the cap {MAX_RISK_PARAM}"
            )));
        }
        // crra(1) is the logarithm; keep one code path for it
        let family = if family == UtilityFamily::Crra && risk_param == 1.0 {
            UtilityFamily::Log
        } else {
            family
        };
        Ok(Self {
            family,
            risk_param,
            x0,
        })
    }

    pub fn cara(gamma: f64) -> Result<Self> {
        Self::new(UtilityFamily::Cara, gamma, 1.0)
    }

    pub fn crra(rho: f64) -> Result<Self> {
        Self::new(UtilityFamily::Crra, rho, 1.0)
    }

    pub fn log() -> Self {
        Self {
            family: UtilityFamily::Log,
            risk_param: 1.0,
            x0: 1.0,
        }
    }

    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn risk_param(&self) -> f64 {
        self.risk_param
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Whether `U(0) = −∞`, so wealth must stay strictly positive.
    pub fn infinite_at_zero(&self) -> bool {
        match self.family {
            UtilityFamily::Cara => false,
            UtilityFamily::Crra => self.risk_param >= 1.0,
            UtilityFamily::Log => true,
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        if y < 0.0 || y.is_nan() {
            return f64::NEG_INFINITY;
        }
        let (r, x0) = (self.risk_param, self.x0);
        match self.family {
            UtilityFamily::Cara => -(-r * (y - x0)).exp_m1() / r,
            UtilityFamily::Crra => {
                if y == 0.0 && r > 1.0 {
                    return f64::NEG_INFINITY;
                }
                x0.powf(r) * (y.powf(1.0 - r) - x0.powf(1.0 - r)) / (1.0 - r)
            }
            UtilityFamily::Log => {
                if y == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    x0 * (y / x0).ln()
                }
            }
        }
    }

    /// `U'(y)`; `+∞` at zero for the families that blow up there.
    pub fn derivative(&self, y: f64) -> f64 {
        let (r, x0) = (self.risk_param, self.x0);
        match self.family {
            UtilityFamily::Cara => (-r * (y - x0)).exp(),
            UtilityFamily::Crra => x0.powf(r) * y.powf(-r),
            UtilityFamily::Log => x0 / y,
        }
    }

    pub fn second_derivative(&self, y: f64) -> f64 {
        let (r, x0) = (self.risk_param, self.x0);
        match self.family {
            UtilityFamily::Cara => -r * (-r * (y - x0)).exp(),
            UtilityFamily::Crra => -r * x0.powf(r) * y.powf(-r - 1.0),
            UtilityFamily::Log => -x0 / (y * y),
        }
    }

    /// Arrow–Pratt absolute risk aversion `−U''(y)/U'(y)`.
    pub fn risk_aversion(&self, y: f64) -> f64 {
        match self.family {
            UtilityFamily::Cara => self.risk_param,
            UtilityFamily::Crra => self.risk_param / y,
            UtilityFamily::Log => 1.0 / y,
        }
    }

    /// Inverse of [`eval`](Self::eval) on the range of `U`; maps values
    /// outside the range to the nearest end.
    pub fn inverse(&self, v: f64) -> f64 {
        if v == f64::NEG_INFINITY {
            return if self.infinite_at_zero() { 0.0 } else { f64::NEG_INFINITY };
        }
        let (r, x0) = (self.risk_param, self.x0);
        match self.family {
            UtilityFamily::Cara => {
                let t = -r * v;
                if t <= -1.0 {
                    f64::INFINITY
                } else {
                    x0 - t.ln_1p() / r
                }
            }
            UtilityFamily::Crra => {
                let base = x0.powf(1.0 - r) + (1.0 - r) * v / x0.powf(r);
                if base <= 0.0 {
                    if r > 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    base.powf(1.0 / (1.0 - r))
                }
            }
            UtilityFamily::Log => x0 * (v / x0).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<UtilityFunction> {
        vec![
            UtilityFunction::cara(0.5).unwrap(),
            UtilityFunction::cara(7.0).unwrap(),
            UtilityFunction::crra(0.5).unwrap(),
            UtilityFunction::crra(3.0).unwrap(),
            UtilityFunction::log(),
            UtilityFunction::new(UtilityFamily::Cara, 2.0, 2.5).unwrap(),
            UtilityFunction::new(UtilityFamily::Crra, 2.0, 0.7).unwrap(),
        ]
    }

    #[test]
    fn normalized_at_x0() {
        for u in all() {
            assert!(u.eval(u.x0()).abs() < 1e-15, "{u:?}");
            assert!((u.derivative(u.x0()) - 1.0).abs() < 1e-15, "{u:?}");
        }
    }

    #[test]
    fn negative_wealth_is_minus_infinity() {
        for u in all() {
            assert_eq!(u.eval(-1e-9), f64::NEG_INFINITY);
        }
        assert_eq!(UtilityFunction::log().eval(0.0), f64::NEG_INFINITY);
        assert!(UtilityFunction::cara(1.0).unwrap().eval(0.0).is_finite());
        assert!(UtilityFunction::crra(0.5).unwrap().eval(0.0).is_finite());
    }

    #[test]
    fn risk_aversion_closed_forms() {
        let cara = UtilityFunction::cara(3.0).unwrap();
        let crra = UtilityFunction::crra(2.5).unwrap();
        for y in [0.3, 1.0, 4.0] {
            assert!((cara.risk_aversion(y) - 3.0).abs() < 1e-15);
            assert!((crra.risk_aversion(y) - 2.5 / y).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for u in all() {
            for y in [0.4, 1.0, 1.7, 3.0] {
                let e = 1e-5;
                let d1 = (u.eval(y + e) - u.eval(y - e)) / (2.0 * e);
                let d2 = (u.derivative(y + e) - u.derivative(y - e)) / (2.0 * e);
                assert!((d1 - u.derivative(y)).abs() < 1e-7 * (1.0 + d1.abs()), "{u:?} {y}");
                assert!(
                    (d2 - u.second_derivative(y)).abs() < 1e-6 * (1.0 + d2.abs()),
                    "{u:?} {y}"
                );
                let ra = -u.second_derivative(y) / u.derivative(y);
                assert!((ra - u.risk_aversion(y)).abs() < 1e-12 * (1.0 + ra));
            }
        }
    }

    #[test]
    fn strictly_increasing_and_concave() {
        for u in all() {
            let ys: Vec<f64> = (1..60).map(|k| k as f64 * 0.1).collect();
            for w in ys.windows(3) {
                assert!(u.eval(w[1]) > u.eval(w[0]));
                assert!(u.eval(w[1]) >= 0.5 * (u.eval(w[0]) + u.eval(w[2])) - 1e-14);
            }
        }
    }

    #[test]
    fn inverse_roundtrip() {
        for u in all() {
            // far above x0 the CARA value is 1/γ minus a tiny term, which the
            // inverse cannot resolve
            for y in [0.2, 1.0, 2.0] {
                let back = u.inverse(u.eval(y));
                assert!((back - y).abs() < 1e-9 * y, "{u:?} {y} {back}");
            }
        }
    }

    #[test]
    fn crra_one_is_log() {
        let u = UtilityFunction::crra(1.0).unwrap();
        assert_eq!(u.family(), UtilityFamily::Log);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(UtilityFunction::cara(0.0).is_err());
        assert!(UtilityFunction::cara(f64::NAN).is_err());
        assert!(UtilityFunction::cara(MAX_RISK_PARAM * 2.0).is_err());
        assert!(UtilityFunction::new(UtilityFamily::Log, 1.0, -1.0).is_err());
        assert!("quadratic".parse::<UtilityFamily>().is_err());
    }
}

//! Finite-scenario pricing for the one-step Arbitrage Pricing Theory market.
//!
//! A market is a product probability space of independent normalized sources
//! `ε_i` (mean 0, variance 1) together with a shift vector `b`. Strategies are
//! exposures `h`, and the terminal wealth from initial capital `x` is
//! `x + Σ h_i (ε_i − b_i)`. On top of that the crate provides:
//!
//! * [`arbitrage`]: sign conditions, the no-arbitrage cone check, the
//!   quantitative no-arbitrage constant and martingale measures;
//! * [`pricing`]: superreplication prices from the hedging LP and from the
//!   martingale-measure LP;
//! * [`utility`]: normalized utility families and constrained expected-utility
//!   maximization;
//! * [`reservation`]: indifference prices and their convergence to the
//!   superreplication price as risk aversion grows;
//! * [`momentcheck`]: Monte Carlo checks of moment bounds.
//!
//! Everything runs on the dense simplex solver in [`lp`].

pub mod arbitrage;
mod error;
pub mod lp;
pub mod market;
pub mod momentcheck;
pub mod pricing;
pub mod reservation;
pub mod scenario;
pub mod testing;
pub mod utility;

pub use error::{Error, Result};
pub use lp::{Arithmetic, LpOptions};
pub use market::{AptModel, Asset, AssetSubset, ExcessReturns, Portfolio, ShiftVector};
pub use pricing::Claim;
pub use scenario::{ScenarioSpace, SourceMarginal};
pub use utility::{UtilityFamily, UtilityFunction};
pub use arbitrage::MartingaleMeasure;

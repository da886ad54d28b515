//! Fixed markets shared by the benchmarks in `benches/`.

use apt_core::scenario::{build_product_space, gauss_quantize};
use apt_core::{Claim, ScenarioSpace, ShiftVector, SourceMarginal};

/// `n` quantized Gaussian sources with `k` points each and a small shift.
pub fn gaussian_market(n: usize, k: usize) -> (ScenarioSpace, ShiftVector) {
    let m = gauss_quantize(k).expect("k >= 2");
    let space = build_product_space(&vec![m; n]).expect("small product space");
    let b = (0..n).map(|i| 0.1 * (i as f64 + 1.0) / n as f64 - 0.05).collect();
    (space, ShiftVector::new(b).expect("finite"))
}

pub fn rademacher_market(n: usize) -> (ScenarioSpace, ShiftVector) {
    let space = build_product_space(&vec![SourceMarginal::rademacher(); n]).expect("small product space");
    (space, ShiftVector::zeros(n))
}

/// Call on the equally weighted sum, struck at zero.
pub fn basket_call(space: &ScenarioSpace) -> Claim {
    let w = vec![1.0; space.n_sources()];
    Claim::call_on_sum(space, &w, 0.0).expect("finite payoff")
}

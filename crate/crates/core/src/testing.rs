//! Random small markets for property tests, benchmarks and acceptance runs.

use rand::Rng;

use crate::market::ShiftVector;
use crate::pricing::Claim;
use crate::scenario::{build_product_space, ScenarioSpace, SourceMarginal};
use crate::Result;

/// Two-point law with `P(ε = √((1−p)/p)) = p`, `P(ε = −√(p/(1−p))) = 1 − p`.
pub fn two_point(p: f64) -> Result<SourceMarginal> {
    SourceMarginal::new(
        vec![((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt()],
        vec![p, 1.0 - p],
    )
}

pub fn random_two_point<R: Rng + ?Sized>(rng: &mut R) -> SourceMarginal {
    two_point(rng.random_range(0.15..0.85)).expect("two-point law is normalized by construction")
}

/// Three-point law with random support, probabilities solved from the
/// moment equations; supports are redrawn until every weight is at least
/// 0.03.
pub fn random_three_point<R: Rng + ?Sized>(rng: &mut R) -> SourceMarginal {
    loop {
        let x1: f64 = rng.random_range(-2.5..-0.4);
        let x3: f64 = rng.random_range(0.4..2.5);
        let x2: f64 = rng.random_range(x1 + 0.1..x3 - 0.1);
        let xs = [x1, x2, x3];
        // Lagrange form of the Vandermonde solve for moments (1, 0, 1)
        let p: Vec<f64> = (0..3)
            .map(|i| {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                (1.0 + xs[j] * xs[k]) / ((xs[i] - xs[j]) * (xs[i] - xs[k]))
            })
            .collect();
        if p.iter().all(|&q| q >= 0.03) {
            if let Ok(m) = SourceMarginal::new(xs.to_vec(), p) {
                return m;
            }
        }
    }
}

pub fn random_marginal<R: Rng + ?Sized>(rng: &mut R) -> SourceMarginal {
    if rng.random_bool(0.5) {
        random_two_point(rng)
    } else {
        random_three_point(rng)
    }
}

/// `b_i` uniform on the middle `frac` of each support, so both sides keep
/// positive mass.
pub fn interior_shift<R: Rng + ?Sized>(rng: &mut R, marginals: &[SourceMarginal], frac: f64) -> ShiftVector {
    let b = marginals
        .iter()
        .map(|m| {
            let (lo, hi) = (m.min_point(), m.max_point());
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * frac * (hi - lo);
            rng.random_range(mid - half..mid + half)
        })
        .collect();
    ShiftVector::new(b).expect("finite shift")
}

#[derive(Debug, Clone)]
pub struct RandomMarket {
    pub marginals: Vec<SourceMarginal>,
    pub space: ScenarioSpace,
    pub shift: ShiftVector,
}

/// `n_sources` random 2- or 3-point sources with an interior shift.
pub fn random_market<R: Rng + ?Sized>(rng: &mut R, n_sources: usize) -> RandomMarket {
    let marginals: Vec<SourceMarginal> = (0..n_sources).map(|_| random_marginal(rng)).collect();
    let space = build_product_space(&marginals).expect("small product space");
    let shift = interior_shift(rng, &marginals, 0.8);
    RandomMarket {
        marginals,
        space,
        shift,
    }
}

/// A claim of one of three shapes: i.i.d. uniform payoffs, a call on a random
/// combination of sources, or a linear series.
pub fn random_claim<R: Rng + ?Sized>(rng: &mut R, space: &ScenarioSpace) -> Claim {
    let n = space.n_sources();
    let claim = match rng.random_range(0..3) {
        0 => Claim::new((0..space.len()).map(|_| rng.random_range(-1.0..2.0)).collect()),
        1 => {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Claim::call_on_sum(space, &w, rng.random_range(-0.5..0.5))
        }
        _ => {
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Claim::series(space, &c)
        }
    };
    claim.expect("finite payoffs")
}

/// A nonnegative claim (uniform payoffs or a call).
pub fn random_nonneg_claim<R: Rng + ?Sized>(rng: &mut R, space: &ScenarioSpace) -> Claim {
    let n = space.n_sources();
    let claim = if rng.random_bool(0.5) {
        Claim::new((0..space.len()).map(|_| rng.random_range(0.0..1.0)).collect())
    } else {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Claim::call_on_sum(space, &w, rng.random_range(-0.5..0.5))
    };
    claim.expect("finite payoffs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arbitrage::check_signs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_marginals_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let m = random_marginal(&mut rng);
            assert!(m.moment(1).abs() < 1e-12 && (m.moment(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_shifts_pass_sign_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=4 {
            let mk = random_market(&mut rng, n);
            assert!(check_signs(&mk.space, &mk.shift).unwrap().iter().all(|&s| s));
        }
    }
}

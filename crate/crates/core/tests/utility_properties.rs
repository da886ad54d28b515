use apt_core::arbitrage::{quantitative_alpha, AlphaBudget};
use apt_core::market::{second_moment, second_moment_closed_form};
use apt_core::pricing::superreplicate;
use apt_core::reservation::{reservation_price, ReservationOptions};
use apt_core::scenario::gauss_quantize;
use apt_core::testing::{random_market, random_nonneg_claim};
use apt_core::utility::{maximize_utility, SolverOptions, UtilityProblem};
use apt_core::{AssetSubset, LpOptions, UtilityFamily, UtilityFunction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(i: usize) -> UtilityFamily {
    [UtilityFamily::Cara, UtilityFamily::Crra, UtilityFamily::Log][i % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn isometry_on_product_spaces(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_market(&mut rng, n);
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let direct = second_moment(&h, &m.shift, &m.space).unwrap();
        let closed = second_moment_closed_form(&h, &m.shift);
        prop_assert!((direct - closed).abs() <= 1e-10 * (1.0 + closed));
    }

    #[test]
    fn quantized_gaussians_are_normalized(k in 2usize..=24) {
        let q = gauss_quantize(k).unwrap();
        prop_assert!(q.moment(1).abs() <= 1e-10);
        prop_assert!((q.moment(2) - 1.0).abs() <= 1e-10);
        prop_assert!(q.probs().iter().all(|&p| p > 0.0));
    }

    /// Iterates of the barrier method keep nonnegative wealth, so they obey
    /// the strategy bound and the bound on the positive part of utility.
    #[test]
    fn iterates_respect_alpha_bounds(seed in any::<u64>(), n in 1usize..=3, fam in 0usize..3, r in 0.5f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_market(&mut rng, n);
        let all = AssetSubset::all(n);
        let lp = LpOptions::default();
        let alpha = quantitative_alpha(&m.space, &m.shift, &all, &AlphaBudget::default(), &lp).unwrap();
        prop_assume!(alpha.certified);
        let g = random_nonneg_claim(&mut rng, &m.space);
        let pi = superreplicate(&m.space, &m.shift, &g, &all, &lp).unwrap().price;
        let x = pi + rng.random_range(0.05..1.5);
        let u = UtilityFunction::new(family(fam), r, 1.0).unwrap();
        let opts = SolverOptions { record_iterates: true, ..SolverOptions::default() };
        let sol = maximize_utility(&m.space, &m.shift, &u, &g, x, &all, &opts).unwrap();
        let a = alpha.lower_bound;
        let ub = x.abs() + x.abs() / a * (1.0 + m.shift.norm_sq()).sqrt();
        for h in &sol.iterates {
            let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm <= x / a + 1e-6, "|h| = {norm}, x/alpha = {}", x / a);
            let v = apt_core::market::portfolio_value(&apt_core::Portfolio::new(h.clone(), x), &m.space, &m.shift).unwrap();
            let eu_plus: f64 = v
                .iter()
                .zip(g.payoff())
                .zip(m.space.probs())
                .map(|((v, g), p)| p * u.eval(v - g).max(0.0))
                .sum();
            prop_assert!(eu_plus <= ub + 1e-9, "E U+ = {eu_plus} > {ub}");
        }
    }

    #[test]
    fn value_increases_with_wealth(seed in any::<u64>(), n in 1usize..=3, fam in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_market(&mut rng, n);
        let all = AssetSubset::all(n);
        let g = random_nonneg_claim(&mut rng, &m.space);
        let p = UtilityProblem::new(&m.space, &m.shift, &g, &all, &LpOptions::default()).unwrap();
        let u = UtilityFunction::new(family(fam), 2.0, 1.0).unwrap();
        let opts = SolverOptions::default();
        let x0 = p.superhedge_price() + 0.1;
        let lo = p.solve(&u, x0, &opts).unwrap();
        let hi = p.solve(&u, x0 + 0.2, &opts).unwrap();
        prop_assert!(hi.value >= lo.value - 1e-10);
        // the superhedge plus spare cash is feasible, so the optimum beats it
        prop_assert!(lo.value >= u.eval(0.1) - 1e-10);
        let below = p.solve(&u, p.superhedge_price() - 0.05, &opts).unwrap();
        prop_assert!(!below.feasible && below.value == f64::NEG_INFINITY);
    }

    #[test]
    fn reservation_price_is_bracketed(seed in any::<u64>(), n in 1usize..=2, fam in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_market(&mut rng, n);
        let g = random_nonneg_claim(&mut rng, &m.space);
        let u = UtilityFunction::new(family(fam), 1.5, 1.0).unwrap();
        let opts = ReservationOptions::default();
        let r = reservation_price(&m.space, &m.shift, &u, &g, 1.0, &AssetSubset::all(n), &opts).unwrap();
        prop_assert!(r.price >= 0.0);
        prop_assert!(r.price <= r.superhedge_price + opts.tol);
        prop_assert!(r.bracket.1 - r.bracket.0 <= opts.tol);
    }
}

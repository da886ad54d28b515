//! No-arbitrage diagnostics on a finite scenario space.
//!
//! * [`check_signs`]: each source puts mass strictly on both sides of `b_i`.
//! * [`check_aoa`]: the cone `{h : ⟨h, ε − b⟩ ≥ 0 a.s.}` is trivial.
//! * [`quantitative_alpha`]: the largest `α` with `P(⟨h, ε − b⟩ < −α) > α`
//!   for every unit `h`; exact for up to three active sources.
//! * [`find_martingale_measure`]: a strictly positive `q` under which every
//!   active `ε_i` has mean `b_i`.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::lp::{solve_lp, LinearProgram, LpOptions, LpStatus, RowSense, Sense};
use crate::market::{AssetSubset, ExcessReturns, Portfolio, ShiftVector};
use crate::scenario::ScenarioSpace;
use crate::{Error, Result};

/// A witness objective below this counts as zero.
const WITNESS_TOL: f64 = 1e-7;
/// Positivity threshold for the minimum weight of a martingale measure.
const MIN_WEIGHT_TOL: f64 = 1e-12;
/// Exact enumeration stores outcome sets as `u64` masks.
const MAX_EXACT_POINTS: usize = 64;

/// Per-source check that `P(ε_i > b_i) > 0` and `P(ε_i < b_i) > 0`.
pub fn check_signs(space: &ScenarioSpace, shift: &ShiftVector) -> Result<Vec<bool>> {
    if shift.len() != space.n_sources() {
        return Err(Error::dim("shift length", space.n_sources(), shift.len()));
    }
    Ok(space
        .marginals()
        .iter()
        .zip(shift.as_slice())
        .map(|(m, &b)| m.prob_above(b) > 0.0 && m.prob_below(b) > 0.0)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoaCheck {
    pub holds: bool,
    /// Nonzero `h` (over all sources) with `⟨h, ε − b⟩ ≥ 0` in every outcome.
    pub witness: Option<Portfolio>,
}

/// Decides whether the only `h` supported on `subset` with
/// `⟨h, ε − b⟩ ≥ 0` everywhere is `h = 0`, by maximizing and minimizing each
/// coordinate over the cone intersected with the unit box.
pub fn check_aoa(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    subset: &AssetSubset,
    opts: &LpOptions,
) -> Result<AoaCheck> {
    let er = ExcessReturns::new(space, shift, subset)?;
    let k = er.cols();
    for coord in 0..k {
        for sense in [Sense::Maximize, Sense::Minimize] {
            let mut obj = vec![0.0; k];
            obj[coord] = 1.0;
            let mut lp = LinearProgram::new(sense, obj);
            for j in 0..k {
                lp.set_bounds(j, -1.0, 1.0);
            }
            for a in er.iter_rows() {
                lp.add_row(a.iter().map(|v| -v).collect(), RowSense::Le, 0.0);
            }
            let sol = solve_lp(&lp, opts)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Inconsistent(format!(
                    "cone LP over a box reported {:?}",
                    sol.status
                )));
            }
            if sol.objective.abs() > WITNESS_TOL {
                let h = subset.embed(&sol.primal, space.n_sources());
                return Ok(AoaCheck {
                    holds: false,
                    witness: Some(Portfolio::new(h, 0.0)),
                });
            }
        }
    }
    Ok(AoaCheck {
        holds: true,
        witness: None,
    })
}

/// Weights `q_ω` of an equivalent martingale measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleMeasure {
    pub q: Vec<f64>,
    pub min_weight: f64,
}

/// Maximizes the smallest weight `t` over `q ≥ t`, `Σ q = 1`,
/// `Σ q_ω (ε_i(ω) − b_i) = 0`; succeeds iff `t* > 0`.
pub fn find_martingale_measure(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    subset: &AssetSubset,
    opts: &LpOptions,
) -> Result<MartingaleMeasure> {
    let er = ExcessReturns::new(space, shift, subset)?;
    let n_out = er.rows();
    // q = t·1 + s with t, s ≥ 0; variable 0 is t
    let mut obj = vec![0.0; n_out + 1];
    obj[0] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    let mut total = vec![1.0; n_out + 1];
    total[0] = n_out as f64;
    lp.add_row(total, RowSense::Eq, 1.0);
    for i in 0..er.cols() {
        let mut row = Vec::with_capacity(n_out + 1);
        row.push(er.iter_rows().map(|a| a[i]).sum());
        row.extend(er.iter_rows().map(|a| a[i]));
        lp.add_row(row, RowSense::Eq, 0.0);
    }
    let sol = solve_lp(&lp, opts)?;
    match sol.status {
        LpStatus::Optimal => {
            let t = sol.primal[0];
            if t <= MIN_WEIGHT_TOL {
                return Err(Error::NoMartingaleMeasure(format!(
                    "best minimum weight is {t:e}; only boundary measures exist"
                )));
            }
            let q: Vec<f64> = sol.primal[1..].iter().map(|s| t + s).collect();
            Ok(MartingaleMeasure { q, min_weight: t })
        }
        LpStatus::Infeasible => Err(Error::NoMartingaleMeasure(
            "required means lie outside the convex hull of the outcomes".into(),
        )),
        LpStatus::Unbounded => Err(Error::Inconsistent("martingale LP is unbounded".into())),
    }
}

/// `E_Q ⟨h, ε − b⟩` for `h` over all sources.
pub fn verify_zero_cost(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    q: &MartingaleMeasure,
    h: &[f64],
) -> Result<f64> {
    if q.q.len() != space.len() {
        return Err(Error::dim("measure length", space.len(), q.q.len()));
    }
    if h.len() != space.n_sources() || shift.len() != space.n_sources() {
        return Err(Error::dim("strategy length", space.n_sources(), h.len()));
    }
    let b = shift.as_slice();
    Ok(space.weighted_sum(&q.q, |eps| {
        h.iter().zip(eps).zip(b).map(|((h, e), b)| h * (e - b)).sum()
    }))
}

/// Limits for [`quantitative_alpha`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBudget {
    /// Largest active dimension handled by exact enumeration.
    pub max_exact_dim: usize,
    /// Cap on candidate outcome sets examined by the exact method.
    pub max_candidates: usize,
    /// Random directions for the sampled estimate.
    pub directions: usize,
    pub seed: u64,
}

impl Default for AlphaBudget {
    fn default() -> Self {
        Self {
            max_exact_dim: 3,
            max_candidates: 2_000_000,
            directions: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBound {
    /// Every `α` up to this value satisfies the bound for all unit `h`
    /// (only when `certified`).
    pub lower_bound: f64,
    /// Best value found; exact when `certified`.
    pub estimate: f64,
    pub certified: bool,
}

/// The quantitative no-arbitrage constant
/// `α* = sup {α : P(⟨h, ε − b⟩ < −α) > α for every unit h}`.
///
/// For up to three active sources this enumerates all outcome sets cut out by
/// half-spaces and is exact. Otherwise, or when the budget runs out, it
/// samples directions and returns an estimate flagged as uncertified.
pub fn quantitative_alpha(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    subset: &AssetSubset,
    budget: &AlphaBudget,
    opts: &LpOptions,
) -> Result<AlphaBound> {
    if !check_aoa(space, shift, subset, opts)?.holds {
        return Err(Error::Precondition("quantitative alpha requires no arbitrage on the subset".into()));
    }
    let er = ExcessReturns::new(space, shift, subset)?;
    let (points, probs) = merge_points(&er);
    let d = er.cols();
    if d <= budget.max_exact_dim.min(3) && points.len() <= MAX_EXACT_POINTS {
        if let Some(alpha) = exact_alpha(&points, &probs, d, budget.max_candidates) {
            return Ok(AlphaBound {
                lower_bound: alpha * (1.0 - 1e-9),
                estimate: alpha,
                certified: true,
            });
        }
    }
    let est = sampled_alpha(&points, &probs, d, budget.directions, budget.seed);
    Ok(AlphaBound {
        lower_bound: est,
        estimate: est,
        certified: false,
    })
}

/// `sup {α : P(⟨u, a⟩ < −α) > α}` for one direction: the best threshold
/// below some outcome value `v` is `min(−v, P(⟨u, a⟩ ≤ v))`.
pub fn direction_alpha(points: &[Vec<f64>], probs: &[f64], u: &[f64]) -> f64 {
    let mut vals: Vec<(f64, f64)> = points.iter().zip(probs).map(|(a, &p)| (dot(a, u), p)).collect();
    vals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best = 0f64;
    let mut cum = 0.0;
    let mut i = 0;
    while i < vals.len() {
        let v = vals[i].0;
        while i < vals.len() && vals[i].0 == v {
            cum += vals[i].1;
            i += 1;
        }
        best = best.max((-v).min(cum));
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn merge_points(er: &ExcessReturns) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    for (a, &p) in er.iter_rows().zip(er.probs()) {
        match points.iter().position(|q| q.as_slice() == a) {
            Some(k) => probs[k] += p,
            None => {
                points.push(a.to_vec());
                probs.push(p);
            }
        }
    }
    (points, probs)
}

fn sampled_alpha(points: &[Vec<f64>], probs: &[f64], d: usize, n_dirs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; d];
            u[k] = s;
            best = best.min(direction_alpha(points, probs, &u));
        }
    }
    for _ in 0..n_dirs {
        let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dot(&u, &u).sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        best = best.min(direction_alpha(points, probs, &u));
    }
    best
}

/// `α* = min_C max(P(Cᶜ), r(C))` over sets `C = {ω : ⟨u, a_ω⟩ ≤ θ}`, where
/// `r(C) = min_{|u|=1} max_{ω∈C} ⟨u, a_ω⟩` is the inradius of `conv(C)`
/// about the origin (or `≤ 0` if the origin is not interior).
fn exact_alpha(points: &[Vec<f64>], probs: &[f64], d: usize, max_candidates: usize) -> Option<f64> {
    let sets = candidate_sets(points, d, max_candidates)?;
    let full: u64 = if points.len() == 64 { u64::MAX } else { (1u64 << points.len()) - 1 };
    let mass = |mask: u64| -> f64 {
        (0..points.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| probs[i])
            .sum()
    };
    let mut sets: Vec<(f64, u64)> = sets.into_iter().map(|s| (mass(full & !s), s)).collect();
    sets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = 1.0f64;
    for (p_out, set) in sets {
        if p_out >= best {
            break;
        }
        let members: Vec<&[f64]> = (0..points.len())
            .filter(|&i| set >> i & 1 == 1)
            .map(|i| points[i].as_slice())
            .collect();
        let r = inradius(&members, d);
        best = best.min(p_out.max(r));
    }
    Some(best)
}

/// Distance from the origin to the boundary of `conv(pts)` if the origin is
/// interior, else a nonpositive value.
fn inradius(pts: &[&[f64]], d: usize) -> f64 {
    if pts.len() <= d {
        return 0.0;
    }
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut best = f64::INFINITY;
    let mut found = false;
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        if let Some((n, c)) = hyperplane(&idx.iter().map(|&i| pts[i]).collect::<Vec<_>>(), d) {
            let side: Vec<f64> = pts.iter().map(|p| dot(&n, p) - c).collect();
            let above = side.iter().any(|&s| s > tol);
            let below = side.iter().any(|&s| s < -tol);
            if above != below {
                // supporting hyperplane; orient so that pts lie on n·a ≤ c
                let off = if above { -c } else { c };
                found = true;
                best = best.min(off);
            }
        }
        // next d-combination
        let mut k = d;
        loop {
            if k == 0 {
                return if found { best } else { 0.0 };
            }
            k -= 1;
            if idx[k] < pts.len() - d + k {
                idx[k] += 1;
                for j in k + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Unit normal `n` and offset `c` of the affine hyperplane `n·a = c` through
/// `d` points, or `None` if they are affinely dependent.
fn hyperplane(p: &[&[f64]], d: usize) -> Option<(Vec<f64>, f64)> {
    let n = match d {
        1 => vec![1.0],
        2 => {
            let e = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
            vec![-e[1], e[0]]
        }
        3 => {
            let e1: Vec<f64> = (0..3).map(|i| p[1][i] - p[0][i]).collect();
            let e2: Vec<f64> = (0..3).map(|i| p[2][i] - p[0][i]).collect();
            cross(&e1, &e2).to_vec()
        }
        _ => return None,
    };
    let norm = dot(&n, &n).sqrt();
    let scale = p.iter().flat_map(|q| q.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    if norm <= 1e-12 * scale.powi(d as i32 - 1).max(1.0) {
        return None;
    }
    let n: Vec<f64> = n.iter().map(|v| v / norm).collect();
    let c = dot(&n, p[0]);
    Some((n, c))
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = dot(v, v).sqrt();
    (n > 1e-14).then(|| v.iter().map(|x| x / n).collect())
}

/// All nonempty sets `{ω : ⟨u, a_ω⟩ ≤ θ}` as bitmasks: prefixes of the
/// orderings of the points along every cell of the arrangement of great
/// circles `⟨u, a_i − a_j⟩ = 0`.
fn candidate_sets(points: &[Vec<f64>], d: usize, cap: usize) -> Option<HashSet<u64>> {
    let k = points.len();
    let mut sets = HashSet::new();
    let add_order = |keys: &dyn Fn(&[f64]) -> (f64, f64), sets: &mut HashSet<u64>| -> bool {
        let mut order: Vec<(f64, f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let (p, s) = keys(a);
                (p, s, i)
            })
            .collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut mask = 0u64;
        for &(_, _, i) in &order {
            mask |= 1u64 << i;
            sets.insert(mask);
        }
        sets.len() <= cap
    };
    // normals of the arrangement, deduplicated up to sign
    let mut normals: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let diff: Vec<f64> = (0..d).map(|c| points[i][c] - points[j][c]).collect();
            if let Some(n) = normalize(&diff) {
                let dup = normals.iter().any(|m| (dot(m, &n).abs() - 1.0).abs() < 1e-12);
                if !dup {
                    normals.push(n);
                }
            }
        }
    }
    match d {
        1 => {
            for s in [1.0, -1.0] {
                add_order(&|a: &[f64]| (s * a[0], 0.0), &mut sets);
            }
        }
        2 => {
            for n in &normals {
                for s in [1.0, -1.0] {
                    let v = [-s * n[1], s * n[0]];
                    for w in [[n[0], n[1]], [-n[0], -n[1]]] {
                        let ok = add_order(&|a: &[f64]| (dot(&v, a), dot(&w, a)), &mut sets);
                        if !ok {
                            return None;
                        }
                    }
                }
            }
            if normals.is_empty() {
                add_order(&|a: &[f64]| (a[0], a[1]), &mut sets);
            }
        }
        3 => {
            for n in &normals {
                for s in [1.0, -1.0] {
                    let v: Vec<f64> = n.iter().map(|x| s * x).collect();
                    add_order(&|a: &[f64]| (dot(&v, a), 0.0), &mut sets);
                }
            }
            let mut seen_vertices: Vec<[f64; 3]> = Vec::new();
            for i in 0..normals.len() {
                for j in i + 1..normals.len() {
                    let Some(c) = normalize(&cross(&normals[i], &normals[j])) else {
                        continue;
                    };
                    for s in [1.0, -1.0] {
                        let v = [s * c[0], s * c[1], s * c[2]];
                        if seen_vertices
                            .iter()
                            .any(|w| (w[0] - v[0]).abs() + (w[1] - v[1]).abs() + (w[2] - v[2]).abs() < 1e-10)
                        {
                            continue;
                        }
                        seen_vertices.push(v);
                        for w in sector_directions(&v, &normals) {
                            // ties along v are broken by the sector direction w
                            let ok = add_order(&|a: &[f64]| (dot(&v, a), dot(&w, a)), &mut sets);
                            if !ok {
                                return None;
                            }
                        }
                    }
                }
            }
        }
        _ => return None,
    }
    Some(sets)
}

/// Directions in the tangent plane at `v` that bisect consecutive tangents of
/// the arrangement circles through `v`.
fn sector_directions(v: &[f64; 3], normals: &[Vec<f64>]) -> Vec<Vec<f64>> {
    // orthonormal basis of the tangent plane
    let seed = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(&cross(v, &seed)).expect("seed not parallel to v");
    let e2 = cross(v, &e1);
    let mut angles: Vec<f64> = Vec::new();
    for n in normals {
        if dot(n, v).abs() > 1e-9 {
            continue;
        }
        let t = cross(n, v);
        let th = dot(&t, &e2).atan2(dot(&t, &e1));
        angles.push(th);
        angles.push(if th > 0.0 { th - std::f64::consts::PI } else { th + std::f64::consts::PI });
    }
    angles.sort_by(|a, b| a.total_cmp(b));
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut dirs = Vec::new();
    for (idx, &a) in angles.iter().enumerate() {
        let b = if idx + 1 < angles.len() {
            angles[idx + 1]
        } else {
            angles[0] + 2.0 * std::f64::consts::PI
        };
        let m = 0.5 * (a + b);
        dirs.push((0..3).map(|c| m.cos() * e1[c] + m.sin() * e2[c]).collect());
    }
    dirs
}

/// Everything [`arbitrage_report`] gathers about one market.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageReport {
    pub aoa_holds: bool,
    pub witness: Option<Portfolio>,
    pub sign_condition_ok: Vec<bool>,
    pub alpha_lower_bound: f64,
    pub alpha_estimate: f64,
    pub alpha_certified: bool,
}

pub fn arbitrage_report(
    space: &ScenarioSpace,
    shift: &ShiftVector,
    subset: &AssetSubset,
    budget: &AlphaBudget,
    opts: &LpOptions,
) -> Result<ArbitrageReport> {
    let signs = check_signs(space, shift)?;
    let aoa = check_aoa(space, shift, subset, opts)?;
    let (lb, est, cert) = if aoa.holds {
        let a = quantitative_alpha(space, shift, subset, budget, opts)?;
        (a.lower_bound, a.estimate, a.certified)
    } else {
        (0.0, 0.0, false)
    };
    Ok(ArbitrageReport {
        aoa_holds: aoa.holds,
        witness: aoa.witness,
        sign_condition_ok: signs,
        alpha_lower_bound: lb,
        alpha_estimate: est,
        alpha_certified: cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_product_space, gauss_quantize, SourceMarginal};

    fn rade(n: usize) -> ScenarioSpace {
        build_product_space(&vec![SourceMarginal::rademacher(); n]).unwrap()
    }

    fn opts() -> LpOptions {
        LpOptions::default()
    }

    #[test]
    fn signs() {
        let s = rade(1);
        assert_eq!(check_signs(&s, &ShiftVector::zeros(1)).unwrap(), vec![true]);
        assert_eq!(check_signs(&s, &ShiftVector::new(vec![1.5]).unwrap()).unwrap(), vec![false]);
        let g = build_product_space(&[gauss_quantize(3).unwrap()]).unwrap();
        assert_eq!(check_signs(&g, &ShiftVector::new(vec![0.2]).unwrap()).unwrap(), vec![true]);
        // b on a support point: mass on one side only
        assert_eq!(check_signs(&s, &ShiftVector::new(vec![1.0]).unwrap()).unwrap(), vec![false]);
    }

    #[test]
    fn aoa_on_symmetric_market() {
        let s = rade(3);
        for sub in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            let sub = AssetSubset::new(sub, 3).unwrap();
            let r = check_aoa(&s, &ShiftVector::zeros(3), &sub, &opts()).unwrap();
            assert!(r.holds && r.witness.is_none());
        }
    }

    #[test]
    fn aoa_fails_when_shift_below_support() {
        // two-point source on {0.5, -2}; shifting b below the support makes ε − b > 0
        let p: f64 = 0.8;
        let m = SourceMarginal::new(
            vec![((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt()],
            vec![p, 1.0 - p],
        )
        .unwrap();
        assert!((m.points()[0] - 0.5).abs() < 1e-15 && (m.points()[1] + 2.0).abs() < 1e-15);
        let s = build_product_space(&[m]).unwrap();
        let b = ShiftVector::new(vec![-2.5]).unwrap();
        let r = check_aoa(&s, &b, &AssetSubset::all(1), &opts()).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!((w.h[0] - 1.0).abs() < 1e-12);
        let er = ExcessReturns::new(&s, &b, &AssetSubset::all(1)).unwrap();
        assert!(er.gains(&w.h).iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn witness_in_two_dimensions() {
        // an arbitrage only along (1, -1)
        let s = rade(2);
        let b = ShiftVector::new(vec![-1.0, 1.0]).unwrap();
        let r = check_aoa(&s, &b, &AssetSubset::all(2), &opts()).unwrap();
        assert!(!r.holds);
        let h = r.witness.unwrap().h;
        assert!(h.iter().any(|v| v.abs() > 1e-9));
        let er = ExcessReturns::new(&s, &b, &AssetSubset::all(2)).unwrap();
        assert!(er.gains(&h).iter().all(|&g| g >= -1e-12));
    }

    #[test]
    fn martingale_measure_for_symmetric_space() {
        let s = rade(2);
        let q = find_martingale_measure(&s, &ShiftVector::zeros(2), &AssetSubset::all(2), &opts()).unwrap();
        assert!(q.min_weight >= 0.25 - 1e-12);
        assert!((q.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn martingale_measure_infeasible_outside_hull() {
        let s = rade(1);
        let e = find_martingale_measure(&s, &ShiftVector::new(vec![2.0]).unwrap(), &AssetSubset::all(1), &opts());
        assert_eq!(e.unwrap_err().kind(), "infeasible");
        // boundary: only the point mass at +1 has mean 1
        let e = find_martingale_measure(&s, &ShiftVector::new(vec![1.0]).unwrap(), &AssetSubset::all(1), &opts());
        assert_eq!(e.unwrap_err().kind(), "infeasible");
    }

    #[test]
    fn tilted_measure_satisfies_moment_equations() {
        let s = rade(2);
        let b = ShiftVector::new(vec![0.5, 0.0]).unwrap();
        let q = find_martingale_measure(&s, &b, &AssetSubset::all(2), &opts()).unwrap();
        assert!(q.q.iter().all(|&w| w > 0.0));
        let m1 = s.weighted_sum(&q.q, |e| e[0]);
        let m2 = s.weighted_sum(&q.q, |e| e[1]);
        assert!((m1 - 0.5).abs() < 1e-9 && m2.abs() < 1e-9);
        // the product tilt (3/4, 1/4) x (1/2, 1/2) also solves the system
        let tilt: Vec<f64> = s
            .outcomes()
            .map(|(_, e)| (if e[0] > 0.0 { 0.75 } else { 0.25 }) * 0.5)
            .collect();
        let mm = MartingaleMeasure { q: tilt, min_weight: 0.125 };
        assert!(verify_zero_cost(&s, &b, &mm, &[1.0, 0.0]).unwrap().abs() < 1e-15);
        assert!(verify_zero_cost(&s, &b, &mm, &[0.0, 1.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn zero_cost_under_martingale_measure() {
        let s = rade(3);
        let b = ShiftVector::new(vec![0.2, -0.3, 0.1]).unwrap();
        let q = find_martingale_measure(&s, &b, &AssetSubset::all(3), &opts()).unwrap();
        assert_eq!(verify_zero_cost(&s, &b, &q, &[0.0; 3]).unwrap(), 0.0);
        for h in [[1.0, 0.0, 0.0], [0.3, -2.0, 5.0]] {
            assert!(verify_zero_cost(&s, &b, &q, &h).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn alpha_single_rademacher() {
        let s = rade(1);
        let a = quantitative_alpha(&s, &ShiftVector::zeros(1), &AssetSubset::all(1), &AlphaBudget::default(), &opts())
            .unwrap();
        assert!(a.certified);
        assert!((a.estimate - 0.5).abs() < 1e-12);
        assert!(a.lower_bound < 0.5);
    }

    #[test]
    fn alpha_two_rademacher() {
        let s = rade(2);
        let a = quantitative_alpha(&s, &ShiftVector::zeros(2), &AssetSubset::all(2), &AlphaBudget::default(), &opts())
            .unwrap();
        assert!(a.certified);
        assert!((a.estimate - 0.25).abs() < 1e-12, "{}", a.estimate);
        // the worst direction from the diagonal
        let pts = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let u = [std::f64::consts::FRAC_1_SQRT_2; 2];
        assert!((direction_alpha(&pts, &[0.25; 4], &u) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn alpha_three_gaussian_quantized_sources() {
        let m = gauss_quantize(3).unwrap();
        let s = build_product_space(&vec![m; 3]).unwrap();
        let b = ShiftVector::new(vec![0.1, -0.2, 0.05]).unwrap();
        let sub = AssetSubset::all(3);
        let a = quantitative_alpha(&s, &b, &sub, &AlphaBudget::default(), &opts()).unwrap();
        assert!(a.certified);
        assert!(a.estimate > 0.0 && a.estimate < 1.0);
        // sampling can only overestimate the infimum over directions
        let h = quantitative_alpha(
            &s,
            &b,
            &sub,
            &AlphaBudget {
                max_exact_dim: 0,
                directions: 50_000,
                ..AlphaBudget::default()
            },
            &opts(),
        )
        .unwrap();
        assert!(!h.certified);
        assert!(h.estimate >= a.estimate - 1e-12, "{} < {}", h.estimate, a.estimate);
        assert!(h.estimate - a.estimate < 0.05);
    }

    #[test]
    fn alpha_requires_no_arbitrage() {
        let s = rade(1);
        let e = quantitative_alpha(
            &s,
            &ShiftVector::new(vec![-1.5]).unwrap(),
            &AssetSubset::all(1),
            &AlphaBudget::default(),
            &opts(),
        );
        assert_eq!(e.unwrap_err().kind(), "precondition");
    }

    #[test]
    fn heuristic_above_three_sources() {
        let s = rade(4);
        let a = quantitative_alpha(&s, &ShiftVector::zeros(4), &AssetSubset::all(4), &AlphaBudget::default(), &opts())
            .unwrap();
        assert!(!a.certified);
        assert!(a.estimate > 0.0 && a.estimate <= 0.5);
    }

    #[test]
    fn report_combines_checks() {
        let s = rade(2);
        let r = arbitrage_report(&s, &ShiftVector::zeros(2), &AssetSubset::all(2), &AlphaBudget::default(), &opts())
            .unwrap();
        assert!(r.aoa_holds && r.alpha_certified);
        assert_eq!(r.sign_condition_ok, vec![true, true]);
        let r = arbitrage_report(
            &s,
            &ShiftVector::new(vec![-1.0, 0.0]).unwrap(),
            &AssetSubset::all(2),
            &AlphaBudget::default(),
            &opts(),
        )
        .unwrap();
        assert!(!r.aoa_holds && r.witness.is_some());
        assert_eq!(r.sign_condition_ok, vec![false, true]);
    }
}

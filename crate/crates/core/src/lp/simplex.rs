//! Two-phase revised simplex over a dense explicit basis inverse.
//!
//! Works on `min c·x, A x = b, x ≥ 0` with `b ≥ 0`. Rows may name a
//! starting basic column (a slack with coefficient +1); the remaining rows get
//! artificial columns. Entering and leaving variables follow Bland's rule, so
//! the method terminates in exact arithmetic.

use super::scalar::LpScalar;
use super::LpError;

pub(crate) struct StandardForm<T> {
    pub m: usize,
    pub n: usize,
    /// Row-major `m × n`.
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub start: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct SimplexResult<T> {
    pub outcome: Outcome,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub iterations: usize,
}

const REFACTOR_EVERY: usize = 50;

struct Tableau<'a, T> {
    sf: &'a StandardForm<T>,
    /// Column index per row; `j >= n` is the artificial of row `j - n`.
    basis: Vec<usize>,
    binv: Vec<Vec<T>>,
    xb: Vec<T>,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
}

impl<'a, T: LpScalar> Tableau<'a, T> {
    fn column(&self, j: usize) -> Vec<T> {
        let sf = self.sf;
        if j < sf.n {
            (0..sf.m).map(|i| sf.a[i * sf.n + j].clone()).collect()
        } else {
            let mut e = vec![T::zero(); sf.m];
            e[j - sf.n] = T::one();
            e
        }
    }

    fn times_binv(&self, col: &[T]) -> Vec<T> {
        self.binv
            .iter()
            .map(|row| {
                row.iter()
                    .zip(col)
                    .filter(|(_, c)| !c.is_zero())
                    .fold(T::zero(), |acc, (r, c)| acc + r.clone() * c.clone())
            })
            .collect()
    }

    fn duals(&self, cost: &dyn Fn(usize) -> T) -> Vec<T> {
        let m = self.sf.m;
        let cb: Vec<T> = self.basis.iter().map(|&j| cost(j)).collect();
        (0..m)
            .map(|i| {
                (0..m).fold(T::zero(), |acc, k| {
                    if cb[k].is_zero() {
                        acc
                    } else {
                        acc + cb[k].clone() * self.binv[k][i].clone()
                    }
                })
            })
            .collect()
    }

    fn reduced_cost(&self, j: usize, y: &[T], cost: &dyn Fn(usize) -> T) -> T {
        let sf = self.sf;
        if j < sf.n {
            let mut d = cost(j);
            for i in 0..sf.m {
                let a = &sf.a[i * sf.n + j];
                if !a.is_zero() {
                    d = d - y[i].clone() * a.clone();
                }
            }
            d
        } else {
            cost(j) - y[j - sf.n].clone()
        }
    }

    fn pivot(&mut self, r: usize, entering: usize, u: &[T]) {
        let m = self.sf.m;
        let piv = u[r].clone();
        for v in self.binv[r].iter_mut() {
            *v = v.clone() / piv.clone();
        }
        self.xb[r] = self.xb[r].clone() / piv;
        let pivot_row = self.binv[r].clone();
        let xr = self.xb[r].clone();
        for i in 0..m {
            if i == r || u[i].is_zero() {
                continue;
            }
            let f = u[i].clone();
            for (v, p) in self.binv[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v = v.clone() - f.clone() * p.clone();
                }
            }
            self.xb[i] = self.xb[i].clone() - f * xr.clone();
        }
        self.basis[r] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
        if !T::EXACT && self.since_refactor >= REFACTOR_EVERY {
            // A failed refactorization keeps the product-form inverse.
            let _ = self.refactor();
        }
    }

    /// Rebuilds `B⁻¹` by Gauss–Jordan elimination with partial pivoting and
    /// recomputes the basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.sf.m;
        let cols: Vec<Vec<T>> = self.basis.iter().map(|&j| self.column(j)).collect();
        // aug = [B | I]
        let mut aug: Vec<Vec<T>> = (0..m)
            .map(|i| {
                let mut row: Vec<T> = cols.iter().map(|c| c[i].clone()).collect();
                row.extend((0..m).map(|k| if k == i { T::one() } else { T::zero() }));
                row
            })
            .collect();
        for col in 0..m {
            let p = (col..m)
                .max_by(|&a, &b| {
                    aug[a][col]
                        .abs()
                        .partial_cmp(&aug[b][col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("nonempty range");
            if aug[p][col].abs() <= T::pivot_tol() {
                return Err(LpError::NumericalBreakdown("singular basis during refactorization".into()));
            }
            aug.swap(col, p);
            let piv = aug[col][col].clone();
            for v in aug[col].iter_mut() {
                *v = v.clone() / piv.clone();
            }
            let prow = aug[col].clone();
            for (i, row) in aug.iter_mut().enumerate() {
                if i == col || row[col].is_zero() {
                    continue;
                }
                let f = row[col].clone();
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v = v.clone() - f.clone() * p.clone();
                }
            }
        }
        self.binv = aug.into_iter().map(|row| row[m..].to_vec()).collect();
        self.xb = self.times_binv(&self.sf.b);
        self.since_refactor = 0;
        Ok(())
    }

    /// Runs simplex iterations for the given cost until optimality or
    /// unboundedness.
    fn run(&mut self, cost: &dyn Fn(usize) -> T, eligible: &dyn Fn(usize) -> bool) -> Result<Outcome, LpError> {
        let total_cols = self.sf.n + self.sf.m;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let y = self.duals(cost);
            let neg_tol = -T::opt_tol();
            let mut in_basis = vec![false; total_cols];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let entering = (0..total_cols)
                .filter(|&j| !in_basis[j] && eligible(j))
                .find(|&j| self.reduced_cost(j, &y, cost) < neg_tol);
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let u = self.times_binv(&self.column(q));
            let tol = T::pivot_tol();
            let mut leave: Option<(usize, T)> = None;
            for (i, ui) in u.iter().enumerate() {
                if *ui <= tol {
                    continue;
                }
                let xi = if self.xb[i] < T::zero() { T::zero() } else { self.xb[i].clone() };
                let ratio = xi / ui.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let better = if T::EXACT {
                            ratio < best || (ratio == best && self.basis[i] < self.basis[r])
                        } else {
                            let slack = T::from_f64(1e-12) * (T::one() + best.abs());
                            ratio.clone() < best.clone() - slack.clone()
                                || ((ratio.clone() - best.clone()).abs() <= slack
                                    && self.basis[i] < self.basis[r])
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, q, &u);
        }
    }
}

pub(crate) fn solve<T: LpScalar>(sf: &StandardForm<T>, max_iterations: usize) -> Result<SimplexResult<T>, LpError> {
    let (m, n) = (sf.m, sf.n);
    let basis: Vec<usize> = (0..m).map(|i| sf.start[i].unwrap_or(n + i)).collect();
    let binv: Vec<Vec<T>> = (0..m)
        .map(|i| (0..m).map(|k| if k == i { T::one() } else { T::zero() }).collect())
        .collect();
    let mut tab = Tableau {
        sf,
        basis,
        binv,
        xb: sf.b.clone(),
        iterations: 0,
        since_refactor: 0,
        max_iterations,
    };
    let needs_phase_one = tab.basis.iter().any(|&j| j >= n);
    if needs_phase_one {
        let artificial: Vec<bool> = (0..m).map(|i| sf.start[i].is_none()).collect();
        let phase_one_cost = |j: usize| if j >= n { T::one() } else { T::zero() };
        let eligible = |j: usize| j < n || artificial[j - n];
        match tab.run(&phase_one_cost, &eligible)? {
            Outcome::Optimal => {}
            _ => return Err(LpError::NumericalBreakdown("phase one reported unbounded".into())),
        }
        if !T::EXACT {
            tab.refactor()?;
        }
        let infeas = tab
            .basis
            .iter()
            .zip(&tab.xb)
            .filter(|(&j, _)| j >= n)
            .fold(T::zero(), |acc, (_, v)| acc + v.clone());
        let scale = sf.b.iter().fold(T::one(), |acc, v| if v.abs() > acc { v.abs() } else { acc });
        if infeas > T::feas_tol() * scale {
            return Ok(SimplexResult {
                outcome: Outcome::Infeasible,
                x: vec![T::zero(); n],
                y: vec![T::zero(); m],
                iterations: tab.iterations,
            });
        }
        // Drive remaining artificials out of the basis with degenerate pivots.
        for r in 0..m {
            if tab.basis[r] < n {
                continue;
            }
            let in_basis: Vec<usize> = tab.basis.clone();
            let candidate = (0..n).filter(|j| !in_basis.contains(j)).find_map(|j| {
                let u = tab.times_binv(&tab.column(j));
                let big = if T::EXACT { !u[r].is_zero() } else { u[r].abs() > T::from_f64(1e-7) };
                big.then_some((j, u))
            });
            if let Some((j, u)) = candidate {
                tab.pivot(r, j, &u);
            }
            // otherwise the row is redundant; its artificial stays basic at zero
        }
    }
    let cost = |j: usize| if j < n { sf.c[j].clone() } else { T::zero() };
    let eligible = |j: usize| j < n;
    let outcome = tab.run(&cost, &eligible)?;
    if !T::EXACT {
        tab.refactor()?;
    }
    let mut x = vec![T::zero(); n];
    for (&j, v) in tab.basis.iter().zip(&tab.xb) {
        if j < n {
            x[j] = v.clone();
        }
    }
    let y = tab.duals(&cost);
    Ok(SimplexResult {
        outcome,
        x,
        y,
        iterations: tab.iterations,
    })
}

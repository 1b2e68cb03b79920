//! Dense two-phase primal simplex and the LP relaxation of the winner
//! determination problem.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::AuctionInstance;
use crate::{Error, Result};

/// Feasibility and optimality tolerance.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// One shadow price per constraint row (bound rows excluded).
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, vars: usize, rows: usize, pivots: usize) -> Self {
        LpSolution { status, primal: vec![0.0; vars], objective: 0.0, duals: vec![0.0; rows], pivots }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// `maximize c·x  s.t.  A x <= b,  0 <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// `None` leaves a variable unbounded above.
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    fn check(&self) -> Result<()> {
        let n = self.objective.len();
        if self.rhs.len() != self.constraints.len() {
            return Err(Error::Dimension { expected: self.constraints.len(), found: self.rhs.len() });
        }
        if self.upper.len() != n {
            return Err(Error::Dimension { expected: n, found: self.upper.len() });
        }
        if let Some(row) = self.constraints.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, found: row.len() });
        }
        Ok(())
    }
}

pub fn simplex(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    let rows = lp.constraints.len() + lp.upper.iter().filter(|u| u.is_some()).count();
    simplex_with_limit(lp, 100 * (rows + n) + 1000)
}

pub fn simplex_with_limit(lp: &LinearProgram, max_pivots: usize) -> Result<LpSolution> {
    lp.check()?;
    Ok(Tableau::new(lp).solve(lp, max_pivots))
}

/// Row-major tableau. The last row holds reduced costs, the last column the
/// right-hand side.
struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    structural: usize,
    artificial_start: usize,
    degenerate: usize,
    bland: bool,
    pivots: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.objective.len();
        let mut row_coeffs: Vec<(Vec<(usize, f64)>, f64)> = lp
            .constraints
            .iter()
            .zip(&lp.rhs)
            .map(|(r, &b)| (r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect(), b))
            .collect();
        for (j, u) in lp.upper.iter().enumerate() {
            if let Some(u) = *u {
                row_coeffs.push((vec![(j, 1.0)], u));
            }
        }
        let rows = row_coeffs.len();
        let flipped: Vec<bool> = row_coeffs.iter().map(|(_, b)| *b < 0.0).collect();
        let artificials = flipped.iter().filter(|&&f| f).count();
        let artificial_start = n + rows;
        let cols = artificial_start + artificials;
        let width = cols + 1;
        let mut data = vec![0.0; (rows + 1) * width];
        let mut basis = vec![0; rows];
        let mut next_art = artificial_start;
        for (i, (coeffs, b)) in row_coeffs.iter().enumerate() {
            let sign = if flipped[i] { -1.0 } else { 1.0 };
            let row = &mut data[i * width..(i + 1) * width];
            for &(j, v) in coeffs {
                row[j] = sign * v;
            }
            row[n + i] = sign;
            row[cols] = sign * b;
            if flipped[i] {
                row[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = n + i;
            }
        }
        Tableau {
            rows,
            cols,
            data,
            basis,
            structural: n,
            artificial_start,
            degenerate: 0,
            bland: false,
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    /// Loads reduced costs for objective `cost` (indexed by column).
    fn set_objective(&mut self, cost: &dyn Fn(usize) -> f64) {
        let width = self.cols + 1;
        let obj = self.rows * width;
        for j in 0..=self.cols {
            let mut d = if j < self.cols { -cost(j) } else { 0.0 };
            for i in 0..self.rows {
                let cb = cost(self.basis[i]);
                if cb != 0.0 {
                    d += cb * self.data[i * width + j];
                }
            }
            self.data[obj + j] = d;
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let width = self.cols + 1;
        let p = self.data[r * width + e];
        let (before, rest) = self.data.split_at_mut(r * width);
        let (prow, after) = rest.split_at_mut(width);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[e] = 1.0;
        for row in before.chunks_exact_mut(width).chain(after.chunks_exact_mut(width)) {
            let f = row[e];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[e] = 0.0;
            }
        }
        self.basis[r] = e;
        self.pivots += 1;
    }

    /// Runs pivots over columns `< allowed`. `Ok(true)` at optimum,
    /// `Ok(false)` when unbounded, `Err(())` on the pivot limit.
    fn optimize(&mut self, allowed: usize, max_pivots: usize) -> core::result::Result<bool, ()> {
        let width = self.cols + 1;
        let obj = self.rows * width;
        let threshold = 5 * (self.rows + self.cols);
        loop {
            let mut entering = None;
            let mut best = -TOL;
            for j in 0..allowed {
                let d = self.data[obj + j];
                if d < best {
                    entering = Some(j);
                    if self.bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = entering else { return Ok(true) };
            if self.pivots >= max_pivots {
                return Err(());
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            for i in 0..self.rows {
                let a = self.data[i * width + e];
                if a <= TOL {
                    continue;
                }
                let ratio = self.data[i * width + self.cols].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio, a)),
                    Some((li, lr, la)) => {
                        if ratio < lr - 1e-12 {
                            Some((i, ratio, a))
                        } else if ratio <= lr + 1e-12 {
                            let better = if self.bland { self.basis[i] < self.basis[li] } else { a > la };
                            if better { Some((i, ratio, a)) } else { Some((li, lr, la)) }
                        } else {
                            Some((li, lr, la))
                        }
                    }
                };
            }
            let Some((r, ratio, _)) = leave else { return Ok(false) };
            if ratio <= TOL {
                self.degenerate += 1;
                if self.degenerate > threshold {
                    self.bland = true;
                }
            }
            self.pivot(r, e);
        }
    }

    fn solve(mut self, lp: &LinearProgram, max_pivots: usize) -> LpSolution {
        let n = self.structural;
        let m = lp.constraints.len();
        if self.cols > self.artificial_start {
            let start = self.artificial_start;
            self.set_objective(&|j| if j >= start { -1.0 } else { 0.0 });
            match self.optimize(self.cols, max_pivots) {
                Ok(_) => {}
                Err(()) => return LpSolution::failed(LpStatus::IterationLimit, n, m, self.pivots),
            }
            if self.rhs(self.rows) < -1e-7 {
                return LpSolution::failed(LpStatus::Infeasible, n, m, self.pivots);
            }
            // drive zero-level artificials out of the basis
            for i in 0..self.rows {
                if self.basis[i] >= start {
                    if let Some(j) = (0..start).find(|&j| self.at(i, j).abs() > 1e-7) {
                        self.pivot(i, j);
                    }
                }
            }
        }
        let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };
        self.set_objective(&cost);
        match self.optimize(self.artificial_start, max_pivots) {
            Ok(true) => {}
            Ok(false) => return LpSolution::failed(LpStatus::Unbounded, n, m, self.pivots),
            Err(()) => return LpSolution::failed(LpStatus::IterationLimit, n, m, self.pivots),
        }
        let mut primal = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                primal[b] = self.rhs(i).max(0.0);
            }
        }
        // round-off can leave optimal duals a hair below zero
        let duals = (0..m).map(|i| self.at(self.rows, n + i)).map(|y| if y < 0.0 && y > -TOL { 0.0 } else { y }).collect();
        LpSolution {
            status: LpStatus::Optimal,
            primal,
            objective: self.rhs(self.rows),
            duals,
            pivots: self.pivots,
        }
    }
}

/// Relaxation with `0 <= a_m <= 1`; `duals` are the item shadow prices.
pub fn solve_lp_relaxation(instance: &AuctionInstance) -> Result<LpSolution> {
    let lp = LinearProgram {
        objective: instance.bids.iter().map(|b| b.price).collect(),
        constraints: (0..instance.num_items())
            .map(|n| instance.bids.iter().map(|b| f64::from(b.demand[n])).collect())
            .collect(),
        rhs: instance.items.iter().map(|i| f64::from(i.units)).collect(),
        upper: vec![Some(1.0); instance.num_bids()],
    };
    let mut sol = simplex(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Lp(sol.status));
    }
    for a in &mut sol.primal {
        *a = a.clamp(0.0, 1.0);
    }
    Ok(sol)
}

//! Exact winner determination: exhaustive enumeration for tiny instances and
//! a depth-first branch-and-bound with LP-relaxation bounds.

use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::heuristics::{density_order, greedy_density};
use crate::lp::{simplex, LinearProgram};
use crate::model::{evaluate_allocation, Allocation, AuctionInstance};
use crate::{Error, Result, REVENUE_TOL};

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 25;

/// Time source for time-limited searches.
pub trait Clock {
    fn elapsed(&self) -> Duration;
}

/// A clock that never advances; searches run to completion.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed(&self) -> Duration {
        Duration::ZERO
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub allocation: Allocation,
    pub revenue: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

/// Enumerates every allocation. Among equal revenues the lexicographically
/// smallest decision vector wins.
pub fn brute_force(instance: &AuctionInstance) -> Result<ExactResult> {
    let m = instance.num_bids();
    if m > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard { bids: m, limit: BRUTE_FORCE_LIMIT });
    }
    struct Enum<'a> {
        inst: &'a AuctionInstance,
        left: Vec<u32>,
        current: Vec<bool>,
        revenue: f64,
        best: Vec<bool>,
        best_revenue: f64,
        leaves: u64,
    }
    impl Enum<'_> {
        // 0 before 1 at every position visits vectors in lexicographic order
        fn walk(&mut self, depth: usize) {
            if depth == self.current.len() {
                self.leaves += 1;
                if self.revenue > self.best_revenue + REVENUE_TOL {
                    self.best_revenue = self.revenue;
                    self.best.copy_from_slice(&self.current);
                }
                return;
            }
            self.walk(depth + 1);
            let bid = &self.inst.bids[depth];
            if bid.fits(&self.left) {
                for (l, &d) in self.left.iter_mut().zip(&bid.demand) {
                    *l -= d;
                }
                self.current[depth] = true;
                self.revenue += bid.price;
                self.walk(depth + 1);
                self.revenue -= bid.price;
                self.current[depth] = false;
                for (l, &d) in self.left.iter_mut().zip(&bid.demand) {
                    *l += d;
                }
            }
        }
    }
    let mut e = Enum {
        inst: instance,
        left: instance.units(),
        current: vec![false; m],
        revenue: 0.0,
        best: vec![false; m],
        best_revenue: 0.0,
        leaves: 0,
    };
    e.walk(0);
    let allocation = Allocation { decisions: e.best };
    let revenue = evaluate_allocation(instance, &allocation)?.revenue;
    Ok(ExactResult { allocation, revenue, proven_optimal: true, nodes_explored: e.leaves, elapsed: Duration::ZERO })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// LP relaxation of the residual subproblem.
    Lp,
    /// Sum of the prices of the remaining bids that still fit.
    PriceSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    pub time_limit: Duration,
    pub bound: BoundKind,
    /// The LP bound is computed at depths divisible by this stride.
    pub lp_stride: usize,
    pub node_limit: Option<u64>,
}

impl BnbConfig {
    pub fn with_time_limit(time_limit: Duration) -> Self {
        BnbConfig { time_limit, bound: BoundKind::Lp, lp_stride: 1, node_limit: None }
    }
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self::with_time_limit(Duration::MAX)
    }
}

struct Search<'a, C: Clock + ?Sized> {
    inst: &'a AuctionInstance,
    cfg: &'a BnbConfig,
    clock: &'a C,
    order: Vec<usize>,
    left: Vec<u32>,
    current: Vec<bool>,
    revenue: f64,
    best: Vec<bool>,
    best_revenue: f64,
    nodes: u64,
    aborted: bool,
}

impl<C: Clock + ?Sized> Search<'_, C> {
    fn out_of_budget(&self) -> bool {
        self.clock.elapsed() >= self.cfg.time_limit || self.cfg.node_limit.is_some_and(|l| self.nodes >= l)
    }

    fn record(&mut self, extra: &[usize]) {
        let total = self.revenue + extra.iter().map(|&m| self.inst.bids[m].price).sum::<f64>();
        if total > self.best_revenue + REVENUE_TOL {
            self.best_revenue = total;
            self.best.copy_from_slice(&self.current);
            for &m in extra {
                self.best[m] = true;
            }
        }
    }

    fn lp_bound(&self, rest: &[usize]) -> Option<f64> {
        let bids = &self.inst.bids;
        let rows: Vec<usize> = (0..self.left.len())
            .filter(|&n| rest.iter().map(|&m| bids[m].demand[n]).sum::<u32>() > self.left[n])
            .collect();
        let lp = LinearProgram {
            objective: rest.iter().map(|&m| bids[m].price).collect(),
            constraints: rows.iter().map(|&n| rest.iter().map(|&m| f64::from(bids[m].demand[n])).collect()).collect(),
            rhs: rows.iter().map(|&n| f64::from(self.left[n])).collect(),
            upper: vec![Some(1.0); rest.len()],
        };
        simplex(&lp).ok().filter(|s| s.is_optimal()).map(|s| s.objective)
    }

    fn dfs(&mut self, depth: usize) {
        if self.aborted {
            return;
        }
        if self.out_of_budget() {
            self.aborted = true;
            return;
        }
        self.nodes += 1;
        let rest: Vec<usize> =
            self.order[depth..].iter().copied().filter(|&m| self.inst.bids[m].fits(&self.left)).collect();
        let jointly_fit = (0..self.left.len())
            .all(|n| rest.iter().map(|&m| self.inst.bids[m].demand[n]).sum::<u32>() <= self.left[n]);
        if jointly_fit {
            self.record(&rest);
            return;
        }
        let mut bound: f64 = rest.iter().map(|&m| self.inst.bids[m].price).sum();
        if self.cfg.bound == BoundKind::Lp && depth % self.cfg.lp_stride.max(1) == 0 {
            if let Some(lp) = self.lp_bound(&rest) {
                bound = bound.min(lp);
            }
        }
        if self.revenue + bound <= self.best_revenue + REVENUE_TOL {
            return;
        }
        // the next bid to decide, skipping bids that no longer fit
        let Some(pos) = (depth..self.order.len()).find(|&d| self.inst.bids[self.order[d]].fits(&self.left)) else {
            return;
        };
        let m = self.order[pos];
        let bid = &self.inst.bids[m];
        for (l, &d) in self.left.iter_mut().zip(&bid.demand) {
            *l -= d;
        }
        self.current[m] = true;
        self.revenue += bid.price;
        self.dfs(pos + 1);
        let bid = &self.inst.bids[m];
        self.revenue -= bid.price;
        self.current[m] = false;
        for (l, &d) in self.left.iter_mut().zip(&bid.demand) {
            *l += d;
        }
        self.dfs(pos + 1);
    }
}

/// Depth-first branch-and-bound over bids in price-density order, accept
/// branch first, seeded with the density greedy. A search cut short by the
/// time or node limit returns its incumbent with `proven_optimal == false`.
pub fn branch_and_bound<C: Clock + ?Sized>(instance: &AuctionInstance, cfg: &BnbConfig, clock: &C) -> ExactResult {
    let m = instance.num_bids();
    let greedy = greedy_density(instance);
    let greedy_revenue = greedy.accepted().map(|b| instance.bids[b].price).sum();
    let mut search = Search {
        inst: instance,
        cfg,
        clock,
        order: density_order(instance),
        left: instance.units(),
        current: vec![false; m],
        revenue: 0.0,
        best: greedy.decisions,
        best_revenue: greedy_revenue,
        nodes: 0,
        aborted: false,
    };
    search.dfs(0);
    let allocation = Allocation { decisions: search.best };
    let revenue = allocation.accepted().map(|b| instance.bids[b].price).sum();
    ExactResult {
        allocation,
        revenue,
        proven_optimal: !search.aborted,
        nodes_explored: search.nodes,
        elapsed: clock.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::fig1;
    use crate::model::Bid;

    #[test]
    fn fig1_optimum() {
        let bf = brute_force(&fig1()).unwrap();
        assert_eq!(bf.allocation.bits(), vec![1, 1, 1, 0]);
        assert_eq!(bf.revenue, 8.0);
        let bb = branch_and_bound(&fig1(), &BnbConfig::default(), &NoClock);
        assert_eq!(bb.allocation.bits(), vec![1, 1, 1, 0]);
        assert_eq!(bb.revenue, 8.0);
        assert!(bb.proven_optimal);
    }

    #[test]
    fn single_feasible_bid() {
        let inst = AuctionInstance::new("one", &[2], vec![Bid::new(vec![1], 1.5)]);
        assert_eq!(brute_force(&inst).unwrap().allocation.bits(), vec![1]);
        assert_eq!(branch_and_bound(&inst, &BnbConfig::default(), &NoClock).allocation.bits(), vec![1]);
    }

    #[test]
    fn ties_pick_smallest_decision_vector() {
        let inst = AuctionInstance::new("tie", &[1], vec![Bid::new(vec![1], 2.0), Bid::new(vec![1], 2.0)]);
        assert_eq!(brute_force(&inst).unwrap().allocation.bits(), vec![0, 1]);
    }

    #[test]
    fn size_guard() {
        let inst = AuctionInstance::new("big", &[30], (0..26).map(|_| Bid::new(vec![1], 1.0)).collect());
        assert_eq!(brute_force(&inst).unwrap_err(), Error::SizeGuard { bids: 26, limit: 25 });
    }

    #[test]
    fn zero_time_limit_returns_greedy() {
        let r = branch_and_bound(&fig1(), &BnbConfig::with_time_limit(Duration::ZERO), &NoClock);
        assert!(!r.proven_optimal);
        assert_eq!(r.allocation, greedy_density(&fig1()));
        assert_eq!(r.nodes_explored, 0);
    }

    #[test]
    fn node_limit_reports_unproven() {
        let inst = crate::instgen::gen_synthetic(&crate::instgen::SynthConfig::new(40, 6, 5, 1)).unwrap();
        let cfg = BnbConfig { node_limit: Some(1), ..BnbConfig::default() };
        let r = branch_and_bound(&inst, &cfg, &NoClock);
        assert!(!r.proven_optimal);
        assert!(evaluate_allocation(&inst, &r.allocation).unwrap().feasible);
    }
}

//! Baseline heuristics: LP rounding, shadow surplus, Casanova local search
//! and a price-density greedy.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::lp::solve_lp_relaxation;
use crate::model::{Allocation, AuctionInstance, Bid};
use crate::Result;

/// Tracks remaining units while bids are accepted one at a time.
#[derive(Debug, Clone)]
pub(crate) struct Capacity {
    left: Vec<u32>,
}

impl Capacity {
    pub(crate) fn new(instance: &AuctionInstance) -> Self {
        Capacity { left: instance.units() }
    }

    pub(crate) fn fits(&self, bid: &Bid) -> bool {
        bid.fits(&self.left)
    }

    pub(crate) fn take(&mut self, bid: &Bid) {
        for (l, &d) in self.left.iter_mut().zip(&bid.demand) {
            *l -= d;
        }
    }

    pub(crate) fn give_back(&mut self, bid: &Bid) {
        for (l, &d) in self.left.iter_mut().zip(&bid.demand) {
            *l += d;
        }
    }

    /// Whether `holder` uses an item on which `bid` currently lacks units.
    pub(crate) fn short_on(&self, bid: &Bid, holder: &Bid) -> bool {
        bid.demand
            .iter()
            .zip(&holder.demand)
            .zip(&self.left)
            .any(|((&need, &held), &left)| need > left && held > 0)
    }

    /// Accepts `bid` when it fits.
    pub(crate) fn try_take(&mut self, bid: &Bid) -> bool {
        let ok = self.fits(bid);
        if ok {
            self.take(bid);
        }
        ok
    }
}

/// Rounds to ten significant digits so that scores equal up to float noise tie.
fn snap(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let digits = 9 - libm::floor(libm::log10(x.abs())) as i32;
    let scale = libm::pow(10.0, f64::from(digits));
    libm::round(x * scale) / scale
}

/// Bids sorted by descending score, then descending price, then index.
fn rank_by(instance: &AuctionInstance, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let keys: Vec<f64> = (0..instance.num_bids()).map(|m| snap(score(m))).collect();
    let mut order: Vec<usize> = (0..instance.num_bids()).collect();
    order.sort_by(|&a, &b| {
        keys[b]
            .total_cmp(&keys[a])
            .then(instance.bids[b].price.total_cmp(&instance.bids[a].price))
            .then(a.cmp(&b))
    });
    order
}

/// Accepts bids in `order` whenever they still fit.
fn greedy_in_order(instance: &AuctionInstance, order: &[usize]) -> Allocation {
    let mut cap = Capacity::new(instance);
    let mut alloc = Allocation::empty(instance.num_bids());
    for &m in order {
        if cap.try_take(&instance.bids[m]) {
            alloc.decisions[m] = true;
        }
    }
    alloc
}

/// Bid order by price per requested unit.
pub fn density_order(instance: &AuctionInstance) -> Vec<usize> {
    rank_by(instance, |m| instance.bids[m].density())
}

pub fn greedy_density(instance: &AuctionInstance) -> Allocation {
    greedy_in_order(instance, &density_order(instance))
}

/// Shadow-surplus greedy for given item prices.
pub fn ss_with_duals(instance: &AuctionInstance, duals: &[f64]) -> Allocation {
    let order = rank_by(instance, |m| {
        let bid = &instance.bids[m];
        let cost: f64 = bid.demand.iter().zip(duals).map(|(&d, &y)| f64::from(d) * y.max(0.0)).sum();
        if cost < 1e-12 {
            f64::INFINITY
        } else {
            bid.price / cost
        }
    });
    greedy_in_order(instance, &order)
}

/// Shadow surplus: ranks bids by price over the dual cost of their bundle.
pub fn ss(instance: &AuctionInstance) -> Result<Allocation> {
    let lp = solve_lp_relaxation(instance)?;
    Ok(ss_with_duals(instance, &lp.duals))
}

/// LP rounding for a given fractional solution; `draw` yields uniforms in `[0, 1)`.
pub fn rlp_with_draws(instance: &AuctionInstance, fractional: &[f64], mut draw: impl FnMut() -> f64) -> Allocation {
    let mut order: Vec<usize> = (0..instance.num_bids()).collect();
    order.sort_by(|&a, &b| fractional[b].total_cmp(&fractional[a]).then(a.cmp(&b)));
    let mut cap = Capacity::new(instance);
    let mut alloc = Allocation::empty(instance.num_bids());
    for m in order {
        let tentative = draw() < fractional[m];
        if tentative && cap.try_take(&instance.bids[m]) {
            alloc.decisions[m] = true;
        }
    }
    alloc
}

/// Relaxed-LP rounding.
pub fn rlp<R: Rng + ?Sized>(instance: &AuctionInstance, rng: &mut R) -> Result<Allocation> {
    let lp = solve_lp_relaxation(instance)?;
    Ok(rlp_with_draws(instance, &lp.primal, || rng.gen::<f64>()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CasanovaParams {
    pub walk_prob: f64,
    pub novelty_prob: f64,
    /// Steps without improvement that trigger a soft restart.
    pub stagnation_steps: usize,
    pub restarts: usize,
    /// Steps per restart; `None` means 50 times the number of bids.
    pub step_cap: Option<usize>,
}

impl Default for CasanovaParams {
    fn default() -> Self {
        CasanovaParams { walk_prob: 0.8, novelty_prob: 0.5, stagnation_steps: 5000, restarts: 5, step_cap: None }
    }
}

/// Casanova stochastic local search. Returns the best allocation seen.
pub fn casanova<R: Rng + ?Sized>(instance: &AuctionInstance, params: &CasanovaParams, rng: &mut R) -> Allocation {
    let m = instance.num_bids();
    let bids = &instance.bids;
    let order = density_order(instance);
    let steps = params.step_cap.unwrap_or(50 * m);
    let mut best = Allocation::empty(m);
    let mut best_revenue = 0.0;

    for _ in 0..params.restarts.max(1) {
        let mut current = Allocation::empty(m);
        let mut cap = Capacity::new(instance);
        let mut revenue = 0.0;
        let mut last_added = vec![0usize; m];
        let mut run_best = 0.0;
        let mut stale = 0;
        for step in 1..=steps {
            let free: Vec<usize> = (0..m).filter(|&b| !current.decisions[b]).collect();
            if free.is_empty() {
                break;
            }
            let pick = if rng.gen_bool(params.walk_prob) {
                free[rng.gen_range(0..free.len())]
            } else {
                let mut ranked = order.iter().copied().filter(|&b| !current.decisions[b]);
                let top = ranked.next().unwrap_or(free[0]);
                match ranked.next() {
                    None => top,
                    Some(second) => {
                        let age = |b: usize| step - last_added[b];
                        if age(top) < age(second) || rng.gen_bool(params.novelty_prob) {
                            top
                        } else {
                            second
                        }
                    }
                }
            };
            // evict accepted bids holding short items, oldest first
            let bid = &bids[pick];
            if !cap.fits(bid) {
                let mut holders: Vec<usize> = current.accepted().collect();
                holders.sort_by(|&a, &b| last_added[a].cmp(&last_added[b]).then(a.cmp(&b)));
                for h in holders {
                    if cap.fits(bid) {
                        break;
                    }
                    if cap.short_on(bid, &bids[h]) {
                        current.decisions[h] = false;
                        cap.give_back(&bids[h]);
                        revenue -= bids[h].price;
                    }
                }
                if !cap.fits(bid) {
                    continue;
                }
            }
            cap.take(bid);
            current.decisions[pick] = true;
            revenue += bid.price;
            last_added[pick] = step;

            if revenue > best_revenue + 1e-12 {
                best_revenue = revenue;
                best = current.clone();
            }
            if revenue > run_best + 1e-12 {
                run_best = revenue;
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.stagnation_steps {
                    current = Allocation::empty(m);
                    cap = Capacity::new(instance);
                    revenue = 0.0;
                    run_best = 0.0;
                    last_added.iter_mut().for_each(|a| *a = step);
                    stale = 0;
                }
            }
        }
    }
    best
}

//! Single-label training samples from labeled instances.
//!
//! Every accepted bid of a labeled instance yields a one-hot sample; a
//! randomly chosen accepted bid is then removed together with the bids that
//! no longer fit, and the process repeats on the smaller auction. With keep
//! probability 1 an instance with `K` accepted bids yields
//! `(K - 1)(K + 2) / 2` samples.

use alloc::vec::Vec;

use rand::Rng;

use crate::gnn::LabeledGraph;
use crate::graph::build_graph;
use crate::heuristics::{density_order, Capacity};
use crate::model::{evaluate_allocation, Allocation, AuctionInstance, Residual};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Optimal,
    Suboptimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub instance: AuctionInstance,
    pub allocation: Allocation,
    /// Whether `allocation` is a proven optimum.
    pub optimal: bool,
}

impl LabeledInstance {
    pub fn source(&self) -> SampleSource {
        if self.optimal {
            SampleSource::Optimal
        } else {
            SampleSource::Suboptimal
        }
    }

    fn check_feasible(&self) -> Result<f64> {
        let eval = evaluate_allocation(&self.instance, &self.allocation)?;
        if !eval.feasible {
            return Err(Error::Contract("labeled allocation is infeasible".into()));
        }
        Ok(eval.revenue)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// The auction state the sample was taken from.
    pub state: AuctionInstance,
    /// Position of the target bid within `state`.
    pub label: usize,
    pub source: SampleSource,
}

impl TrainingSample {
    /// Encodes the state as a normalized graph.
    pub fn to_labeled_graph(&self) -> LabeledGraph {
        LabeledGraph { graph: build_graph(&self.state).normalize(), label: self.label }
    }
}

/// Emits one sample per accepted bid, each kept with probability `keep_prob`.
pub fn one_hot_label_generation<R: Rng + ?Sized>(
    state: &LabeledInstance,
    keep_prob: f64,
    rng: &mut R,
) -> Vec<TrainingSample> {
    state
        .allocation
        .accepted()
        .filter(|_| keep_prob >= 1.0 || (keep_prob > 0.0 && rng.gen_bool(keep_prob)))
        .map(|label| TrainingSample { state: state.instance.clone(), label, source: state.source() })
        .collect()
}

/// Removes accepted bid `bid`, deducts its units and drops exhausted items
/// and the bids that no longer fit.
pub fn remove_allocated_bid(state: &LabeledInstance, bid: usize) -> Result<LabeledInstance> {
    state.check_feasible()?;
    if !state.allocation.decisions.get(bid).copied().unwrap_or(false) {
        return Err(Error::Contract("only accepted bids can be removed".into()));
    }
    let red = Residual::root(state.instance.clone()).reduce(&[bid], &[])?;
    let decisions = red.kept.iter().map(|&p| state.allocation.decisions[p]).collect();
    debug_assert!(red.conflicting.iter().all(|&p| !state.allocation.decisions[p]));
    Ok(LabeledInstance {
        instance: red.residual.instance,
        allocation: Allocation { decisions },
        optimal: state.optimal,
    })
}

/// Removes a uniformly chosen accepted bid.
pub fn node_removal<R: Rng + ?Sized>(state: &LabeledInstance, rng: &mut R) -> Result<LabeledInstance> {
    let accepted: Vec<usize> = state.allocation.accepted().collect();
    if accepted.is_empty() {
        return Err(Error::Contract("node removal needs an accepted bid".into()));
    }
    remove_allocated_bid(state, accepted[rng.gen_range(0..accepted.len())])
}

/// Alternates label generation and node removal until fewer than two
/// accepted bids (or bid nodes) remain.
pub fn single_label_sample_generation<R: Rng + ?Sized>(
    instances: &[LabeledInstance],
    keep_prob: f64,
    rng: &mut R,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for li in instances {
        li.check_feasible()?;
        let mut state = li.clone();
        while state.allocation.count() >= 2 && state.instance.num_bids() >= 2 {
            out.extend(one_hot_label_generation(&state, keep_prob, rng));
            state = node_removal(&state, rng)?;
        }
    }
    Ok(out)
}

/// Local-search move attempts per requested copy.
pub const MOVES_PER_COPY: usize = 200;

/// Adds near-optimal relabelings of every instance: up to `copies` distinct
/// feasible allocations within `gap_threshold` of the labeled revenue,
/// found by delete/refill and swap moves around the labeled allocation.
/// Originals come first, each followed by its copies.
pub fn expand_instance_set<R: Rng + ?Sized>(
    instances: &[LabeledInstance],
    gap_threshold: f64,
    copies: usize,
    rng: &mut R,
) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::with_capacity(instances.len() * (copies + 1));
    for li in instances {
        let best = li.check_feasible()?;
        out.push(li.clone());
        for allocation in near_optimal(li, best, gap_threshold, copies, rng) {
            out.push(LabeledInstance { instance: li.instance.clone(), allocation, optimal: false });
        }
    }
    Ok(out)
}

fn near_optimal<R: Rng + ?Sized>(
    li: &LabeledInstance,
    best: f64,
    gap_threshold: f64,
    copies: usize,
    rng: &mut R,
) -> Vec<Allocation> {
    let inst = &li.instance;
    let order = density_order(inst);
    let floor = (1.0 - gap_threshold) * best - 1e-12;
    let mut found: Vec<Allocation> = Vec::new();
    let mut current = li.allocation.clone();
    for _ in 0..MOVES_PER_COPY * copies {
        if found.len() >= copies {
            break;
        }
        let swap = rng.gen_bool(0.5);
        let Some(candidate) = local_move(inst, &order, &current, swap, rng) else {
            current = li.allocation.clone();
            continue;
        };
        let revenue: f64 = candidate.accepted().map(|m| inst.bids[m].price).sum();
        if revenue >= floor && candidate != li.allocation {
            if !found.contains(&candidate) {
                found.push(candidate.clone());
            }
            current = candidate;
        } else {
            current = li.allocation.clone();
        }
    }
    found
}

/// Deletes a random accepted bid, optionally forces in a different rejected
/// bid (evicting bids in its way), then refills greedily by price density.
fn local_move<R: Rng + ?Sized>(
    inst: &AuctionInstance,
    order: &[usize],
    from: &Allocation,
    swap: bool,
    rng: &mut R,
) -> Option<Allocation> {
    let accepted: Vec<usize> = from.accepted().collect();
    if accepted.is_empty() {
        return None;
    }
    let removed = accepted[rng.gen_range(0..accepted.len())];
    let mut next = from.clone();
    next.decisions[removed] = false;
    let mut cap = Capacity::new(inst);
    for m in next.accepted() {
        cap.take(&inst.bids[m]);
    }
    let mut banned = alloc::vec![false; inst.num_bids()];
    banned[removed] = true;
    if swap {
        let rejected: Vec<usize> = (0..inst.num_bids()).filter(|&m| !from.decisions[m]).collect();
        if rejected.is_empty() {
            return None;
        }
        let forced = rejected[rng.gen_range(0..rejected.len())];
        let bid = &inst.bids[forced];
        for m in accepted.iter().copied().filter(|&m| m != removed) {
            if cap.fits(bid) {
                break;
            }
            if cap.short_on(bid, &inst.bids[m]) {
                next.decisions[m] = false;
                cap.give_back(&inst.bids[m]);
                banned[m] = true;
            }
        }
        if !cap.try_take(bid) {
            return None;
        }
        next.decisions[forced] = true;
    }
    for &m in order {
        if !next.decisions[m] && !banned[m] && cap.try_take(&inst.bids[m]) {
            next.decisions[m] = true;
        }
    }
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::brute_force;
    use crate::model::tests::fig1;
    use crate::model::Bid;
    use crate::seeded_rng;
    use alloc::vec;

    fn fig1_labeled() -> LabeledInstance {
        LabeledInstance { instance: fig1(), allocation: Allocation::from_bits(&[1, 1, 1, 0]), optimal: true }
    }

    #[test]
    fn one_hot_on_fig1() {
        let mut rng = seeded_rng(0);
        let s = one_hot_label_generation(&fig1_labeled(), 1.0, &mut rng);
        assert_eq!(s.iter().map(|s| s.label).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(one_hot_label_generation(&fig1_labeled(), 0.0, &mut rng).is_empty());
        let none = LabeledInstance { allocation: Allocation::empty(4), ..fig1_labeled() };
        assert!(one_hot_label_generation(&none, 1.0, &mut rng).is_empty());
    }

    #[test]
    fn removing_b2_drops_conflicting_b4() {
        let next = remove_allocated_bid(&fig1_labeled(), 1).unwrap();
        assert_eq!(next.instance.units(), vec![4, 1, 3]);
        assert_eq!(next.instance.bids, vec![fig1().bids[0].clone(), fig1().bids[2].clone()]);
        assert_eq!(next.allocation.bits(), vec![1, 1]);
        assert!(remove_allocated_bid(&fig1_labeled(), 3).is_err());
    }

    #[test]
    fn removing_only_accepted_bid_leaves_rest() {
        let inst = AuctionInstance::new(
            "x",
            &[5, 5],
            vec![Bid::new(vec![1, 0], 1.0), Bid::new(vec![0, 1], 1.0), Bid::new(vec![1, 1], 3.0)],
        );
        let li = LabeledInstance { instance: inst, allocation: Allocation::from_bits(&[0, 0, 1]), optimal: false };
        let next = node_removal(&li, &mut seeded_rng(1)).unwrap();
        assert_eq!(next.instance.num_bids(), 2);
        assert_eq!(next.allocation.bits(), vec![0, 0]);
        assert!(node_removal(&next, &mut seeded_rng(1)).is_err());
    }

    #[test]
    fn node_removal_is_seeded() {
        let a = node_removal(&fig1_labeled(), &mut seeded_rng(5)).unwrap();
        let b = node_removal(&fig1_labeled(), &mut seeded_rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fig1_yields_five_samples() {
        let s = single_label_sample_generation(&[fig1_labeled()], 1.0, &mut seeded_rng(2)).unwrap();
        assert_eq!(s.len(), 5);
        for sample in &s {
            assert!(sample.label < sample.state.num_bids());
            assert!(sample.state.bids[sample.label].fits(&sample.state.units()));
        }
    }

    #[test]
    fn single_accepted_bid_yields_nothing() {
        let li = LabeledInstance { allocation: Allocation::from_bits(&[0, 1, 0, 0]), ..fig1_labeled() };
        assert!(single_label_sample_generation(&[li], 1.0, &mut seeded_rng(0)).unwrap().is_empty());
    }

    #[test]
    fn expected_count_scales_with_keep_probability() {
        let mut rng = seeded_rng(11);
        let runs = 10_000;
        let mut total = 0;
        for _ in 0..runs {
            total += single_label_sample_generation(&[fig1_labeled()], 0.5, &mut rng).unwrap().len();
        }
        let mean = total as f64 / runs as f64;
        assert!((mean - 2.5).abs() <= 0.05 * 2.5, "mean {mean}");
    }

    #[test]
    fn expansion_respects_gap_and_feasibility() {
        let inst = crate::instgen::gen_synthetic(&crate::instgen::SynthConfig::new(20, 4, 5, 3)).unwrap();
        let opt = brute_force(&inst).unwrap();
        let li = LabeledInstance { instance: inst, allocation: opt.allocation.clone(), optimal: true };
        for gap in [0.01, 0.2] {
            let out = expand_instance_set(&[li.clone()], gap, 7, &mut seeded_rng(4)).unwrap();
            assert!(out.len() <= 8);
            assert_eq!(out[0], li);
            for copy in &out[1..] {
                assert!(!copy.optimal);
                assert_ne!(copy.allocation, opt.allocation);
                let e = evaluate_allocation(&copy.instance, &copy.allocation).unwrap();
                assert!(e.feasible);
                assert!(e.revenue >= (1.0 - gap) * opt.revenue - 1e-9);
            }
        }
    }

    #[test]
    fn unique_optimum_gets_no_copies() {
        // any change to the optimum {b1, b2} loses more than 1%
        let inst = AuctionInstance::new(
            "u",
            &[1, 1],
            vec![Bid::new(vec![1, 0], 10.0), Bid::new(vec![0, 1], 10.0), Bid::new(vec![1, 1], 1.0)],
        );
        let li = LabeledInstance { instance: inst, allocation: Allocation::from_bits(&[1, 1, 0]), optimal: true };
        let out = expand_instance_set(&[li], 0.01, 7, &mut seeded_rng(0)).unwrap();
        assert_eq!(out.len(), 1);
    }
}

//! Turning per-bid scores into a feasible allocation.
//!
//! Both procedures repeatedly score the current residual graph, commit some
//! decisions and shrink the graph until no bids remain. Every committed
//! acceptance fits the remaining capacity, so the result is always feasible.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::gnn::GnnModel;
use crate::graph::{build_graph, BidItemGraph};
use crate::model::{Allocation, AuctionInstance};
use crate::{Error, Result};

/// Assigns a selection probability to every bid node of a graph.
pub trait BidScorer {
    fn probabilities(&self, graph: &BidItemGraph) -> Result<Vec<f64>>;
}

impl BidScorer for GnnModel {
    fn probabilities(&self, graph: &BidItemGraph) -> Result<Vec<f64>> {
        if graph.normalized {
            self.forward(graph)
        } else {
            self.forward(&graph.normalize())
        }
    }
}

/// Decisions committed after one scorer call, as original bid indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Iteration {
    pub accepted: Vec<usize>,
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub allocation: Allocation,
    pub gnn_calls: usize,
    pub iterations: Vec<Iteration>,
}

/// Bid positions by descending probability, ties to the lower original index.
fn ranking(graph: &BidItemGraph, probs: &[f64]) -> Result<Vec<usize>> {
    if probs.len() != graph.num_bids() {
        return Err(Error::Dimension { expected: graph.num_bids(), found: probs.len() });
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap_or(Ordering::Equal)
            .then(graph.bids[a].bid.cmp(&graph.bids[b].bid))
    });
    Ok(order)
}

fn ids(graph: &BidItemGraph, positions: &[usize]) -> Vec<usize> {
    positions.iter().map(|&p| graph.bids[p].bid).collect()
}

fn run(
    scorer: &(impl BidScorer + ?Sized),
    instance: &AuctionInstance,
    step: impl Fn(&BidItemGraph, &[usize]) -> (Vec<usize>, Vec<usize>),
) -> Result<SolveTrace> {
    let mut graph = build_graph(instance);
    let mut allocation = Allocation::empty(instance.num_bids());
    let mut trace = SolveTrace { allocation: allocation.clone(), gnn_calls: 0, iterations: Vec::new() };
    while graph.num_bids() > 0 {
        if graph.num_items() == 0 {
            // nothing left to sell; the remaining bids lose without a call
            let rest: Vec<usize> = (0..graph.num_bids()).collect();
            trace.iterations.push(Iteration { accepted: Vec::new(), rejected: ids(&graph, &rest) });
            break;
        }
        let probs = scorer.probabilities(&graph)?;
        trace.gnn_calls += 1;
        let order = ranking(&graph, &probs)?;
        let (accepted, rejected) = step(&graph, &order);
        let (next, conflicting) = graph.residual_graph(&accepted, &rejected)?;
        for &p in &accepted {
            allocation.decisions[graph.bids[p].bid] = true;
        }
        let mut lost = ids(&graph, &rejected);
        lost.extend(ids(&graph, &conflicting));
        trace.iterations.push(Iteration { accepted: ids(&graph, &accepted), rejected: lost });
        graph = next;
    }
    trace.allocation = allocation;
    Ok(trace)
}

/// Accepts the single most probable bid per call.
pub fn basic_solve(scorer: &(impl BidScorer + ?Sized), instance: &AuctionInstance) -> Result<SolveTrace> {
    run(scorer, instance, |_, order| (alloc::vec![order[0]], Vec::new()))
}

/// Walks the ranking accepting bids while they fit; the first bid that does
/// not fit is rejected and ends the call.
pub fn traversal_solve(scorer: &(impl BidScorer + ?Sized), instance: &AuctionInstance) -> Result<SolveTrace> {
    run(scorer, instance, |graph, order| {
        let mut left = graph.state.instance.units();
        let mut accepted = Vec::new();
        for &p in order {
            let bid = &graph.state.instance.bids[p];
            if !bid.fits(&left) {
                return (accepted, alloc::vec![p]);
            }
            for (l, &d) in left.iter_mut().zip(&bid.demand) {
                *l -= d;
            }
            accepted.push(p);
        }
        (accepted, Vec::new())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::brute_force;
    use crate::model::tests::fig1;
    use crate::model::{evaluate_allocation, Bid};
    use alloc::vec;
    use proptest::prelude::*;

    /// Scores every bid by a fixed priority over original indices.
    struct Priority(Vec<f64>);

    impl BidScorer for Priority {
        fn probabilities(&self, graph: &BidItemGraph) -> Result<Vec<f64>> {
            Ok(graph.bids.iter().map(|b| self.0[b.bid]).collect())
        }
    }

    struct Uniform;

    impl BidScorer for Uniform {
        fn probabilities(&self, graph: &BidItemGraph) -> Result<Vec<f64>> {
            Ok(vec![1.0 / graph.num_bids() as f64; graph.num_bids()])
        }
    }

    /// Puts all mass on accepted bids of a fixed optimum still present.
    struct Perfect(Allocation);

    impl BidScorer for Perfect {
        fn probabilities(&self, graph: &BidItemGraph) -> Result<Vec<f64>> {
            Ok(graph.bids.iter().map(|b| if self.0.decisions[b.bid] { 1.0 } else { 0.0 }).collect())
        }
    }

    #[test]
    fn basic_on_fig1() {
        let t = basic_solve(&Priority(vec![0.2, 0.4, 0.3, 0.1]), &fig1()).unwrap();
        assert_eq!(t.allocation.bits(), vec![1, 1, 1, 0]);
        assert_eq!(t.gnn_calls, 3);
        assert_eq!(t.iterations[0], Iteration { accepted: vec![1], rejected: vec![3] });
        assert_eq!(t.iterations[1].accepted, vec![2]);
        assert_eq!(t.iterations[2].accepted, vec![0]);
    }

    #[test]
    fn traversal_on_fig1() {
        let t = traversal_solve(&Priority(vec![0.1, 0.4, 0.2, 0.3]), &fig1()).unwrap();
        assert_eq!(t.iterations[0], Iteration { accepted: vec![1], rejected: vec![3] });
        assert_eq!(t.gnn_calls, 2);
        assert_eq!(t.allocation.bits(), vec![1, 1, 1, 0]);
    }

    #[test]
    fn uniform_scores_terminate_feasibly() {
        let inst = fig1();
        for t in [basic_solve(&Uniform, &inst).unwrap(), traversal_solve(&Uniform, &inst).unwrap()] {
            assert!(evaluate_allocation(&inst, &t.allocation).unwrap().feasible);
            assert!(t.gnn_calls <= inst.num_bids());
        }
        // equal scores resolve to the lowest index
        let t = basic_solve(&Uniform, &inst).unwrap();
        assert_eq!(t.iterations[0].accepted, vec![0]);
    }

    #[test]
    fn everything_fits_in_one_traversal_call() {
        let inst = AuctionInstance::new(
            "all",
            &[9, 9],
            vec![Bid::new(vec![1, 2], 1.0), Bid::new(vec![3, 0], 2.0), Bid::new(vec![0, 1], 1.5)],
        );
        let t = traversal_solve(&Uniform, &inst).unwrap();
        assert_eq!(t.gnn_calls, 1);
        assert_eq!(t.allocation.bits(), vec![1, 1, 1]);
        assert_eq!(basic_solve(&Uniform, &inst).unwrap().gnn_calls, 3);
    }

    #[test]
    fn wrong_length_scores_are_rejected() {
        struct Short;
        impl BidScorer for Short {
            fn probabilities(&self, _: &BidItemGraph) -> Result<Vec<f64>> {
                Ok(vec![1.0])
            }
        }
        assert!(basic_solve(&Short, &fig1()).is_err());
    }

    #[test]
    fn gnn_scorer_yields_feasible_allocations() {
        let model = GnnModel::new(8, 1);
        let inst = fig1();
        let b = basic_solve(&model, &inst).unwrap();
        let t = traversal_solve(&model, &inst).unwrap();
        assert!(evaluate_allocation(&inst, &b.allocation).unwrap().feasible);
        assert!(evaluate_allocation(&inst, &t.allocation).unwrap().feasible);
        assert_eq!(b.gnn_calls, b.allocation.count());
        assert!(t.gnn_calls <= t.allocation.count());
    }

    fn arb_instance() -> impl Strategy<Value = AuctionInstance> {
        (1usize..4, 1usize..9).prop_flat_map(|(n, m)| {
            prop::collection::vec(1u32..5, n).prop_flat_map(move |units| {
                let u = units.clone();
                let bid = u
                    .iter()
                    .map(|&c| 0..=c)
                    .collect::<Vec<_>>()
                    .prop_filter("non-empty bundle", |d: &Vec<u32>| d.iter().any(|&x| x > 0));
                prop::collection::vec((bid, 1u32..20), m).prop_map(move |bs| {
                    AuctionInstance::new("p", &units, bs.into_iter().map(|(d, p)| Bid::new(d, f64::from(p))).collect())
                })
            })
        })
    }

    proptest! {
        #[test]
        fn perfect_oracle_recovers_optimum(inst in arb_instance()) {
            let opt = brute_force(&inst).unwrap();
            let oracle = Perfect(opt.allocation.clone());
            for t in [basic_solve(&oracle, &inst).unwrap(), traversal_solve(&oracle, &inst).unwrap()] {
                let e = evaluate_allocation(&inst, &t.allocation).unwrap();
                prop_assert!(e.feasible);
                prop_assert!((e.revenue - opt.revenue).abs() < 1e-9);
            }
        }

        #[test]
        fn any_priority_is_feasible_and_call_bounded(inst in arb_instance(), seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::seeded_rng(seed);
            let pr = Priority((0..inst.num_bids()).map(|_| rng.gen::<f64>()).collect());
            let b = basic_solve(&pr, &inst).unwrap();
            let t = traversal_solve(&pr, &inst).unwrap();
            prop_assert!(evaluate_allocation(&inst, &b.allocation).unwrap().feasible);
            prop_assert!(evaluate_allocation(&inst, &t.allocation).unwrap().feasible);
            prop_assert_eq!(b.gnn_calls, b.allocation.count());
            prop_assert!(t.gnn_calls <= b.gnn_calls);
        }
    }
}

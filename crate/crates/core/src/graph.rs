//! The augmented bid-item graph.
//!
//! Bid nodes carry `[price, total requested units]`, item nodes carry
//! `[available units, degree]` and an edge joins a bid to every item it
//! requests, carrying the requested unit count.

use alloc::vec::Vec;

use crate::model::{AuctionInstance, Residual};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct BidNode {
    pub features: [f64; 2],
    /// Index of the bid in the original instance.
    pub bid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemNode {
    pub features: [f64; 2],
    /// Index of the item in the original instance.
    pub item: usize,
}

/// Edge between node positions of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub bid: usize,
    pub item: usize,
    pub feature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidItemGraph {
    pub bids: Vec<BidNode>,
    pub items: Vec<ItemNode>,
    /// Sorted by bid node, then item node.
    pub edges: Vec<Edge>,
    /// The (residual) auction the graph encodes.
    pub state: Residual,
    pub normalized: bool,
}

pub fn build_graph(instance: &AuctionInstance) -> BidItemGraph {
    BidItemGraph::from_residual(Residual::root(instance.clone()))
}

impl BidItemGraph {
    pub fn from_residual(state: Residual) -> Self {
        let inst = &state.instance;
        let mut degree = alloc::vec![0usize; inst.num_items()];
        let mut edges = Vec::new();
        let mut bids = Vec::with_capacity(inst.num_bids());
        for (m, bid) in inst.bids.iter().enumerate() {
            for (n, &d) in bid.demand.iter().enumerate() {
                if d > 0 {
                    degree[n] += 1;
                    edges.push(Edge { bid: m, item: n, feature: f64::from(d) });
                }
            }
            bids.push(BidNode { features: [bid.price, bid.total_units() as f64], bid: state.bid_ids[m] });
        }
        let items = inst
            .items
            .iter()
            .enumerate()
            .map(|(n, it)| ItemNode { features: [f64::from(it.units), degree[n] as f64], item: state.item_ids[n] })
            .collect();
        BidItemGraph { bids, items, edges, state, normalized: false }
    }

    pub fn num_bids(&self) -> usize {
        self.bids.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Per-graph standardisation of every feature column. Columns with
    /// (near) zero spread become zeros.
    pub fn normalize(&self) -> BidItemGraph {
        let mut g = self.clone();
        for c in 0..2 {
            let col: Vec<f64> = g.bids.iter().map(|b| b.features[c]).collect();
            for (b, v) in g.bids.iter_mut().zip(standardize(&col)) {
                b.features[c] = v;
            }
            let col: Vec<f64> = g.items.iter().map(|i| i.features[c]).collect();
            for (i, v) in g.items.iter_mut().zip(standardize(&col)) {
                i.features[c] = v;
            }
        }
        let col: Vec<f64> = g.edges.iter().map(|e| e.feature).collect();
        for (e, v) in g.edges.iter_mut().zip(standardize(&col)) {
            e.feature = v;
        }
        g.normalized = true;
        g
    }

    /// Graph of the sub-auction left after accepting and rejecting the given
    /// bid nodes. Also returns the positions of bids dropped as conflicting.
    pub fn residual_graph(&self, accepted: &[usize], rejected: &[usize]) -> Result<(BidItemGraph, Vec<usize>)> {
        let red = self.state.reduce(accepted, rejected)?;
        Ok((BidItemGraph::from_residual(red.residual), red.conflicting))
    }
}

fn standardize(col: &[f64]) -> Vec<f64> {
    if col.is_empty() {
        return Vec::new();
    }
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if sd < 1e-12 {
        return alloc::vec![0.0; col.len()];
    }
    col.iter().map(|v| (v - mean) / sd).collect()
}

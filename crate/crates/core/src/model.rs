//! Problem data, allocation evaluation and report metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An item offered in `units` identical copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub units: u32,
}

/// A single-minded, all-or-nothing bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    /// Requested units of every item, dense over the instance's items.
    pub demand: Vec<u32>,
    pub price: f64,
}

impl Bid {
    pub fn new(demand: Vec<u32>, price: f64) -> Self {
        Bid { demand, price }
    }

    pub fn total_units(&self) -> u64 {
        self.demand.iter().map(|&d| u64::from(d)).sum()
    }

    /// Price per requested unit.
    pub fn density(&self) -> f64 {
        let units = self.total_units();
        if units == 0 {
            f64::INFINITY
        } else {
            self.price / units as f64
        }
    }

    /// Whether the whole bundle fits into `units`.
    pub fn fits(&self, units: &[u32]) -> bool {
        self.demand.iter().zip(units).all(|(&d, &u)| d <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub name: String,
    pub items: Vec<Item>,
    pub bids: Vec<Bid>,
}

/// One broken invariant found by [`AuctionInstance::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoItems,
    NoBids,
    ItemUnits { item: usize },
    DemandLength { bid: usize, expected: usize, found: usize },
    NonPositivePrice { bid: usize },
    EmptyDemand { bid: usize },
    DemandExceedsUnits { bid: usize, item: usize, demand: u32, units: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NoItems => write!(f, "instance has no items"),
            Violation::NoBids => write!(f, "instance has no bids"),
            Violation::ItemUnits { item } => write!(f, "item {item}: units < 1"),
            Violation::DemandLength { bid, expected, found } => {
                write!(f, "bid {bid}: demand has {found} entries, expected {expected}")
            }
            Violation::NonPositivePrice { bid } => write!(f, "bid {bid}: price must be positive"),
            Violation::EmptyDemand { bid } => write!(f, "bid {bid}: requests no units"),
            Violation::DemandExceedsUnits { bid, item, demand, units } => write!(
                f,
                "bid {bid}: requests {demand} units of item {item}, only {units} exist"
            ),
        }
    }
}

impl AuctionInstance {
    pub fn new(name: impl Into<String>, units: &[u32], bids: Vec<Bid>) -> Self {
        AuctionInstance {
            name: name.into(),
            items: units.iter().map(|&units| Item { units }).collect(),
            bids,
        }
    }

    pub fn num_bids(&self) -> usize {
        self.bids.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn units(&self) -> Vec<u32> {
        self.items.iter().map(|i| i.units).collect()
    }

    pub fn total_units(&self) -> u64 {
        self.items.iter().map(|i| u64::from(i.units)).sum()
    }

    pub fn max_units(&self) -> u32 {
        self.items.iter().map(|i| i.units).max().unwrap_or(0)
    }

    /// Lists every invariant violation; an empty list means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.items.len();
        if n == 0 {
            out.push(Violation::NoItems);
        }
        if self.bids.is_empty() {
            out.push(Violation::NoBids);
        }
        for (item, it) in self.items.iter().enumerate() {
            if it.units < 1 {
                out.push(Violation::ItemUnits { item });
            }
        }
        for (bid, b) in self.bids.iter().enumerate() {
            if !(b.price > 0.0 && b.price.is_finite()) {
                out.push(Violation::NonPositivePrice { bid });
            }
            if b.demand.len() != n {
                out.push(Violation::DemandLength { bid, expected: n, found: b.demand.len() });
                continue;
            }
            if b.demand.iter().all(|&d| d == 0) {
                out.push(Violation::EmptyDemand { bid });
            }
            for (item, (&demand, it)) in b.demand.iter().zip(&self.items).enumerate() {
                if demand > it.units {
                    out.push(Violation::DemandExceedsUnits { bid, item, demand, units: it.units });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Accept/reject decision per bid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Allocation {
    pub decisions: Vec<bool>,
}

impl Allocation {
    pub fn empty(bids: usize) -> Self {
        Allocation { decisions: vec![false; bids] }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Allocation { decisions: bits.iter().map(|&b| b != 0).collect() }
    }

    pub fn from_accepted(bids: usize, accepted: &[usize]) -> Self {
        let mut a = Self::empty(bids);
        for &m in accepted {
            a.decisions[m] = true;
        }
        a
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn accepted(&self) -> impl Iterator<Item = usize> + '_ {
        self.decisions.iter().enumerate().filter(|(_, &a)| a).map(|(m, _)| m)
    }

    pub fn count(&self) -> usize {
        self.decisions.iter().filter(|&&a| a).count()
    }

    pub fn bits(&self) -> Vec<u8> {
        self.decisions.iter().map(|&a| u8::from(a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub revenue: f64,
    pub feasible: bool,
    /// Allocated units per item.
    pub used: Vec<u64>,
}

/// Revenue, feasibility and per-item usage of `alloc`.
pub fn evaluate_allocation(instance: &AuctionInstance, alloc: &Allocation) -> Result<Evaluation> {
    if alloc.len() != instance.num_bids() {
        return Err(Error::Dimension { expected: instance.num_bids(), found: alloc.len() });
    }
    let mut used = vec![0u64; instance.num_items()];
    let mut revenue = 0.0;
    for m in alloc.accepted() {
        let bid = &instance.bids[m];
        revenue += bid.price;
        for (u, &d) in used.iter_mut().zip(&bid.demand) {
            *u += u64::from(d);
        }
    }
    let feasible = used.iter().zip(&instance.items).all(|(&u, it)| u <= u64::from(it.units));
    Ok(Evaluation { revenue, feasible, used })
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub revenue: f64,
    /// `(reference - revenue) / reference`.
    pub gap: f64,
    /// Fraction of all item units that are allocated.
    pub utilization: f64,
    /// Fraction of bidders whose bundle is granted.
    pub satisfaction: f64,
    pub iterations: u64,
    pub elapsed: Duration,
}

/// Gap, utilization and satisfaction of a feasible allocation.
///
/// `iterations` and `elapsed` are left at zero for the caller to fill in.
pub fn metrics(instance: &AuctionInstance, alloc: &Allocation, reference_revenue: f64) -> Result<MetricsRow> {
    if !(reference_revenue > 0.0) {
        return Err(Error::ZeroReference(reference_revenue));
    }
    let eval = evaluate_allocation(instance, alloc)?;
    if !eval.feasible {
        return Err(Error::Contract("metrics requires a feasible allocation".into()));
    }
    let used: u64 = eval.used.iter().sum();
    let total = instance.total_units();
    let bids = instance.num_bids();
    Ok(MetricsRow {
        revenue: eval.revenue,
        gap: (reference_revenue - eval.revenue) / reference_revenue,
        utilization: if total == 0 { 0.0 } else { used as f64 / total as f64 },
        satisfaction: if bids == 0 { 0.0 } else { alloc.count() as f64 / bids as f64 },
        iterations: 0,
        elapsed: Duration::ZERO,
    })
}

/// A sub-auction left after some bids were decided, carrying the indices of
/// its bids and items in the original instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub instance: AuctionInstance,
    pub bid_ids: Vec<usize>,
    pub item_ids: Vec<usize>,
}

/// Result of [`Residual::reduce`]. Bid positions refer to the parent residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub residual: Residual,
    /// Parent positions of the surviving bids, in order.
    pub kept: Vec<usize>,
    /// Parent positions of undecided bids that no longer fit.
    pub conflicting: Vec<usize>,
}

impl Residual {
    pub fn root(instance: AuctionInstance) -> Self {
        let bid_ids = (0..instance.num_bids()).collect();
        let item_ids = (0..instance.num_items()).collect();
        Residual { instance, bid_ids, item_ids }
    }

    pub fn num_bids(&self) -> usize {
        self.instance.num_bids()
    }

    /// Applies accept/reject decisions (positions in this residual).
    ///
    /// Accepted units are deducted, decided bids disappear, undecided bids
    /// that no longer fit are dropped as conflicting and exhausted items are
    /// removed.
    pub fn reduce(&self, accepted: &[usize], rejected: &[usize]) -> Result<Reduction> {
        let m = self.num_bids();
        let mut decided = vec![false; m];
        for &b in accepted.iter().chain(rejected) {
            if b >= m {
                return Err(Error::Contract(format!("bid position {b} out of range ({m} bids)")));
            }
            if decided[b] {
                return Err(Error::Contract(format!("bid position {b} decided twice")));
            }
            decided[b] = true;
        }
        let mut units: Vec<i64> = self.instance.items.iter().map(|i| i64::from(i.units)).collect();
        for &b in accepted {
            for (u, &d) in units.iter_mut().zip(&self.instance.bids[b].demand) {
                *u -= i64::from(d);
            }
        }
        if units.iter().any(|&u| u < 0) {
            return Err(Error::Contract("accepted bids exceed the available units".into()));
        }

        let live_items: Vec<usize> = (0..units.len()).filter(|&n| units[n] > 0).collect();
        let mut kept = Vec::new();
        let mut conflicting = Vec::new();
        for (pos, bid) in self.instance.bids.iter().enumerate() {
            if decided[pos] {
                continue;
            }
            if bid.demand.iter().zip(&units).all(|(&d, &u)| i64::from(d) <= u) {
                kept.push(pos);
            } else {
                conflicting.push(pos);
            }
        }

        let items = live_items.iter().map(|&n| Item { units: units[n] as u32 }).collect();
        let bids = kept
            .iter()
            .map(|&pos| {
                let bid = &self.instance.bids[pos];
                Bid::new(live_items.iter().map(|&n| bid.demand[n]).collect(), bid.price)
            })
            .collect();
        let residual = Residual {
            instance: AuctionInstance { name: self.instance.name.clone(), items, bids },
            bid_ids: kept.iter().map(|&p| self.bid_ids[p]).collect(),
            item_ids: live_items.iter().map(|&n| self.item_ids[n]).collect(),
        };
        Ok(Reduction { residual, kept, conflicting })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;

    /// The four-bid, three-item example used across the test suite.
    pub(crate) fn fig1() -> AuctionInstance {
        AuctionInstance::new(
            "fig1",
            &[6, 3, 4],
            vec![
                Bid::new(vec![2, 0, 0], 1.0),
                Bid::new(vec![2, 2, 1], 5.0),
                Bid::new(vec![0, 1, 1], 2.0),
                Bid::new(vec![0, 1, 4], 3.0),
            ],
        )
    }

    #[test]
    fn fig1_is_valid() {
        assert!(fig1().validate().is_empty());
    }

    #[test]
    fn zero_units_item_is_reported() {
        let mut inst = fig1();
        inst.items[0].units = 0;
        let v = inst.validate();
        assert!(v.iter().any(|v| v.to_string() == "item 0: units < 1"), "{v:?}");
    }

    #[test]
    fn zero_price_is_reported() {
        let mut inst = fig1();
        inst.bids[0].price = 0.0;
        let v = inst.validate();
        assert!(v.iter().any(|v| v.to_string() == "bid 0: price must be positive"));
    }

    #[test]
    fn demand_shape_violations() {
        let inst = AuctionInstance::new(
            "bad",
            &[2],
            vec![Bid::new(vec![0], 1.0), Bid::new(vec![3], 1.0), Bid::new(vec![1, 1], 1.0)],
        );
        let v = inst.validate();
        assert!(v.contains(&Violation::EmptyDemand { bid: 0 }));
        assert!(v.contains(&Violation::DemandExceedsUnits { bid: 1, item: 0, demand: 3, units: 2 }));
        assert!(v.contains(&Violation::DemandLength { bid: 2, expected: 1, found: 2 }));
        let empty = AuctionInstance::new("e", &[], vec![]);
        assert_eq!(empty.validate(), vec![Violation::NoItems, Violation::NoBids]);
    }

    #[test]
    fn evaluate_fig1() {
        let inst = fig1();
        let e = evaluate_allocation(&inst, &Allocation::from_bits(&[1, 1, 1, 0])).unwrap();
        assert_eq!(e.revenue, 8.0);
        assert!(e.feasible);
        assert_eq!(e.used, vec![4, 3, 2]);

        let e = evaluate_allocation(&inst, &Allocation::empty(4)).unwrap();
        assert_eq!(e.revenue, 0.0);
        assert!(e.feasible);

        // item 2 needs 2 + 1 + 1 = 4 > 3
        let e = evaluate_allocation(&inst, &Allocation::from_bits(&[1, 1, 1, 1])).unwrap();
        assert!(!e.feasible);
        assert_eq!(e.used[1], 4);
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        let err = evaluate_allocation(&fig1(), &Allocation::empty(3)).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 4, found: 3 });
    }

    #[test]
    fn metrics_fig1() {
        let inst = fig1();
        let row = metrics(&inst, &Allocation::from_bits(&[1, 1, 1, 0]), 8.0).unwrap();
        assert_eq!(row.gap, 0.0);
        assert_eq!(row.satisfaction, 0.75);
        assert!((row.utilization - 9.0 / 13.0).abs() < 1e-12);

        let row = metrics(&inst, &Allocation::from_bits(&[0, 1, 0, 0]), 8.0).unwrap();
        assert!((row.gap - 3.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_errors() {
        let inst = fig1();
        assert!(matches!(
            metrics(&inst, &Allocation::from_bits(&[1, 1, 1, 1]), 8.0),
            Err(Error::Contract(_))
        ));
        assert_eq!(
            metrics(&inst, &Allocation::empty(4), 0.0).unwrap_err(),
            Error::ZeroReference(0.0)
        );
    }

    #[test]
    fn reduce_accepting_b2_then_b3() {
        let root = Residual::root(fig1());
        let r = root.reduce(&[1], &[]).unwrap();
        assert_eq!(r.residual.instance.units(), vec![4, 1, 3]);
        assert_eq!(r.conflicting, vec![3]);
        assert_eq!(r.residual.bid_ids, vec![0, 2]);

        // b3 sits at position 1 of the first residual
        let r2 = r.residual.reduce(&[1], &[]).unwrap();
        assert_eq!(r2.residual.item_ids, vec![0, 2]);
        assert_eq!(r2.residual.instance.units(), vec![4, 2]);
        assert_eq!(r2.residual.bid_ids, vec![0]);
        assert_eq!(r2.residual.instance.bids[0].demand, vec![2, 0]);
    }

    #[test]
    fn reduce_identity_and_errors() {
        let root = Residual::root(fig1());
        let r = root.reduce(&[], &[]).unwrap();
        assert_eq!(r.residual, root);
        assert!(r.conflicting.is_empty());
        assert!(root.reduce(&[1, 3], &[]).is_err());
        assert!(root.reduce(&[1], &[1]).is_err());
        assert!(root.reduce(&[9], &[]).is_err());
    }
}

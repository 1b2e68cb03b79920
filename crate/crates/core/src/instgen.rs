//! Synthetic instance generators: the decay distribution and a cloud
//! VM-allocation scenario with user types.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::model::{AuctionInstance, Bid, Item};
use crate::{seeded_rng, Error, Result};

/// Candidate bids generated per requested bid before giving up.
pub const RETRY_FACTOR: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_bids: usize,
    pub num_items: usize,
    pub max_units: u32,
    /// Probability that a bid includes a given item.
    pub item_prob: f64,
    /// Probability of adding one more unit of an included item.
    pub unit_prob: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(num_bids: usize, num_items: usize, max_units: u32, seed: u64) -> Self {
        SynthConfig { num_bids, num_items, max_units, item_prob: 0.8, unit_prob: 0.65, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bids == 0 || self.num_items == 0 || self.max_units == 0 {
            return Err(Error::Config("bids, items and max units must be positive".into()));
        }
        check_probs(self.item_prob, self.unit_prob)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmConfig {
    pub num_users: usize,
    pub num_vm_types: usize,
    pub units_per_type: u32,
    /// Upper bound of a base per-type request.
    pub unit_cap: u32,
    /// Share of users of each type.
    pub type_fractions: Vec<f64>,
    /// Demand multiplier of each user type.
    pub type_factors: Vec<f64>,
    pub item_prob: f64,
    pub unit_prob: f64,
    pub seed: u64,
}

impl VmConfig {
    pub fn new(num_users: usize, seed: u64) -> Self {
        VmConfig {
            num_users,
            num_vm_types: 90,
            units_per_type: 500,
            unit_cap: 5,
            type_fractions: vec![0.10, 0.40, 0.50],
            type_factors: vec![2.0, 1.5, 1.0],
            item_prob: 0.8,
            unit_prob: 0.65,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_vm_types == 0 || self.units_per_type == 0 || self.unit_cap == 0 {
            return Err(Error::Config("users, VM types, units and unit cap must be positive".into()));
        }
        if self.type_fractions.is_empty() || self.type_fractions.len() != self.type_factors.len() {
            return Err(Error::Config("type fractions and factors must be non-empty and equally long".into()));
        }
        if self.type_fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(Error::Config("type fractions must lie in [0, 1]".into()));
        }
        let sum: f64 = self.type_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("type fractions sum to {sum}, expected 1")));
        }
        if self.type_factors.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Config("type factors must be positive".into()));
        }
        check_probs(self.item_prob, self.unit_prob)
    }

    /// Number of users of each type; the rounding remainder goes to the last type.
    pub fn type_counts(&self) -> Vec<usize> {
        let k = self.num_users;
        let mut counts: Vec<usize> = self.type_fractions[..self.type_fractions.len() - 1]
            .iter()
            .map(|&f| libm::floor(f * k as f64 + 1e-9) as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        counts.push(k.saturating_sub(assigned));
        counts
    }
}

fn check_probs(item_prob: f64, unit_prob: f64) -> Result<()> {
    if !(item_prob > 0.0 && item_prob <= 1.0) {
        return Err(Error::Config(format!("item probability {item_prob} outside (0, 1]")));
    }
    if !(unit_prob > 0.0 && unit_prob < 1.0) {
        return Err(Error::Config(format!("unit probability {unit_prob} outside (0, 1)")));
    }
    Ok(())
}

/// True when `candidate` is dominated by `other`: it asks for at least as
/// many units of every item and pays no more.
pub fn dominates(candidate: &Bid, other: &Bid) -> Result<bool> {
    if candidate.demand.len() != other.demand.len() {
        return Err(Error::Dimension { expected: other.demand.len(), found: candidate.demand.len() });
    }
    Ok(is_dominated(candidate, other))
}

fn is_dominated(candidate: &Bid, other: &Bid) -> bool {
    candidate.price <= other.price && candidate.demand.iter().zip(&other.demand).all(|(c, o)| c >= o)
}

/// Drops every bid dominated by another; of identical bids the first one stays.
pub fn prune_dominated(bids: &[Bid]) -> Vec<Bid> {
    bids.iter()
        .enumerate()
        .filter(|&(i, b)| {
            !bids.iter().enumerate().any(|(j, o)| {
                j != i
                    && o.demand.len() == b.demand.len()
                    && is_dominated(b, o)
                    && (j < i || !is_dominated(o, b))
            })
        })
        .map(|(_, b)| b.clone())
        .collect()
}

/// Draws a bundle: each item joins with `item_prob`, then gains units one at
/// a time with `unit_prob` until a draw fails or `cap[n]` is reached.
fn draw_bundle<R: Rng + ?Sized>(rng: &mut R, cap: &[u32], item_prob: f64, unit_prob: f64) -> Vec<u32> {
    cap.iter()
        .map(|&c| {
            if c == 0 || !rng.gen_bool(item_prob) {
                return 0;
            }
            let mut units = 1;
            while units < c && rng.gen_bool(unit_prob) {
                units += 1;
            }
            units
        })
        .collect()
}

/// Uniform on `(0, total]`.
fn draw_price<R: Rng + ?Sized>(rng: &mut R, total: u64) -> f64 {
    total as f64 * (1.0 - rng.gen::<f64>())
}

/// Scales a base request by a user-type factor, rounding up.
pub fn scale_demand(base: u32, factor: f64) -> u32 {
    if base == 0 {
        return 0;
    }
    libm::ceil(f64::from(base) * factor - 1e-9) as u32
}

/// Fills one bid per slot, regenerating duplicates and dominated bids and
/// evicting existing bids that a newcomer dominates.
fn fill_slots<R, F>(rng: &mut R, slots: Vec<usize>, mut draw: F) -> Result<Vec<Bid>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R, usize) -> Option<Bid>,
{
    let requested = slots.len();
    let budget = RETRY_FACTOR * requested;
    let mut pending: VecDeque<usize> = slots.into();
    let mut accepted: Vec<(usize, Bid)> = Vec::with_capacity(requested);
    let mut attempts = 0;
    while let Some(&kind) = pending.front() {
        if attempts >= budget {
            return Err(Error::GenerationExhausted { attempts, accepted: accepted.len(), requested });
        }
        attempts += 1;
        let Some(bid) = draw(rng, kind) else { continue };
        if accepted.iter().any(|(_, b)| is_dominated(&bid, b)) {
            continue;
        }
        pending.pop_front();
        accepted.retain(|(k, b)| {
            let evict = is_dominated(b, &bid);
            if evict {
                pending.push_back(*k);
            }
            !evict
        });
        accepted.push((kind, bid));
    }
    Ok(accepted.into_iter().map(|(_, b)| b).collect())
}

pub fn gen_synthetic(cfg: &SynthConfig) -> Result<AuctionInstance> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let units: Vec<u32> = (0..cfg.num_items).map(|_| rng.gen_range(1..=cfg.max_units)).collect();
    let bids = fill_slots(&mut rng, vec![0; cfg.num_bids], |rng, _| {
        let demand = draw_bundle(rng, &units, cfg.item_prob, cfg.unit_prob);
        let total: u64 = demand.iter().map(|&d| u64::from(d)).sum();
        (total > 0).then(|| Bid::new(demand, draw_price(rng, total)))
    })?;
    Ok(AuctionInstance {
        name: format!("synth-m{}-n{}-u{}-s{}", cfg.num_bids, cfg.num_items, cfg.max_units, cfg.seed),
        items: units.into_iter().map(|units| Item { units }).collect(),
        bids,
    })
}

pub fn gen_vm(cfg: &VmConfig) -> Result<AuctionInstance> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let cap = vec![cfg.unit_cap.min(cfg.units_per_type); cfg.num_vm_types];
    let slots: Vec<usize> = cfg
        .type_counts()
        .iter()
        .enumerate()
        .flat_map(|(t, &c)| core::iter::repeat(t).take(c))
        .collect();
    let bids = fill_slots(&mut rng, slots, |rng, kind| {
        let factor = cfg.type_factors[kind];
        let demand: Vec<u32> = draw_bundle(rng, &cap, cfg.item_prob, cfg.unit_prob)
            .into_iter()
            .map(|b| scale_demand(b, factor).min(cfg.units_per_type))
            .collect();
        let total: u64 = demand.iter().map(|&d| u64::from(d)).sum();
        (total > 0).then(|| Bid::new(demand, draw_price(rng, total)))
    })?;
    Ok(AuctionInstance {
        name: format!("vm-k{}-t{}-s{}", cfg.num_users, cfg.num_vm_types, cfg.seed),
        items: vec![Item { units: cfg.units_per_type }; cfg.num_vm_types],
        bids,
    })
}

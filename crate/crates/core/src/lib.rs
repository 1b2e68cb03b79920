//! Winner determination for multi-unit combinatorial auctions.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! toolkit: instance generation, an LP relaxation with dual prices, exact
//! solvers, the bid-item graph encoding, a half-convolution graph network
//! with hand-written backpropagation, training-sample generation, graph-based
//! decoding of the network output, and the classical heuristic baselines.
//!
//! File formats, the command line and wall-clock timing live in the `wdplab`
//! companion crate.
#![no_std]

extern crate alloc;

mod error;
pub mod exact;
pub mod gnn;
pub mod graph;
pub mod heuristics;
pub mod instgen;
pub mod lp;
pub mod model;
pub mod postprocess;
pub mod samples;

pub use error::{Error, Result};
pub use model::{Allocation, AuctionInstance, Bid, Evaluation, Item, MetricsRow, Residual};

/// Deterministic random number generator used throughout the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    <SeededRng as rand::SeedableRng>::seed_from_u64(seed)
}

/// Absolute tolerance used when comparing revenues.
pub const REVENUE_TOL: f64 = 1e-9;

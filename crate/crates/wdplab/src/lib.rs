//! File formats, benchmark harness and training pipeline on top of
//! `wdplab-core`.

pub mod bench;
pub mod clock;
pub mod io;
pub mod pipeline;

/// Environment variable that overrides every seed given on the command line.
pub const SEED_ENV: &str = "WDPLAB_SEED";

/// `seed`, unless `WDPLAB_SEED` holds a valid integer.
pub fn effective_seed(seed: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(seed)
}

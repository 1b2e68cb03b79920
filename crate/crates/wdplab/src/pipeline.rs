//! Generate, label, sample and train in one go.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, ensure, Result};
use log::{info, warn};
use rand::Rng;
use wdplab_core::exact::{branch_and_bound, BnbConfig};
use wdplab_core::gnn::{train_with_validation, GnnModel, LabeledGraph, TrainConfig, TrainReport};
use wdplab_core::instgen::{gen_synthetic, SynthConfig};
use wdplab_core::samples::{expand_instance_set, single_label_sample_generation, LabeledInstance, TrainingSample};
use wdplab_core::{seeded_rng, AuctionInstance, Error};

use crate::clock::WallClock;
use crate::io::save_model;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Samples from proven optima only.
    OptimumOnly,
    /// Optima plus near-optimal relabelings of every instance.
    Mix,
}

/// Solves `instance` with branch-and-bound under a wall-clock limit.
pub fn label_instance(instance: &AuctionInstance, time_limit: Duration) -> LabeledInstance {
    let res = branch_and_bound(instance, &BnbConfig::with_time_limit(time_limit), &WallClock::start());
    LabeledInstance { instance: instance.clone(), allocation: res.allocation, optimal: res.proven_optimal }
}

/// Fresh seeds drawn per instance before giving up.
pub const SEED_RETRIES: usize = 10;

/// `count` synthetic instances; per-instance seeds are drawn from `seed`.
/// Seeds whose generation runs out of attempts are skipped.
pub fn generate_instances(generator: &SynthConfig, count: usize, seed: u64) -> Result<Vec<AuctionInstance>> {
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut skipped = 0;
    while out.len() < count {
        let cfg = SynthConfig { seed: rng.gen(), ..generator.clone() };
        match gen_synthetic(&cfg) {
            Ok(inst) => out.push(inst),
            Err(e @ Error::GenerationExhausted { .. }) => {
                skipped += 1;
                if skipped > SEED_RETRIES * count.max(1) {
                    return Err(e.into());
                }
                warn!("skipping seed {}: {e}", cfg.seed);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Labels every instance, dropping those not proven optimal in time.
/// Fails when more than half are dropped.
pub fn label_all(instances: &[AuctionInstance], time_limit: Duration) -> Result<(Vec<LabeledInstance>, usize)> {
    let mut kept = Vec::with_capacity(instances.len());
    let mut dropped = 0;
    for inst in instances {
        let labeled = label_instance(inst, time_limit);
        if labeled.optimal {
            kept.push(labeled);
        } else {
            warn!("dropping {}: not proven optimal within {:?}", inst.name, time_limit);
            dropped += 1;
        }
    }
    if 2 * dropped > instances.len() {
        bail!("{dropped} of {} instances were not solved to optimality", instances.len());
    }
    Ok((kept, dropped))
}

/// Training samples from labeled instances under the given mode.
pub fn build_samples<R: Rng>(
    labeled: &[LabeledInstance],
    mode: SampleMode,
    keep_prob: f64,
    copies: usize,
    gap_threshold: f64,
    rng: &mut R,
) -> Result<(Vec<TrainingSample>, usize)> {
    let pool = match mode {
        SampleMode::OptimumOnly => labeled.to_vec(),
        SampleMode::Mix => expand_instance_set(labeled, gap_threshold, copies, rng)?,
    };
    Ok((single_label_sample_generation(&pool, keep_prob, rng)?, pool.len()))
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Instance shape; its seed is ignored in favour of derived seeds.
    pub generator: SynthConfig,
    pub train_instances: usize,
    pub valid_instances: usize,
    pub time_limit: Duration,
    pub mode: SampleMode,
    pub keep_prob: f64,
    /// Relabelings per instance in mix mode.
    pub copies: usize,
    pub gap_threshold: f64,
    pub q: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub model_out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(generator: SynthConfig, train_instances: usize, seed: u64) -> Self {
        PipelineConfig {
            generator,
            train_instances,
            valid_instances: (train_instances / 5).max(1),
            time_limit: Duration::from_secs(60),
            mode: SampleMode::OptimumOnly,
            keep_prob: 1.0,
            copies: 7,
            gap_threshold: 0.01,
            q: 16,
            train: TrainConfig { seed, ..TrainConfig::default() },
            seed,
            model_out: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub labeled: usize,
    pub dropped: usize,
    /// Instances the training samples were drawn from, after expansion.
    pub sample_pool: usize,
    /// Accepted-bid count of every labeled training instance.
    pub accepted_counts: Vec<usize>,
    pub train_samples: usize,
    pub valid_samples: usize,
    pub report: TrainReport,
}

fn graphs(samples: &[TrainingSample]) -> Vec<LabeledGraph> {
    samples.iter().map(TrainingSample::to_labeled_graph).collect()
}

pub fn pipeline_train(cfg: &PipelineConfig) -> Result<(GnnModel, PipelineSummary)> {
    ensure!(cfg.train_instances > 0, "need at least one training instance");
    let mut rng = seeded_rng(cfg.seed);
    let train_inst = generate_instances(&cfg.generator, cfg.train_instances, rng.gen())?;
    let valid_inst = generate_instances(&cfg.generator, cfg.valid_instances, rng.gen())?;

    let (train_lab, dropped_train) = label_all(&train_inst, cfg.time_limit)?;
    let (valid_lab, dropped_valid) = label_all(&valid_inst, cfg.time_limit)?;
    let dropped = dropped_train + dropped_valid;
    info!("labeled {} training and {} validation instances ({dropped} dropped)", train_lab.len(), valid_lab.len());

    let (train_samples, pool) =
        build_samples(&train_lab, cfg.mode, cfg.keep_prob, cfg.copies, cfg.gap_threshold, &mut rng)?;
    let valid_samples = single_label_sample_generation(&valid_lab, cfg.keep_prob, &mut rng)?;
    ensure!(!train_samples.is_empty(), "no training samples; every instance has fewer than two winners");
    info!("{} training and {} validation samples", train_samples.len(), valid_samples.len());

    let init = GnnModel::new(cfg.q, cfg.seed);
    let (model, report) = train_with_validation(&init, &graphs(&train_samples), &graphs(&valid_samples), &cfg.train)?;
    if let Some(path) = &cfg.model_out {
        save_model(path, &model)?;
    }
    let summary = PipelineSummary {
        labeled: train_lab.len() + valid_lab.len(),
        dropped,
        sample_pool: pool,
        accepted_counts: train_lab.iter().map(|l| l.allocation.count()).collect(),
        train_samples: train_samples.len(),
        valid_samples: valid_samples.len(),
        report,
    };
    Ok((model, summary))
}

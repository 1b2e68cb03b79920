use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::model::GnnModel;
use crate::graph::BidItemGraph;
use crate::{seeded_rng, Error, Result};

/// A normalized graph with the position of its target bid.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub graph: BidItemGraph,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    /// Adaptive moments with decay rates 0.9 / 0.999.
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Graphs per minibatch; gradients are averaged over it.
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, epochs: 100, batch_size: 32, optimizer: Optimizer::Adam, seed: 0, patience: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean loss over the epoch's minibatches, measured before each update.
    pub train: f64,
    pub valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct Adam {
    m: GnnModel,
    v: GnnModel,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(model: &GnnModel) -> Self {
        Adam { m: model.zeros_like(), v: model.zeros_like(), t: 0 }
    }

    fn step(&mut self, model: &mut GnnModel, grad: &GnnModel, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(BETA1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(BETA2, f64::from(self.t));
        let layers = model.layers_mut().into_iter().zip(grad.layers()).zip(self.m.layers_mut()).zip(self.v.layers_mut());
        for (((p, g), m), v) in layers {
            let params = p.weights.iter_mut().chain(p.bias.iter_mut());
            let grads = g.weights.iter().chain(&g.bias);
            let moments = m.weights.iter_mut().chain(m.bias.iter_mut()).zip(v.weights.iter_mut().chain(v.bias.iter_mut()));
            for ((w, &g), (m, v)) in params.zip(grads).zip(moments) {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *w -= lr * (*m / c1) / (libm::sqrt(*v / c2) + EPS);
            }
        }
    }
}

fn mean_loss(model: &GnnModel, data: &[LabeledGraph]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        total += model.loss(&s.graph, s.label)?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Trains for `cfg.epochs` epochs over shuffled minibatches.
pub fn train(model: &GnnModel, data: &[LabeledGraph], cfg: &TrainConfig) -> Result<(GnnModel, TrainReport)> {
    train_with_validation(model, data, &[], cfg)
}

/// Trains like [`train`]; with a non-empty validation set the weights of the
/// epoch with the lowest validation loss are returned and training stops
/// after `cfg.patience` epochs without improvement.
pub fn train_with_validation(
    model: &GnnModel,
    data: &[LabeledGraph],
    valid: &[LabeledGraph],
    cfg: &TrainConfig,
) -> Result<(GnnModel, TrainReport)> {
    if data.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.batch_size == 0 {
        return Err(Error::Config("learning rate and batch size must be positive".into()));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut model = model.clone();
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, GnnModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = model.zeros_like();
            for &i in batch {
                let s = &data[i];
                let loss = model.accumulate_gradients(&s.graph, s.label, &mut grad)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                epoch_loss += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            match cfg.optimizer {
                Optimizer::Sgd => model.add_scaled(&grad, -cfg.learning_rate * scale),
                Optimizer::Adam => {
                    scale_in_place(&mut grad, scale);
                    adam.step(&mut model, &grad, cfg.learning_rate);
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let train_loss = epoch_loss / data.len() as f64;
        let valid_loss = if valid.is_empty() { None } else { Some(mean_loss(&model, valid)?) };
        report.history.push(EpochLoss { epoch, train: train_loss, valid: valid_loss });

        if let Some(v) = valid_loss {
            if !v.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                best = Some((v, model.clone()));
                report.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    report.stopped_early = true;
                    break;
                }
            }
        } else {
            report.best_epoch = epoch;
        }
    }
    Ok((best.map_or(model, |(_, m)| m), report))
}

fn scale_in_place(model: &mut GnnModel, scale: f64) {
    for d in model.layers_mut() {
        d.weights.iter_mut().chain(d.bias.iter_mut()).for_each(|v| *v *= scale);
    }
}

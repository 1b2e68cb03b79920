use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::layers::{Dense, Mlp, MlpCache};
use crate::graph::BidItemGraph;
use crate::{seeded_rng, Error, Result};

/// Default embedding width.
pub const DEFAULT_WIDTH: usize = 16;

/// Half-convolution network over the bid-item graph.
///
/// Node and edge features are embedded into `q` dimensions, item nodes
/// aggregate messages from their bids, bid nodes then aggregate messages
/// from their items, and a scoring network plus a softmax over bid nodes
/// turns the bid states into a probability map.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub q: usize,
    pub bid_embed: Mlp,
    pub item_embed: Mlp,
    pub edge_embed: Mlp,
    /// Message from a bid to an item: `[bid, item, edge]` embeddings.
    pub item_message: Mlp,
    /// Item state from `[item embedding, aggregated messages]`.
    pub item_update: Mlp,
    /// Message from an item to a bid: `[item state, bid, edge]`.
    pub bid_message: Mlp,
    /// Bid state from `[bid embedding, aggregated messages]`.
    pub bid_update: Mlp,
    pub score: Mlp,
}

pub(crate) const NET_NAMES: [&str; 8] = [
    "bid_embed",
    "item_embed",
    "edge_embed",
    "item_message",
    "item_update",
    "bid_message",
    "bid_update",
    "score",
];

impl GnnModel {
    pub fn new(q: usize, seed: u64) -> Self {
        let q = q.max(1);
        let mut rng = seeded_rng(seed);
        GnnModel {
            q,
            bid_embed: Mlp::random(2, q, q, &mut rng),
            item_embed: Mlp::random(2, q, q, &mut rng),
            edge_embed: Mlp::random(1, q, q, &mut rng),
            item_message: Mlp::random(3 * q, q, q, &mut rng),
            item_update: Mlp::random(2 * q, q, q, &mut rng),
            bid_message: Mlp::random(3 * q, q, q, &mut rng),
            bid_update: Mlp::random(2 * q, q, q, &mut rng),
            score: Mlp::random(q, q, 1, &mut rng),
        }
    }

    /// A model of the same shape with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for d in z.layers_mut() {
            d.weights.fill(0.0);
            d.bias.fill(0.0);
        }
        z
    }

    pub fn nets(&self) -> [&Mlp; 8] {
        [
            &self.bid_embed,
            &self.item_embed,
            &self.edge_embed,
            &self.item_message,
            &self.item_update,
            &self.bid_message,
            &self.bid_update,
            &self.score,
        ]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp; 8] {
        [
            &mut self.bid_embed,
            &mut self.item_embed,
            &mut self.edge_embed,
            &mut self.item_message,
            &mut self.item_update,
            &mut self.bid_message,
            &mut self.bid_update,
            &mut self.score,
        ]
    }

    /// All affine layers in a fixed order.
    pub fn layers(&self) -> Vec<&Dense> {
        self.nets().into_iter().flat_map(|n| [&n.hidden, &n.output]).collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        self.nets_mut().into_iter().flat_map(|n| [&mut n.hidden, &mut n.output]).collect()
    }

    /// Layer names matching [`GnnModel::layers`].
    pub fn layer_names() -> Vec<String> {
        NET_NAMES.iter().flat_map(|n| [format!("{n}.0"), format!("{n}.1")]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|d| d.weights.len() + d.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|d| d.weights.iter().chain(&d.bias).all(|v| v.is_finite()))
    }

    /// Adds `scale * other` to every parameter.
    pub fn add_scaled(&mut self, other: &GnnModel, scale: f64) {
        for (d, o) in self.layers_mut().into_iter().zip(other.layers()) {
            for (w, g) in d.weights.iter_mut().zip(&o.weights) {
                *w += scale * g;
            }
            for (b, g) in d.bias.iter_mut().zip(&o.bias) {
                *b += scale * g;
            }
        }
    }

    /// Probability of every bid node of a normalized graph.
    pub fn forward(&self, graph: &BidItemGraph) -> Result<Vec<f64>> {
        Ok(self.run(graph)?.probs)
    }

    /// Cross-entropy loss `-ln p[label]` and its exact gradient.
    pub fn loss_and_gradients(&self, graph: &BidItemGraph, label: usize) -> Result<(f64, GnnModel)> {
        let mut grad = self.zeros_like();
        let loss = self.accumulate_gradients(graph, label, &mut grad)?;
        Ok((loss, grad))
    }

    /// Like [`GnnModel::loss_and_gradients`] but adds into `grad`.
    pub fn accumulate_gradients(&self, graph: &BidItemGraph, label: usize, grad: &mut GnnModel) -> Result<f64> {
        if label >= graph.num_bids() {
            return Err(Error::Contract(format!("label {label} out of range ({} bids)", graph.num_bids())));
        }
        let pass = self.run(graph)?;
        let loss = -pass.log_probs[label];
        self.backward(graph, &pass, label, grad);
        Ok(loss)
    }

    pub fn loss(&self, graph: &BidItemGraph, label: usize) -> Result<f64> {
        if label >= graph.num_bids() {
            return Err(Error::Contract(format!("label {label} out of range ({} bids)", graph.num_bids())));
        }
        Ok(-self.run(graph)?.log_probs[label])
    }

    fn run(&self, g: &BidItemGraph) -> Result<Pass> {
        if !g.normalized {
            return Err(Error::Contract("graph features must be normalized".into()));
        }
        if g.num_bids() == 0 || g.num_items() == 0 {
            return Err(Error::Contract("graph needs at least one bid and one item node".into()));
        }
        let q = self.q;
        let (mb, ni, ne) = (g.num_bids(), g.num_items(), g.edges.len());

        let xb: Vec<f64> = g.bids.iter().flat_map(|b| b.features).collect();
        let xi: Vec<f64> = g.items.iter().flat_map(|i| i.features).collect();
        let xe: Vec<f64> = g.edges.iter().map(|e| e.feature).collect();
        let (eb, eb_c) = self.bid_embed.forward(&xb, mb);
        let (ei, ei_c) = self.item_embed.forward(&xi, ni);
        let (ee, ee_c) = self.edge_embed.forward(&xe, ne);

        // item side
        let mut in1 = Vec::with_capacity(ne * 3 * q);
        for (k, e) in g.edges.iter().enumerate() {
            in1.extend_from_slice(&eb[e.bid * q..(e.bid + 1) * q]);
            in1.extend_from_slice(&ei[e.item * q..(e.item + 1) * q]);
            in1.extend_from_slice(&ee[k * q..(k + 1) * q]);
        }
        let (msg1, msg1_c) = self.item_message.forward(&in1, ne);
        let mut hi = vec![0.0; ni * q];
        for (k, e) in g.edges.iter().enumerate() {
            add_into(&mut hi[e.item * q..(e.item + 1) * q], &msg1[k * q..(k + 1) * q]);
        }
        let in2 = concat_rows(&ei, &hi, q, ni);
        let (oi, oi_c) = self.item_update.forward(&in2, ni);

        // bid side
        let mut in3 = Vec::with_capacity(ne * 3 * q);
        for (k, e) in g.edges.iter().enumerate() {
            in3.extend_from_slice(&oi[e.item * q..(e.item + 1) * q]);
            in3.extend_from_slice(&eb[e.bid * q..(e.bid + 1) * q]);
            in3.extend_from_slice(&ee[k * q..(k + 1) * q]);
        }
        let (msg2, msg2_c) = self.bid_message.forward(&in3, ne);
        let mut hb = vec![0.0; mb * q];
        for (k, e) in g.edges.iter().enumerate() {
            add_into(&mut hb[e.bid * q..(e.bid + 1) * q], &msg2[k * q..(k + 1) * q]);
        }
        let in4 = concat_rows(&eb, &hb, q, mb);
        let (ob, ob_c) = self.bid_update.forward(&in4, mb);
        let (logits, score_c) = self.score.forward(&ob, mb);

        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + libm::log(logits.iter().map(|&s| libm::exp(s - max)).sum::<f64>());
        let log_probs: Vec<f64> = logits.iter().map(|&s| s - log_z).collect();
        let probs = log_probs.iter().map(|&l| libm::exp(l)).collect();

        Ok(Pass {
            xb,
            xi,
            xe,
            eb_c,
            ei_c,
            ee_c,
            in1,
            msg1_c,
            in2,
            oi_c,
            in3,
            msg2_c,
            in4,
            ob,
            ob_c,
            score_c,
            log_probs,
            probs,
        })
    }

    fn backward(&self, g: &BidItemGraph, p: &Pass, label: usize, grad: &mut GnnModel) {
        let q = self.q;
        let (mb, ni, ne) = (g.num_bids(), g.num_items(), g.edges.len());

        let mut dlogits = p.probs.clone();
        dlogits[label] -= 1.0;
        let dob = self.score.backward(&p.ob, &p.score_c, &dlogits, &mut grad.score, true);
        let din4 = self.bid_update.backward(&p.in4, &p.ob_c, &dob, &mut grad.bid_update, true);
        let mut deb = vec![0.0; mb * q];
        let mut dhb = vec![0.0; mb * q];
        split_rows(&din4, q, &mut deb, &mut dhb);

        let mut dmsg2 = vec![0.0; ne * q];
        for (k, e) in g.edges.iter().enumerate() {
            dmsg2[k * q..(k + 1) * q].copy_from_slice(&dhb[e.bid * q..(e.bid + 1) * q]);
        }
        let din3 = self.bid_message.backward(&p.in3, &p.msg2_c, &dmsg2, &mut grad.bid_message, true);
        let mut doi = vec![0.0; ni * q];
        let mut dee = vec![0.0; ne * q];
        for (k, e) in g.edges.iter().enumerate() {
            let row = &din3[k * 3 * q..(k + 1) * 3 * q];
            add_into(&mut doi[e.item * q..(e.item + 1) * q], &row[..q]);
            add_into(&mut deb[e.bid * q..(e.bid + 1) * q], &row[q..2 * q]);
            add_into(&mut dee[k * q..(k + 1) * q], &row[2 * q..]);
        }

        let din2 = self.item_update.backward(&p.in2, &p.oi_c, &doi, &mut grad.item_update, true);
        let mut dei = vec![0.0; ni * q];
        let mut dhi = vec![0.0; ni * q];
        split_rows(&din2, q, &mut dei, &mut dhi);

        let mut dmsg1 = vec![0.0; ne * q];
        for (k, e) in g.edges.iter().enumerate() {
            dmsg1[k * q..(k + 1) * q].copy_from_slice(&dhi[e.item * q..(e.item + 1) * q]);
        }
        let din1 = self.item_message.backward(&p.in1, &p.msg1_c, &dmsg1, &mut grad.item_message, true);
        for (k, e) in g.edges.iter().enumerate() {
            let row = &din1[k * 3 * q..(k + 1) * 3 * q];
            add_into(&mut deb[e.bid * q..(e.bid + 1) * q], &row[..q]);
            add_into(&mut dei[e.item * q..(e.item + 1) * q], &row[q..2 * q]);
            add_into(&mut dee[k * q..(k + 1) * q], &row[2 * q..]);
        }

        self.bid_embed.backward(&p.xb, &p.eb_c, &deb, &mut grad.bid_embed, false);
        self.item_embed.backward(&p.xi, &p.ei_c, &dei, &mut grad.item_embed, false);
        self.edge_embed.backward(&p.xe, &p.ee_c, &dee, &mut grad.edge_embed, false);
    }
}

/// Everything the backward pass needs from a forward pass.
struct Pass {
    xb: Vec<f64>,
    xi: Vec<f64>,
    xe: Vec<f64>,
    eb_c: MlpCache,
    ei_c: MlpCache,
    ee_c: MlpCache,
    in1: Vec<f64>,
    msg1_c: MlpCache,
    in2: Vec<f64>,
    oi_c: MlpCache,
    in3: Vec<f64>,
    msg2_c: MlpCache,
    in4: Vec<f64>,
    ob: Vec<f64>,
    ob_c: MlpCache,
    score_c: MlpCache,
    log_probs: Vec<f64>,
    probs: Vec<f64>,
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn concat_rows(a: &[f64], b: &[f64], q: usize, rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * 2 * q);
    for r in 0..rows {
        out.extend_from_slice(&a[r * q..(r + 1) * q]);
        out.extend_from_slice(&b[r * q..(r + 1) * q]);
    }
    out
}

/// Adds the two halves of each `2q` row into `left` and `right`.
fn split_rows(src: &[f64], q: usize, left: &mut [f64], right: &mut [f64]) {
    for (r, row) in src.chunks_exact(2 * q).enumerate() {
        add_into(&mut left[r * q..(r + 1) * q], &row[..q]);
        add_into(&mut right[r * q..(r + 1) * q], &row[q..]);
    }
}

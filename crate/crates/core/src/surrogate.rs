//! Fitness regression over body graphs and uncertainty-aware pruning.
//!
//! The regressor sees only node attributes. It embeds them, runs a few
//! rounds of GRU message passing, mean-pools, and reads out through a
//! two-layer perceptron with dropout on both perceptron inputs. Pruning
//! with one sampled dropout mask is a cheap Thompson sample from the
//! model's posterior.

use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Backend, Eval, Tape};
use crate::morphology::{AttrSpace, MorphGraph, ATTR_DIM};
use crate::nervenet::gru_cell;
use crate::params::{orthogonal, scaled_uniform, Adam, AdamConfig, Tensor};
use crate::util::{fmt_f64, spearman};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub d_h: usize,
    /// Attribute embedding width.
    pub d_emb: usize,
    pub t_prop: usize,
    /// Hidden width of the readout perceptron.
    pub d_fc: usize,
    pub dropout: f64,
    pub epochs: usize,
    /// Samples drawn per epoch.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Softmax temperature for sampling survivors instead of taking the top
    /// K. `None` keeps plain top-K.
    pub pruning_temperature: Option<f64>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            d_h: 32,
            d_emb: 16,
            t_prop: 3,
            d_fc: 32,
            dropout: 0.5,
            epochs: 100,
            batch_size: 32,
            learning_rate: 3e-3,
            pruning_temperature: None,
        }
    }
}

impl SurrogateConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.d_h == 0 || self.d_emb == 0 || self.d_fc == 0 || self.t_prop == 0 || self.batch_size == 0 {
            return Err("surrogate widths, t_prop and batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err("dropout: must lie in [0, 1)".into());
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate: must be positive".into());
        }
        if let Some(t) = self.pruning_temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err("pruning_temperature: must be positive".into());
            }
        }
        Ok(())
    }

    fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (h, e, f) = (self.d_h, self.d_emb, self.d_fc);
        let i = h + e;
        vec![
            ("emb_w1", vec![e, ATTR_DIM]),
            ("emb_b1", vec![e]),
            ("emb_w2", vec![e, e]),
            ("emb_b2", vec![e]),
            ("msg_w", vec![h, h]),
            ("msg_b", vec![h]),
            ("gru_wz", vec![h, i]),
            ("gru_uz", vec![h, h]),
            ("gru_bz", vec![h]),
            ("gru_wr", vec![h, i]),
            ("gru_ur", vec![h, h]),
            ("gru_br", vec![h]),
            ("gru_wn", vec![h, i]),
            ("gru_un", vec![h, h]),
            ("gru_bn", vec![h]),
            ("gru_bhn", vec![h]),
            ("fc1_w", vec![f, h]),
            ("fc1_b", vec![f]),
            ("fc2_w", vec![1, f]),
            ("fc2_b", vec![1]),
        ]
    }
}

/// Multipliers for the two perceptron inputs. Sampled masks hold `0` or
/// `1/(1-p)`; all-ones is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutMask {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl DropoutMask {
    pub fn ones(cfg: &SurrogateConfig) -> Self {
        DropoutMask { pooled: vec![1.0; cfg.d_h], hidden: vec![1.0; cfg.d_fc] }
    }

    pub fn sample<R: Rng + ?Sized>(cfg: &SurrogateConfig, rng: &mut R) -> Self {
        let p = cfg.dropout;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if p > 0.0 && rng.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) }).collect()
        };
        let pooled = draw(cfg.d_h);
        let hidden = draw(cfg.d_fc);
        DropoutMask { pooled, hidden }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub graph: MorphGraph,
    #[serde(with = "crate::util::any_f64")]
    pub fitness: f64,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub cfg: SurrogateConfig,
    pub space: AttrSpace,
    pub tensors: Vec<Tensor>,
    pub adam: Option<Adam>,
    /// Predictions are `target_mean + target_scale · net(graph)`.
    pub target_mean: f64,
    pub target_scale: f64,
    pub dataset: Vec<DataPoint>,
}

impl SurrogateModel {
    /// All-zero weights.
    pub fn zeros(cfg: SurrogateConfig, space: AttrSpace) -> Self {
        let tensors = cfg.layout().iter().map(|(n, s)| Tensor::zeros(n, s)).collect();
        SurrogateModel { cfg, space, tensors, adam: None, target_mean: 0.0, target_scale: 1.0, dataset: Vec::new() }
    }

    pub fn new<R: Rng + ?Sized>(cfg: SurrogateConfig, space: AttrSpace, rng: &mut R) -> Self {
        let mut m = SurrogateModel::zeros(cfg, space);
        for t in &mut m.tensors {
            let (rows, cols) = (t.shape[0], t.shape.get(1).copied().unwrap_or(1));
            match t.name.as_str() {
                "gru_wz" | "gru_wr" | "gru_wn" | "gru_uz" | "gru_ur" | "gru_un" => orthogonal(t, rows, cols, 1.0, rng),
                name if name.ends_with("_w") || name.contains("_w1") || name.contains("_w2") => {
                    scaled_uniform(t, cols, 1.0, rng)
                }
                _ => {}
            }
        }
        m
    }

    /// Records observed fitness values. Non-finite values are kept in the
    /// log but never trained on.
    pub fn add_observations(&mut self, points: impl IntoIterator<Item = DataPoint>) {
        self.dataset.extend(points);
    }

    fn trainable(&self) -> Vec<&DataPoint> {
        self.dataset.iter().filter(|d| d.fitness.is_finite()).collect()
    }
}

fn forward<B: Backend>(
    b: &mut B,
    cfg: &SurrogateConfig,
    p: &[B::V],
    space: &AttrSpace,
    graph: &MorphGraph,
    mask: Option<&DropoutMask>,
) -> B::V {
    let n = graph.len();
    let mut index = std::collections::HashMap::with_capacity(n);
    for (k, node) in graph.nodes.iter().enumerate() {
        index.insert(node.id, k);
    }
    let mut neighbors = vec![Vec::new(); n];
    for &(u, v) in &graph.edges {
        let (u, v) = (index[&u], index[&v]);
        neighbors[u].push(v);
        neighbors[v].push(u);
    }
    let x: Vec<B::V> = graph
        .nodes
        .iter()
        .map(|node| {
            let a = b.constant(&space.normalize(&node.attr));
            let h = b.affine(&p[0], &p[1], &a);
            let h = b.tanh(&h);
            b.affine(&p[2], &p[3], &h)
        })
        .collect();
    let mut h: Vec<B::V> = (0..n).map(|_| b.zeros(cfg.d_h)).collect();
    for _ in 0..cfg.t_prop {
        let msgs: Vec<B::V> = h.iter().map(|hv| b.affine(&p[4], &p[5], hv)).collect();
        let mut next = Vec::with_capacity(n);
        for u in 0..n {
            let r = if neighbors[u].is_empty() {
                b.zeros(cfg.d_h)
            } else {
                let parts: Vec<B::V> = neighbors[u].iter().map(|&v| msgs[v].clone()).collect();
                b.sum_n(&parts)
            };
            let input = b.concat(&[r, x[u].clone()]);
            next.push(gru_cell(b, &p[6..16], cfg.d_h, &h[u], &input));
        }
        h = next;
    }
    let mut pooled = b.mean_n(&h);
    if let Some(m) = mask {
        let c = b.constant(&m.pooled);
        pooled = b.mul(&pooled, &c);
    }
    let z = b.affine(&p[16], &p[17], &pooled);
    let mut z = b.tanh(&z);
    if let Some(m) = mask {
        let c = b.constant(&m.hidden);
        z = b.mul(&z, &c);
    }
    b.affine(&p[18], &p[19], &z)
}

/// Predicted fitness of `graph`, optionally under a dropout mask.
pub fn predict(model: &SurrogateModel, graph: &MorphGraph, mask: Option<&DropoutMask>) -> f64 {
    let p: Vec<Vec<f64>> = model.tensors.iter().map(|t| t.data.clone()).collect();
    predict_loaded(model, &p, graph, mask)
}

fn predict_loaded(model: &SurrogateModel, p: &[Vec<f64>], graph: &MorphGraph, mask: Option<&DropoutMask>) -> f64 {
    let out = forward(&mut Eval, &model.cfg, p, &model.space, graph, mask);
    model.target_mean + model.target_scale * out[0]
}

/// Scores every candidate under the same (optional) mask.
pub fn predict_all(model: &SurrogateModel, graphs: &[MorphGraph], mask: Option<&DropoutMask>) -> Vec<f64> {
    let p: Vec<Vec<f64>> = model.tensors.iter().map(|t| t.data.clone()).collect();
    graphs.par_iter().map(|g| predict_loaded(model, &p, g, mask)).collect()
}

/// Trains on the recorded dataset for `epochs` epochs, warm-starting from
/// the current weights. Each epoch takes one optimizer step on a random
/// subset of at most `batch_size` points with fresh dropout masks.
///
/// Returns each epoch's batch loss (dropout active, fitness units), taken
/// before that epoch's step.
pub fn fit<R: Rng + ?Sized>(model: &mut SurrogateModel, epochs: usize, rng: &mut R) -> Vec<f64> {
    let data: Vec<(MorphGraph, f64)> = model.trainable().into_iter().map(|d| (d.graph.clone(), d.fitness)).collect();
    if data.is_empty() {
        return Vec::new();
    }
    let n = data.len();
    let mean = data.iter().map(|d| d.1).sum::<f64>() / n as f64;
    let var = data.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / n as f64;
    model.target_mean = mean;
    model.target_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let mut curve = Vec::with_capacity(epochs);
    let mut tape = Tape::new();
    let adam_cfg = AdamConfig::default();
    for _ in 0..epochs {
        let k = model.cfg.batch_size.min(n);
        let batch = index::sample(rng, n, k).into_vec();
        tape.clear();
        let vars: Vec<_> = model.tensors.iter().map(|t| tape.param(&t.data)).collect();
        let mut terms = Vec::with_capacity(k);
        for &i in &batch {
            let mask = DropoutMask::sample(&model.cfg, rng);
            let out = forward(&mut tape, &model.cfg, &vars, &model.space, &data[i].0, Some(&mask));
            let y = (data[i].1 - model.target_mean) / model.target_scale;
            let err = tape.offset(&out, -y);
            terms.push(tape.square(&err));
        }
        let sum = tape.sum_n(&terms);
        let loss = tape.scale(&sum, 1.0 / k as f64);
        curve.push(tape.scalar(&loss) * model.target_scale.powi(2));
        let g = tape.backward(loss);
        let grads: Vec<Vec<f64>> = vars.iter().map(|&v| g.of(v).to_vec()).collect();
        if grads.iter().flatten().all(|x| x.is_finite()) {
            let lr = model.cfg.learning_rate;
            let adam = model.adam.get_or_insert_with(|| Adam::new(&model.tensors));
            adam.step(&adam_cfg, lr, &mut model.tensors, &grads);
        }
    }
    curve
}

/// Dropout-free mean squared error on the most recent `batch_size`
/// observations.
pub fn monitor_loss(model: &SurrogateModel) -> f64 {
    let data = model.trainable();
    let recent = &data[data.len().saturating_sub(model.cfg.batch_size)..];
    if recent.is_empty() {
        return f64::NAN;
    }
    let p: Vec<Vec<f64>> = model.tensors.iter().map(|t| t.data.clone()).collect();
    recent.iter().map(|d| (predict_loaded(model, &p, &d.graph, None) - d.fitness).powi(2)).sum::<f64>()
        / recent.len() as f64
}

/// Outcome of a pruning event.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    /// Kept candidate indices, ascending.
    pub selected: Vec<usize>,
    pub scores: Vec<f64>,
    /// The single mask shared by every candidate, if any.
    pub mask: Option<DropoutMask>,
}

/// Indices of the `keep` highest scores, ties to the lower index, returned
/// in ascending order.
pub fn top_k(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = order.into_iter().take(keep).collect();
    out.sort_unstable();
    out
}

/// Samples `keep` distinct indices without replacement with probability
/// proportional to `exp(z / temperature)`, `z` being standardized scores.
pub fn softmax_sample<R: Rng + ?Sized>(scores: &[f64], keep: usize, temperature: f64, rng: &mut R) -> Vec<usize> {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    let mut logits: Vec<f64> = scores.iter().map(|s| (s - mean) / sd / temperature).collect();
    let mut out = Vec::with_capacity(keep);
    for _ in 0..keep.min(scores.len()) {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut x = rng.random::<f64>() * total;
        let mut pick = w.iter().rposition(|&v| v > 0.0).unwrap();
        for (i, &v) in w.iter().enumerate() {
            if v > 0.0 && x < v {
                pick = i;
                break;
            }
            x -= v;
        }
        out.push(pick);
        logits[pick] = f64::NEG_INFINITY;
    }
    out.sort_unstable();
    out
}

pub fn prune_greedy(model: &SurrogateModel, candidates: &[MorphGraph], keep: usize) -> Pruned {
    assert!(keep <= candidates.len());
    let scores = predict_all(model, candidates, None);
    Pruned { selected: top_k(&scores, keep), scores, mask: None }
}

/// Draws one dropout mask, scores every candidate under it and keeps the
/// best `keep` (or samples them, when a temperature is configured).
pub fn prune_thompson<R: Rng + ?Sized>(
    model: &SurrogateModel,
    candidates: &[MorphGraph],
    keep: usize,
    rng: &mut R,
) -> Pruned {
    assert!(keep <= candidates.len());
    let mask = DropoutMask::sample(&model.cfg, rng);
    let scores = predict_all(model, candidates, Some(&mask));
    let selected = match model.cfg.pruning_temperature {
        Some(t) => softmax_sample(&scores, keep, t, rng),
        None => top_k(&scores, keep),
    };
    Pruned { selected, scores, mask: Some(mask) }
}

/// Rank correlation between predictions and observed fitness over
/// `points`, ignoring non-finite observations.
pub fn heldout_spearman(model: &SurrogateModel, points: &[DataPoint]) -> f64 {
    let finite: Vec<&DataPoint> = points.iter().filter(|d| d.fitness.is_finite()).collect();
    let graphs: Vec<MorphGraph> = finite.iter().map(|d| d.graph.clone()).collect();
    let pred = predict_all(model, &graphs, None);
    let truth: Vec<f64> = finite.iter().map(|d| d.fitness).collect();
    spearman(&pred, &truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateRow {
    pub generation: usize,
    #[serde(with = "crate::util::any_f64")]
    pub train_loss: f64,
    #[serde(with = "crate::util::any_f64")]
    pub heldout_spearman: f64,
}

pub fn write_surrogate_rows<W: Write>(mut w: W, rows: &[SurrogateRow]) -> std::io::Result<()> {
    writeln!(w, "generation,train_loss,heldout_spearman")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.generation, fmt_f64(r.train_loss), fmt_f64(r.heldout_spearman))?;
    }
    Ok(())
}

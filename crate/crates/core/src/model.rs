//! Graph autoencoder over the communication multigraph.
//!
//! The encoder stacks relational graph convolutions whose per-relation
//! weights are block-diagonal; the decoder is a DistMult bilinear form with a
//! diagonal matrix per relation. Both are trained jointly by minimizing the
//! negative-sampling cross-entropy with full-batch Adam. With zero
//! convolution layers the encoder is the identity on the free embedding table
//! and the model reduces to plain DistMult.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Triplet, TripletDataset, Vocab};
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::numeric::{dropout_mask, glorot_init, log_sigmoid, sigmoid, BlockDiagonal, Matrix, Rng};
use crate::optim::Adam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Two relational graph convolution layers feeding the DistMult decoder.
    Rgcn,
    /// Free embeddings fed straight to the decoder.
    DistMult,
}

impl Method {
    pub fn num_layers(self) -> usize {
        match self {
            Method::Rgcn => 2,
            Method::DistMult => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rgcn => "rgcn",
            Method::DistMult => "distmult",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgcn" => Ok(Method::Rgcn),
            "distmult" => Ok(Method::DistMult),
            other => Err(Error::Argument(format!("unknown model method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub method: Method,
    pub hidden_dim: usize,
    pub block_size: usize,
    pub dropout_rate: f64,
    pub l2_weight: f64,
    pub learning_rate: f64,
    pub negative_rate: usize,
    pub epochs: usize,
    pub seed: u64,
}

pub const DEFAULT_EPOCHS: usize = 400;
pub const DEFAULT_SEED: u64 = 42;

impl HyperParams {
    /// Tuned R-GCN settings: d = 100, blocks of 10, dropout 0.2, l2 0, lr 0.01, ω = 10.
    pub fn rgcn() -> Self {
        HyperParams {
            method: Method::Rgcn,
            hidden_dim: 100,
            block_size: 10,
            dropout_rate: 0.2,
            l2_weight: 0.0,
            learning_rate: 0.01,
            negative_rate: 10,
            epochs: DEFAULT_EPOCHS,
            seed: DEFAULT_SEED,
        }
    }

    /// Tuned DistMult settings: d = 50, l2 0.01, lr 0.02, ω = 10.
    pub fn distmult() -> Self {
        HyperParams {
            method: Method::DistMult,
            hidden_dim: 50,
            block_size: 10,
            dropout_rate: 0.0,
            l2_weight: 0.01,
            learning_rate: 0.02,
            negative_rate: 10,
            epochs: DEFAULT_EPOCHS,
            seed: DEFAULT_SEED,
        }
    }

    pub fn defaults_for(method: Method) -> Self {
        match method {
            Method::Rgcn => Self::rgcn(),
            Method::DistMult => Self::distmult(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.method.num_layers()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        if self.block_size == 0 || self.hidden_dim % self.block_size != 0 {
            return bad(format!(
                "block_size {} must divide hidden_dim {}",
                self.block_size, self.hidden_dim
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad(format!("l2_weight {} must be non-negative", self.l2_weight));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.negative_rate == 0 {
            return bad("negative_rate must be positive".into());
        }
        Ok(())
    }
}

/// One relational graph convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub relation_weights: Vec<BlockDiagonal>,
    pub self_loop: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    /// Layer-0 node features, |V| × d.
    pub input: Matrix,
    pub layers: Vec<LayerParams>,
    /// Diagonal of R_p for every relation, |R| × d.
    pub relations: Matrix,
}

impl ModelParameters {
    pub fn init(num_nodes: usize, num_relations: usize, hp: &HyperParams, rng: &mut Rng) -> Self {
        let d = hp.hidden_dim;
        let b = hp.block_size;
        let input = glorot_init(num_nodes, d, rng);
        let layers = (0..hp.num_layers())
            .map(|_| LayerParams {
                relation_weights: (0..num_relations)
                    .map(|_| {
                        BlockDiagonal::new((0..d / b).map(|_| glorot_init(b, b, rng)).collect())
                            .expect("blocks are uniform")
                    })
                    .collect(),
                self_loop: glorot_init(d, d, rng),
            })
            .collect();
        let relations = glorot_init(num_relations, d, rng);
        ModelParameters {
            input,
            layers,
            relations,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        ModelParameters {
            input: Matrix::zeros(self.input.rows(), self.input.cols()),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    relation_weights: l
                        .relation_weights
                        .iter()
                        .map(|w| BlockDiagonal::zeros(w.dim(), w.block_size()))
                        .collect(),
                    self_loop: Matrix::zeros(l.self_loop.rows(), l.self_loop.cols()),
                })
                .collect(),
            relations: Matrix::zeros(self.relations.rows(), self.relations.cols()),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.input.cols()
    }

    pub fn num_nodes(&self) -> usize {
        self.input.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.rows()
    }

    /// Visit every parameter slice in a fixed order: input table, then each
    /// layer's relation blocks and self-loop, then relation diagonals.
    pub fn for_each_slice(&self, mut f: impl FnMut(&[f64])) {
        f(self.input.data());
        for layer in &self.layers {
            for w in &layer.relation_weights {
                for block in w.blocks() {
                    f(block.data());
                }
            }
            f(layer.self_loop.data());
        }
        f(self.relations.data());
    }

    pub fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(self.input.data_mut());
        for layer in &mut self.layers {
            for w in &mut layer.relation_weights {
                for block in w.blocks_mut() {
                    f(block.data_mut());
                }
            }
            f(layer.self_loop.data_mut());
        }
        f(self.relations.data_mut());
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_slice(|s| n += s.len());
        n
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_slice(|s| out.extend_from_slice(s));
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Argument(format!(
                "flat parameter vector has {} entries, expected {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        self.for_each_slice_mut(|s| {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_slice(|s| {
            for x in s {
                acc += x * x;
            }
        });
        acc
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_slice(|s| ok &= s.iter().all(|x| x.is_finite()));
        ok
    }
}

/// Training-mode feature dropout.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

struct LayerTrace {
    masked: Matrix,
    mask: Option<Matrix>,
    /// Per node, the normalized neighbor sum for each non-empty relation
    /// group, aligned with `MultiGraph::relation_neighbors`.
    aggregates: Vec<Vec<Vec<f64>>>,
    pre_activation: Matrix,
    relu: bool,
}

fn layer_forward(
    graph: &MultiGraph,
    layer: &LayerParams,
    input: &Matrix,
    mask: Option<Matrix>,
    relu: bool,
) -> (Matrix, LayerTrace) {
    let masked = match &mask {
        Some(m) => input.hadamard(m).expect("mask shape matches features"),
        None => input.clone(),
    };
    let n = input.rows();
    let d = input.cols();
    let mut z = Matrix::zeros(n, layer.self_loop.rows());
    let mut aggregates = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = layer.self_loop.matvec(masked.row(i));
        let groups = graph.relation_neighbors(i);
        let mut node_aggs = Vec::with_capacity(groups.len());
        for group in groups {
            let inv = 1.0 / group.nodes.len() as f64;
            let mut m = vec![0.0; d];
            for &j in &group.nodes {
                for (x, &h) in m.iter_mut().zip(masked.row(j)) {
                    *x += h;
                }
            }
            for x in &mut m {
                *x *= inv;
            }
            layer.relation_weights[group.relation].apply_add(&m, 1.0, &mut acc);
            node_aggs.push(m);
        }
        z.row_mut(i).copy_from_slice(&acc);
        aggregates.push(node_aggs);
    }
    let out = if relu { z.map(crate::numeric::relu) } else { z.clone() };
    (
        out,
        LayerTrace {
            masked,
            mask,
            aggregates,
            pre_activation: z,
            relu,
        },
    )
}

/// Accumulates parameter gradients into `grad` and returns the gradient with
/// respect to the layer's (unmasked) input features.
fn layer_backward(
    graph: &MultiGraph,
    layer: &LayerParams,
    trace: &LayerTrace,
    grad_out: &Matrix,
    grad: &mut LayerParams,
) -> Matrix {
    let n = grad_out.rows();
    let d = trace.masked.cols();
    let dz = if trace.relu {
        let mut dz = grad_out.clone();
        for (g, &z) in dz.data_mut().iter_mut().zip(trace.pre_activation.data()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        dz
    } else {
        grad_out.clone()
    };
    let mut d_masked = Matrix::zeros(n, d);
    let mut dm = vec![0.0; d];
    for i in 0..n {
        let dzi = dz.row(i);
        grad.self_loop.add_outer(dzi, trace.masked.row(i), 1.0);
        layer.self_loop.matvec_transposed_add(dzi, d_masked.row_mut(i));
        for (group, m) in graph.relation_neighbors(i).iter().zip(&trace.aggregates[i]) {
            grad.relation_weights[group.relation].add_outer(dzi, m, 1.0);
            dm.iter_mut().for_each(|x| *x = 0.0);
            layer.relation_weights[group.relation].apply_transposed_add(dzi, &mut dm);
            let inv = 1.0 / group.nodes.len() as f64;
            for &j in &group.nodes {
                for (x, &g) in d_masked.row_mut(j).iter_mut().zip(&dm) {
                    *x += inv * g;
                }
            }
        }
    }
    match &trace.mask {
        Some(mask) => d_masked.hadamard(mask).expect("mask shape matches features"),
        None => d_masked,
    }
}

fn forward(
    graph: &MultiGraph,
    params: &ModelParameters,
    mut dropout: Option<Dropout<'_>>,
) -> Result<(Matrix, Vec<LayerTrace>)> {
    if graph.num_nodes() != params.num_nodes() || graph.num_relations() != params.num_relations() {
        return Err(Error::Argument(format!(
            "parameters sized for {} nodes / {} relations, graph has {} / {}",
            params.num_nodes(),
            params.num_relations(),
            graph.num_nodes(),
            graph.num_relations()
        )));
    }
    let mut h = params.input.clone();
    let mut traces = Vec::with_capacity(params.layers.len());
    let last = params.layers.len().saturating_sub(1);
    for (l, layer) in params.layers.iter().enumerate() {
        let mask = match dropout.as_mut() {
            Some(dp) if dp.rate > 0.0 => Some(dropout_mask(h.rows(), h.cols(), dp.rate, dp.rng)?),
            _ => None,
        };
        let (out, trace) = layer_forward(graph, layer, &h, mask, l < last);
        traces.push(trace);
        h = out;
    }
    Ok((h, traces))
}

/// Node embeddings: relu on hidden layers, identity on the last. Dropout is
/// applied to each layer's input features when `dropout` is given.
pub fn encode(graph: &MultiGraph, params: &ModelParameters, dropout: Option<Dropout<'_>>) -> Result<Matrix> {
    forward(graph, params, dropout).map(|(h, _)| h)
}

/// DistMult score Σₖ e_s[k]·r_p[k]·e_c[k]; the endpoint product is formed
/// first so that swapping `e_s` and `e_c` gives the identical bits.
pub fn score(e_s: &[f64], r_p: &[f64], e_c: &[f64]) -> Result<f64> {
    if e_s.len() != r_p.len() || e_c.len() != r_p.len() {
        return Err(Error::Argument(format!(
            "score vectors have lengths {}, {}, {}",
            e_s.len(),
            r_p.len(),
            e_c.len()
        )));
    }
    Ok(score_unchecked(e_s, r_p, e_c))
}

#[inline]
pub(crate) fn score_unchecked(e_s: &[f64], r_p: &[f64], e_c: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..r_p.len() {
        acc += (e_s[k] * e_c[k]) * r_p[k];
    }
    acc
}

/// `count` corruptions of `positive`: a fair coin picks subject or object,
/// which is replaced by a uniform node different from the original one.
pub fn sample_negatives(positive: Triplet, count: usize, num_nodes: usize, rng: &mut Rng) -> Vec<Triplet> {
    assert!(num_nodes >= 2, "negative sampling needs at least two nodes");
    (0..count)
        .map(|_| {
            let corrupt_subject = rng.coin();
            let original = if corrupt_subject { positive.server } else { positive.client };
            let replacement = loop {
                let v = rng.below(num_nodes);
                if v != original {
                    break v;
                }
            };
            if corrupt_subject {
                Triplet::new(replacement, positive.relation, positive.client)
            } else {
                Triplet::new(positive.server, positive.relation, replacement)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTriplet {
    pub triplet: Triplet,
    /// 1 for observed, 0 for corrupted.
    pub label: f64,
}

/// Positives followed (each) by their ω negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub samples: Vec<LabeledTriplet>,
    pub positives: usize,
    pub negative_rate: usize,
}

impl TrainingBatch {
    pub fn sample(graph: &MultiGraph, negative_rate: usize, rng: &mut Rng) -> Self {
        let mut samples = Vec::with_capacity(graph.edges().len() * (1 + negative_rate));
        for &edge in graph.edges() {
            samples.push(LabeledTriplet {
                triplet: edge,
                label: 1.0,
            });
            for neg in sample_negatives(edge, negative_rate, graph.num_nodes(), rng) {
                samples.push(LabeledTriplet {
                    triplet: neg,
                    label: 0.0,
                });
            }
        }
        TrainingBatch {
            samples,
            positives: graph.edges().len(),
            negative_rate,
        }
    }

    fn normalizer(&self) -> f64 {
        ((1 + self.negative_rate) * self.positives) as f64
    }
}

/// Cross-entropy loss with L2 penalty, and its gradient with respect to every
/// parameter.
pub fn loss_and_gradient(
    params: &ModelParameters,
    graph: &MultiGraph,
    batch: &TrainingBatch,
    l2_weight: f64,
    dropout: Option<Dropout<'_>>,
) -> Result<(f64, ModelParameters)> {
    if batch.positives == 0 {
        return Err(Error::Argument("batch has no positive triplets".into()));
    }
    let (emb, traces) = forward(graph, params, dropout)?;
    let norm = batch.normalizer();
    let mut grad = params.zeros_like();
    let mut grad_emb = Matrix::zeros(emb.rows(), emb.cols());
    let mut total = 0.0;
    for sample in &batch.samples {
        let t = sample.triplet;
        let y = sample.label;
        let e_s = emb.row(t.server);
        let e_c = emb.row(t.client);
        let r = params.relations.row(t.relation);
        let f = score_unchecked(e_s, r, e_c);
        if !f.is_finite() {
            return Err(Error::Numeric(format!("non-finite score for triplet {t:?}")));
        }
        total += y * log_sigmoid(f) + (1.0 - y) * log_sigmoid(-f);
        let g = (sigmoid(f) - y) / norm;
        let gr = grad.relations.row_mut(t.relation);
        for k in 0..r.len() {
            gr[k] += g * e_s[k] * e_c[k];
        }
        for k in 0..r.len() {
            let gs = g * r[k] * e_c[k];
            let gc = g * r[k] * e_s[k];
            grad_emb.row_mut(t.server)[k] += gs;
            grad_emb.row_mut(t.client)[k] += gc;
        }
    }
    let mut loss = -total / norm;
    if l2_weight > 0.0 {
        loss += l2_weight * params.squared_norm();
    }
    if !loss.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }

    let mut upstream = grad_emb;
    for (l, trace) in traces.iter().enumerate().rev() {
        upstream = layer_backward(graph, &params.layers[l], trace, &upstream, &mut grad.layers[l]);
    }
    grad.input = upstream;

    if l2_weight > 0.0 {
        let mut flat = grad.flatten();
        for (g, p) in flat.iter_mut().zip(params.flatten()) {
            *g += 2.0 * l2_weight * p;
        }
        grad.assign_flat(&flat)?;
    }
    Ok((loss, grad))
}

pub fn loss(
    params: &ModelParameters,
    graph: &MultiGraph,
    batch: &TrainingBatch,
    l2_weight: f64,
    dropout: Option<Dropout<'_>>,
) -> Result<f64> {
    loss_and_gradient(params, graph, batch, l2_weight, dropout).map(|(l, _)| l)
}

/// Frozen output of training: embeddings, relation diagonals, the whitelist
/// graph and its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub hyperparams: HyperParams,
    pub ips: Vocab,
    pub relations: Vocab,
    pub graph: MultiGraph,
    pub params: ModelParameters,
    pub node_embeddings: Matrix,
    pub training_log: Vec<f64>,
}

impl TrainedModel {
    pub fn relation_diagonals(&self) -> &Matrix {
        &self.params.relations
    }

    pub fn embedding(&self, node: usize) -> &[f64] {
        self.node_embeddings.row(node)
    }

    /// Decoder score on index triplets (no whitelist logic).
    pub fn raw_score(&self, t: Triplet) -> f64 {
        score_unchecked(
            self.node_embeddings.row(t.server),
            self.params.relations.row(t.relation),
            self.node_embeddings.row(t.client),
        )
    }
}

/// Full-batch training with fresh negatives each epoch.
pub fn train(dataset: &TripletDataset, hp: &HyperParams) -> Result<TrainedModel> {
    hp.validate()?;
    let graph = MultiGraph::build(dataset)?;
    if graph.num_nodes() < 2 {
        return Err(Error::Dataset("need at least two IP addresses to train".into()));
    }
    let mut root = Rng::seed_from_u64(hp.seed);
    let mut init_rng = root.fork();
    let mut sample_rng = root.fork();
    let mut dropout_rng = root.fork();

    let mut params = ModelParameters::init(graph.num_nodes(), graph.num_relations(), hp, &mut init_rng);
    let mut adam = Adam::new(params.param_count(), hp.learning_rate);
    let mut log = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        let batch = TrainingBatch::sample(&graph, hp.negative_rate, &mut sample_rng);
        let dropout = (hp.dropout_rate > 0.0).then(|| Dropout {
            rate: hp.dropout_rate,
            rng: &mut dropout_rng,
        });
        let (loss, grad) = loss_and_gradient(&params, &graph, &batch, hp.l2_weight, dropout).map_err(|e| {
            Error::Training {
                epoch,
                reason: e.to_string(),
            }
        })?;
        log.push(loss);
        let mut flat = params.flatten();
        adam.step(&mut flat, &grad.flatten());
        params.assign_flat(&flat)?;
        if !params.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "parameters became non-finite".into(),
            });
        }
    }
    let node_embeddings = encode(&graph, &params, None)?;
    Ok(TrainedModel {
        hyperparams: *hp,
        ips: dataset.ips().clone(),
        relations: dataset.relations().clone(),
        graph,
        params,
        node_embeddings,
        training_log: log,
    })
}

//! Two-stream (Bi-Hemispheric) classifier and its single-stream baseline.
//!
//! Each stream runs `Conv1D → MaxPool → Dropout → LSTM → Dropout` over the
//! frame axis of its spectral tensor and yields the final LSTM hidden state.
//! Stream vectors are concatenated and passed through `Dense(ReLU)` (the only
//! L2-penalised weights) and a 6-way output projection.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::checkpoint::Checkpoint;
use crate::autodiff::{softmax, Graph, Mode, NamedTensor, Tensor, Var};
use crate::dataset::Emotion;
use crate::error::{Error, Result};
use crate::hemisplit::HemiPair;
use crate::rng::seeded;
use crate::spectral::SpectralTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Mono,
    Bi,
}

impl Variant {
    pub fn stream_names(self) -> &'static [&'static str] {
        match self {
            Variant::Mono => &["mono"],
            Variant::Bi => &["left", "right"],
        }
    }

    pub fn n_streams(self) -> usize {
        self.stream_names().len()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Mono => "mono",
            Variant::Bi => "bi",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mono" => Ok(Variant::Mono),
            "bi" => Ok(Variant::Bi),
            _ => Err(Error::Config(format!("unknown variant `{s}` (expected mono or bi)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool: usize,
    pub lstm_units: usize,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub n_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_filters: 32,
            conv_kernel: 3,
            pool: 2,
            lstm_units: 64,
            dense_units: 64,
            dropout_rate: 0.5,
            l2_lambda: 1e-3,
            n_classes: Emotion::COUNT,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.conv_filters, self.conv_kernel, self.pool, self.lstm_units, self.dense_units].contains(&0) {
            return Err(Error::Config("layer sizes must all be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate)));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::Config(format!("l2_lambda {} must be non-negative", self.l2_lambda)));
        }
        if self.n_classes != Emotion::COUNT {
            return Err(Error::Config(format!("n_classes must be {}", Emotion::COUNT)));
        }
        Ok(())
    }

    /// Fewest spectral frames a stream input may have.
    pub fn min_frames(&self) -> usize {
        self.conv_kernel * self.pool
    }

    /// Shapes of every trainable tensor, in storage order.
    pub fn tensor_shapes(&self, variant: Variant, n_features: usize) -> Vec<(String, Vec<usize>)> {
        let (c, k, h, d) = (self.conv_filters, self.conv_kernel, self.lstm_units, self.dense_units);
        let mut out = Vec::new();
        for s in variant.stream_names() {
            out.push((format!("{s}.conv.kernel"), vec![k, n_features, c]));
            out.push((format!("{s}.conv.bias"), vec![c]));
            out.push((format!("{s}.lstm.w"), vec![c, 4 * h]));
            out.push((format!("{s}.lstm.u"), vec![h, 4 * h]));
            out.push((format!("{s}.lstm.b"), vec![4 * h]));
        }
        let concat = variant.n_streams() * h;
        out.push(("head.dense.w".into(), vec![concat, d]));
        out.push(("head.dense.b".into(), vec![d]));
        out.push(("head.out.w".into(), vec![d, self.n_classes]));
        out.push(("head.out.b".into(), vec![self.n_classes]));
        out
    }
}

/// Exact trainable scalar count for `variant` on streams of `n_features` columns.
pub fn param_count(cfg: &ModelConfig, variant: Variant, n_features: usize) -> usize {
    let (c, k, h, d) = (cfg.conv_filters, cfg.conv_kernel, cfg.lstm_units, cfg.dense_units);
    let conv = k * n_features * c + c;
    let lstm = 4 * (c * h + h * h + h);
    let head = variant.n_streams() * h * d + d + d * cfg.n_classes + cfg.n_classes;
    variant.n_streams() * (conv + lstm) + head
}

const PER_STREAM: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    pub config: ModelConfig,
    /// Feature columns per stream input (channels × bins).
    pub n_features: usize,
    pub seed: u64,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    variant: Variant,
    seed: u64,
    n_features: usize,
    model: ModelConfig,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, LSTM forget-gate bias `+1`.
    pub fn init(variant: Variant, config: &ModelConfig, n_features: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::Shape("stream inputs need at least one feature column".into()));
        }
        let mut rng = seeded(seed);
        let h = config.lstm_units;
        let tensors = config
            .tensor_shapes(variant, n_features)
            .into_iter()
            .map(|(name, shape)| {
                let t = if name.ends_with(".conv.kernel") {
                    let (k, fin, fout) = (shape[0], shape[1], shape[2]);
                    Tensor::glorot(shape, k * fin, k * fout, &mut rng)
                } else if name.ends_with(".w") || name.ends_with(".u") {
                    let (a, b) = (shape[0], shape[1]);
                    Tensor::glorot(shape, a, b, &mut rng)
                } else if name.ends_with(".lstm.b") {
                    let mut b = vec![0.0; 4 * h];
                    b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
                    Tensor::vector(b)
                } else {
                    Tensor::zeros(shape)
                };
                NamedTensor::new(name, t)
            })
            .collect();
        Ok(Self { variant, config: config.clone(), n_features, seed, tensors })
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.tensor.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name).map(|t| &mut t.tensor)
    }

    fn head_index(&self) -> usize {
        PER_STREAM * self.variant.n_streams()
    }

    /// Weights that carry the L2 penalty.
    pub fn head_dense_weight(&self) -> &Tensor {
        &self.tensors[self.head_index()].tensor
    }

    /// Bi parameters with the two streams exchanged and the dense-layer rows
    /// permuted to match, so that `forward(mirrored input)` reproduces the
    /// original output.
    pub fn mirrored(&self) -> Result<ModelParams> {
        if self.variant != Variant::Bi {
            return Err(Error::Config("only the two-stream model can be mirrored".into()));
        }
        let mut out = self.clone();
        for i in 0..PER_STREAM {
            let (l, r) = (self.tensors[i].tensor.clone(), self.tensors[PER_STREAM + i].tensor.clone());
            out.tensors[i].tensor = r;
            out.tensors[PER_STREAM + i].tensor = l;
        }
        let h = self.config.lstm_units;
        let d = self.config.dense_units;
        let w = self.head_dense_weight().data().to_vec();
        let swapped: Vec<f64> = w[h * d..].iter().chain(&w[..h * d]).copied().collect();
        let hi = self.head_index();
        out.tensors[hi].tensor.data_mut().copy_from_slice(&swapped);
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = CheckpointMeta {
            variant: self.variant,
            seed: self.seed,
            n_features: self.n_features,
            model: self.config.clone(),
        };
        Checkpoint { meta: serde_json::to_string(&meta).expect("meta serializes"), tensors: self.tensors.clone() }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta =
            serde_json::from_str(&ck.meta).map_err(|e| Error::Compat(format!("checkpoint metadata: {e}")))?;
        meta.model.validate()?;
        let expected = meta.model.tensor_shapes(meta.variant, meta.n_features);
        if expected.len() != ck.tensors.len() {
            return Err(Error::Compat(format!(
                "checkpoint has {} tensors, {} model expects {}",
                ck.tensors.len(),
                meta.variant,
                expected.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&ck.tensors) {
            if name != &t.name || shape.as_slice() != t.tensor.shape() {
                return Err(Error::Compat(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                    t.name,
                    t.tensor.shape()
                )));
            }
        }
        Ok(Self {
            variant: meta.variant,
            config: meta.model,
            n_features: meta.n_features,
            seed: meta.seed,
            tensors: ck.tensors.clone(),
        })
    }

    /// Checks that this model can consume inputs built with `variant` and
    /// `n_features` columns per stream.
    pub fn check_compatible(&self, variant: Variant, n_features: usize) -> Result<()> {
        if self.variant != variant || self.n_features != n_features {
            return Err(Error::Compat(format!(
                "model is {} with {} features per stream; input is {variant} with {n_features}",
                self.variant, self.n_features
            )));
        }
        Ok(())
    }
}

/// Spectral input for one recording.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Bi(HemiPair),
    Mono(SpectralTensor),
}

impl ModelInput {
    pub fn variant(&self) -> Variant {
        match self {
            ModelInput::Bi(_) => Variant::Bi,
            ModelInput::Mono(_) => Variant::Mono,
        }
    }

    pub fn streams(&self) -> Vec<&SpectralTensor> {
        match self {
            ModelInput::Bi(p) => vec![&p.left, &p.right],
            ModelInput::Mono(t) => vec![t],
        }
    }

    pub fn n_features(&self) -> usize {
        self.streams()[0].n_features()
    }

    fn stream_tensors(&self) -> Result<Vec<Tensor>> {
        self.streams().into_iter().map(|s| Tensor::new(vec![s.frames, s.n_features()], s.data.clone())).collect()
    }
}

/// Parameters loaded into one graph.
pub struct BoundParams {
    pub vars: Vec<Var>,
}

impl BoundParams {
    pub fn bind(g: &mut Graph, params: &ModelParams) -> Self {
        Self { vars: params.tensors.iter().map(|t| g.param(t.tensor.clone())).collect() }
    }
}

/// Records the network on `g` and returns the `[n_classes]` logits.
pub fn build_logits(
    g: &mut Graph,
    bound: &BoundParams,
    params: &ModelParams,
    input: &ModelInput,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<Var> {
    params.check_compatible(input.variant(), input.n_features())?;
    let cfg = &params.config;
    let mut stream_out = Vec::with_capacity(params.variant.n_streams());
    for (s, x) in input.stream_tensors()?.into_iter().enumerate() {
        let frames = x.shape()[0];
        if frames < cfg.min_frames() {
            return Err(Error::Shape(format!(
                "stream has {frames} frames; need at least conv_kernel·pool = {}",
                cfg.min_frames()
            )));
        }
        let v = &bound.vars[s * PER_STREAM..(s + 1) * PER_STREAM];
        let x = g.input(x);
        let y = g.conv1d(x, v[0], v[1])?;
        let y = g.maxpool1d(y, cfg.pool)?;
        let y = g.dropout(y, cfg.dropout_rate, mode, rng)?;
        let y = g.lstm(y, v[2], v[3], v[4])?;
        let y = g.dropout(y, cfg.dropout_rate, mode, rng)?;
        stream_out.push(y);
    }
    let joined = if stream_out.len() == 1 { stream_out[0] } else { g.concat(&stream_out) };
    let hv = &bound.vars[params.head_index()..];
    let hidden = g.dense(joined, hv[0], hv[1], true)?;
    g.dense(hidden, hv[2], hv[3], false)
}

/// Regularised mean cross-entropy over a batch; returns `(loss, stacked logits)`.
pub fn batch_objective(
    g: &mut Graph,
    bound: &BoundParams,
    params: &ModelParams,
    inputs: &[&ModelInput],
    labels: &[Emotion],
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<(Var, Var)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Shape(format!("{} inputs vs {} labels", inputs.len(), labels.len())));
    }
    let logits = inputs.iter().map(|x| build_logits(g, bound, params, x, mode, rng)).collect::<Result<Vec<_>>>()?;
    let stacked = g.stack(&logits)?;
    let c = params.config.n_classes;
    let mut targets = vec![0.0; labels.len() * c];
    for (r, l) in labels.iter().enumerate() {
        targets[r * c + l.index()] = 1.0;
    }
    let data = g.softmax_xent(stacked, &Tensor::new(vec![labels.len(), c], targets)?)?;
    let penalty = g.l2_penalty(&[bound.vars[params.head_index()]], params.config.l2_lambda)?;
    Ok((g.add(data, penalty)?, stacked))
}

/// Class probabilities for one input.
pub fn forward(input: &ModelInput, params: &ModelParams, mode: Mode, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let bound = BoundParams::bind(&mut g, params);
    let logits = build_logits(&mut g, &bound, params, input, mode, rng)?;
    Ok(softmax(g.value(logits).data()))
}

pub fn forward_bi(pair: &HemiPair, params: &ModelParams, mode: Mode, rng: &mut impl Rng) -> Result<Vec<f64>> {
    forward(&ModelInput::Bi(pair.clone()), params, mode, rng)
}

pub fn forward_mono(features: &SpectralTensor, params: &ModelParams, mode: Mode, rng: &mut impl Rng) -> Result<Vec<f64>> {
    forward(&ModelInput::Mono(features.clone()), params, mode, rng)
}

/// Smallest probability fed to the logarithm in [`loss`].
pub const PROB_FLOOR: f64 = 1e-300;

/// Cross-entropy of already-normalised predictions plus the L2 term on the
/// dense-layer weights.
pub fn loss(probs: &[Vec<f64>], targets: &[Emotion], params: &ModelParams) -> Result<f64> {
    if probs.is_empty() || probs.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions vs {} targets", probs.len(), targets.len())));
    }
    let mut total = 0.0;
    for (p, t) in probs.iter().zip(targets) {
        if p.len() != params.config.n_classes {
            return Err(Error::Shape(format!("prediction row of length {}", p.len())));
        }
        total -= p[t.index()].max(PROB_FLOOR).ln();
    }
    Ok(total / probs.len() as f64 + params.config.l2_lambda * params.head_dense_weight().sum_squares())
}

/// Finite-difference check of the full regularised objective on random
/// inputs: `batch` recordings of `frames` × `bins` features per stream,
/// dropout active with a fixed mask.
pub fn grad_check_objective(
    variant: Variant,
    config: &ModelConfig,
    frames: usize,
    bins: usize,
    batch: usize,
    seed: u64,
    h: f64,
) -> Result<crate::autodiff::GradCheckReport> {
    use crate::dataset::Channel;
    use rand_distr::{Distribution, StandardNormal};

    let params = ModelParams::init(variant, config, bins, seed)?;
    let mut rng = seeded(crate::rng::derive_seed(seed, 9));
    let stream = |rng: &mut crate::rng::SeededRng| SpectralTensor {
        frames,
        channels: vec![Channel::Fz],
        bins: (1..=bins).map(|b| b as f64).collect(),
        fs: 300.0,
        data: (0..frames * bins).map(|_| StandardNormal.sample(rng)).collect(),
    };
    let inputs: Vec<ModelInput> = (0..batch)
        .map(|_| match variant {
            Variant::Bi => ModelInput::Bi(HemiPair { left: stream(&mut rng), right: stream(&mut rng) }),
            Variant::Mono => ModelInput::Mono(stream(&mut rng)),
        })
        .collect();
    let labels: Vec<Emotion> = (0..batch).map(|_| Emotion::ALL[rng.gen_range(0..Emotion::ALL.len())]).collect();
    let refs: Vec<&ModelInput> = inputs.iter().collect();
    let tensors: Vec<Tensor> = params.tensors.iter().map(|t| t.tensor.clone()).collect();
    crate::autodiff::grad_check(&tensors, h, |g, vars| {
        let bound = BoundParams { vars: vars.to_vec() };
        let mut mask_rng = seeded(seed);
        Ok(batch_objective(g, &bound, &params, &refs, &labels, Mode::Train, &mut mask_rng)?.0)
    })
}

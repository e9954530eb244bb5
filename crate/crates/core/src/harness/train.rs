use rand::seq::SliceRandom;

use super::config::ExperimentConfig;
use super::metrics::{argmax, EpochRecord, EvalReport};
use crate::autodiff::{adam_step, softmax, AdamState, Graph, Mode};
use crate::dataset::{Channel, Dataset, Emotion};
use crate::error::{Error, Result};
use crate::hemisplit;
use crate::model::{batch_objective, BoundParams, ModelInput, ModelParams, Variant};
use crate::preprocess::{preprocess, PreprocRecording};
use crate::rng::{derive_seed, seeded};
use crate::spectral::{spectral_features, SpectralConfig};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Model-ready features for a dataset.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    pub ids: Vec<(String, String)>,
    pub inputs: Vec<ModelInput>,
    pub labels: Vec<Option<Emotion>>,
}

impl PreparedSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn n_features(&self) -> Result<usize> {
        let n = self.inputs.first().ok_or_else(|| Error::Dataset("empty dataset".into()))?.n_features();
        if self.inputs.iter().any(|i| i.n_features() != n) {
            return Err(Error::Dataset("recordings yield different feature widths".into()));
        }
        Ok(n)
    }

    fn labels(&self, what: &str) -> Result<Vec<Emotion>> {
        self.labels
            .iter()
            .zip(&self.ids)
            .map(|(l, (s, t))| l.ok_or_else(|| Error::Label(format!("{what} recording {s},{t} is unlabeled; use predict()"))))
            .collect()
    }
}

/// Features from already pre-processed recordings.
pub fn prepare_preprocessed(recs: &[PreprocRecording], spectral: &SpectralConfig, variant: Variant) -> Result<PreparedSet> {
    let inputs = recs
        .iter()
        .map(|r| match variant {
            Variant::Bi => Ok(ModelInput::Bi(hemisplit::split(r, spectral)?)),
            Variant::Mono => Ok(ModelInput::Mono(spectral_features(r, spectral, &Channel::ALL)?)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedSet {
        ids: recs.iter().map(|r| (r.rec.subject_id().to_string(), r.rec.trial_id().to_string())).collect(),
        inputs,
        labels: recs.iter().map(|r| r.rec.label()).collect(),
    })
}

/// Pre-processing plus features per the experiment config.
pub fn prepare(ds: &Dataset, cfg: &ExperimentConfig) -> Result<PreparedSet> {
    let recs = ds.recordings.iter().map(|r| preprocess(r, &cfg.preproc)).collect::<Result<Vec<_>>>()?;
    prepare_preprocessed(&recs, &cfg.spectral, cfg.variant)
}

/// Eval-mode objective and accuracy over a whole set.
fn score(set: &PreparedSet, labels: &[Emotion], params: &ModelParams) -> Result<(f64, EvalReport)> {
    let mut g = Graph::new();
    let bound = BoundParams::bind(&mut g, params);
    let inputs: Vec<&ModelInput> = set.inputs.iter().collect();
    // Eval mode draws nothing from the generator.
    let (loss, logits) = batch_objective(&mut g, &bound, params, &inputs, labels, Mode::Eval, &mut seeded(0))?;
    let c = params.config.n_classes;
    let ld = g.value(logits).data();
    let preds = (0..labels.len()).map(|r| Emotion::from_index(argmax(&ld[r * c..(r + 1) * c])).unwrap());
    Ok((g.value(loss).item(), EvalReport::from_pairs(labels.iter().copied().zip(preds))))
}

/// Mini-batch Adam with per-epoch validation; returns the parameters with the
/// lowest validation loss.
pub fn train_prepared(train: &PreparedSet, val: &PreparedSet, cfg: &ExperimentConfig) -> Result<(ModelParams, EvalReport)> {
    cfg.validate()?;
    let train_labels = train.labels("training")?;
    let val_labels = val.labels("validation")?;
    let n_features = train.n_features()?;
    if val.n_features()? != n_features {
        return Err(Error::Dataset("training and validation feature widths differ".into()));
    }
    if let Some(v) = train.inputs.iter().chain(&val.inputs).find(|i| i.variant() != cfg.variant) {
        return Err(Error::Config(format!("prepared {} inputs for a {} experiment", v.variant(), cfg.variant)));
    }

    let mut warnings = Vec::new();
    let mut counts = [0usize; Emotion::COUNT];
    train_labels.iter().for_each(|l| counts[l.index()] += 1);
    for e in Emotion::ALL.iter().filter(|e| counts[e.index()] == 0) {
        warnings.push(format!("class `{e}` has no training recordings"));
    }

    let mut params = ModelParams::init(cfg.variant, &cfg.model, n_features, derive_seed(cfg.seed, STREAM_INIT))?;
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut shuffle_rng = seeded(derive_seed(cfg.seed, STREAM_SHUFFLE));
    let mut dropout_rng = seeded(derive_seed(cfg.seed, STREAM_DROPOUT));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ModelParams)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&ModelInput> = batch.iter().map(|&i| &train.inputs[i]).collect();
            let labels: Vec<Emotion> = batch.iter().map(|&i| train_labels[i]).collect();
            let mut g = Graph::new();
            let bound = BoundParams::bind(&mut g, &params);
            let (loss, _) = batch_objective(&mut g, &bound, &params, &inputs, &labels, Mode::Train, &mut dropout_rng)?;
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss at epoch {epoch}, batch {}", bi + 1)));
            }
            g.backward(loss)?;
            let grads: Vec<Vec<f64>> = bound.vars.iter().map(|v| g.grad(*v).unwrap().to_vec()).collect();
            adam_step(&mut params.tensors, &grads, &mut adam).map_err(|e| match e {
                Error::Optimizer(p) => Error::Numerical(format!("non-finite gradient in `{p}` at epoch {epoch}, batch {}", bi + 1)),
                other => other,
            })?;
            loss_sum += lv * batch.len() as f64;
        }
        let (val_loss, val_report) = score(val, &val_labels, &params)?;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite validation loss at epoch {epoch}")));
        }
        curve.push(EpochRecord { epoch, train_loss: loss_sum / train.len() as f64, val_loss, val_acc: val_report.accuracy });
        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }

    let (_, best_params) = best.expect("at least one epoch ran");
    let (_, mut report) = score(val, &val_labels, &best_params)?;
    report.loss_curve = curve;
    report.warnings = warnings;
    Ok((best_params, report))
}

pub fn train(train_ds: &Dataset, val_ds: &Dataset, cfg: &ExperimentConfig) -> Result<(ModelParams, EvalReport)> {
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    train_prepared(&prepare(train_ds, cfg)?, &prepare(val_ds, cfg)?, cfg)
}

pub fn evaluate_prepared(set: &PreparedSet, params: &ModelParams) -> Result<EvalReport> {
    let labels = set.labels("evaluation")?;
    Ok(score(set, &labels, params)?.1)
}

/// Eval-mode accuracy and confusion matrix on a labeled dataset.
pub fn evaluate(ds: &Dataset, params: &ModelParams, cfg: &ExperimentConfig) -> Result<EvalReport> {
    if !ds.is_labeled() {
        return Err(Error::Label("dataset contains unlabeled recordings; use predict()".into()));
    }
    evaluate_prepared(&prepare(ds, &ExperimentConfig { variant: params.variant, ..cfg.clone() })?, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub subject_id: String,
    pub trial_id: String,
    pub label: Emotion,
    pub probabilities: Vec<f64>,
}

pub fn predict_prepared(set: &PreparedSet, params: &ModelParams) -> Result<Vec<Prediction>> {
    let mut rng = seeded(0);
    set.inputs
        .iter()
        .zip(&set.ids)
        .map(|(x, (s, t))| {
            params.check_compatible(x.variant(), x.n_features())?;
            let mut g = Graph::new();
            let bound = BoundParams::bind(&mut g, params);
            let logits = crate::model::build_logits(&mut g, &bound, params, x, Mode::Eval, &mut rng)?;
            let probabilities = softmax(g.value(logits).data());
            Ok(Prediction {
                subject_id: s.clone(),
                trial_id: t.clone(),
                label: Emotion::from_index(argmax(&probabilities)).unwrap(),
                probabilities,
            })
        })
        .collect()
}

/// One prediction per recording, in input order.
pub fn predict(ds: &Dataset, params: &ModelParams, cfg: &ExperimentConfig) -> Result<Vec<Prediction>> {
    predict_prepared(&prepare(ds, &ExperimentConfig { variant: params.variant, ..cfg.clone() })?, params)
}

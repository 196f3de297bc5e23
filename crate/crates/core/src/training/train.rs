use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, Adam, AdamState};
use super::backward::{backward, LayerGradients};
use super::detector::{argmax, DetectorLayout, DetectorMasks};
use super::loss::{
    intensity_grad_to_field, loss_detector_mse, loss_image_mse, softmax_ce_on_intensity,
    IntensityLoss, LossKind,
};
use super::source::{Sample, SampleSource};
use crate::error::{D2nnError, Result};
use crate::optics::{forward, forward_output, ComplexField, D2nnModel};
use crate::perturb::sample_absorption_dropout;

/// Samples per work unit when a batch is split across threads. Fixed so the
/// floating-point summation order never depends on the worker count.
pub(crate) const REDUCE_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss_kind: LossKind,
    pub rng_seed: u64,
    /// Scale applied to energy-normalized signals before the softmax.
    pub temperature: f64,
    pub train_amplitude: bool,
    /// Probability of zeroing a neuron's amplitude, redrawn every batch.
    pub absorption_dropout_prob: f64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            epochs: 50,
            loss_kind: LossKind::SoftmaxCe,
            rng_seed: 0,
            temperature: 10.0,
            train_amplitude: false,
            absorption_dropout_prob: 0.0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> Adam {
        Adam {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.batch_size == 0 {
            return Err(D2nnError::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(D2nnError::InvalidArgument("temperature must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.absorption_dropout_prob) {
            return Err(D2nnError::InvalidArgument(
                "absorption_dropout_prob must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// What the network is trained to do with its output plane.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    SoftmaxCe {
        masks: &'a DetectorMasks,
        temperature: f64,
    },
    DetectorMse {
        masks: &'a DetectorMasks,
    },
    /// Reproduce the input intensity at the output plane.
    ImageMse,
}

impl<'a> Objective<'a> {
    pub fn new(kind: LossKind, masks: Option<&'a DetectorMasks>, temperature: f64) -> Result<Self> {
        let need_masks = || {
            masks.ok_or_else(|| {
                D2nnError::InvalidArgument(format!("{kind:?} needs a detector layout"))
            })
        };
        Ok(match kind {
            LossKind::SoftmaxCe => Objective::SoftmaxCe {
                masks: need_masks()?,
                temperature,
            },
            LossKind::DetectorMse => Objective::DetectorMse {
                masks: need_masks()?,
            },
            LossKind::ImageMse => Objective::ImageMse,
        })
    }

    pub fn masks(&self) -> Option<&'a DetectorMasks> {
        match *self {
            Objective::SoftmaxCe { masks, .. } | Objective::DetectorMse { masks } => Some(masks),
            Objective::ImageMse => None,
        }
    }

    /// Loss on an output field plus the detector signals, when the objective has detectors.
    pub fn loss(&self, output: &ComplexField, sample: &Sample) -> Result<(IntensityLoss, Option<Vec<f64>>)> {
        let intensity = output.intensity();
        let label = || {
            sample
                .label
                .ok_or_else(|| D2nnError::InvalidArgument("classification sample has no label".into()))
        };
        match *self {
            Objective::SoftmaxCe { masks, temperature } => {
                let (l, s) = softmax_ce_on_intensity(&intensity, masks, label()?, temperature)?;
                Ok((l, Some(s)))
            }
            Objective::DetectorMse { masks } => {
                let (l, s) = loss_detector_mse(&intensity, masks, label()?)?;
                Ok((l, Some(s)))
            }
            Objective::ImageMse => Ok((loss_image_mse(&intensity, &sample.input.intensity())?, None)),
        }
    }
}

/// Loss, prediction and parameter gradients for one sample.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub loss: f64,
    pub signals: Option<Vec<f64>>,
    pub grads: LayerGradients,
}

impl SampleOutcome {
    pub fn correct(&self, label: Option<usize>) -> Option<bool> {
        Some(argmax(self.signals.as_ref()?) == label?)
    }
}

pub fn sample_gradient(model: &D2nnModel, sample: &Sample, objective: &Objective) -> Result<SampleOutcome> {
    let (output, cache) = forward(model, &sample.input)?;
    if !output.is_finite() {
        // Reported as a non-finite loss so training can abort with a diagnostic.
        return Ok(SampleOutcome {
            loss: f64::NAN,
            signals: None,
            grads: LayerGradients::zeros_like(model),
        });
    }
    let (l, signals) = objective.loss(&output, sample)?;
    let g = intensity_grad_to_field(&output, &l.grad_intensity)?;
    let grads = backward(model, &cache, &g)?;
    Ok(SampleOutcome {
        loss: l.loss,
        signals,
        grads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

struct Partial {
    loss: f64,
    correct: usize,
    count: usize,
    grads: Option<LayerGradients>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.loss += other.loss;
        self.correct += other.correct;
        self.count += other.count;
        self.grads = match (self.grads, other.grads) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b);
                Some(a)
            }
            (a, b) => a.or(b),
        };
        self
    }
}

/// Pairwise reduction in a fixed order.
fn tree_reduce(mut parts: Vec<Partial>) -> Option<Partial> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop()
}

fn batch_gradient(
    model: &D2nnModel,
    source: &dyn SampleSource,
    indices: &[usize],
    objective: &Objective,
) -> Result<Partial> {
    let parts = indices
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = Partial {
                loss: 0.0,
                correct: 0,
                count: 0,
                grads: None,
            };
            for &i in chunk {
                let sample = source.sample(i)?;
                let out = sample_gradient(model, &sample, objective)?;
                acc = acc.merge(Partial {
                    loss: out.loss,
                    correct: usize::from(out.correct(sample.label) == Some(true)),
                    count: 1,
                    grads: Some(out.grads),
                });
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    tree_reduce(parts).ok_or(D2nnError::EmptyDataset)
}

/// Mean loss and, for detector objectives, accuracy over a whole source.
pub fn measure(model: &D2nnModel, source: &dyn SampleSource, objective: &Objective) -> Result<(f64, Option<f64>)> {
    if source.is_empty() {
        return Err(D2nnError::EmptyDataset);
    }
    let indices: Vec<usize> = (0..source.len()).collect();
    let parts = indices
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = Partial {
                loss: 0.0,
                correct: 0,
                count: 0,
                grads: None,
            };
            for &i in chunk {
                let sample = source.sample(i)?;
                let output = forward_output(model, &sample.input)?;
                let (l, signals) = objective.loss(&output, &sample)?;
                acc.loss += l.loss;
                acc.count += 1;
                if let (Some(s), Some(label)) = (signals, sample.label) {
                    acc.correct += usize::from(argmax(&s) == label);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = tree_reduce(parts).ok_or(D2nnError::EmptyDataset)?;
    let n = total.count as f64;
    let accuracy = objective.masks().map(|_| total.correct as f64 / n);
    Ok((total.loss / n, accuracy))
}

/// Mini-batch Adam training of the layer phases (and amplitudes when enabled).
///
/// Deterministic for a fixed `rng_seed` regardless of the rayon pool size.
/// If a batch produces a non-finite loss or gradient, the model is restored
/// to its state at the start of that epoch and the error names the batch.
pub fn train(
    model: &mut D2nnModel,
    train_set: &dyn SampleSource,
    validation: Option<&dyn SampleSource>,
    layout: Option<&DetectorLayout>,
    config: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    train_with(model, train_set, validation, layout, config, |_, _| Ok(()))
}

/// [`train`] with a hook called after every epoch with the updated model and
/// that epoch's records, e.g. for checkpoints or streaming metrics. An error
/// from the hook stops training and is returned.
pub fn train_with(
    model: &mut D2nnModel,
    train_set: &dyn SampleSource,
    validation: Option<&dyn SampleSource>,
    layout: Option<&DetectorLayout>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&D2nnModel, &[EpochRecord]) -> Result<()>,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(D2nnError::EmptyDataset);
    }
    model.grid().ensure_same(&train_set.grid())?;
    if let Some(v) = validation {
        model.grid().ensure_same(&v.grid())?;
    }
    let masks = layout.map(|l| l.masks(model.grid())).transpose()?;
    let objective = Objective::new(config.loss_kind, masks.as_ref(), config.temperature)?;
    let adam = config.adam();
    let mut state = AdamState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();

    for epoch in 1..=config.epochs {
        let snapshot = model.clone();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let working = if config.absorption_dropout_prob > 0.0 {
                Cow::Owned(sample_absorption_dropout(
                    model,
                    config.absorption_dropout_prob,
                    &mut rng,
                )?)
            } else {
                Cow::Borrowed(&*model)
            };
            let partial = batch_gradient(&working, train_set, batch, &objective)?;
            let mut grads = partial.grads.ok_or(D2nnError::EmptyDataset)?;
            if !partial.loss.is_finite() || !grads.is_finite() {
                *model = snapshot;
                return Err(D2nnError::NonFiniteLoss { epoch, batch: b });
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(model, &grads, &mut state, &adam, config.train_amplitude)?;
            loss_sum += partial.loss;
            correct += partial.correct;
            log::debug!(
                "epoch {epoch} batch {b}: loss {:.5}",
                partial.loss / batch.len() as f64
            );
        }
        let first_record = history.len();
        let n = train_set.len() as f64;
        let record = EpochRecord {
            epoch,
            split: Split::Train,
            loss: loss_sum / n,
            accuracy: objective.masks().map(|_| correct as f64 / n),
        };
        log::info!("epoch {epoch}: train loss {:.5} accuracy {:?}", record.loss, record.accuracy);
        history.push(record);
        if let Some(v) = validation.filter(|v| !v.is_empty()) {
            let (loss, accuracy) = measure(model, v, &objective)?;
            log::info!("epoch {epoch}: validation loss {loss:.5} accuracy {accuracy:?}");
            history.push(EpochRecord {
                epoch,
                split: Split::Validation,
                loss,
                accuracy,
            });
        }
        on_epoch(model, &history[first_record..])?;
    }
    Ok(history)
}

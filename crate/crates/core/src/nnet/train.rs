//! Mini-batch training with momentum SGD on the step schedule.
//!
//! Per-example gradients inside a batch are computed in parallel and summed
//! in batch order, so results do not depend on the number of workers.
//! Examples are first put in a canonical order (by content hash), which
//! makes training independent of the order the caller stored them in.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::{argmax_class, ClassLabel, ProbVector};
use crate::nnet::model::{ArchConfig, TinyResNet};
use crate::nnet::optim::{lr_at, SGDConfig};
use crate::nnet::tensor::Tensor;
use crate::preprocess::{augment, AugmentConfig, ColorPCA, RotationMode};
use crate::random::RandomStream;
use crate::raster::TensorImage;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub image: TensorImage,
    pub label: ClassLabel,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub sgd: SGDConfig,
    /// Training-time augmentation; `None` trains on the images as given.
    pub augment: Option<(AugmentConfig, ColorPCA)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: ArchConfig::default(),
            sgd: SGDConfig::default(),
            augment: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BestModel {
    pub model: TinyResNet,
    pub epoch: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Model after the last epoch.
    pub model: TinyResNet,
    /// Highest validation accuracy seen (earliest epoch on ties), when a
    /// validation set was supplied.
    pub best: Option<BestModel>,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

fn content_hash(example: &Example) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(example.label.index() as u64);
    eat(example.image.width() as u64);
    eat(example.image.height() as u64);
    for v in example.image.values() {
        eat(v.to_bits());
    }
    h
}

fn canonical_order(dataset: &[Example]) -> Vec<&Example> {
    let mut keyed: Vec<(u64, &Example)> = dataset.iter().map(|e| (content_hash(e), e)).collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.label.cmp(&b.1.label))
            .then_with(|| a.1.image.values().iter().map(|v| v.to_bits()).cmp(b.1.image.values().iter().map(|v| v.to_bits())))
    });
    keyed.into_iter().map(|(_, e)| e).collect()
}

fn check_shapes(examples: &[Example]) -> Result<()> {
    let Some(first) = examples.first() else {
        return Err(Error::EmptyDataset);
    };
    let dims = (first.image.width(), first.image.height());
    if let Some(bad) = examples
        .iter()
        .find(|e| (e.image.width(), e.image.height()) != dims)
    {
        return Err(Error::Shape(format!(
            "inconsistent example sizes {}x{} and {}x{}",
            dims.0,
            dims.1,
            bad.image.width(),
            bad.image.height()
        )));
    }
    Ok(())
}

pub fn predict(model: &TinyResNet, image: &TensorImage) -> Result<ProbVector> {
    let logits = model.logits(&TinyResNet::input_tensor(image))?;
    ProbVector::softmax(&logits)
}

/// Fraction of examples whose argmax prediction equals the label.
pub fn accuracy(model: &TinyResNet, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits: Vec<bool> = examples
        .par_iter()
        .map(|e| predict(model, &e.image).map(|p| argmax_class(&p).0 == e.label))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / examples.len() as f64)
}

pub fn train(
    dataset: &[Example],
    validation: Option<&[Example]>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check_shapes(dataset)?;
    config.sgd.validate()?;
    if let Some((aug, _)) = &config.augment {
        aug.validate()?;
    }
    if let Some(val) = validation {
        if !val.is_empty() {
            check_shapes(val)?;
        }
    }
    let ordered = canonical_order(dataset);
    let root = RandomStream::new(config.sgd.seed);
    let mut model = TinyResNet::new(&config.arch, &mut root.derive("init"))?;
    let mut velocity = model.zeros_like();

    // One view per example, or four (one per quarter-turn) in all-four mode.
    let views_per_example = match &config.augment {
        Some((AugmentConfig { rotation_mode: RotationMode::AllFour, .. }, _)) => 4,
        _ => 1,
    };
    let view_count = ordered.len() * views_per_example;

    let mut loss_history = Vec::with_capacity(config.sgd.epochs);
    let mut best: Option<BestModel> = None;
    for epoch in 0..config.sgd.epochs {
        let rate = lr_at(epoch, &config.sgd)?;
        let mut order: Vec<usize> = (0..view_count).collect();
        root.derive("shuffle").derive_index(epoch as u64).shuffle(&mut order);
        let aug_root = root.derive("augment").derive_index(epoch as u64);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.sgd.batch_size) {
            let results: Vec<(f64, TinyResNet)> = batch
                .par_iter()
                .map(|&view| {
                    let example = ordered[view / views_per_example];
                    let input = match &config.augment {
                        None => TinyResNet::input_tensor(&example.image),
                        Some((aug, pca)) => {
                            let mut cfg = *aug;
                            if views_per_example == 4 {
                                cfg.rotation_mode = RotationMode::Fixed((view % 4) as u8);
                            }
                            let mut rng = aug_root.derive_index(view as u64);
                            TinyResNet::input_tensor(&augment(&example.image, pca, &cfg, &mut rng))
                        }
                    };
                    model.backward(&input, example.label)
                })
                .collect::<Result<_>>()?;
            let mut grads = model.zeros_like();
            for (loss, g) in &results {
                epoch_loss += loss;
                grads.add_assign(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            model.sgd_step(&grads, &mut velocity, rate, config.sgd.momentum)?;
        }
        let mean_loss = epoch_loss / view_count as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Range(format!("training diverged at epoch {epoch}")));
        }
        loss_history.push(mean_loss);

        if let Some(val) = validation.filter(|v| !v.is_empty()) {
            // Ties go to the later epoch, which has seen more updates.
            let acc = accuracy(&model, val)?;
            if best.as_ref().is_none_or(|b| acc >= b.accuracy) {
                best = Some(BestModel {
                    model: model.clone(),
                    epoch,
                    accuracy: acc,
                });
            }
        }
    }
    Ok(TrainOutcome {
        model,
        best,
        loss_history,
    })
}

/// Convenience for tests and tools: the planar tensor of an example.
pub fn example_tensor(example: &Example) -> Tensor {
    TinyResNet::input_tensor(&example.image)
}

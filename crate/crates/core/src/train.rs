//! Minibatch training and evaluation loops over in-memory samples.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{augment, AugmentConfig, SampleRecord};
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::layers::{sgd_step, OptimState, SgdConfig};
use crate::metrics::Confusion;
use crate::model::{build_targets, total_loss, LossBreakdown, LossWeights, Network, TargetConfig};
use crate::params::Gradients;
use crate::real::Real;
use crate::scan::{ScanExecutor, Sequential};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Multiply the learning rate by `lr_decay` every `lr_step` epochs.
    pub lr_step: usize,
    pub lr_decay: f64,
    pub weights: LossWeights,
    pub targets: TargetConfig,
    pub augment: Option<AugmentConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sgd: SgdConfig::default(),
            epochs: 20,
            batch_size: 4,
            lr_step: 10,
            lr_decay: 0.1,
            weights: LossWeights::default(),
            targets: TargetConfig::default(),
            augment: Some(AugmentConfig::default()),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if !(self.sgd.learning_rate > 0.0 && self.sgd.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.sgd.momentum) {
            return bad("momentum", "must lie in [0, 1)");
        }
        if !(self.sgd.weight_decay >= 0.0) {
            return bad("weight_decay", "must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if self.lr_step == 0 {
            return bad("lr_step", "must be at least 1");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", "must lie in (0, 1]");
        }
        let w = self.weights;
        if [w.coarse, w.gate, w.fine].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("loss weights", "must be finite and non-negative");
        }
        if w.fine == 0.0 {
            return bad("loss_weight_fine", "the final head needs a positive weight");
        }
        if self.targets.boundary_ratio == 0 || self.targets.background_factor == Some(0) {
            return bad("sampling", "ratios must be at least 1");
        }
        if let Some(a) = &self.augment {
            if !(a.min_scale > 0.0 && a.min_scale <= a.max_scale) {
                return bad("augment_scale", "need 0 < min <= max");
            }
            if !(0.0..=1.0).contains(&a.mirror_prob) {
                return bad("augment_mirror", "probability outside [0, 1]");
            }
            if !(0.0..=0.5).contains(&a.max_translation) || !(0.0..=180.0).contains(&a.max_rotation_deg) {
                return bad("augment", "translation must lie in [0, 0.5] and rotation in [0, 180]");
            }
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.sgd.learning_rate * libm::pow(self.lr_decay, (epoch / self.lr_step) as f64)
    }
}

/// Summary of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean over batches that produced a loss.
    pub loss: LossBreakdown,
    pub batches: usize,
    /// Batches dropped because a label loss had nothing to supervise.
    pub skipped: usize,
}

/// Stacks sample images into one batch tensor.
pub fn batch_images<T: Real>(records: &[&SampleRecord]) -> Result<Tensor<T>> {
    let imgs: Vec<&Tensor<f32>> = records.iter().map(|r| &r.image).collect();
    Ok(Tensor::stack(&imgs)?.cast())
}

/// Loss and gradients for one batch.
pub fn batch_gradients<T: Real, E: ScanExecutor, R: Rng + ?Sized>(
    net: &Network<T>,
    records: &[&SampleRecord],
    cfg: &TrainConfig,
    exec: &E,
    rng: &mut R,
) -> Result<(LossBreakdown, Gradients<T>)> {
    let x = batch_images(records)?;
    let labels: Vec<LabelMap> = records.iter().map(|r| r.labels.clone()).collect();
    let targets = build_targets(net.spec(), &labels, rng, &cfg.targets)?;
    let pass = net.forward_with(&x, exec, &mut |_| {})?;
    let (loss, head_grads) = total_loss(net, &pass, &targets, &cfg.weights)?;
    Ok((loss, net.backward(&pass, &head_grads)?))
}

/// Owns a network and its optimizer state across epochs.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub net: Network<T>,
    pub optim: OptimState<T>,
    pub config: TrainConfig,
    epoch: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(net: Network<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optim = OptimState::new(net.params(), config.sgd);
        Ok(Trainer { net, optim, config, epoch: 0 })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over `data` in an order fixed by `(seed, epoch)`.
    pub fn run_epoch(&mut self, data: &[SampleRecord]) -> Result<EpochStats> {
        self.run_epoch_with(data, &Sequential)
    }

    pub fn run_epoch_with<E: ScanExecutor>(&mut self, data: &[SampleRecord], exec: &E) -> Result<EpochStats> {
        if data.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.epoch as u64 + 1);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let lr = self.config.learning_rate(self.epoch);
        self.optim.config.learning_rate = lr;
        let mut sum = LossBreakdown::default();
        let (mut batches, mut skipped) = (0, 0);
        for chunk in order.chunks(self.config.batch_size) {
            let augmented: Vec<SampleRecord>;
            let records: Vec<&SampleRecord> = match &self.config.augment {
                Some(a) => {
                    augmented = chunk.iter().map(|&i| augment(&data[i], a, &mut rng)).collect();
                    augmented.iter().collect()
                }
                None => chunk.iter().map(|&i| &data[i]).collect(),
            };
            let (loss, grads) = match batch_gradients(&self.net, &records, &self.config, exec, &mut rng) {
                Err(Error::EmptyMask) => {
                    skipped += 1;
                    continue;
                }
                r => r?,
            };
            sgd_step(self.net.params_mut(), &grads, &mut self.optim)?;
            sum.coarse += loss.coarse;
            sum.gate += loss.gate;
            sum.fine += loss.fine;
            sum.total += loss.total;
            batches += 1;
        }
        let k = batches.max(1) as f64;
        let loss = LossBreakdown { coarse: sum.coarse / k, gate: sum.gate / k, fine: sum.fine / k, total: sum.total / k };
        let stats = EpochStats { epoch: self.epoch, learning_rate: lr, loss, batches, skipped };
        self.epoch += 1;
        Ok(stats)
    }
}

/// Confusion matrix of the final head over `data`.
pub fn evaluate<T: Real, E: ScanExecutor>(net: &Network<T>, data: &[SampleRecord], batch: usize, exec: &E) -> Result<Confusion> {
    let mut conf = Confusion::new(net.spec().classes());
    for chunk in data.chunks(batch.max(1)) {
        let refs: Vec<&SampleRecord> = chunk.iter().collect();
        for (rec, pred) in chunk.iter().zip(predict_with(net, &refs, exec)?) {
            conf.add_maps(&rec.labels, &pred)?;
        }
    }
    Ok(conf)
}

pub fn predict_with<T: Real, E: ScanExecutor>(net: &Network<T>, records: &[&SampleRecord], exec: &E) -> Result<Vec<LabelMap>> {
    let x = batch_images(records)?;
    let pass = net.forward_with(&x, exec, &mut |_| {})?;
    let logits = net
        .head(&pass, crate::model::HeadKind::FinalLabel)
        .ok_or_else(|| Error::MissingHead("final_label".into()))?;
    crate::model::argmax_labels(logits, net.spec().vocab)
}

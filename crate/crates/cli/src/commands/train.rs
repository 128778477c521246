use std::time::Instant;

use sgrnn_core::metrics::Scores;
use sgrnn_core::model::{CropCalibration, Network};
use sgrnn_core::train::{evaluate, EpochStats, Trainer};
use sgrnn_core::Real;

use super::data::{load_run_data, RunData};
use crate::config::RunConfig;
use crate::error::Result;
use crate::exec::Threaded;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub stats: EpochStats,
    pub held_out_accuracy: f64,
    pub seconds: f64,
}

impl std::fmt::Display for EpochLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = &self.stats;
        write!(
            f,
            "epoch {:3}  lr {:.2e}  loss coarse {:.4} gate {:.4} final {:.4} total {:.4}  held-out acc {:.4}  ({} batches, {} skipped, {:.1}s)",
            s.epoch + 1,
            s.learning_rate,
            s.loss.coarse,
            s.loss.gate,
            s.loss.fine,
            s.loss.total,
            self.held_out_accuracy,
            s.batches,
            s.skipped,
            self.seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub net: Network<T>,
    pub calibration: Option<CropCalibration>,
    pub log: Vec<EpochLog>,
}

/// Trains on already-loaded data. `on_epoch` sees each log line as it is
/// produced.
pub fn train_on<T: Real>(cfg: &RunConfig, data: &RunData, on_epoch: &mut dyn FnMut(&EpochLog)) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let net = Network::<T>::new(cfg.build_spec()?, cfg.seed)?;
    let mut tc = cfg.train.clone();
    tc.seed = cfg.seed;
    let mut trainer = Trainer::new(net, tc)?;
    let exec = Threaded { threads: cfg.threads };
    let mut log = Vec::with_capacity(cfg.train.epochs);
    for _ in 0..cfg.train.epochs {
        let t = Instant::now();
        let stats = trainer.run_epoch_with(&data.train, &exec)?;
        let conf = evaluate(&trainer.net, &data.test, cfg.train.batch_size, &exec)?;
        let entry = EpochLog { stats, held_out_accuracy: Scores::from_confusion(&conf).accuracy, seconds: t.elapsed().as_secs_f64() };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { net: trainer.net, calibration: data.calibration, log })
}

pub fn train<T: Real>(cfg: &RunConfig, on_epoch: &mut dyn FnMut(&EpochLog)) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let data = load_run_data(cfg)?;
    train_on(cfg, &data, on_epoch)
}

//! Turns a [`RunConfig`] into train and test sample sets.

use sgrnn_core::data::{generate_synthetic, SampleRecord};
use sgrnn_core::model::{apply_crop, crop_from_points, ComponentKind, CropCalibration};

use crate::config::{RunConfig, Stage};
use crate::dataset::load_dataset;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct RunData {
    pub train: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
    /// Set for second-stage runs: the crop geometry fitted on `train`.
    pub calibration: Option<CropCalibration>,
}

/// Whole-image samples for one split, from disk or the generator.
pub fn source_split(cfg: &RunConfig, test: bool) -> Result<Vec<SampleRecord>> {
    let dir = if test { cfg.test_dir.as_ref() } else { cfg.train_dir.as_ref() };
    match dir {
        Some(d) => load_dataset(d, cfg.data_vocab()),
        None if test && cfg.train_dir.is_some() => {
            Err(CliError::Config("test_dir: required when train_dir is set".into()))
        }
        None => Ok(generate_synthetic(&cfg.synth_split(test))?),
    }
}

/// Fits crop geometry to labelled samples that carry key points.
pub fn fit_calibration(records: &[SampleRecord]) -> Result<CropCalibration> {
    let with_points: Vec<_> = records.iter().filter_map(|r| r.points.as_ref().map(|p| (p, &r.labels))).collect();
    if with_points.is_empty() {
        return Err(CliError::Config("second-stage training needs samples with key points".into()));
    }
    Ok(CropCalibration::fit(with_points)?)
}

/// Cuts point-calibrated component patches out of whole-face samples.
pub fn component_samples(
    records: &[SampleRecord],
    kinds: &[ComponentKind],
    calib: &CropCalibration,
) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::with_capacity(records.len() * kinds.len());
    for (i, r) in records.iter().enumerate() {
        let pts = r.points.as_ref().ok_or_else(|| CliError::Data { id: format!("{i:04}"), msg: "no key points".into() })?;
        let (h, w) = (r.labels.height(), r.labels.width());
        for &kind in kinds {
            let crop = crop_from_points(pts, kind, calib, w, h)?;
            let (image, labels) = apply_crop(&r.image, Some(&r.labels), &crop)?;
            out.push(SampleRecord { image, labels: labels.expect("labels requested"), points: None });
        }
    }
    Ok(out)
}

pub fn load_run_data(cfg: &RunConfig) -> Result<RunData> {
    let train = source_split(cfg, false)?;
    let test = source_split(cfg, true)?;
    if cfg.stage == Stage::One {
        return Ok(RunData { train, test, calibration: None });
    }
    let calib = fit_calibration(&train)?;
    let kinds = cfg.stage.components();
    Ok(RunData {
        train: component_samples(&train, kinds, &calib)?,
        test: component_samples(&test, kinds, &calib)?,
        calibration: Some(calib),
    })
}

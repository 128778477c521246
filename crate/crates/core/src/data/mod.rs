//! Synthetic data, augmentation and loss sampling.

mod augment;
mod sampling;
mod synth;

pub use augment::{apply_affine, augment, Affine, AugmentConfig};
pub use sampling::{background_sampling_mask, boundary_sampling_mask};
pub use synth::{generate_one, generate_synthetic, SynthConfig, MULTI_FACE_CANVAS};

use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::model::KeyPoints;
use crate::tensor::Tensor;

/// One image with its labels and optional facial key points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// `1 x 3 x H x W`, values in `[0, 1]`.
    pub image: Tensor<f32>,
    pub labels: LabelMap,
    pub points: Option<KeyPoints>,
}

impl SampleRecord {
    pub fn validate(&self) -> Result<()> {
        let s = self.image.shape();
        if s.n != 1 || s.c != 3 {
            return Err(Error::Shape(alloc::format!("sample image must be 1x3xHxW, got {s}")));
        }
        if (s.h, s.w) != (self.labels.height(), self.labels.width()) {
            return Err(Error::Shape(alloc::format!(
                "image {}x{} but labels {}x{}",
                s.h,
                s.w,
                self.labels.height(),
                self.labels.width()
            )));
        }
        self.labels.validate()?;
        if let Some(p) = &self.points {
            if p.0.iter().any(|&(x, y)| !(0.0..s.w as f32).contains(&x) || !(0.0..s.h as f32).contains(&y)) {
                return Err(Error::Geometry("key point outside the image".into()));
            }
        }
        Ok(())
    }
}

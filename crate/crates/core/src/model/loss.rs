//! Multi-head training objective.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::boundary::boundary_ground_truth;
use super::network::{ForwardPass, Network};
use super::spec::{HeadKind, NetworkSpec};
use crate::data::{background_sampling_mask, boundary_sampling_mask};
use crate::error::{Error, Result};
use crate::labels::{LabelMap, IGNORE};
use crate::layers::{sigmoid_bce, softmax_ce, LossMask};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub coarse: f64,
    pub gate: f64,
    pub fine: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { coarse: 1.0, gate: 1.0, fine: 1.0 }
    }
}

impl LossWeights {
    fn of(&self, kind: HeadKind) -> f64 {
        match kind {
            HeadKind::CoarseLabel => self.coarse,
            HeadKind::Gate => self.gate,
            HeadKind::FinalLabel => self.fine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetConfig {
    /// Non-boundary pixels kept per boundary pixel in the gate loss.
    pub boundary_ratio: usize,
    /// Background pixels kept per foreground pixel in the label losses;
    /// `None` keeps every pixel.
    pub background_factor: Option<usize>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig { boundary_ratio: 5, background_factor: None }
    }
}

/// Supervision for one head over a whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadTarget {
    pub kind: HeadKind,
    pub targets: Vec<u8>,
    pub mask: LossMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub coarse: f64,
    pub gate: f64,
    pub fine: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn set(&mut self, kind: HeadKind, v: f64) {
        match kind {
            HeadKind::CoarseLabel => self.coarse = v,
            HeadKind::Gate => self.gate = v,
            HeadKind::FinalLabel => self.fine = v,
        }
    }
}

/// Builds per-head targets for a batch of full-resolution label maps.
/// Heads at reduced resolution see labels sampled at block centers.
pub fn build_targets<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    labels: &[LabelMap],
    rng: &mut R,
    cfg: &TargetConfig,
) -> Result<Vec<HeadTarget>> {
    let (_, ih, iw) = spec.input;
    for l in labels {
        if (l.height(), l.width()) != (ih, iw) {
            return Err(Error::Shape(format!("labels {}x{} for input {ih}x{iw}", l.height(), l.width())));
        }
        if l.vocab() != spec.vocab {
            return Err(Error::Vocabulary(format!("{} labels for a {} network", l.vocab().tag(), spec.vocab.tag())));
        }
    }
    let shapes = spec.infer_shapes(1)?;
    let mut out = Vec::with_capacity(spec.heads.len());
    for (kind, name) in &spec.heads {
        let shape = shapes[spec.slot_of(name).ok_or_else(|| Error::MissingHead(name.clone()))?];
        let factor = ih / shape.h;
        let mut targets = Vec::with_capacity(labels.len() * shape.plane());
        let mut masks = Vec::with_capacity(labels.len());
        for l in labels {
            let small = if factor == 1 { l.clone() } else { l.downsample(factor)? };
            let (h, w) = (small.height(), small.width());
            match kind {
                HeadKind::Gate => {
                    let gt = boundary_ground_truth(&small);
                    masks.push(boundary_sampling_mask(&gt, h, w, cfg.boundary_ratio, rng));
                    targets.extend_from_slice(&gt);
                }
                _ => {
                    masks.push(match cfg.background_factor {
                        Some(f) => background_sampling_mask(&small, f, rng),
                        None => {
                            let keep = small.data().iter().map(|&v| u8::from(v != IGNORE)).collect();
                            LossMask::from_vec(1, h, w, keep)?
                        }
                    });
                    targets.extend_from_slice(small.data());
                }
            }
        }
        out.push(HeadTarget { kind: *kind, targets, mask: LossMask::stack(&masks)? });
    }
    Ok(out)
}

/// Weighted sum of head losses and the gradient for each head output.
///
/// Heads with zero weight contribute nothing. A gate target with an empty
/// mask is skipped; an empty label mask is an error.
pub fn total_loss<T: Real>(
    net: &Network<T>,
    pass: &ForwardPass<T>,
    targets: &[HeadTarget],
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<(HeadKind, Tensor<T>)>)> {
    if !targets.iter().any(|t| t.kind == HeadKind::FinalLabel) {
        return Err(Error::MissingHead(HeadKind::FinalLabel.tag().into()));
    }
    let mut breakdown = LossBreakdown::default();
    let mut grads = Vec::with_capacity(targets.len());
    for t in targets {
        let out = net.head(pass, t.kind).ok_or_else(|| Error::MissingHead(t.kind.tag().into()))?;
        let w = weights.of(t.kind);
        if w == 0.0 {
            continue;
        }
        let (loss, mut g) = match t.kind {
            HeadKind::Gate => {
                if t.mask.count() == 0 {
                    continue;
                }
                sigmoid_bce(out, &t.targets, &t.mask)?
            }
            _ => softmax_ce(out, &t.targets, &t.mask)?,
        };
        let wt = T::lit(w);
        g.data_mut().iter_mut().for_each(|v| *v *= wt);
        let v = w * loss.to_f64_lossy();
        breakdown.set(t.kind, v);
        breakdown.total += v;
        grads.push((t.kind, g));
    }
    Ok((breakdown, grads))
}

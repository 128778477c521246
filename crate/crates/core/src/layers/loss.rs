//! Masked pixel-wise losses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::labels::IGNORE;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

use super::activation::sigmoid;

/// Per-pixel 0/1 inclusion weights, shape `N x 1 x H x W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossMask {
    n: usize,
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl LossMask {
    pub fn full(n: usize, h: usize, w: usize) -> Self {
        LossMask { n, h, w, data: vec![1; n * h * w] }
    }

    pub fn empty(n: usize, h: usize, w: usize) -> Self {
        LossMask { n, h, w, data: vec![0; n * h * w] }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n * h * w {
            return Err(Error::Shape(format!("{} mask values for {n}x1x{h}x{w}", data.len())));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Config("loss mask values must be 0 or 1".into()));
        }
        Ok(LossMask { n, h, w, data })
    }

    /// Concatenates single-item masks along the batch axis.
    pub fn stack(items: &[LossMask]) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptyMask)?;
        let mut data = Vec::new();
        for m in items {
            if (m.h, m.w) != (first.h, first.w) {
                return Err(Error::Shape("stacked masks differ in extent".into()));
            }
            data.extend_from_slice(&m.data);
        }
        Ok(LossMask { n: data.len() / (first.h * first.w), h: first.h, w: first.w, data })
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.n, 1, self.h, self.w)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

fn check(shape: Shape, targets: &[u8], mask: &LossMask, channels: Option<usize>) -> Result<()> {
    if let Some(c) = channels {
        if shape.c != c {
            return Err(Error::Shape(format!("expected {c} logit channels, got {}", shape.c)));
        }
    }
    if targets.len() != shape.n * shape.plane() {
        return Err(Error::Shape(format!("{} targets for logits {shape}", targets.len())));
    }
    if mask.shape() != shape.with_channels(1) {
        return Err(Error::Shape(format!("mask {} does not match logits {shape}", mask.shape())));
    }
    Ok(())
}

/// Mean softmax cross-entropy over included pixels and its logit gradient.
///
/// A pixel is included when its mask value is 1 and its target is not
/// [`IGNORE`]. Returns [`Error::EmptyMask`] when nothing is included.
pub fn softmax_ce<T: Real>(logits: &Tensor<T>, targets: &[u8], mask: &LossMask) -> Result<(T, Tensor<T>)> {
    let s = logits.shape();
    check(s, targets, mask, None)?;
    let plane = s.plane();
    let mut count = 0usize;
    for (&t, &m) in targets.iter().zip(mask.data()) {
        if m == 1 && t != IGNORE {
            if t as usize >= s.c {
                return Err(Error::ClassOutOfRange { index: t, classes: s.c });
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let inv = T::one() / T::lit(count as f64);
    let mut grad = Tensor::zeros(s);
    let mut loss = T::zero();
    let data = logits.data();
    let mut probs = vec![T::zero(); s.c];
    for n in 0..s.n {
        for p in 0..plane {
            let t = targets[n * plane + p];
            if mask.data()[n * plane + p] != 1 || t == IGNORE {
                continue;
            }
            let at = |c: usize| s.index(n, c, 0, 0) + p;
            let max = (0..s.c).map(|c| data[at(c)]).fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (c, pr) in probs.iter_mut().enumerate() {
                *pr = (data[at(c)] - max).exp();
                z += *pr;
            }
            loss += z.ln() + max - data[at(t as usize)];
            let g = grad.data_mut();
            for (c, &pr) in probs.iter().enumerate() {
                let onehot = if c == t as usize { T::one() } else { T::zero() };
                g[at(c)] = (pr / z - onehot) * inv;
            }
        }
    }
    Ok((loss * inv, grad))
}

/// Mean binary cross-entropy of a single logit channel against 0/1 targets.
pub fn sigmoid_bce<T: Real>(logit: &Tensor<T>, targets: &[u8], mask: &LossMask) -> Result<(T, Tensor<T>)> {
    let s = logit.shape();
    check(s, targets, mask, Some(1))?;
    let mut count = 0usize;
    for (&t, &m) in targets.iter().zip(mask.data()) {
        if m == 1 && t != IGNORE {
            if t > 1 {
                return Err(Error::ClassOutOfRange { index: t, classes: 2 });
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let inv = T::one() / T::lit(count as f64);
    let mut grad = Tensor::zeros(s);
    let mut loss = T::zero();
    for (i, (&z, g)) in logit.data().iter().zip(grad.data_mut()).enumerate() {
        let t = targets[i];
        if mask.data()[i] != 1 || t == IGNORE {
            continue;
        }
        let tv = if t == 1 { T::one() } else { T::zero() };
        // max(z, 0) - z t + ln(1 + e^{-|z|})
        loss += z.max(T::zero()) - z * tv + (-z.abs()).exp().ln_1p();
        *g = (sigmoid(z) - tv) * inv;
    }
    Ok((loss * inv, grad))
}

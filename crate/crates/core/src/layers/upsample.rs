use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Source taps for one output coordinate (half-pixel centres, edge clamped).
#[derive(Clone, Copy)]
struct Tap<T> {
    lo: usize,
    hi: usize,
    frac: T,
}

fn taps<T: Real>(input: usize, factor: usize) -> Vec<Tap<T>> {
    (0..input * factor)
        .map(|o| {
            let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let lo = (libm::floor(src) as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            Tap { lo, hi, frac: T::lit(src - lo as f64) }
        })
        .collect()
}

/// Bilinear upsampling by an integer factor.
pub fn bilinear_upsample<T: Real>(x: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if factor == 0 || s.h == 0 || s.w == 0 {
        return Err(Error::Geometry(format!("cannot upsample {s} by {factor}")));
    }
    let (ty, tx) = (taps::<T>(s.h, factor), taps::<T>(s.w, factor));
    let out_shape = Shape::new(s.n, s.c, s.h * factor, s.w * factor);
    let mut out = Vec::with_capacity(out_shape.len());
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            for a in &ty {
                let r0 = &plane[a.lo * s.w..(a.lo + 1) * s.w];
                let r1 = &plane[a.hi * s.w..(a.hi + 1) * s.w];
                for b in &tx {
                    let top = r0[b.lo] + (r0[b.hi] - r0[b.lo]) * b.frac;
                    let bot = r1[b.lo] + (r1[b.hi] - r1[b.lo]) * b.frac;
                    out.push(top + (bot - top) * a.frac);
                }
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}

pub fn bilinear_upsample_backward<T: Real>(grad_out: &Tensor<T>, input_shape: Shape, factor: usize) -> Result<Tensor<T>> {
    let s = input_shape;
    grad_out.ensure_shape(Shape::new(s.n, s.c, s.h * factor, s.w * factor), "bilinear_upsample_backward")?;
    let (ty, tx) = (taps::<T>(s.h, factor), taps::<T>(s.w, factor));
    let mut gx = Tensor::zeros(s);
    let wo = s.w * factor;
    for n in 0..s.n {
        for c in 0..s.c {
            let go = grad_out.plane(n, c);
            let start = s.index(n, c, 0, 0);
            let plane = &mut gx.data_mut()[start..start + s.plane()];
            for (oy, a) in ty.iter().enumerate() {
                for (ox, b) in tx.iter().enumerate() {
                    let g = go[oy * wo + ox];
                    let gt = g * (T::one() - a.frac);
                    let gb = g * a.frac;
                    plane[a.lo * s.w + b.lo] += gt * (T::one() - b.frac);
                    plane[a.lo * s.w + b.hi] += gt * b.frac;
                    plane[a.hi * s.w + b.lo] += gb * (T::one() - b.frac);
                    plane[a.hi * s.w + b.hi] += gb * b.frac;
                }
            }
        }
    }
    Ok(gx)
}

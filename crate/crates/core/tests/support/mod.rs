//! Independent reference implementations and finite-difference helpers
//! shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgrnn_core::layers::ConvSpec;
use sgrnn_core::{Real, Shape, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<T: Real>(rng: &mut ChaCha8Rng, shape: Shape, lo: f64, hi: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_, _, _, _| T::lit(rng.random_range(lo..hi)))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps near-zero entries from
/// dominating on round-off alone.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences of `f` at `x` for the listed coordinates.
pub fn central_diff(x: &[f64], coords: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut xp = x.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between `analytic` and central differences over
/// at most `max_coords` evenly spread coordinates.
pub fn grad_error(x: &[f64], analytic: &[f64], max_coords: usize, f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let stride = x.len().div_ceil(max_coords.max(1)).max(1);
    let coords: Vec<usize> = (0..x.len()).step_by(stride).collect();
    let numeric = central_diff(x, &coords, f);
    coords.iter().zip(&numeric).map(|(&i, &n)| rel_err(analytic[i], n)).fold(0.0, f64::max)
}

/// Direct convolution: `y[n,o,i,j] = b[o] + sum w[o,c,ki,kj] x[n,c,i*s+ki-p,j*s+kj-p]`.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], spec: &ConvSpec) -> Tensor<f64> {
    let s = x.shape();
    let oh = (s.h + 2 * spec.padding - spec.kernel_h) / spec.stride + 1;
    let ow = (s.w + 2 * spec.padding - spec.kernel_w) / spec.stride + 1;
    Tensor::from_fn(Shape::new(s.n, spec.out_channels, oh, ow), |n, o, i, j| {
        let mut acc = b[o];
        for c in 0..s.c {
            for ki in 0..spec.kernel_h {
                for kj in 0..spec.kernel_w {
                    let y = (i * spec.stride + ki) as isize - spec.padding as isize;
                    let xx = (j * spec.stride + kj) as isize - spec.padding as isize;
                    if y >= 0 && xx >= 0 && (y as usize) < s.h && (xx as usize) < s.w {
                        acc += w.at(o, c, ki, kj) * x.at(n, c, y as usize, xx as usize);
                    }
                }
            }
        }
        acc
    })
}

/// Direct transposed convolution: every input pixel stamps its kernel
/// (weights laid out `in x out x kh x kw`) into the output.
pub fn deconv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], spec: &ConvSpec) -> Tensor<f64> {
    let s = x.shape();
    let oh = (s.h - 1) * spec.stride + spec.kernel_h - 2 * spec.padding;
    let ow = (s.w - 1) * spec.stride + spec.kernel_w - 2 * spec.padding;
    let mut out = Tensor::from_fn(Shape::new(s.n, spec.out_channels, oh, ow), |_, o, _, _| b[o]);
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..s.h {
                for j in 0..s.w {
                    for o in 0..spec.out_channels {
                        for ki in 0..spec.kernel_h {
                            for kj in 0..spec.kernel_w {
                                let y = (i * spec.stride + ki) as isize - spec.padding as isize;
                                let xx = (j * spec.stride + kj) as isize - spec.padding as isize;
                                if y >= 0 && xx >= 0 && (y as usize) < oh && (xx as usize) < ow {
                                    *out.at_mut(n, o, y as usize, xx as usize) += w.at(c, o, ki, kj) * x.at(n, c, i, j);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// One directional recurrence computed lane by lane with plain vectors.
/// `dir`: 0 left-to-right, 1 right-to-left, 2 top-to-bottom, 3 bottom-to-top.
/// `omega` is row-major `d x d`.
pub fn lane_scan_oracle(x: &Tensor<f32>, g: &Tensor<f32>, omega: &[f32], bias: &[f32], dir: usize) -> Tensor<f32> {
    let s = x.shape();
    let d = s.c;
    let mut out = Tensor::zeros(s);
    let (lanes, len) = if dir < 2 { (s.h, s.w) } else { (s.w, s.h) };
    for n in 0..s.n {
        for lane in 0..lanes {
            let mut prev = vec![0.0f32; d];
            for step in 0..len {
                let pos = if dir.is_multiple_of(2) { step } else { len - 1 - step };
                let (y, xx) = if dir < 2 { (lane, pos) } else { (pos, lane) };
                let mut next = vec![0.0f32; d];
                for r in 0..d {
                    let mut rec = bias[r];
                    for c in 0..d {
                        rec += omega[r * d + c] * prev[c];
                    }
                    next[r] = x.at(n, r, y, xx) + g.at(n, r, y, xx) * rec;
                }
                for r in 0..d {
                    *out.at_mut(n, r, y, xx) = next[r];
                }
                prev = next;
            }
        }
    }
    out
}

/// Elementwise maximum of the four directional maps.
pub fn max4(maps: &[Tensor<f32>; 4]) -> Tensor<f32> {
    let s = maps[0].shape();
    Tensor::from_fn(s, |n, c, y, x| maps.iter().map(|m| m.at(n, c, y, x)).fold(f32::NEG_INFINITY, f32::max))
}

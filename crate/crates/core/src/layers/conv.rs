//! Convolution and transposed convolution via im2col and GEMM.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Geometry of a 2-D convolution with symmetric zero padding.
///
/// For a transposed convolution the same struct describes the layer from the
/// caller's point of view: `in_channels` are the channels it consumes and
/// `out_channels` the channels it produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        ConvSpec { in_channels, out_channels, kernel_h: kernel, kernel_w: kernel, stride, padding }
    }

    /// Square kernel with "same" padding at stride 1.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(in_channels, out_channels, kernel, 1, kernel / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride == 0 {
            return Err(Error::Geometry(format!("kernel and stride must be >= 1: {self:?}")));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Geometry(format!("channel counts must be >= 1: {self:?}")));
        }
        Ok(())
    }

    /// Output extents of the forward convolution.
    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let axis = |n: usize, k: usize| -> Result<usize> {
            let padded = n + 2 * self.padding;
            if padded < k || !(padded - k).is_multiple_of(self.stride) {
                return Err(Error::Geometry(format!(
                    "extent {n} with kernel {k}, stride {}, pad {} is not integral",
                    self.stride, self.padding
                )));
            }
            Ok((padded - k) / self.stride + 1)
        };
        Ok((axis(h, self.kernel_h)?, axis(w, self.kernel_w)?))
    }

    /// Output extents of the transposed convolution.
    pub fn transposed_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let axis = |n: usize, k: usize| -> Result<usize> {
            let full = (n.max(1) - 1) * self.stride + k;
            if n == 0 || full <= 2 * self.padding {
                return Err(Error::Geometry(format!("transposed extent {n} collapses to zero")));
            }
            Ok(full - 2 * self.padding)
        };
        Ok((axis(h, self.kernel_h)?, axis(w, self.kernel_w)?))
    }

    /// Weight shape `out x in x kh x kw` (conv) or `in x out x kh x kw` (deconv).
    pub fn weight_shape(&self, transposed: bool) -> Shape {
        if transposed {
            Shape::new(self.in_channels, self.out_channels, self.kernel_h, self.kernel_w)
        } else {
            Shape::new(self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)
        }
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.padding == 0
    }
}

/// Planar geometry shared by im2col and col2im.
#[derive(Clone, Copy)]
struct Patch {
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Patch {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col<T: Real>(img: &[T], p: Patch, col: &mut [T]) {
    let cols = p.cols();
    let mut row = 0;
    for c in 0..p.channels {
        let plane = &img[c * p.h * p.w..(c + 1) * p.h * p.w];
        for ky in 0..p.kh {
            for kx in 0..p.kw {
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..p.ho {
                    let iy = (oy * p.stride + ky) as isize - p.pad as isize;
                    let out_row = &mut dst[oy * p.wo..(oy + 1) * p.wo];
                    if iy < 0 || iy >= p.h as isize {
                        out_row.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * p.w..(iy as usize + 1) * p.w];
                    for (ox, v) in out_row.iter_mut().enumerate() {
                        let ix = (ox * p.stride + kx) as isize - p.pad as isize;
                        *v = if ix < 0 || ix >= p.w as isize { T::zero() } else { src[ix as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im<T: Real>(col: &[T], p: Patch, img: &mut [T]) {
    let cols = p.cols();
    let mut row = 0;
    for c in 0..p.channels {
        let plane = &mut img[c * p.h * p.w..(c + 1) * p.h * p.w];
        for ky in 0..p.kh {
            for kx in 0..p.kw {
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..p.ho {
                    let iy = (oy * p.stride + ky) as isize - p.pad as isize;
                    if iy < 0 || iy >= p.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * p.w..(iy as usize + 1) * p.w];
                    for (ox, &v) in src[oy * p.wo..(oy + 1) * p.wo].iter().enumerate() {
                        let ix = (ox * p.stride + kx) as isize - p.pad as isize;
                        if ix >= 0 && (ix as usize) < p.w {
                            dst[ix as usize] += v;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

fn check_params<T: Real>(w: &Tensor<T>, bias: &[T], spec: &ConvSpec, transposed: bool) -> Result<()> {
    spec.validate()?;
    w.ensure_shape(spec.weight_shape(transposed), "convolution weights")?;
    if bias.len() != spec.out_channels {
        return Err(Error::Shape(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            spec.out_channels
        )));
    }
    Ok(())
}

fn check_input<T: Real>(x: &Tensor<T>, spec: &ConvSpec) -> Result<()> {
    if x.shape().c != spec.in_channels {
        return Err(Error::Shape(format!(
            "input has {} channels, layer expects {}",
            x.shape().c,
            spec.in_channels
        )));
    }
    Ok(())
}

fn add_bias<T: Real>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_exact_mut(plane).zip(bias) {
        if b != T::zero() {
            chunk.iter_mut().for_each(|v| *v += b);
        }
    }
}

/// Cross-correlation with zero padding plus bias.
pub fn conv2d_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, bias: &[T], spec: &ConvSpec) -> Result<Tensor<T>> {
    check_params(w, bias, spec, false)?;
    check_input(x, spec)?;
    let s = x.shape();
    let (ho, wo) = spec.output_extent(s.h, s.w)?;
    let out_shape = Shape::new(s.n, spec.out_channels, ho, wo);
    let mut out = Tensor::zeros(out_shape);
    let patch = Patch {
        channels: s.c,
        h: s.h,
        w: s.w,
        kh: spec.kernel_h,
        kw: spec.kernel_w,
        stride: spec.stride,
        pad: spec.padding,
        ho,
        wo,
    };
    let (k, p) = (patch.rows(), patch.cols());
    let mut col = if spec.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    for n in 0..s.n {
        let src: &[T] = if spec.is_pointwise() {
            x.item(n)
        } else {
            im2col(x.item(n), patch, &mut col);
            &col
        };
        let dst = out.item_mut(n);
        T::gemm(spec.out_channels, k, p, T::one(), w.data(), k as isize, 1, src, p as isize, 1, T::zero(), dst, p as isize, 1);
        add_bias(dst, bias, p);
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<ConvGrads<T>> {
    spec.validate()?;
    w.ensure_shape(spec.weight_shape(false), "convolution weights")?;
    check_input(x, spec)?;
    let s = x.shape();
    let (ho, wo) = spec.output_extent(s.h, s.w)?;
    grad_out.ensure_shape(Shape::new(s.n, spec.out_channels, ho, wo), "conv2d_backward grad_out")?;
    let patch = Patch {
        channels: s.c,
        h: s.h,
        w: s.w,
        kh: spec.kernel_h,
        kw: spec.kernel_w,
        stride: spec.stride,
        pad: spec.padding,
        ho,
        wo,
    };
    let (k, p) = (patch.rows(), patch.cols());
    let oc = spec.out_channels;
    let mut gx = Tensor::zeros(s);
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = vec![T::zero(); oc];
    let pointwise = spec.is_pointwise();
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); k * p] };
    let mut gcol = if pointwise { Vec::new() } else { vec![T::zero(); k * p] };
    for n in 0..s.n {
        let go = grad_out.item(n);
        for (b, plane) in gb.iter_mut().zip(go.chunks_exact(p)) {
            *b += plane.iter().copied().sum::<T>();
        }
        let src: &[T] = if pointwise {
            x.item(n)
        } else {
            im2col(x.item(n), patch, &mut col);
            &col
        };
        // gw[oc][k] += go[oc][p] * src[k][p]^T
        T::gemm(oc, p, k, T::one(), go, p as isize, 1, src, 1, p as isize, T::one(), gw.data_mut(), k as isize, 1);
        // gcol[k][p] = w[oc][k]^T * go[oc][p]
        if pointwise {
            T::gemm(k, oc, p, T::one(), w.data(), 1, k as isize, go, p as isize, 1, T::zero(), gx.item_mut(n), p as isize, 1);
        } else {
            T::gemm(k, oc, p, T::one(), w.data(), 1, k as isize, go, p as isize, 1, T::zero(), &mut gcol, p as isize, 1);
            col2im(&gcol, patch, gx.item_mut(n));
        }
    }
    Ok(ConvGrads { input: gx, weight: gw, bias: gb })
}

/// Transposed convolution: the adjoint of [`conv2d_forward`] (with the
/// channel roles swapped) plus a per-output-channel bias.
pub fn deconv2d_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, bias: &[T], spec: &ConvSpec) -> Result<Tensor<T>> {
    check_params(w, bias, spec, true)?;
    check_input(x, spec)?;
    let s = x.shape();
    let (ho, wo) = spec.transposed_extent(s.h, s.w)?;
    let patch = Patch {
        channels: spec.out_channels,
        h: ho,
        w: wo,
        kh: spec.kernel_h,
        kw: spec.kernel_w,
        stride: spec.stride,
        pad: spec.padding,
        ho: s.h,
        wo: s.w,
    };
    // The transposed geometry must invert exactly.
    if spec.output_extent(ho, wo)? != (s.h, s.w) {
        return Err(Error::Geometry(format!("transposed convolution of {s} does not invert")));
    }
    let (k, p) = (patch.rows(), patch.cols());
    let ic = spec.in_channels;
    let mut out = Tensor::zeros(Shape::new(s.n, spec.out_channels, ho, wo));
    let mut col = vec![T::zero(); k * p];
    for n in 0..s.n {
        // col[k][p] = w[ic][k]^T * x[ic][p]
        T::gemm(k, ic, p, T::one(), w.data(), 1, k as isize, x.item(n), p as isize, 1, T::zero(), &mut col, p as isize, 1);
        let dst = out.item_mut(n);
        col2im(&col, patch, dst);
        add_bias(dst, bias, ho * wo);
    }
    Ok(out)
}

/// Gradients of [`deconv2d_forward`].
pub fn deconv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<ConvGrads<T>> {
    spec.validate()?;
    w.ensure_shape(spec.weight_shape(true), "deconvolution weights")?;
    check_input(x, spec)?;
    let s = x.shape();
    let (ho, wo) = spec.transposed_extent(s.h, s.w)?;
    grad_out.ensure_shape(Shape::new(s.n, spec.out_channels, ho, wo), "deconv2d_backward grad_out")?;
    let patch = Patch {
        channels: spec.out_channels,
        h: ho,
        w: wo,
        kh: spec.kernel_h,
        kw: spec.kernel_w,
        stride: spec.stride,
        pad: spec.padding,
        ho: s.h,
        wo: s.w,
    };
    let (k, p) = (patch.rows(), patch.cols());
    let ic = spec.in_channels;
    let mut gx = Tensor::zeros(s);
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = vec![T::zero(); spec.out_channels];
    let mut col = vec![T::zero(); k * p];
    for n in 0..s.n {
        let go = grad_out.item(n);
        for (b, plane) in gb.iter_mut().zip(go.chunks_exact(ho * wo)) {
            *b += plane.iter().copied().sum::<T>();
        }
        im2col(go, patch, &mut col);
        // gx[ic][p] = w[ic][k] * col[k][p]
        T::gemm(ic, k, p, T::one(), w.data(), k as isize, 1, &col, p as isize, 1, T::zero(), gx.item_mut(n), p as isize, 1);
        // gw[ic][k] += x[ic][p] * col[k][p]^T
        T::gemm(ic, p, k, T::one(), x.item(n), p as isize, 1, &col, 1, p as isize, T::one(), gw.data_mut(), k as isize, 1);
    }
    Ok(ConvGrads { input: gx, weight: gw, bias: gb })
}

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Flat input index of the winning element for every pooled output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_shape: Shape,
    pub argmax: Vec<u32>,
}

/// Max pooling. Ties go to the first element in row-major window order.
pub fn maxpool2d<T: Real>(x: &Tensor<T>, window: usize, stride: usize) -> Result<(Tensor<T>, PoolIndices)> {
    let s = x.shape();
    if window == 0 || stride == 0 {
        return Err(Error::Geometry("pool window and stride must be >= 1".into()));
    }
    if !s.h.is_multiple_of(stride) || !s.w.is_multiple_of(stride) || s.h < window || s.w < window || !(s.h - window).is_multiple_of(stride) {
        return Err(Error::Geometry(format!(
            "{}x{} extents incompatible with pool window {window} stride {stride}",
            s.h, s.w
        )));
    }
    let (ho, wo) = ((s.h - window) / stride + 1, (s.w - window) / stride + 1);
    let out_shape = Shape::new(s.n, s.c, ho, wo);
    let mut out = Vec::with_capacity(out_shape.len());
    let mut argmax = Vec::with_capacity(out_shape.len());
    let data = x.data();
    for n in 0..s.n {
        for c in 0..s.c {
            let base = s.index(n, c, 0, 0);
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + oy * stride * s.w + ox * stride;
                    for ky in 0..window {
                        for kx in 0..window {
                            let i = base + (oy * stride + ky) * s.w + ox * stride + kx;
                            if data[i] > data[best] {
                                best = i;
                            }
                        }
                    }
                    out.push(data[best]);
                    argmax.push(best as u32);
                }
            }
        }
    }
    Ok((Tensor::from_vec(out_shape, out)?, PoolIndices { input_shape: s, argmax }))
}

/// Routes each output gradient to its recorded argmax.
pub fn maxpool2d_backward<T: Real>(grad_out: &Tensor<T>, idx: &PoolIndices) -> Result<Tensor<T>> {
    if grad_out.data().len() != idx.argmax.len() {
        return Err(Error::Shape(format!(
            "pool backward: {} gradients for {} recorded windows",
            grad_out.data().len(),
            idx.argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(idx.input_shape);
    let dst = gx.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(&idx.argmax) {
        dst[i as usize] += g;
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_maximum() {
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2d(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx.argmax, vec![3]);
    }

    #[test]
    fn ties_route_to_first_element() {
        let x = Tensor::filled(Shape::new(1, 1, 4, 4), 7.0f64);
        let (y, idx) = maxpool2d(&x, 2, 2).unwrap();
        let g = maxpool2d_backward(&Tensor::filled(y.shape(), 1.0), &idx).unwrap();
        for yy in 0..4 {
            for xx in 0..4 {
                let expected = if yy % 2 == 0 && xx % 2 == 0 { 1.0 } else { 0.0 };
                assert_eq!(g.at(0, 0, yy, xx), expected);
            }
        }
    }

    #[test]
    fn rejects_indivisible() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 5, 4));
        assert!(matches!(maxpool2d(&x, 2, 2), Err(Error::Geometry(_))));
    }
}

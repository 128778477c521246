//! Dense NCHW tensors and small square matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

/// Extents of a 4-D tensor in NCHW order. Width is the fastest axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Elements per batch item.
    pub const fn item(&self) -> usize {
        self.c * self.h * self.w
    }

    #[inline]
    pub const fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }

    pub const fn with_channels(&self, c: usize) -> Self {
        Shape { c, ..*self }
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: vec![T::zero(); shape.len()] }
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        Tensor { shape, data: vec![value; shape.len()] }
    }

    /// Wraps `data`, rejecting a length mismatch or any non-finite value.
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} elements supplied for shape {shape}",
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.ensure_finite("Tensor::from_vec")?;
        Ok(t)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.shape.index(n, c, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut T {
        let i = self.shape.index(n, c, y, x);
        &mut self.data[i]
    }

    /// Contiguous slice holding batch item `n`.
    pub fn item(&self, n: usize) -> &[T] {
        let len = self.shape.item();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [T] {
        let len = self.shape.item();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn ensure_shape(&self, expected: Shape, what: &str) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: expected {expected}, got {}", self.shape)))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        other.ensure_shape(self.shape, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor<T>) -> T {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.len() != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {} into {shape}", self.shape)));
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Converts to another precision.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    /// Stacks single-item tensors of equal shape along the batch axis.
    pub fn stack(items: &[&Tensor<T>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Shape("cannot stack zero tensors".into()))?
            .shape;
        let mut data = Vec::with_capacity(first.len() * items.len());
        let mut n = 0;
        for t in items {
            if (t.shape.c, t.shape.h, t.shape.w) != (first.c, first.h, first.w) {
                return Err(Error::Shape(format!("stack: {} vs {first}", t.shape)));
            }
            n += t.shape.n;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor { shape: Shape { n, ..first }, data })
    }

    /// Splits the channel axis into equal halves, preserving channel order.
    pub fn channel_split(&self) -> Result<(Tensor<T>, Tensor<T>)> {
        let s = self.shape;
        if !s.c.is_multiple_of(2) {
            return Err(Error::OddChannels(s.c));
        }
        let half = s.with_channels(s.c / 2);
        let block = half.item();
        let mut a = Vec::with_capacity(half.len());
        let mut b = Vec::with_capacity(half.len());
        for item in self.data.chunks_exact(s.item()) {
            a.extend_from_slice(&item[..block]);
            b.extend_from_slice(&item[block..]);
        }
        Ok((Tensor { shape: half, data: a }, Tensor { shape: half, data: b }))
    }

    /// Concatenates two tensors along the channel axis.
    pub fn channel_concat(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let (sa, sb) = (a.shape, b.shape);
        if (sa.n, sa.h, sa.w) != (sb.n, sb.h, sb.w) {
            return Err(Error::Shape(format!("channel_concat: {sa} vs {sb}")));
        }
        let shape = sa.with_channels(sa.c + sb.c);
        let mut data = Vec::with_capacity(shape.len());
        for (ia, ib) in a.data.chunks_exact(sa.item().max(1)).zip(b.data.chunks_exact(sb.item().max(1))) {
            data.extend_from_slice(ia);
            data.extend_from_slice(ib);
        }
        Ok(Tensor { shape, data })
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        Self::scaled_identity(d, T::one())
    }

    pub fn scaled_identity(d: usize, s: T) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = s;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "matvec: {}x{} matrix with vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked hot-path product; `v.len() == cols`, `out.len() == rows`.
    #[inline]
    pub fn matvec_into(&self, v: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
        }
    }

    /// `out = selfᵀ · v`.
    #[inline]
    pub fn matvec_transposed_into(&self, v: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (row, &vi) in self.data.chunks_exact(self.cols).zip(v) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
    }

    /// Largest singular value by power iteration on `wᵀw` (f64 internally).
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm_f64(
            &self.data.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            self.rows,
            self.cols,
        )
    }

    /// Rescales so the induced 2-norm is at most `limit`.
    pub fn spectral_norm_project(&self, limit: T) -> Matrix<T> {
        let mut out = self.clone();
        out.spectral_norm_project_in_place(limit);
        out
    }

    pub fn spectral_norm_project_in_place(&mut self, limit: T) {
        let limit = limit.to_f64_lossy();
        let sigma = self.spectral_norm();
        if sigma > limit {
            let s = T::lit(limit / sigma);
            self.data.iter_mut().for_each(|v| *v *= s);
        }
    }
}

const POWER_ITERATIONS: usize = 50;
const POWER_TOLERANCE: f64 = 1e-7;
/// The iteration runs on `(wᵀw)^(2^GRAM_SQUARINGS)`, which has the same
/// leading eigenvector as `wᵀw` but a much larger spectral gap when the top
/// two singular values are close.
const GRAM_SQUARINGS: usize = 5;

fn spectral_norm_f64(w: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 0 || cols == 0 || w.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let apply_w = |v: &[f64]| -> Vec<f64> { (0..rows).map(|r| (0..cols).map(|c| w[r * cols + c] * v[c]).sum()).collect() };
    let mut gram: Vec<f64> = (0..cols * cols)
        .map(|ij| {
            let (i, j) = (ij / cols, ij % cols);
            (0..rows).map(|r| w[r * cols + i] * w[r * cols + j]).sum()
        })
        .collect();
    for _ in 0..GRAM_SQUARINGS {
        let scale = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            break;
        }
        gram.iter_mut().for_each(|v| *v /= scale);
        gram = (0..cols * cols)
            .map(|ij| {
                let (i, j) = (ij / cols, ij % cols);
                (0..cols).map(|k| gram[i * cols + k] * gram[k * cols + j]).sum()
            })
            .collect();
    }
    // Fixed, non-symmetric start so the iteration is deterministic and not
    // orthogonal to the leading singular vector for structured matrices.
    let mut v: Vec<f64> = (0..cols).map(|j| 1.0 + 0.37 * libm::sin(1.3 * j as f64 + 0.5)).collect();
    normalize(&mut v);
    let mut sigma = norm(&apply_w(&v));
    for _ in 0..POWER_ITERATIONS {
        let mut next: Vec<f64> = (0..cols).map(|i| (0..cols).map(|j| gram[i * cols + j] * v[j]).sum()).collect();
        if normalize(&mut next) == 0.0 {
            break;
        }
        v = next;
        let next_sigma = norm(&apply_w(&v));
        let done = (next_sigma - sigma).abs() <= POWER_TOLERANCE * next_sigma;
        sigma = next_sigma;
        if done {
            break;
        }
    }
    sigma
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

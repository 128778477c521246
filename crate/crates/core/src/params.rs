//! Named learnable parameters and matching gradient buffers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    /// Square hidden-state transition of a recurrent scan; kept inside the
    /// unit spectral-norm ball after every update.
    Transition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub kind: ParamKind,
    pub data: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, kind: ParamKind) -> Self {
        let len = dims.iter().product();
        Param { name: name.into(), dims, kind, data: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn push(&mut self, p: Param<T>) -> Result<usize> {
        if self.index_of(&p.name).is_some() {
            return Err(Error::Config(format!("duplicate parameter {}", p.name)));
        }
        self.params.push(p);
        Ok(self.params.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> core::slice::IterMut<'_, Param<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn at(&self, i: usize) -> &Param<T> {
        &self.params[i]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut Param<T> {
        &mut self.params[i]
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    dims: p.dims.clone(),
                    kind: p.kind,
                    data: p.data.iter().map(|&v| U::lit(v.to_f64_lossy())).collect(),
                })
                .collect(),
        }
    }
}

/// One gradient buffer per parameter, in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub buffers: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Gradients { buffers: store.iter().map(|p| vec![T::zero(); p.len()]).collect() }
    }

    /// Adds `other` element-wise, in a fixed order.
    pub fn accumulate(&mut self, other: &Gradients<T>) -> Result<()> {
        if self.buffers.len() != other.buffers.len() {
            return Err(Error::Shape("gradient sets differ in parameter count".into()));
        }
        for (a, b) in self.buffers.iter_mut().zip(&other.buffers) {
            if a.len() != b.len() {
                return Err(Error::Shape("gradient buffers differ in length".into()));
            }
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        for b in &mut self.buffers {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add_to(&mut self, index: usize, values: &[T]) {
        for (a, &b) in self.buffers[index].iter_mut().zip(values) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> T {
        self.buffers.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

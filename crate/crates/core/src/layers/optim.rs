//! SGD with momentum and weight decay.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamKind, ParamStore};
use crate::real::Real;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { learning_rate: 0.01, momentum: 0.9, weight_decay: 5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState<T> {
    pub config: SgdConfig,
    pub velocity: Vec<Vec<T>>,
}

impl<T: Real> OptimState<T> {
    pub fn new(store: &ParamStore<T>, config: SgdConfig) -> Self {
        OptimState { config, velocity: store.iter().map(|p| vec![T::zero(); p.len()]).collect() }
    }
}

/// `v <- mu v - lr (g + wd p)`, `p <- p + v`, then projects every transition
/// matrix back to spectral norm at most 1.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, grads: &Gradients<T>, state: &mut OptimState<T>) -> Result<()> {
    if grads.buffers.len() != params.len() || state.velocity.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} momentum buffers",
            params.len(),
            grads.buffers.len(),
            state.velocity.len()
        )));
    }
    let lr = T::lit(state.config.learning_rate);
    let mu = T::lit(state.config.momentum);
    let wd = T::lit(state.config.weight_decay);
    for ((p, g), v) in params.iter_mut().zip(&grads.buffers).zip(&mut state.velocity) {
        if g.len() != p.len() || v.len() != p.len() {
            return Err(Error::Shape(format!("buffer length mismatch for {}", p.name)));
        }
        for ((w, &gi), vi) in p.data.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi - lr * (gi + wd * *w);
            *w += *vi;
        }
        if p.kind == ParamKind::Transition {
            let d = p.dims[0];
            let mut m = Matrix::from_vec(d, p.dims[1], core::mem::take(&mut p.data))?;
            m.spectral_norm_project_in_place(T::one());
            p.data = m.data().to_vec();
        }
    }
    Ok(())
}

//! Executes a [`NetworkSpec`] forward and backward over a parameter store.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{HeadKind, LayerOp, NetworkSpec};
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::layers::{
    bilinear_upsample, bilinear_upsample_backward, conv2d_backward, conv2d_forward, deconv2d_backward,
    deconv2d_forward, maxpool2d, maxpool2d_backward, relu_backward_in_place, relu_in_place, PoolIndices,
};
use crate::params::{Gradients, Param, ParamKind, ParamStore};
use crate::real::Real;
use crate::scan::{srnn_backward, srnn_forward, Direction, ScanExecutor, ScanParams, Sequential, SrnnTape};
use crate::tensor::{Matrix, Shape, Tensor};

#[derive(Debug, Clone)]
struct LayerPlan {
    inputs: Vec<usize>,
    params: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: ParamStore<T>,
    plan: Vec<LayerPlan>,
}

#[derive(Debug, Clone)]
enum Cache<T> {
    None,
    Pool(PoolIndices),
    Srnn(SrnnTape<T>, [ScanParams<T>; 4]),
}

/// Every intermediate value of one forward call, plus what backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    values: Vec<Tensor<T>>,
    caches: Vec<Cache<T>>,
}

impl<T: Real> ForwardPass<T> {
    pub fn value(&self, slot: usize) -> &Tensor<T> {
        &self.values[slot]
    }

    pub fn value_mut(&mut self, slot: usize) -> &mut Tensor<T> {
        &mut self.values[slot]
    }

    /// Gate probabilities fed to the recurrent layer, if it is gated.
    pub fn recurrent_gate(&self) -> Option<&Tensor<T>> {
        self.caches.iter().find_map(|c| match c {
            Cache::Srnn(tape, _) => Some(tape.gate().values()),
            _ => None,
        })
    }
}

fn build_plan<T: Real>(spec: &NetworkSpec, params: &ParamStore<T>) -> Result<Vec<LayerPlan>> {
    spec.infer_shapes(1)?;
    let declared = spec.param_specs();
    if declared.len() != params.len() {
        return Err(Error::Config(format!(
            "spec declares {} parameters, store holds {}",
            declared.len(),
            params.len()
        )));
    }
    let mut plan: Vec<LayerPlan> = spec
        .layers
        .iter()
        .map(|l| LayerPlan { inputs: l.inputs.iter().map(|n| spec.slot_of(n).unwrap()).collect(), params: Vec::new() })
        .collect();
    for d in &declared {
        let idx = params.index_of(&d.name).ok_or_else(|| Error::Config(format!("missing parameter {}", d.name)))?;
        let p = params.at(idx);
        if p.dims != d.dims || p.kind != d.kind || p.data.len() != d.dims.iter().product::<usize>() {
            return Err(Error::Config(format!("parameter {} has dims {:?}, spec wants {:?}", d.name, p.dims, d.dims)));
        }
        plan[d.layer].params.push(idx);
    }
    Ok(plan)
}

impl<T: Real> Network<T> {
    /// Fresh parameters: uniform Glorot weights, zero biases, gate biases +1.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gate_head = spec.head(HeadKind::Gate).map(alloc::string::ToString::to_string);
        // channels of each layer output that feed a recurrent gate
        let mut gate_channels: Option<(alloc::string::String, usize, usize)> = None;
        for l in &spec.layers {
            if let LayerOp::Srnn { gated: true, .. } = l.op {
                let g = &l.inputs[1];
                if let Some(src) = spec.layers.iter().find(|s| &s.name == g) {
                    if let LayerOp::Slice { start, count } = src.op {
                        gate_channels = Some((src.inputs[0].clone(), start, count));
                    }
                }
            }
        }
        let mut store = ParamStore::new();
        for d in spec.param_specs() {
            let mut p = Param::new(d.name.clone(), d.dims.clone(), d.kind);
            match d.kind {
                ParamKind::Weight => {
                    let (o, i, kh, kw) = (d.dims[0], d.dims[1], d.dims[2], d.dims[3]);
                    let limit = libm::sqrt(6.0 / ((o + i) * kh * kw) as f64);
                    p.data.iter_mut().for_each(|v| *v = T::lit(rng.random_range(-limit..limit)));
                }
                ParamKind::Transition => {
                    let dd = d.dims[0];
                    let limit = libm::sqrt(6.0 / (2 * dd) as f64);
                    p.data.iter_mut().for_each(|v| *v = T::lit(rng.random_range(-limit..limit)));
                    let mut m = Matrix::from_vec(dd, dd, p.data)?;
                    m.spectral_norm_project_in_place(T::one());
                    p.data = m.data().to_vec();
                }
                ParamKind::Bias => {
                    let layer = &spec.layers[d.layer].name;
                    if gate_head.as_deref() == Some(layer.as_str()) {
                        p.data.iter_mut().for_each(|v| *v = T::one());
                    }
                    if let Some((src, start, count)) = &gate_channels {
                        if src == layer {
                            p.data[*start..start + count].iter_mut().for_each(|v| *v = T::one());
                        }
                    }
                }
            }
            store.push(p)?;
        }
        Self::from_params(spec, store)
    }

    /// Wraps existing parameters after checking them against the spec.
    pub fn from_params(spec: NetworkSpec, params: ParamStore<T>) -> Result<Self> {
        let plan = build_plan(&spec, &params)?;
        Ok(Network { spec, params, plan })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network { spec: self.spec.clone(), params: self.params.cast(), plan: self.plan.clone() }
    }

    fn param_tensor(&self, idx: usize) -> Result<Tensor<T>> {
        let p = self.params.at(idx);
        let shape = match p.dims.as_slice() {
            [a, b, c, d] => Shape::new(*a, *b, *c, *d),
            dims => return Err(Error::Shape(format!("{} is not a 4-D weight: {dims:?}", p.name))),
        };
        Tensor::from_vec(shape, p.data.clone())
    }

    fn scan_params(&self, plan: &LayerPlan) -> Result<[ScanParams<T>; 4]> {
        let mut out: [ScanParams<T>; 4] = core::array::from_fn(|i| ScanParams::zeros(0, Direction::ALL[i]));
        for (i, dir) in Direction::ALL.into_iter().enumerate() {
            let om = self.params.at(plan.params[2 * i]);
            let b = self.params.at(plan.params[2 * i + 1]);
            out[i] = ScanParams::new(Matrix::from_vec(om.dims[0], om.dims[1], om.data.clone())?, b.data.clone(), dir)?;
        }
        Ok(out)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<ForwardPass<T>> {
        self.forward_with(x, &Sequential, &mut |_| {})
    }

    /// Forward pass with a custom scan executor; `after_layer(i)` runs once
    /// layer `i` has produced its output.
    pub fn forward_with<E: ScanExecutor>(
        &self,
        x: &Tensor<T>,
        exec: &E,
        after_layer: &mut dyn FnMut(usize),
    ) -> Result<ForwardPass<T>> {
        let (c, h, w) = self.spec.input;
        let s = x.shape();
        if (s.c, s.h, s.w) != (c, h, w) {
            return Err(Error::Shape(format!("network expects {c}x{h}x{w} input, got {s}")));
        }
        let mut values = Vec::with_capacity(self.spec.layers.len() + 1);
        values.push(x.clone());
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for (i, (layer, plan)) in self.spec.layers.iter().zip(&self.plan).enumerate() {
            let input = &values[plan.inputs[0]];
            let (out, cache) = match layer.op {
                LayerOp::Conv { spec, relu } => {
                    let w = self.param_tensor(plan.params[0])?;
                    let mut y = conv2d_forward(input, &w, &self.params.at(plan.params[1]).data, &spec)?;
                    if relu {
                        relu_in_place(&mut y);
                    }
                    (y, Cache::None)
                }
                LayerOp::Deconv { spec, relu } => {
                    let w = self.param_tensor(plan.params[0])?;
                    let mut y = deconv2d_forward(input, &w, &self.params.at(plan.params[1]).data, &spec)?;
                    if relu {
                        relu_in_place(&mut y);
                    }
                    (y, Cache::None)
                }
                LayerOp::Pool { window, stride } => {
                    let (y, idx) = maxpool2d(input, window, stride)?;
                    (y, Cache::Pool(idx))
                }
                LayerOp::Slice { start, count } => (slice_channels(input, start, count), Cache::None),
                LayerOp::Srnn { gated, .. } => {
                    let params = self.scan_params(plan)?;
                    let gate = if gated { Some(&values[plan.inputs[1]]) } else { None };
                    let (y, tape) = srnn_forward(input, gate, &params, exec)?;
                    (y, Cache::Srnn(tape, params))
                }
                LayerOp::Upsample { factor } => (bilinear_upsample(input, factor)?, Cache::None),
            };
            values.push(out);
            caches.push(cache);
            after_layer(i);
        }
        Ok(ForwardPass { values, caches })
    }

    pub fn head<'a>(&self, pass: &'a ForwardPass<T>, kind: HeadKind) -> Option<&'a Tensor<T>> {
        self.spec.head(kind).and_then(|n| self.spec.slot_of(n)).map(|s| &pass.values[s])
    }

    /// Backpropagates head gradients to every parameter. Branches that
    /// receive no gradient are skipped.
    pub fn backward(&self, pass: &ForwardPass<T>, head_grads: &[(HeadKind, Tensor<T>)]) -> Result<Gradients<T>> {
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; pass.values.len()];
        for (kind, g) in head_grads {
            let name = self.spec.head(*kind).ok_or_else(|| Error::MissingHead(kind.tag().into()))?;
            let slot = self.spec.slot_of(name).unwrap();
            g.ensure_shape(pass.values[slot].shape(), "head gradient")?;
            accumulate(&mut grads[slot], g.clone())?;
        }
        let mut out = Gradients::zeros_like(&self.params);
        for (i, (layer, plan)) in self.spec.layers.iter().zip(&self.plan).enumerate().rev() {
            let Some(mut g) = grads[i + 1].take() else { continue };
            let input = &pass.values[plan.inputs[0]];
            match layer.op {
                LayerOp::Conv { spec, relu } | LayerOp::Deconv { spec, relu } => {
                    if relu {
                        relu_backward_in_place(&mut g, &pass.values[i + 1]);
                    }
                    let w = self.param_tensor(plan.params[0])?;
                    let cg = if matches!(layer.op, LayerOp::Conv { .. }) {
                        conv2d_backward(&g, input, &w, &spec)?
                    } else {
                        deconv2d_backward(&g, input, &w, &spec)?
                    };
                    out.add_to(plan.params[0], cg.weight.data());
                    out.add_to(plan.params[1], &cg.bias);
                    if plan.inputs[0] != 0 {
                        accumulate(&mut grads[plan.inputs[0]], cg.input)?;
                    }
                }
                LayerOp::Pool { .. } => {
                    let Cache::Pool(idx) = &pass.caches[i] else { return Err(Error::StaleTape) };
                    accumulate(&mut grads[plan.inputs[0]], maxpool2d_backward(&g, idx)?)?;
                }
                LayerOp::Slice { start, count } => {
                    let mut full = Tensor::zeros(input.shape());
                    let s = input.shape();
                    for n in 0..s.n {
                        for c in 0..count {
                            let dst = s.index(n, start + c, 0, 0);
                            full.data_mut()[dst..dst + s.plane()].copy_from_slice(g.plane(n, c));
                        }
                    }
                    accumulate(&mut grads[plan.inputs[0]], full)?;
                }
                LayerOp::Srnn { .. } => {
                    let Cache::Srnn(tape, params) = &pass.caches[i] else { return Err(Error::StaleTape) };
                    let sg = srnn_backward(&g, tape, params)?;
                    for d in 0..4 {
                        out.add_to(plan.params[2 * d], sg.omega[d].data());
                        out.add_to(plan.params[2 * d + 1], &sg.bias[d]);
                    }
                    accumulate(&mut grads[plan.inputs[0]], sg.x)?;
                    if let Some(gf) = sg.gate_features {
                        accumulate(&mut grads[plan.inputs[1]], gf)?;
                    }
                }
                LayerOp::Upsample { factor } => {
                    accumulate(&mut grads[plan.inputs[0]], bilinear_upsample_backward(&g, input.shape(), factor)?)?;
                }
            }
        }
        Ok(out)
    }

    /// Per-pixel argmax of the final head for every batch item.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<LabelMap>> {
        let pass = self.forward(x)?;
        let logits = self.head(&pass, HeadKind::FinalLabel).ok_or_else(|| Error::MissingHead("final_label".into()))?;
        argmax_labels(logits, self.spec.vocab)
    }
}

/// Argmax over channels; ties go to the lowest class id.
pub fn argmax_labels<T: Real>(logits: &Tensor<T>, vocab: crate::labels::Vocabulary) -> Result<Vec<LabelMap>> {
    let s = logits.shape();
    if s.c != vocab.len() {
        return Err(Error::Vocabulary(format!("{} logit channels for {} classes", s.c, vocab.len())));
    }
    let mut out = Vec::with_capacity(s.n);
    for n in 0..s.n {
        let mut data = Vec::with_capacity(s.plane());
        for p in 0..s.plane() {
            let mut best = 0;
            for c in 1..s.c {
                if logits.plane(n, c)[p] > logits.plane(n, best)[p] {
                    best = c;
                }
            }
            data.push(best as u8);
        }
        out.push(LabelMap::from_vec(s.h, s.w, vocab, data)?);
    }
    Ok(out)
}

fn slice_channels<T: Real>(x: &Tensor<T>, start: usize, count: usize) -> Tensor<T> {
    let s = x.shape();
    let mut data = Vec::with_capacity(s.n * count * s.plane());
    for n in 0..s.n {
        for c in start..start + count {
            data.extend_from_slice(x.plane(n, c));
        }
    }
    Tensor::from_vec(s.with_channels(count), data).expect("slice of a finite tensor")
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) -> Result<()> {
    match slot {
        Some(t) => t.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

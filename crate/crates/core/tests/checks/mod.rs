//! Measurements shared by the core test suites and the acceptance run.
//! Each function returns the worst observed error; callers apply the
//! tolerance.
#![allow(dead_code)]

use rand::Rng;
use sgrnn_core::layers::*;
use sgrnn_core::model::{build_stage1_variant, build_targets, total_loss, LossWeights, Network, TargetConfig, Variant};
use sgrnn_core::params::ParamKind;
use sgrnn_core::scan::*;
use sgrnn_core::{LabelMap, Matrix, Shape, Tensor, Vocabulary};

use crate::support::*;

fn weighted(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.dot(r)
}

fn t(shape: Shape, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape, data.to_vec()).unwrap()
}

fn conv_case(spec: ConvSpec, shape: Shape, seed: u64) -> f64 {
    let mut g = rng(seed);
    let x: Tensor<f64> = random_tensor(&mut g, shape, -1.0, 1.0);
    let w: Tensor<f64> = random_tensor(&mut g, spec.weight_shape(false), -0.5, 0.5);
    let b = random_vec(&mut g, spec.out_channels, -0.5, 0.5);
    let y = conv2d_forward(&x, &w, &b, &spec).unwrap();
    let r: Tensor<f64> = random_tensor(&mut g, y.shape(), -1.0, 1.0);
    let grads = conv2d_backward(&r, &x, &w, &spec).unwrap();
    let ex = grad_error(x.data(), grads.input.data(), 200, |v| weighted(&conv2d_forward(&t(shape, v), &w, &b, &spec).unwrap(), &r));
    let ew = grad_error(w.data(), grads.weight.data(), 200, |v| {
        weighted(&conv2d_forward(&x, &t(w.shape(), v), &b, &spec).unwrap(), &r)
    });
    let eb = grad_error(&b, &grads.bias, 200, |v| weighted(&conv2d_forward(&x, &w, v, &spec).unwrap(), &r));
    ex.max(ew).max(eb)
}

pub fn conv_grad() -> f64 {
    conv_case(ConvSpec::same(3, 4, 5), Shape::new(2, 3, 7, 6), 1)
        .max(conv_case(ConvSpec::new(2, 3, 3, 2, 1), Shape::new(1, 2, 9, 7), 2))
        .max(conv_case(ConvSpec::same(4, 2, 1), Shape::new(2, 4, 3, 5), 3))
}

pub fn deconv_grad() -> f64 {
    let spec = ConvSpec::new(3, 2, 4, 2, 1);
    let shape = Shape::new(2, 3, 4, 5);
    let mut g = rng(4);
    let x: Tensor<f64> = random_tensor(&mut g, shape, -1.0, 1.0);
    let w: Tensor<f64> = random_tensor(&mut g, spec.weight_shape(true), -0.5, 0.5);
    let b = random_vec(&mut g, 2, -0.5, 0.5);
    let y = deconv2d_forward(&x, &w, &b, &spec).unwrap();
    let r: Tensor<f64> = random_tensor(&mut g, y.shape(), -1.0, 1.0);
    let grads = deconv2d_backward(&r, &x, &w, &spec).unwrap();
    let f = |x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]| weighted(&deconv2d_forward(x, w, b, &spec).unwrap(), &r);
    let ex = grad_error(x.data(), grads.input.data(), 200, |v| f(&t(shape, v), &w, &b));
    let ew = grad_error(w.data(), grads.weight.data(), 200, |v| f(&x, &t(w.shape(), v), &b));
    let eb = grad_error(&b, &grads.bias, 200, |v| f(&x, &w, v));
    ex.max(ew).max(eb)
}

pub fn pool_grad() -> f64 {
    let shape = Shape::new(2, 2, 6, 8);
    // a shuffled ramp: distinct values at least 0.01 apart
    let mut vals: Vec<f64> = (0..shape.len()).map(|i| i as f64 * 0.01).collect();
    rand::seq::SliceRandom::shuffle(vals.as_mut_slice(), &mut rng(5));
    let x = t(shape, &vals);
    let (y, idx) = maxpool2d(&x, 2, 2).unwrap();
    let r: Tensor<f64> = random_tensor(&mut rng(6), y.shape(), -1.0, 1.0);
    let gx = maxpool2d_backward(&r, &idx).unwrap();
    grad_error(x.data(), gx.data(), 1000, |v| weighted(&maxpool2d(&t(shape, v), 2, 2).unwrap().0, &r))
}

pub fn upsample_grad() -> f64 {
    let shape = Shape::new(1, 2, 3, 4);
    let x: Tensor<f64> = random_tensor(&mut rng(7), shape, -1.0, 1.0);
    let y = bilinear_upsample(&x, 2).unwrap();
    let r: Tensor<f64> = random_tensor(&mut rng(8), y.shape(), -1.0, 1.0);
    let gx = bilinear_upsample_backward(&r, shape, 2).unwrap();
    grad_error(x.data(), gx.data(), 100, |v| weighted(&bilinear_upsample(&t(shape, v), 2).unwrap(), &r))
}

pub fn softmax_ce_grad() -> f64 {
    let shape = Shape::new(2, 4, 3, 3);
    let mut g = rng(9);
    let x: Tensor<f64> = random_tensor(&mut g, shape, -3.0, 3.0);
    let targets: Vec<u8> = (0..18).map(|i| if i % 7 == 3 { sgrnn_core::IGNORE } else { (i % 4) as u8 }).collect();
    let mut mask = LossMask::full(2, 3, 3);
    mask.data_mut()[4] = 0;
    let (_, grad) = softmax_ce(&x, &targets, &mask).unwrap();
    grad_error(x.data(), grad.data(), 100, |v| softmax_ce(&t(shape, v), &targets, &mask).unwrap().0)
}

pub fn sigmoid_bce_grad() -> f64 {
    let shape = Shape::new(2, 1, 4, 3);
    let x: Tensor<f64> = random_tensor(&mut rng(10), shape, -4.0, 4.0);
    let targets: Vec<u8> = (0..24).map(|i| (i % 3 == 0) as u8).collect();
    let mut mask = LossMask::full(2, 4, 3);
    mask.data_mut()[..5].iter_mut().for_each(|m| *m = 0);
    let (_, grad) = sigmoid_bce(&x, &targets, &mask).unwrap();
    grad_error(x.data(), grad.data(), 100, |v| sigmoid_bce(&t(shape, v), &targets, &mask).unwrap().0)
}

fn scan_params(g: &mut rand_chacha::ChaCha8Rng, d: usize, dir: Direction) -> ScanParams<f64> {
    let omega = Matrix::from_vec(d, d, random_vec(g, d * d, -0.6, 0.6)).unwrap().spectral_norm_project(1.0);
    ScanParams::new(omega, random_vec(g, d, -0.5, 0.5), dir).unwrap()
}

/// Gated scan in one direction: errors with respect to X, G, omega and b.
pub fn gated_scan_grad(dir: Direction) -> [f64; 4] {
    let shape = Shape::new(2, 3, 4, 5);
    let mut g = rng(11 + dir.index() as u64);
    let x: Tensor<f64> = random_tensor(&mut g, shape, -1.0, 1.0);
    let gate: Tensor<f64> = random_tensor(&mut g, shape, 0.05, 0.95);
    let p = scan_params(&mut g, 3, dir);
    let r: Tensor<f64> = random_tensor(&mut g, shape, -1.0, 1.0);
    let gm = GateMap::from_values(gate.clone()).unwrap();
    let tape = record_scan(&x, &gm, &p).unwrap();
    let grads = scan_backward_gated(&r, &tape, &p).unwrap();
    let run = |x: &Tensor<f64>, gate: &Tensor<f64>, p: &ScanParams<f64>| {
        weighted(&scan_forward_gated(x, &GateMap::from_values(gate.clone()).unwrap(), p).unwrap(), &r)
    };
    let ex = grad_error(x.data(), grads.x.data(), 200, |v| run(&t(shape, v), &gate, &p));
    let eg = grad_error(gate.data(), grads.gate.data(), 200, |v| run(&x, &t(shape, v), &p));
    let ew = grad_error(p.omega.data(), grads.omega.data(), 200, |v| {
        let q = ScanParams::new(Matrix::from_vec(3, 3, v.to_vec()).unwrap(), p.bias.clone(), dir).unwrap();
        run(&x, &gate, &q)
    });
    let eb = grad_error(&p.bias, &grads.bias, 200, |v| {
        let q = ScanParams::new(p.omega.clone(), v.to_vec(), dir).unwrap();
        run(&x, &gate, &q)
    });
    [ex, eg, ew, eb]
}

/// Full layer: logistic gates, four scans, max integration.
pub fn srnn_layer_grad() -> f64 {
    let shape = Shape::new(1, 2, 4, 4);
    let mut g = rng(20);
    let x: Tensor<f64> = random_tensor(&mut g, shape, -1.0, 1.0);
    let feats: Tensor<f64> = random_tensor(&mut g, shape, -2.0, 2.0);
    let params: [ScanParams<f64>; 4] = std::array::from_fn(|i| scan_params(&mut g, 2, Direction::ALL[i]));
    let r: Tensor<f64> = random_tensor(&mut g, shape, -1.0, 1.0);
    let (_, tape) = srnn_forward(&x, Some(&feats), &params, &Sequential).unwrap();
    let grads = srnn_backward(&r, &tape, &params).unwrap();
    let run = |x: &Tensor<f64>, f: &Tensor<f64>, p: &[ScanParams<f64>; 4]| {
        weighted(&srnn_forward(x, Some(f), p, &Sequential).unwrap().0, &r)
    };
    let mut worst = grad_error(x.data(), grads.x.data(), 100, |v| run(&t(shape, v), &feats, &params));
    worst = worst.max(grad_error(feats.data(), grads.gate_features.as_ref().unwrap().data(), 100, |v| {
        run(&x, &t(shape, v), &params)
    }));
    for d in 0..4 {
        worst = worst.max(grad_error(params[d].omega.data(), grads.omega[d].data(), 100, |v| {
            let mut q = params.clone();
            q[d].omega = Matrix::from_vec(2, 2, v.to_vec()).unwrap();
            run(&x, &feats, &q)
        }));
        worst = worst.max(grad_error(&params[d].bias, &grads.bias[d], 100, |v| {
            let mut q = params.clone();
            q[d].bias = v.to_vec();
            run(&x, &feats, &q)
        }));
    }
    worst
}

/// Three-head loss of a 16x16 RNN-G network against every parameter
/// tensor; returns per-tensor errors.
pub fn total_loss_grad() -> Vec<(String, f64)> {
    let spec = build_stage1_variant(Variant::RnnG, 3, 16).unwrap();
    let mut net: Network<f64> = Network::new(spec.clone(), 3).unwrap();
    let mut g = rng(21);
    // Fresh biases are all zero, which ties the four directions exactly at
    // lane starts; max integration is not differentiable there.
    for p in net.params_mut().iter_mut() {
        if p.kind == ParamKind::Bias {
            p.data = random_vec(&mut g, p.data.len(), -0.3, 0.3);
        }
    }
    let x: Tensor<f64> = random_tensor(&mut g, Shape::new(2, 3, 16, 16), 0.0, 1.0);
    let labels: Vec<LabelMap> = (0..2)
        .map(|k| {
            let data = (0..256).map(|i| ((i / 16 + i % 16 + k * 3) / 8 % 3) as u8).collect();
            LabelMap::from_vec(16, 16, Vocabulary::Coarse, data).unwrap()
        })
        .collect();
    let targets = build_targets(&spec, &labels, &mut g, &TargetConfig::default()).unwrap();
    let w = LossWeights::default();
    let loss_of = |net: &Network<f64>| {
        let pass = net.forward(&x).unwrap();
        total_loss(net, &pass, &targets, &w).unwrap().0.total
    };
    let pass = net.forward(&x).unwrap();
    let (_, heads) = total_loss(&net, &pass, &targets, &w).unwrap();
    let grads = net.backward(&pass, &heads).unwrap();
    net.params()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let e = grad_error(&p.data, &grads.buffers[i], 12, |v| {
                let mut n2 = net.clone();
                n2.params_mut().at_mut(i).data.copy_from_slice(v);
                loss_of(&n2)
            });
            (p.name.clone(), e)
        })
        .collect()
}

pub fn random_scan_instance(g: &mut rand_chacha::ChaCha8Rng) -> (Tensor<f32>, Tensor<f32>, [ScanParams<f32>; 4]) {
    let shape = Shape::new(g.random_range(1..=2), g.random_range(1..=8), g.random_range(1..=6), g.random_range(1..=7));
    let x = random_tensor(g, shape, -1.0, 1.0);
    let feats = random_tensor(g, shape, -3.0, 3.0);
    let d = shape.c;
    let params = std::array::from_fn(|i| {
        let omega = Matrix::from_vec(d, d, random_vec(g, d * d, -1.0, 1.0).iter().map(|&v| v as f32).collect())
            .unwrap()
            .spectral_norm_project(1.0);
        let bias = random_vec(g, d, -0.5, 0.5).iter().map(|&v| v as f32).collect();
        ScanParams::new(omega, bias, Direction::ALL[i]).unwrap()
    });
    (x, feats, params)
}

/// Largest deviation of each directional scan, and of the integrated
/// layer, from the per-lane recursion over `instances` random cases.
pub fn scan_oracle_deviation(instances: usize, seed: u64) -> ([f32; 4], f32) {
    let mut g = rng(seed);
    let mut per_dir = [0.0f32; 4];
    let mut layer = 0.0f32;
    for _ in 0..instances {
        let (x, feats, params) = random_scan_instance(&mut g);
        let gate = GateMap::from_features(&feats);
        let mut slow_maps = Vec::new();
        for (i, p) in params.iter().enumerate() {
            let fast = scan_forward_gated(&x, &gate, p).unwrap();
            let slow = lane_scan_oracle(&x, gate.values(), p.omega.data(), &p.bias, i);
            for (a, o) in fast.data().iter().zip(slow.data()) {
                per_dir[i] = per_dir[i].max((a - o).abs());
            }
            slow_maps.push(slow);
        }
        let (fast, _) = srnn_forward(&x, Some(&feats), &params, &Sequential).unwrap();
        let slow = max4(&slow_maps.try_into().unwrap());
        for (a, o) in fast.data().iter().zip(slow.data()) {
            layer = layer.max((a - o).abs());
        }
    }
    (per_dir, layer)
}

/// Largest |output - input| with every gate feature at -20.
pub fn closed_gate_deviation(seed: u64) -> f32 {
    let mut g = rng(seed);
    let (x, _, params) = random_scan_instance(&mut g);
    let feats = Tensor::filled(x.shape(), -20.0f32);
    let (y, _) = srnn_forward(&x, Some(&feats), &params, &Sequential).unwrap();
    y.data().iter().zip(x.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max)
}

/// d = 1, omega = 1, b = 0, open gates, left to right over (1, 2, 3).
pub fn accumulation_case() -> Vec<f32> {
    let x = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![1.0f32, 2.0, 3.0]).unwrap();
    let p = ScanParams::new(Matrix::identity(1), vec![0.0], Direction::LeftToRight).unwrap();
    scan_forward_gated(&x, &GateMap::open(x.shape()), &p).unwrap().into_vec()
}

/// Length-512 lanes in every direction after projection. Returns whether
/// everything stayed finite and the largest ratio |h_i| / bound_i.
pub fn long_lane_ratio(seed: u64) -> (bool, f32) {
    let mut g = rng(seed);
    let d = 8;
    let mut finite = true;
    let mut worst = 0.0f32;
    for dir in Direction::ALL {
        let shape = if dir.is_horizontal() { Shape::new(1, d, 2, 512) } else { Shape::new(1, d, 512, 2) };
        let x: Tensor<f32> = random_tensor(&mut g, shape, -1.0, 1.0);
        let gate = GateMap::from_values(random_tensor(&mut g, shape, 0.0, 1.0)).unwrap();
        let omega = Matrix::from_vec(d, d, random_vec(&mut g, d * d, -3.0, 3.0).iter().map(|&v| v as f32).collect())
            .unwrap()
            .spectral_norm_project(1.0);
        let bias: Vec<f32> = random_vec(&mut g, d, -1.0, 1.0).iter().map(|&v| v as f32).collect();
        let bmax = bias.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let p = ScanParams::new(omega, bias, dir).unwrap();
        let h = scan_forward_gated(&x, &gate, &p).unwrap();
        for y in 0..shape.h {
            for xx in 0..shape.w {
                let i = match dir {
                    Direction::LeftToRight => xx,
                    Direction::RightToLeft => shape.w - 1 - xx,
                    Direction::TopToBottom => y,
                    Direction::BottomToTop => shape.h - 1 - y,
                };
                let bound = (i + 1) as f32 * (1.0 + bmax) * (d as f32).sqrt();
                for c in 0..d {
                    let v = h.at(0, c, y, xx);
                    finite &= v.is_finite();
                    worst = worst.max(v.abs() / bound);
                }
            }
        }
    }
    (finite, worst)
}

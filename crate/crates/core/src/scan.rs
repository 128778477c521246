//! Four-directional gated linear recurrence over a 2-D grid.
//!
//! Every row (horizontal directions) or column (vertical directions) is an
//! independent lane. Along a lane, with identity activation,
//!
//! ```text
//! h_i = x_i + g_i ⊙ (W h_{i-1} + b),   h_{-1} = 0
//! ```
//!
//! where `W` is a `d x d` transition shared by every node of one direction and
//! `g_i ∈ [0, 1]^d` is the per-pixel, per-channel gate. The four directional
//! hidden maps are merged by a node-wise maximum.
//!
//! Gradients follow from the forward definition. With `ξ` the incoming
//! gradient and `δ` the gradient with respect to `h`:
//!
//! ```text
//! δ_i    = ξ_i + Wᵀ (g_{i+1} ⊙ δ_{i+1})
//! ∂L/∂g_i = δ_i ⊙ (W h_{i-1} + b)
//! ∂L/∂x_i = δ_i
//! ∂L/∂W  = Σ_i (g_i ⊙ δ_i) h_{i-1}ᵀ,   ∂L/∂b = Σ_i g_i ⊙ δ_i
//! ```

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layers::sigmoid;
use crate::real::Real;
use crate::tensor::{Matrix, Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
    TopToBottom,
    BottomToTop,
}

impl Direction {
    /// Fixed order used for parameter layout and for tie-breaking.
    pub const ALL: [Direction; 4] =
        [Direction::LeftToRight, Direction::RightToLeft, Direction::TopToBottom, Direction::BottomToTop];

    pub fn is_horizontal(self) -> bool {
        matches!(self, Direction::LeftToRight | Direction::RightToLeft)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Direction::LeftToRight => "lr",
            Direction::RightToLeft => "rl",
            Direction::TopToBottom => "tb",
            Direction::BottomToTop => "bt",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Plane offsets in scan order, each paired with its predecessor.
    fn order(self, h: usize, w: usize) -> Vec<(usize, Option<usize>)> {
        let mut out = Vec::with_capacity(h * w);
        match self {
            Direction::LeftToRight => {
                for y in 0..h {
                    for x in 0..w {
                        out.push((y * w + x, (x > 0).then(|| y * w + x - 1)));
                    }
                }
            }
            Direction::RightToLeft => {
                for y in 0..h {
                    for x in (0..w).rev() {
                        out.push((y * w + x, (x + 1 < w).then(|| y * w + x + 1)));
                    }
                }
            }
            Direction::TopToBottom => {
                for y in 0..h {
                    for x in 0..w {
                        out.push((y * w + x, (y > 0).then(|| (y - 1) * w + x)));
                    }
                }
            }
            Direction::BottomToTop => {
                for y in (0..h).rev() {
                    for x in 0..w {
                        out.push((y * w + x, (y + 1 < h).then(|| (y + 1) * w + x)));
                    }
                }
            }
        }
        out
    }
}

/// Recurrence parameters of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams<T> {
    pub omega: Matrix<T>,
    pub bias: Vec<T>,
    pub direction: Direction,
}

impl<T: Real> ScanParams<T> {
    pub fn new(omega: Matrix<T>, bias: Vec<T>, direction: Direction) -> Result<Self> {
        let p = ScanParams { omega, bias, direction };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(d: usize, direction: Direction) -> Self {
        ScanParams { omega: Matrix::zeros(d, d), bias: vec![T::zero(); d], direction }
    }

    pub fn hidden(&self) -> usize {
        self.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.bias.len();
        if self.omega.rows() != d || self.omega.cols() != d {
            return Err(Error::Shape(format!(
                "transition is {}x{}, bias has {d} entries",
                self.omega.rows(),
                self.omega.cols()
            )));
        }
        Ok(())
    }
}

/// Per-pixel, per-channel propagation coefficients in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMap<T> {
    values: Arc<Tensor<T>>,
}

impl<T: Real> GateMap<T> {
    /// Logistic squashing of raw gate features; entries land in (0, 1).
    pub fn from_features(features: &Tensor<T>) -> Self {
        GateMap { values: Arc::new(features.map(sigmoid)) }
    }

    pub fn from_values(values: Tensor<T>) -> Result<Self> {
        if values.data().iter().any(|&g| !(g >= T::zero() && g <= T::one())) {
            return Err(Error::Config("gate values must lie in [0, 1]".into()));
        }
        Ok(GateMap { values: Arc::new(values) })
    }

    /// All-open gate: reduces the gated scan to the plain recurrence.
    pub fn open(shape: Shape) -> Self {
        GateMap { values: Arc::new(Tensor::filled(shape, T::one())) }
    }

    pub fn closed(shape: Shape) -> Self {
        GateMap { values: Arc::new(Tensor::zeros(shape)) }
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }
}

/// State recorded by one forward scan; consumed by its backward pass.
#[derive(Debug, Clone)]
pub struct ScanTape<T> {
    direction: Direction,
    hidden: Tensor<T>,
    gate: GateMap<T>,
    omega: Matrix<T>,
    bias: Vec<T>,
}

impl<T: Real> ScanTape<T> {
    pub fn hidden(&self) -> &Tensor<T> {
        &self.hidden
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn into_hidden(self) -> Tensor<T> {
        self.hidden
    }
}

#[derive(Debug, Clone)]
pub struct ScanGrads<T> {
    pub x: Tensor<T>,
    pub gate: Tensor<T>,
    pub omega: Matrix<T>,
    pub bias: Vec<T>,
}

fn check_scan<T: Real>(x: &Tensor<T>, g: &GateMap<T>, p: &ScanParams<T>) -> Result<()> {
    p.validate()?;
    g.values().ensure_shape(x.shape(), "gate map")?;
    if x.shape().c != p.hidden() {
        return Err(Error::Shape(format!(
            "input has {} channels, recurrence has {}",
            x.shape().c,
            p.hidden()
        )));
    }
    x.ensure_finite("scan input")?;
    g.values().ensure_finite("scan gate")
}

/// Runs one directional scan and keeps the tape for backward.
pub fn record_scan<T: Real>(x: &Tensor<T>, g: &GateMap<T>, p: &ScanParams<T>) -> Result<ScanTape<T>> {
    check_scan(x, g, p)?;
    let s = x.shape();
    let (d, plane) = (s.c, s.plane());
    let order = p.direction.order(s.h, s.w);
    let mut out = x.clone();
    let gv = g.values().data();
    let mut prev = vec![T::zero(); d];
    let mut rec = vec![T::zero(); d];
    for n in 0..s.n {
        let base = n * d * plane;
        let lane = &mut out.data_mut()[base..base + d * plane];
        let gate = &gv[base..base + d * plane];
        for &(pos, before) in &order {
            match before {
                Some(q) => {
                    for (k, v) in prev.iter_mut().enumerate() {
                        *v = lane[k * plane + q];
                    }
                    p.omega.matvec_into(&prev, &mut rec);
                    for (r, &b) in rec.iter_mut().zip(&p.bias) {
                        *r += b;
                    }
                }
                None => rec.copy_from_slice(&p.bias),
            }
            for (c, &r) in rec.iter().enumerate() {
                let i = c * plane + pos;
                lane[i] += gate[i] * r;
            }
        }
    }
    out.ensure_finite("scan_forward_gated")?;
    Ok(ScanTape {
        direction: p.direction,
        hidden: out,
        gate: g.clone(),
        omega: p.omega.clone(),
        bias: p.bias.clone(),
    })
}

/// Gated recurrence along `p.direction`.
pub fn scan_forward_gated<T: Real>(x: &Tensor<T>, g: &GateMap<T>, p: &ScanParams<T>) -> Result<Tensor<T>> {
    record_scan(x, g, p).map(ScanTape::into_hidden)
}

/// Ungated recurrence `h_i = x_i + W h_{i-1} + b`.
pub fn scan_forward_plain<T: Real>(x: &Tensor<T>, p: &ScanParams<T>) -> Result<Tensor<T>> {
    scan_forward_gated(x, &GateMap::open(x.shape()), p)
}

/// Exact gradients of [`scan_forward_gated`].
pub fn scan_backward_gated<T: Real>(grad_out: &Tensor<T>, tape: &ScanTape<T>, p: &ScanParams<T>) -> Result<ScanGrads<T>> {
    if tape.direction != p.direction || tape.omega != p.omega || tape.bias != p.bias {
        return Err(Error::StaleTape);
    }
    if grad_out.shape() != tape.hidden.shape() {
        return Err(Error::StaleTape);
    }
    let s = grad_out.shape();
    let (d, plane) = (s.c, s.plane());
    let order = p.direction.order(s.h, s.w);
    let mut delta = grad_out.clone();
    let mut grad_gate = Tensor::zeros(s);
    let mut grad_omega = vec![T::zero(); d * d];
    let mut grad_bias = vec![T::zero(); d];
    let hv = tape.hidden.data();
    let gv = tape.gate.values().data();
    let mut prev = vec![T::zero(); d];
    let mut rec = vec![T::zero(); d];
    let mut u = vec![T::zero(); d];
    let mut back = vec![T::zero(); d];
    for n in 0..s.n {
        let base = n * d * plane;
        let hidden = &hv[base..base + d * plane];
        let gate = &gv[base..base + d * plane];
        let dl = &mut delta.data_mut()[base..base + d * plane];
        let gg = &mut grad_gate.data_mut()[base..base + d * plane];
        for &(pos, before) in order.iter().rev() {
            match before {
                Some(q) => {
                    for (k, v) in prev.iter_mut().enumerate() {
                        *v = hidden[k * plane + q];
                    }
                    p.omega.matvec_into(&prev, &mut rec);
                    for (r, &b) in rec.iter_mut().zip(&p.bias) {
                        *r += b;
                    }
                }
                None => rec.copy_from_slice(&p.bias),
            }
            for c in 0..d {
                let i = c * plane + pos;
                gg[i] = dl[i] * rec[c];
                u[c] = gate[i] * dl[i];
                grad_bias[c] += u[c];
            }
            if let Some(q) = before {
                for (c, &uc) in u.iter().enumerate() {
                    if uc != T::zero() {
                        for (k, &hk) in prev.iter().enumerate() {
                            grad_omega[c * d + k] += uc * hk;
                        }
                    }
                }
                p.omega.matvec_transposed_into(&u, &mut back);
                for (k, &b) in back.iter().enumerate() {
                    dl[k * plane + q] += b;
                }
            }
        }
    }
    Ok(ScanGrads { x: delta, gate: grad_gate, omega: Matrix::from_vec(d, d, grad_omega)?, bias: grad_bias })
}

/// Node-wise maximum over the four directional maps. Ties resolve to the
/// earliest direction in [`Direction::ALL`].
pub fn integrate_max<T: Real>(maps: [&Tensor<T>; 4]) -> Result<(Tensor<T>, Vec<u8>)> {
    let shape = maps[0].shape();
    for m in &maps[1..] {
        m.ensure_shape(shape, "integrate_max input")?;
    }
    let mut out = maps[0].clone();
    let mut arg = vec![0u8; shape.len()];
    for (dir, m) in maps.iter().enumerate().skip(1) {
        for ((o, a), &v) in out.data_mut().iter_mut().zip(arg.iter_mut()).zip(m.data()) {
            if v > *o {
                *o = v;
                *a = dir as u8;
            }
        }
    }
    Ok((out, arg))
}

/// Routes gradient to the winning direction of every node.
pub fn integrate_max_backward<T: Real>(grad: &Tensor<T>, argmax: &[u8]) -> Result<[Tensor<T>; 4]> {
    if argmax.len() != grad.data().len() {
        return Err(Error::Shape("argmax map does not match gradient".into()));
    }
    let mut out: [Tensor<T>; 4] = core::array::from_fn(|_| Tensor::zeros(grad.shape()));
    for (i, (&g, &a)) in grad.data().iter().zip(argmax).enumerate() {
        out[a as usize].data_mut()[i] = g;
    }
    Ok(out)
}

/// Strategy for running the four independent directional scans.
pub trait ScanExecutor {
    fn run<T: Real>(&self, x: &Tensor<T>, gate: &GateMap<T>, params: &[ScanParams<T>; 4]) -> Result<[ScanTape<T>; 4]>;
}

/// Runs the scans one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ScanExecutor for Sequential {
    fn run<T: Real>(&self, x: &Tensor<T>, gate: &GateMap<T>, params: &[ScanParams<T>; 4]) -> Result<[ScanTape<T>; 4]> {
        Ok([
            record_scan(x, gate, &params[0])?,
            record_scan(x, gate, &params[1])?,
            record_scan(x, gate, &params[2])?,
            record_scan(x, gate, &params[3])?,
        ])
    }
}

#[derive(Debug, Clone)]
pub struct SrnnTape<T> {
    gated: bool,
    gate: GateMap<T>,
    scans: [ScanTape<T>; 4],
    argmax: Vec<u8>,
}

impl<T: Real> SrnnTape<T> {
    pub fn gate(&self) -> &GateMap<T> {
        &self.gate
    }

    pub fn argmax(&self) -> &[u8] {
        &self.argmax
    }

    pub fn scans(&self) -> &[ScanTape<T>; 4] {
        &self.scans
    }
}

#[derive(Debug, Clone)]
pub struct SrnnGrads<T> {
    pub x: Tensor<T>,
    /// Gradient with respect to the pre-logistic gate features; `None` for
    /// the ungated layer.
    pub gate_features: Option<Tensor<T>>,
    pub omega: [Matrix<T>; 4],
    pub bias: [Vec<T>; 4],
}

/// Full spatial RNN layer: logistic gates, four scans, max integration.
///
/// `gate_features = None` gives the ungated baseline (every gate open).
pub fn srnn_forward<T: Real, E: ScanExecutor>(
    x: &Tensor<T>,
    gate_features: Option<&Tensor<T>>,
    params: &[ScanParams<T>; 4],
    exec: &E,
) -> Result<(Tensor<T>, SrnnTape<T>)> {
    for (p, dir) in params.iter().zip(Direction::ALL) {
        if p.direction != dir {
            return Err(Error::Config(format!("scan parameters out of order at {}", dir.tag())));
        }
    }
    let gate = match gate_features {
        Some(f) => {
            f.ensure_shape(x.shape(), "gate features")?;
            GateMap::from_features(f)
        }
        None => GateMap::open(x.shape()),
    };
    let scans = exec.run(x, &gate, params)?;
    let (out, argmax) =
        integrate_max([scans[0].hidden(), scans[1].hidden(), scans[2].hidden(), scans[3].hidden()])?;
    Ok((out, SrnnTape { gated: gate_features.is_some(), gate, scans, argmax }))
}

pub fn srnn_backward<T: Real>(grad_out: &Tensor<T>, tape: &SrnnTape<T>, params: &[ScanParams<T>; 4]) -> Result<SrnnGrads<T>> {
    let routed = integrate_max_backward(grad_out, &tape.argmax)?;
    let mut gx = Tensor::zeros(grad_out.shape());
    let mut ggate = Tensor::zeros(grad_out.shape());
    let mut omega: [Matrix<T>; 4] = core::array::from_fn(|_| Matrix::zeros(0, 0));
    let mut bias: [Vec<T>; 4] = core::array::from_fn(|_| Vec::new());
    for i in 0..4 {
        let g = scan_backward_gated(&routed[i], &tape.scans[i], &params[i])?;
        gx.add_assign(&g.x)?;
        ggate.add_assign(&g.gate)?;
        omega[i] = g.omega;
        bias[i] = g.bias;
    }
    let gate_features = tape.gated.then(|| {
        for (gg, &gv) in ggate.data_mut().iter_mut().zip(tape.gate.values().data()) {
            *gg *= gv * (T::one() - gv);
        }
        ggate
    });
    Ok(SrnnGrads { x: gx, gate_features, omega, bias })
}

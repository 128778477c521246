use std::fmt::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgrnn_core::model::Network;
use sgrnn_core::scan::{srnn_forward, Direction, ScanParams};
use sgrnn_core::{Matrix, Shape, Tensor};

use super::eval::Timing;
use crate::error::{CliError, Result};
use crate::exec::Threaded;

#[derive(Debug, Clone, PartialEq)]
pub struct RunTiming {
    pub threads: usize,
    pub image: Timing,
    /// Mean milliseconds per layer, in spec order.
    pub layers: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTiming {
    pub side: usize,
    pub channels: usize,
    pub single_ms: f64,
    pub multi_ms: f64,
    pub threads: usize,
}

impl ScanTiming {
    pub fn speedup(&self) -> f64 {
        self.single_ms / self.multi_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub input: (usize, usize),
    pub runs: Vec<RunTiming>,
    pub scan: Option<ScanTiming>,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (h, w) = self.input;
        for r in &self.runs {
            let t = &r.image;
            let _ = writeln!(
                s,
                "{h}x{w}, {} thread(s), {} runs: mean {:.2} ms, median {:.2} ms, p95 {:.2} ms ({:.0} images/s)",
                r.threads,
                t.samples,
                t.mean_ms,
                t.median_ms,
                t.p95_ms,
                1e3 / t.mean_ms
            );
            for (name, ms) in &r.layers {
                let _ = writeln!(s, "    {name:<10} {ms:8.3} ms");
            }
        }
        if let Some(sc) = &self.scan {
            let _ = writeln!(
                s,
                "directional scans on {0}x{0}x{1}: 1 thread {2:.1} ms, {3} threads {4:.1} ms, speedup {5:.2}x ({6} hardware threads available)",
                sc.side,
                sc.channels,
                sc.single_ms,
                sc.threads,
                sc.multi_ms,
                sc.speedup(),
                std::thread::available_parallelism().map_or(1, |n| n.get())
            );
        }
        s
    }
}

fn random_input(shape: Shape, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| rng.random::<f32>()).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

/// Times single-image forward passes; the first two runs are warm-up.
pub fn time_network(net: &Network<f32>, iterations: usize, threads: usize) -> Result<RunTiming> {
    if iterations < 10 {
        return Err(CliError::Config("iterations: at least 10 required".into()));
    }
    let (c, h, w) = net.spec().input;
    let x = random_input(Shape::new(1, c, h, w), 0);
    let exec = Threaded { threads };
    let n_layers = net.spec().layers.len();
    let mut layer_sum = vec![0.0f64; n_layers];
    let mut ms = Vec::with_capacity(iterations);
    for it in 0..iterations + 2 {
        let mut marks = Vec::with_capacity(n_layers);
        let start = Instant::now();
        net.forward_with(&x, &exec, &mut |_| marks.push(Instant::now()))?;
        let total = start.elapsed().as_secs_f64() * 1e3;
        if it < 2 {
            continue;
        }
        ms.push(total);
        let mut prev = start;
        for (acc, m) in layer_sum.iter_mut().zip(&marks) {
            *acc += m.duration_since(prev).as_secs_f64() * 1e3;
            prev = *m;
        }
    }
    let layers = net.spec().layers.iter().zip(layer_sum).map(|(l, t)| (l.name.clone(), t / iterations as f64)).collect();
    Ok(RunTiming { threads, image: Timing::from_ms(ms), layers })
}

/// Median time of one full four-direction gated scan.
pub fn time_scans(side: usize, channels: usize, iterations: usize, threads: usize) -> Result<f64> {
    let shape = Shape::new(1, channels, side, side);
    let x = random_input(shape, 1).map(|v| 2.0 * v - 1.0);
    let g = random_input(shape, 2);
    let params: [ScanParams<f32>; 4] = Direction::ALL.map(|d| {
        ScanParams::new(Matrix::scaled_identity(channels, 0.5), vec![0.0; channels], d).expect("valid parameters")
    });
    let exec = Threaded { threads };
    let mut ms = Vec::with_capacity(iterations);
    for it in 0..iterations + 1 {
        let t = Instant::now();
        srnn_forward(&x, Some(&g), &params, &exec)?;
        if it > 0 {
            ms.push(t.elapsed().as_secs_f64() * 1e3);
        }
    }
    Ok(Timing::from_ms(ms).median_ms)
}

pub fn bench(net: &Network<f32>, iterations: usize, threads: &[usize], scan_side: Option<usize>) -> Result<BenchReport> {
    let (_, h, w) = net.spec().input;
    let runs = threads.iter().map(|&t| time_network(net, iterations, t)).collect::<Result<Vec<_>>>()?;
    let multi = threads.iter().copied().max().unwrap_or(1).max(4);
    let scan = match scan_side {
        Some(side) => {
            let iters = (iterations / 4).max(3);
            Some(ScanTiming {
                side,
                channels: 8,
                single_ms: time_scans(side, 8, iters, 1)?,
                multi_ms: time_scans(side, 8, iters, multi)?,
                threads: multi,
            })
        }
        None => None,
    };
    Ok(BenchReport { input: (h, w), runs, scan })
}

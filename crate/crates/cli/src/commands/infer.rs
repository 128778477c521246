use std::path::Path;

use sgrnn_core::layers::sigmoid;
use sgrnn_core::model::{argmax_labels, HeadKind, Network};
use sgrnn_core::{LabelMap, Shape, Tensor};

use crate::error::{CliError, Result};
use crate::exec::Threaded;
use crate::png_io::{read_rgb, write_gray, write_labels};

/// Placement of the original image inside the network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Letterbox {
    pub scale: f32,
    pub off_y: f32,
    pub off_x: f32,
}

/// Bilinearly resizes `image` to fit `h x w` with its aspect ratio kept,
/// centred on a zero background.
pub fn letterbox(image: &Tensor<f32>, h: usize, w: usize) -> (Tensor<f32>, Letterbox) {
    let s = image.shape();
    if (s.h, s.w) == (h, w) {
        return (image.clone(), Letterbox { scale: 1.0, off_y: 0.0, off_x: 0.0 });
    }
    let scale = (h as f32 / s.h as f32).min(w as f32 / s.w as f32);
    let (nh, nw) = (s.h as f32 * scale, s.w as f32 * scale);
    let lb = Letterbox { scale, off_y: (h as f32 - nh) / 2.0, off_x: (w as f32 - nw) / 2.0 };
    let mut out = Tensor::zeros(Shape::new(1, s.c, h, w));
    for y in 0..h {
        for x in 0..w {
            let sy = (y as f32 + 0.5 - lb.off_y) / scale - 0.5;
            let sx = (x as f32 + 0.5 - lb.off_x) / scale - 0.5;
            if sy < -0.5 || sx < -0.5 || sy > s.h as f32 - 0.5 || sx > s.w as f32 - 0.5 {
                continue;
            }
            let sy = sy.clamp(0.0, (s.h - 1) as f32);
            let sx = sx.clamp(0.0, (s.w - 1) as f32);
            let (y0, x0) = (sy as usize, sx as usize);
            let (y1, x1) = ((y0 + 1).min(s.h - 1), (x0 + 1).min(s.w - 1));
            let (fy, fx) = (sy - y0 as f32, sx - x0 as f32);
            for c in 0..s.c {
                let p = image.plane(0, c);
                let top = p[y0 * s.w + x0] * (1.0 - fx) + p[y0 * s.w + x1] * fx;
                let bot = p[y1 * s.w + x0] * (1.0 - fx) + p[y1 * s.w + x1] * fx;
                *out.at_mut(0, c, y, x) = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    (out, lb)
}

/// Samples a map computed on the letterboxed input back onto the original
/// `h x w` grid (nearest neighbour). `grid` is the map's downsampling
/// factor relative to the network input.
fn unletterbox<V: Copy>(src: &[V], sh: usize, sw: usize, grid: usize, lb: Letterbox, h: usize, w: usize) -> Vec<V> {
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let iy = (y as f32 + 0.5) * lb.scale + lb.off_y;
            let ix = (x as f32 + 0.5) * lb.scale + lb.off_x;
            let my = ((iy / grid as f32) as usize).min(sh - 1);
            let mx = ((ix / grid as f32) as usize).min(sw - 1);
            out.push(src[my * sw + mx]);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Inference {
    pub labels: LabelMap,
    /// Gate probabilities on the original grid, if the model has a gate head.
    pub gate: Option<Vec<f32>>,
}

/// Runs a network on one image of any size.
pub fn infer_image(net: &Network<f32>, image: &Tensor<f32>, threads: usize) -> Result<Inference> {
    let (_, ih, iw) = net.spec().input;
    let s = image.shape();
    let (x, lb) = letterbox(image, ih, iw);
    let pass = net.forward_with(&x, &Threaded { threads }, &mut |_| {})?;
    let logits = net.head(&pass, HeadKind::FinalLabel).ok_or_else(|| sgrnn_core::Error::MissingHead("final_label".into()))?;
    let pred = argmax_labels(logits, net.spec().vocab)?.remove(0);
    let data = unletterbox(pred.data(), ih, iw, 1, lb, s.h, s.w);
    let labels = LabelMap::from_vec(s.h, s.w, net.spec().vocab, data)?;
    let gate = net.head(&pass, HeadKind::Gate).map(|g| {
        let gs = g.shape();
        let probs: Vec<f32> = g.plane(0, 0).iter().map(|&v| sigmoid(v)).collect();
        unletterbox(&probs, gs.h, gs.w, ih / gs.h, lb, s.h, s.w)
    });
    Ok(Inference { labels, gate })
}

/// Reads a PNG, writes the palette label map and optionally the gate map.
pub fn infer_file(net: &Network<f32>, image: &Path, out: &Path, gate_out: Option<&Path>, threads: usize) -> Result<Inference> {
    let img = read_rgb(image)?;
    let inf = infer_image(net, &img, threads)?;
    write_labels(out, &inf.labels)?;
    if let Some(p) = gate_out {
        let g = inf.gate.as_ref().ok_or_else(|| CliError::Config("gate: this model has no gate head (only RNN-G does)".into()))?;
        write_gray(p, inf.labels.height(), inf.labels.width(), g)?;
    }
    Ok(inf)
}

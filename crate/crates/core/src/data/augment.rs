//! Random similarity transforms with optional horizontal mirroring.

use rand::Rng;

use super::SampleRecord;
use crate::labels::{fine, LabelMap, Vocabulary, IGNORE};
use crate::model::KeyPoints;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub max_rotation_deg: f32,
    pub min_scale: f32,
    pub max_scale: f32,
    /// Fraction of the image extent.
    pub max_translation: f32,
    pub mirror_prob: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { max_rotation_deg: 15.0, min_scale: 0.9, max_scale: 1.1, max_translation: 0.05, mirror_prob: 0.5 }
    }
}

/// One draw of transform parameters. Rotation and scale act about the image
/// centre; mirroring is applied first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub angle: f32,
    pub scale: f32,
    /// Pixels.
    pub tx: f32,
    pub ty: f32,
    pub mirror: bool,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { angle: 0.0, scale: 1.0, tx: 0.0, ty: 0.0, mirror: false };

    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, h: usize, w: usize, rng: &mut R) -> Affine {
        let sym = |rng: &mut R, m: f32| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
        let angle = sym(rng, cfg.max_rotation_deg).to_radians();
        let scale = if cfg.max_scale > cfg.min_scale { rng.random_range(cfg.min_scale..=cfg.max_scale) } else { cfg.min_scale };
        let tx = sym(rng, cfg.max_translation) * w as f32;
        let ty = sym(rng, cfg.max_translation) * h as f32;
        let mirror = rng.random::<f32>() < cfg.mirror_prob;
        Affine { angle, scale, tx, ty, mirror }
    }

    fn forward(&self, x: f32, y: f32, h: usize, w: usize) -> (f32, f32) {
        let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
        let x = if self.mirror { w as f32 - x } else { x };
        let (dx, dy) = (x - cx, y - cy);
        let (s, c) = libm::sincosf(self.angle);
        (cx + self.scale * (c * dx - s * dy) + self.tx, cy + self.scale * (s * dx + c * dy) + self.ty)
    }

    fn inverse(&self, x: f32, y: f32, h: usize, w: usize) -> (f32, f32) {
        let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
        let (dx, dy) = ((x - cx - self.tx) / self.scale, (y - cy - self.ty) / self.scale);
        let (s, c) = libm::sincosf(self.angle);
        let (sx, sy) = (cx + c * dx + s * dy, cy - s * dx + c * dy);
        (if self.mirror { w as f32 - sx } else { sx }, sy)
    }
}

fn swap_sides(vocab: Vocabulary, id: u8) -> u8 {
    if vocab != Vocabulary::Fine {
        return id;
    }
    match id {
        fine::LEFT_BROW => fine::RIGHT_BROW,
        fine::RIGHT_BROW => fine::LEFT_BROW,
        fine::LEFT_EYE => fine::RIGHT_EYE,
        fine::RIGHT_EYE => fine::LEFT_EYE,
        v => v,
    }
}

/// Resamples a record: image bilinear (zero outside), labels nearest
/// ([`IGNORE`] outside), key points mapped forward. Mirroring swaps
/// left/right classes and points so "left" stays image-left.
pub fn apply_affine(rec: &SampleRecord, t: &Affine) -> SampleRecord {
    let s = rec.image.shape();
    let (h, w) = (s.h, s.w);
    let mut image = Tensor::zeros(s);
    let mut labels = LabelMap::filled(h, w, rec.labels.vocab(), IGNORE);
    let vocab = rec.labels.vocab();
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = t.inverse(x as f32 + 0.5, y as f32 + 0.5, h, w);
            if sx >= 0.0 && sy >= 0.0 && sx < w as f32 && sy < h as f32 {
                let id = rec.labels.get(sy as usize, sx as usize);
                labels.set(y, x, if t.mirror && id != IGNORE { swap_sides(vocab, id) } else { id });
            }
            // bilinear on pixel centres; taps outside the image read zero
            let (fx, fy) = (sx - 0.5, sy - 0.5);
            let (x0, y0) = (libm::floorf(fx), libm::floorf(fy));
            let (ax, ay) = (fx - x0, fy - y0);
            for c in 0..s.c {
                let plane = rec.image.plane(0, c);
                let tap = |yy: f32, xx: f32| {
                    if yy < 0.0 || xx < 0.0 || yy >= h as f32 || xx >= w as f32 {
                        0.0
                    } else {
                        plane[yy as usize * w + xx as usize]
                    }
                };
                let mut v = (1.0 - ay) * (1.0 - ax) * tap(y0, x0);
                if ax != 0.0 {
                    v += (1.0 - ay) * ax * tap(y0, x0 + 1.0);
                }
                if ay != 0.0 {
                    v += ay * (1.0 - ax) * tap(y0 + 1.0, x0);
                    if ax != 0.0 {
                        v += ay * ax * tap(y0 + 1.0, x0 + 1.0);
                    }
                }
                *image.at_mut(0, c, y, x) = v;
            }
        }
    }
    let points = rec.points.map(|p| {
        let src = if t.mirror { KeyPoints([p.0[1], p.0[0], p.0[2], p.0[4], p.0[3]]) } else { p };
        KeyPoints(src.0.map(|(x, y)| t.forward(x, y, h, w)))
    });
    SampleRecord { image, labels, points }
}

pub fn augment<R: Rng + ?Sized>(rec: &SampleRecord, cfg: &AugmentConfig, rng: &mut R) -> SampleRecord {
    let s = rec.image.shape();
    apply_affine(rec, &Affine::sample(cfg, s.h, s.w, rng))
}

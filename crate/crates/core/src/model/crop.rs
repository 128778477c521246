//! Component crops for the second stage and composition of the results.
//!
//! "Left" always means image-left.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::labels::{fine, LabelMap, Vocabulary, IGNORE};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ComponentKind {
    EyeLeft,
    EyeRight,
    Nose,
    Mouth,
}

impl ComponentKind {
    /// Composition order: eyes, then nose, then mouth.
    pub const ALL: [ComponentKind; 4] =
        [ComponentKind::EyeLeft, ComponentKind::EyeRight, ComponentKind::Nose, ComponentKind::Mouth];

    pub fn tag(self) -> &'static str {
        match self {
            ComponentKind::EyeLeft => "eye_left",
            ComponentKind::EyeRight => "eye_right",
            ComponentKind::Nose => "nose",
            ComponentKind::Mouth => "mouth",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        ComponentKind::ALL.into_iter().find(|k| k.tag() == s)
    }

    /// Patch height and width fed to the component network.
    pub fn patch_size(self) -> (usize, usize) {
        match self {
            ComponentKind::Mouth => (32, 64),
            _ => (64, 64),
        }
    }

    pub fn vocab(self) -> Vocabulary {
        match self {
            ComponentKind::EyeLeft | ComponentKind::EyeRight => Vocabulary::Eye,
            ComponentKind::Nose => Vocabulary::Nose,
            ComponentKind::Mouth => Vocabulary::Mouth,
        }
    }

    /// Fine ids in local-vocabulary order, starting after "other".
    pub fn fine_classes(self) -> &'static [u8] {
        match self {
            ComponentKind::EyeLeft => &[fine::LEFT_BROW, fine::LEFT_EYE],
            ComponentKind::EyeRight => &[fine::RIGHT_BROW, fine::RIGHT_EYE],
            ComponentKind::Nose => &[fine::NOSE],
            ComponentKind::Mouth => &[fine::UPPER_LIP, fine::INNER_MOUTH, fine::LOWER_LIP],
        }
    }

    pub fn to_local(self, fine_id: u8) -> u8 {
        if fine_id == IGNORE {
            return IGNORE;
        }
        self.fine_classes().iter().position(|&f| f == fine_id).map_or(0, |p| p as u8 + 1)
    }

    /// `None` for "other".
    pub fn to_fine(self, local: u8) -> Option<u8> {
        local.checked_sub(1).and_then(|i| self.fine_classes().get(i as usize).copied())
    }

    /// Key point (or midpoint of key points) the crop is anchored to.
    fn anchor(self, p: &KeyPoints) -> (f32, f32) {
        match self {
            ComponentKind::EyeLeft => p.0[0],
            ComponentKind::EyeRight => p.0[1],
            ComponentKind::Nose => p.0[2],
            ComponentKind::Mouth => ((p.0[3].0 + p.0[4].0) / 2.0, (p.0[3].1 + p.0[4].1) / 2.0),
        }
    }
}

/// Axis-aligned rectangle in continuous pixel coordinates; pixel `(y, x)`
/// covers `[y, y+1) x [x, x+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
}

impl Rect {
    pub fn center(&self) -> (f32, f32) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn from_center(cx: f32, cy: f32, w: f32, h: f32) -> Rect {
        Rect { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    /// Shifts the rectangle inside `[0, width) x [0, height)`, shrinking it
    /// only when it is larger than the image.
    pub fn clamp_to(self, width: usize, height: usize) -> Rect {
        let fit = |start: f32, len: f32, bound: f32| {
            let len = len.min(bound);
            (start.clamp(0.0, bound - len), len)
        };
        let (x, w) = fit(self.x, self.w, width as f32);
        let (y, h) = fit(self.y, self.h, height as f32);
        Rect { x, y, w, h }
    }

    pub fn iou(&self, o: &Rect) -> f32 {
        let iw = ((self.x + self.w).min(o.x + o.w) - self.x.max(o.x)).max(0.0);
        let ih = ((self.y + self.h).min(o.y + o.h) - self.y.max(o.y)).max(0.0);
        let inter = iw * ih;
        inter / (self.w * self.h + o.w * o.h - inter)
    }
}

/// Five facial key points as `(x, y)`: left eye, right eye, nose tip,
/// left and right mouth corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPoints(pub [(f32, f32); 5]);

impl KeyPoints {
    pub fn interocular(&self) -> f32 {
        let (a, b) = (self.0[0], self.0[1]);
        libm::hypotf(a.0 - b.0, a.1 - b.1)
    }

    /// Mirror across the vertical axis of an image `width` pixels wide;
    /// left and right points trade places.
    pub fn mirrored(&self, width: usize) -> KeyPoints {
        let f = |p: (f32, f32)| (width as f32 - p.0, p.1);
        let p = self.0;
        KeyPoints([f(p[1]), f(p[0]), f(p[2]), f(p[4]), f(p[3])])
    }
}

/// Where a patch came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentCrop {
    pub kind: ComponentKind,
    pub rect: Rect,
}

impl ComponentCrop {
    fn scale(&self) -> (f32, f32) {
        let (ph, pw) = self.kind.patch_size();
        (self.rect.h / ph as f32, self.rect.w / pw as f32)
    }

    /// Image coordinate of the centre of patch pixel `(py, px)`.
    pub fn to_image(&self, py: usize, px: usize) -> (f32, f32) {
        let (sy, sx) = self.scale();
        (self.rect.y + (py as f32 + 0.5) * sy, self.rect.x + (px as f32 + 0.5) * sx)
    }

    /// Patch pixel containing the centre of image pixel `(y, x)`, if any.
    pub fn to_patch(&self, y: usize, x: usize) -> Option<(usize, usize)> {
        let (sy, sx) = self.scale();
        let py = (y as f32 + 0.5 - self.rect.y) / sy;
        let px = (x as f32 + 0.5 - self.rect.x) / sx;
        let (ph, pw) = self.kind.patch_size();
        (py >= 0.0 && px >= 0.0 && (py as usize) < ph && (px as usize) < pw).then_some((py as usize, px as usize))
    }
}

/// Component bounding box grown by 20% per side, then widened or heightened
/// to the patch aspect ratio and kept inside the image.
pub fn component_rect(labels: &LabelMap, kind: ComponentKind) -> Result<Rect> {
    if labels.vocab() != Vocabulary::Fine {
        return Err(Error::Vocabulary(format!("component crops need fine labels, got {}", labels.vocab().tag())));
    }
    let classes = kind.fine_classes();
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            if classes.contains(&labels.get(y, x)) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    if x0 == usize::MAX {
        return Err(Error::DegenerateRegion);
    }
    let (w, h) = ((x1 - x0) as f32 * 1.4, (y1 - y0) as f32 * 1.4);
    let cx = (x0 + x1) as f32 / 2.0;
    let cy = (y0 + y1) as f32 / 2.0;
    Ok(fit_aspect(Rect::from_center(cx, cy, w, h), kind).clamp_to(labels.width(), labels.height()))
}

fn fit_aspect(r: Rect, kind: ComponentKind) -> Rect {
    let (ph, pw) = kind.patch_size();
    let aspect = pw as f32 / ph as f32;
    let (cx, cy) = r.center();
    if r.w / r.h < aspect {
        Rect::from_center(cx, cy, r.h * aspect, r.h)
    } else {
        Rect::from_center(cx, cy, r.w, r.w / aspect)
    }
}

/// Mean crop geometry relative to the key points, in units of the
/// interocular distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropCalibration {
    /// Per kind: centre offset from the anchor and rectangle size,
    /// `[dx, dy, w, h]`.
    pub entries: [[f32; 4]; 4],
}

impl CropCalibration {
    /// Averages crop geometry over labelled samples with key points.
    pub fn fit<'a>(samples: impl IntoIterator<Item = (&'a KeyPoints, &'a LabelMap)>) -> Result<CropCalibration> {
        let mut sums = [[0.0f64; 4]; 4];
        let mut counts = [0usize; 4];
        for (pts, labels) in samples {
            let d = pts.interocular();
            if d <= 0.0 {
                continue;
            }
            for (i, kind) in ComponentKind::ALL.into_iter().enumerate() {
                let Ok(r) = component_rect(labels, kind) else { continue };
                let (ax, ay) = kind.anchor(pts);
                let (cx, cy) = r.center();
                for (s, v) in sums[i].iter_mut().zip([cx - ax, cy - ay, r.w, r.h]) {
                    *s += (v / d) as f64;
                }
                counts[i] += 1;
            }
        }
        let mut entries = [[0.0f32; 4]; 4];
        for i in 0..4 {
            if counts[i] == 0 {
                return Err(Error::Config(format!("no samples to calibrate {}", ComponentKind::ALL[i].tag())));
            }
            for j in 0..4 {
                entries[i][j] = (sums[i][j] / counts[i] as f64) as f32;
            }
        }
        Ok(CropCalibration { entries })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (kind, e) in ComponentKind::ALL.iter().zip(&self.entries) {
            let _ = writeln!(s, "calib {} {} {} {} {}", kind.tag(), e[0], e[1], e[2], e[3]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<CropCalibration> {
        let mut entries = [[f32::NAN; 4]; 4];
        for (line_no, line) in text.lines().enumerate() {
            let err = |msg: String| Error::Parse { line: line_no + 1, msg };
            let mut it = line.split_whitespace();
            if it.next() != Some("calib") {
                continue;
            }
            let tag = it.next().unwrap_or("");
            let kind = ComponentKind::from_tag(tag).ok_or_else(|| err(format!("unknown component {tag:?}")))?;
            let vals: Vec<f32> = it.map(str::parse).collect::<core::result::Result<_, _>>().map_err(|e| err(format!("{e}")))?;
            if vals.len() != 4 || vals.iter().any(|v| !v.is_finite()) {
                return Err(err("expected four finite numbers".into()));
            }
            entries[kind as usize].copy_from_slice(&vals);
        }
        if entries.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Parse { line: 0, msg: "calibration incomplete".into() });
        }
        Ok(CropCalibration { entries })
    }
}

/// Crop rectangle predicted from key points alone.
pub fn crop_from_points(
    pts: &KeyPoints,
    kind: ComponentKind,
    calib: &CropCalibration,
    width: usize,
    height: usize,
) -> Result<ComponentCrop> {
    let d = pts.interocular();
    let e = calib.entries[kind as usize];
    if !(d > 0.0) || e[2] <= 0.0 || e[3] <= 0.0 {
        return Err(Error::DegenerateRegion);
    }
    let (ax, ay) = kind.anchor(pts);
    let r = Rect::from_center(ax + e[0] * d, ay + e[1] * d, e[2] * d, e[3] * d);
    Ok(ComponentCrop { kind, rect: fit_aspect(r, kind).clamp_to(width, height) })
}

fn bilinear_at<T: Real>(plane: &[T], h: usize, w: usize, y: f32, x: f32) -> T {
    // pixel-centre coordinates, clamped to the border
    let y = (y - 0.5).clamp(0.0, (h - 1) as f32);
    let x = (x - 0.5).clamp(0.0, (w - 1) as f32);
    let (y0, x0) = (y as usize, x as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (T::lit((y - y0 as f32) as f64), T::lit((x - x0 as f32) as f64));
    let one = T::one();
    let top = plane[y0 * w + x0] * (one - fx) + plane[y0 * w + x1] * fx;
    let bottom = plane[y1 * w + x0] * (one - fx) + plane[y1 * w + x1] * fx;
    top * (one - fy) + bottom * fy
}

/// Resamples an image (bilinear) and optionally fine labels (nearest,
/// mapped to the component vocabulary) into the crop's patch.
pub fn apply_crop<T: Real>(
    image: &Tensor<T>,
    labels: Option<&LabelMap>,
    crop: &ComponentCrop,
) -> Result<(Tensor<T>, Option<LabelMap>)> {
    let s = image.shape();
    if s.n != 1 {
        return Err(Error::Shape(format!("crop expects a single image, got {s}")));
    }
    let (ph, pw) = crop.kind.patch_size();
    let mut patch = Tensor::zeros(Shape::new(1, s.c, ph, pw));
    for c in 0..s.c {
        let plane = image.plane(0, c);
        for py in 0..ph {
            for px in 0..pw {
                let (y, x) = crop.to_image(py, px);
                *patch.at_mut(0, c, py, px) = bilinear_at(plane, s.h, s.w, y, x);
            }
        }
    }
    let labels = match labels {
        None => None,
        Some(l) => {
            if (l.height(), l.width()) != (s.h, s.w) || l.vocab() != Vocabulary::Fine {
                return Err(Error::Shape(format!("labels {}x{} do not match image {s}", l.height(), l.width())));
            }
            let mut out = LabelMap::filled(ph, pw, crop.kind.vocab(), 0);
            for py in 0..ph {
                for px in 0..pw {
                    let (y, x) = crop.to_image(py, px);
                    let (y, x) = ((y as usize).min(s.h - 1), (x as usize).min(s.w - 1));
                    out.set(py, px, crop.kind.to_local(l.get(y, x)));
                }
            }
            Some(out)
        }
    };
    Ok((patch, labels))
}

/// Crop around the labelled component: image patch, patch labels and the
/// crop geometry.
pub fn crop_component<T: Real>(
    image: &Tensor<T>,
    labels: &LabelMap,
    kind: ComponentKind,
) -> Result<(Tensor<T>, LabelMap, ComponentCrop)> {
    let crop = ComponentCrop { kind, rect: component_rect(labels, kind)? };
    let (patch, patch_labels) = apply_crop(image, Some(labels), &crop)?;
    Ok((patch, patch_labels.expect("labels requested"), crop))
}

/// Paints component predictions over a coarse or fine base map.
///
/// Predictions are applied eyes first, then nose, then mouth; within a
/// patch only non-"other" pixels are written.
pub fn compose_two_stage(base: &LabelMap, preds: &[(LabelMap, ComponentCrop)]) -> Result<LabelMap> {
    let mut out = match base.vocab() {
        Vocabulary::Coarse => base.relabel(Vocabulary::Fine, |v| v)?,
        Vocabulary::Fine => base.clone(),
        v => return Err(Error::Vocabulary(format!("cannot compose onto {} labels", v.tag()))),
    };
    let mut order: Vec<&(LabelMap, ComponentCrop)> = preds.iter().collect();
    order.sort_by_key(|(_, c)| c.kind);
    for (pred, crop) in order {
        if pred.vocab() != crop.kind.vocab() {
            return Err(Error::Vocabulary(format!(
                "{} prediction for a {} crop",
                pred.vocab().tag(),
                crop.kind.tag()
            )));
        }
        if (pred.height(), pred.width()) != crop.kind.patch_size() {
            return Err(Error::Shape(format!("prediction {}x{} for a {} patch", pred.height(), pred.width(), crop.kind.tag())));
        }
        let r = crop.rect;
        let y_end = (libm::ceilf(r.y + r.h) as usize).min(out.height());
        let x_end = (libm::ceilf(r.x + r.w) as usize).min(out.width());
        for y in (r.y.max(0.0) as usize)..y_end {
            for x in (r.x.max(0.0) as usize)..x_end {
                if let Some((py, px)) = crop.to_patch(y, x) {
                    if let Some(f) = crop.kind.to_fine(pred.get(py, px)) {
                        out.set(y, x, f);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_eye(h: usize, w: usize, y0: usize, x0: usize, side: usize) -> LabelMap {
        let mut m = LabelMap::filled(h, w, Vocabulary::Fine, fine::SKIN);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                m.set(y, x, fine::LEFT_EYE);
            }
        }
        m
    }

    #[test]
    fn box_grows_twenty_percent_per_side() {
        let r = component_rect(&square_eye(200, 200, 90, 90, 20), ComponentKind::EyeLeft).unwrap();
        assert!((r.w - 28.0).abs() < 1e-4 && (r.h - 28.0).abs() < 1e-4);
        assert_eq!(r.center(), (100.0, 100.0));
    }

    #[test]
    fn mouth_box_matches_patch_aspect() {
        let mut m = LabelMap::filled(100, 100, Vocabulary::Fine, fine::SKIN);
        for x in 40..60 {
            m.set(50, x, fine::UPPER_LIP);
        }
        let r = component_rect(&m, ComponentKind::Mouth).unwrap();
        assert!((r.w / r.h - 2.0).abs() < 1e-4);
    }

    #[test]
    fn edge_component_stays_in_bounds() {
        let r = component_rect(&square_eye(50, 50, 0, 40, 10), ComponentKind::EyeLeft).unwrap();
        assert!(r.x >= 0.0 && r.y >= 0.0 && r.x + r.w <= 50.0 && r.y + r.h <= 50.0);
        assert!((r.w - 14.0).abs() < 1e-4);
    }

    #[test]
    fn missing_component_is_degenerate() {
        let m = LabelMap::filled(10, 10, Vocabulary::Fine, fine::SKIN);
        assert_eq!(component_rect(&m, ComponentKind::Nose), Err(Error::DegenerateRegion));
    }

    #[test]
    fn compose_without_predictions_relabels() {
        let coarse = LabelMap::from_vec(1, 3, Vocabulary::Coarse, alloc::vec![0, 1, 2]).unwrap();
        let out = compose_two_stage(&coarse, &[]).unwrap();
        assert_eq!(out.vocab(), Vocabulary::Fine);
        assert_eq!(out.data(), &[0, 1, 2]);
    }

    #[test]
    fn all_other_prediction_changes_nothing() {
        let coarse = LabelMap::filled(80, 80, Vocabulary::Coarse, 1);
        let crop = ComponentCrop { kind: ComponentKind::Nose, rect: Rect { x: 10.0, y: 10.0, w: 30.0, h: 30.0 } };
        let pred = LabelMap::filled(64, 64, Vocabulary::Nose, 0);
        let out = compose_two_stage(&coarse, &[(pred, crop)]).unwrap();
        assert_eq!(out, coarse.relabel(Vocabulary::Fine, |v| v).unwrap());
    }

    #[test]
    fn wrong_vocabulary_is_rejected() {
        let coarse = LabelMap::filled(80, 80, Vocabulary::Coarse, 1);
        let crop = ComponentCrop { kind: ComponentKind::Nose, rect: Rect { x: 10.0, y: 10.0, w: 30.0, h: 30.0 } };
        let pred = LabelMap::filled(64, 64, Vocabulary::Eye, 0);
        assert!(matches!(compose_two_stage(&coarse, &[(pred, crop)]), Err(Error::Vocabulary(_))));
    }

    #[test]
    fn calibration_text_round_trip() {
        let c = CropCalibration { entries: [[0.1, -0.2, 0.8, 0.8], [0.0, 0.0, 1.0, 1.0], [0.0, 0.1, 0.5, 0.5], [0.0, 0.05, 1.2, 0.6]] };
        assert_eq!(CropCalibration::from_text(&c.to_text()).unwrap(), c);
    }
}

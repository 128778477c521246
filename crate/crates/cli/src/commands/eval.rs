use std::fmt::Write;
use std::time::Instant;

use sgrnn_core::data::SampleRecord;
use sgrnn_core::metrics::{Confusion, Scores};
use sgrnn_core::model::{apply_crop, compose_two_stage, crop_from_points, ComponentKind, Network};
use sgrnn_core::train::predict_with;
use sgrnn_core::{LabelMap, Real, Vocabulary};

use crate::error::{CliError, Result};
use crate::exec::Threaded;
use crate::model_file::ModelFile;

/// Latency summary in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timing {
    pub samples: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl Timing {
    pub fn from_ms(mut ms: Vec<f64>) -> Timing {
        if ms.is_empty() {
            return Timing::default();
        }
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let at = |q: f64| ms[((q * (n - 1) as f64).round() as usize).min(n - 1)];
        Timing { samples: n, mean_ms: ms.iter().sum::<f64>() / n as f64, median_ms: at(0.5), p95_ms: at(0.95) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub vocab: Vocabulary,
    pub confusion: Confusion,
    pub scores: Scores,
    /// Per-image prediction latency.
    pub timing: Timing,
}

impl EvalReport {
    pub fn from_confusion(vocab: Vocabulary, confusion: Confusion, timing: Timing) -> EvalReport {
        let scores = Scores::from_confusion(&confusion);
        EvalReport { vocab, confusion, scores, timing }
    }

    /// Mean F-measure over the listed classes.
    pub fn mean_f(&self, classes: &[u8]) -> f64 {
        self.scores.mean_f(classes)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let names = self.vocab.names();
        let _ = writeln!(s, "pixel accuracy {:.4}", self.scores.accuracy);
        let _ = writeln!(s, "{:<12} {:>9} {:>9} {:>9}", "class", "precision", "recall", "F");
        for (name, c) in names.iter().zip(&self.scores.per_class) {
            let _ = writeln!(s, "{name:<12} {:>9.4} {:>9.4} {:>9.4}", c.precision, c.recall, c.f_measure);
        }
        let _ = writeln!(s, "confusion (rows truth, columns prediction):");
        for t in 0..self.confusion.classes() {
            let row: Vec<String> = (0..self.confusion.classes()).map(|p| self.confusion.get(t, p).to_string()).collect();
            let _ = writeln!(s, "  {:<12} {}", names[t], row.join(" "));
        }
        let t = &self.timing;
        let _ = writeln!(
            s,
            "latency over {} images: mean {:.2} ms, median {:.2} ms, p95 {:.2} ms",
            t.samples, t.mean_ms, t.median_ms, t.p95_ms
        );
        s
    }
}

/// Nearest-neighbour resampling of a label map to `side x side`.
pub fn downscale_labels(m: &LabelMap, side: usize) -> Result<LabelMap> {
    let (h, w) = (m.height(), m.width());
    let mut out = LabelMap::filled(side, side, m.vocab(), 0);
    for y in 0..side {
        for x in 0..side {
            out.set(y, x, m.get((2 * y + 1) * h / (2 * side), (2 * x + 1) * w / (2 * side)));
        }
    }
    Ok(out)
}

fn score(conf: &mut Confusion, truth: &LabelMap, pred: &LabelMap, downscale: Option<usize>) -> Result<()> {
    match downscale {
        Some(side) => conf.add_maps(&downscale_labels(truth, side)?, &downscale_labels(pred, side)?)?,
        None => conf.add_maps(truth, pred)?,
    }
    Ok(())
}

fn check_vocab(net_vocab: Vocabulary, data: &[SampleRecord]) -> Result<()> {
    if let Some(r) = data.iter().find(|r| r.labels.vocab() != net_vocab) {
        return Err(CliError::Mismatch(format!(
            "model predicts {} labels but the dataset holds {} labels",
            net_vocab.tag(),
            r.labels.vocab().tag()
        )));
    }
    Ok(())
}

/// Scores a single network on `data`, one image at a time.
pub fn eval_network<T: Real>(net: &Network<T>, data: &[SampleRecord], threads: usize, downscale: Option<usize>) -> Result<EvalReport> {
    let vocab = net.spec().vocab;
    check_vocab(vocab, data)?;
    let exec = Threaded { threads };
    let mut conf = Confusion::new(vocab.len());
    let mut ms = Vec::with_capacity(data.len());
    for r in data {
        let t = Instant::now();
        let pred = predict_with(net, &[r], &exec)?.remove(0);
        ms.push(t.elapsed().as_secs_f64() * 1e3);
        score(&mut conf, &r.labels, &pred, downscale)?;
    }
    Ok(EvalReport::from_confusion(vocab, conf, Timing::from_ms(ms)))
}

/// First-stage model plus one component network per face part.
#[derive(Debug, Clone)]
pub struct TwoStage {
    pub stage1: Network<f32>,
    pub components: Vec<(ModelFile, Network<f32>)>,
}

impl TwoStage {
    pub fn new(stage1: &ModelFile, components: Vec<ModelFile>) -> Result<TwoStage> {
        let mut nets = Vec::new();
        for m in components {
            if m.calibration.is_none() {
                return Err(CliError::Mismatch(format!("{} network carries no crop calibration", m.spec.kind.tag())));
            }
            let n = m.network()?;
            nets.push((m, n));
        }
        Ok(TwoStage { stage1: stage1.network()?, components: nets })
    }

    fn component_net(&self, kind: ComponentKind) -> Option<&(ModelFile, Network<f32>)> {
        self.components.iter().find(|(m, _)| m.stage().components().contains(&kind))
    }

    /// Fine label map for one image with key points.
    pub fn parse(&self, rec: &SampleRecord, exec: &Threaded) -> Result<LabelMap> {
        let base = predict_with(&self.stage1, &[rec], exec)?.remove(0);
        // component detail comes from stage 2 only
        let base = match base.vocab() {
            Vocabulary::Fine => base.relabel(Vocabulary::Coarse, Vocabulary::fine_to_coarse)?,
            _ => base,
        };
        let pts = rec.points.as_ref().ok_or_else(|| CliError::Data { id: "?".into(), msg: "two-stage parsing needs key points".into() })?;
        let (h, w) = (base.height(), base.width());
        let mut preds = Vec::new();
        for kind in ComponentKind::ALL {
            let Some((m, net)) = self.component_net(kind) else { continue };
            let crop = crop_from_points(pts, kind, m.calibration.as_ref().expect("checked in new"), w, h)?;
            let (patch, _) = apply_crop(&rec.image, None, &crop)?;
            let patch_rec = SampleRecord { labels: LabelMap::filled(patch.shape().h, patch.shape().w, kind.vocab(), 0), image: patch, points: None };
            preds.push((predict_with(net, &[&patch_rec], exec)?.remove(0), crop));
        }
        Ok(compose_two_stage(&base, &preds)?)
    }
}

/// Scores the two-stage pipeline against fine ground truth.
pub fn eval_two_stage(pipe: &TwoStage, data: &[SampleRecord], threads: usize, downscale: Option<usize>) -> Result<EvalReport> {
    check_vocab(Vocabulary::Fine, data)?;
    let exec = Threaded { threads };
    let mut conf = Confusion::new(Vocabulary::Fine.len());
    let mut ms = Vec::with_capacity(data.len());
    for (i, r) in data.iter().enumerate() {
        let t = Instant::now();
        let pred = pipe.parse(r, &exec).map_err(|e| match e {
            CliError::Data { msg, .. } => CliError::Data { id: format!("{i:04}"), msg },
            e => e,
        })?;
        ms.push(t.elapsed().as_secs_f64() * 1e3);
        score(&mut conf, &r.labels, &pred, downscale)?;
    }
    Ok(EvalReport::from_confusion(Vocabulary::Fine, conf, Timing::from_ms(ms)))
}

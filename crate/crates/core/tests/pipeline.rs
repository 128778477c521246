//! Data generation, supervision targets, crops and composition end to end.

mod support;

use sgrnn_core::data::*;
use sgrnn_core::labels::fine;
use sgrnn_core::layers::LossMask;
use sgrnn_core::model::*;
use sgrnn_core::{Error, LabelMap, Shape, Tensor, Vocabulary, IGNORE};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use support::*;

fn fine_faces(count: usize, clutter: f32) -> Vec<SampleRecord> {
    let cfg = SynthConfig { seed: 77, count, height: 128, width: 128, vocab: Vocabulary::Fine, clutter, multi_face: None };
    generate_synthetic(&cfg).unwrap()
}

#[test]
fn eyes_are_a_small_fraction_of_the_image() {
    let recs = fine_faces(100, 0.5);
    let (mut eyes, mut total) = (0usize, 0usize);
    for r in &recs {
        let h = r.labels.histogram();
        eyes += h[fine::LEFT_EYE as usize] + h[fine::RIGHT_EYE as usize];
        total += r.labels.data().len();
    }
    let share = eyes as f64 / total as f64;
    assert!(share < 0.02 && share > 0.0, "eye share {share}");
}

#[test]
fn augmented_centres_stay_on_their_components() {
    let recs = fine_faces(20, 0.0);
    let mut g = rng(50);
    let (mut hits, mut draws) = (0, 0);
    for _ in 0..10 {
        for r in &recs {
            let out = augment(r, &AugmentConfig::default(), &mut g);
            let p = out.points.unwrap().0;
            for (pt, id) in [(p[0], fine::LEFT_EYE), (p[1], fine::RIGHT_EYE), (p[2], fine::NOSE)] {
                draws += 1;
                let (x, y) = (pt.0.floor(), pt.1.floor());
                if x >= 0.0 && y >= 0.0 && (x as usize) < 128 && (y as usize) < 128 && out.labels.get(y as usize, x as usize) == id {
                    hits += 1;
                }
            }
        }
    }
    assert!(hits as f64 >= 0.99 * draws as f64, "{hits}/{draws}");
}

fn component_mask(labels: &LabelMap, kind: ComponentKind) -> Vec<bool> {
    labels.data().iter().map(|v| kind.fine_classes().contains(v)).collect()
}

#[test]
fn crops_map_back_onto_the_component() {
    let recs = fine_faces(20, 0.3);
    for r in &recs {
        for kind in ComponentKind::ALL {
            let (patch, patch_labels, crop) = crop_component(&r.image, &r.labels, kind).unwrap();
            assert_eq!((patch.shape().h, patch.shape().w), kind.patch_size());
            let truth = component_mask(&r.labels, kind);
            let mut back = vec![false; truth.len()];
            for y in 0..128 {
                for x in 0..128 {
                    if let Some((py, px)) = crop.to_patch(y, x) {
                        back[y * 128 + x] = patch_labels.get(py, px) != 0 && patch_labels.get(py, px) != IGNORE;
                    }
                }
            }
            let inter = truth.iter().zip(&back).filter(|(a, b)| **a && **b).count();
            let union = truth.iter().zip(&back).filter(|(a, b)| **a || **b).count();
            let iou = inter as f64 / union as f64;
            assert!(iou >= 0.95, "{}: IoU {iou}", kind.tag());
        }
    }
}

fn perfect_predictions(r: &SampleRecord) -> Vec<(LabelMap, ComponentCrop)> {
    ComponentKind::ALL
        .into_iter()
        .map(|k| {
            let (_, l, c) = crop_component(&r.image, &r.labels, k).unwrap();
            (l, c)
        })
        .collect()
}

#[test]
fn composition_recovers_components_from_perfect_patches() {
    let (mut right, mut total) = (0usize, 0usize);
    for r in &fine_faces(20, 0.3) {
        let coarse = r.labels.relabel(Vocabulary::Coarse, Vocabulary::fine_to_coarse).unwrap();
        let preds = perfect_predictions(r);
        let out = compose_two_stage(&coarse, &preds).unwrap();
        for (&t, &p) in r.labels.data().iter().zip(out.data()) {
            if fine::COMPONENTS.contains(&t) {
                total += 1;
                right += usize::from(t == p);
            }
        }
        assert_eq!(compose_two_stage(&out, &preds).unwrap(), out, "composition must be idempotent");
    }
    assert!(right as f64 >= 0.99 * total as f64, "{right}/{total}");
}

#[test]
fn calibrated_point_crops_track_label_crops() {
    let recs = fine_faces(60, 0.3);
    let calib = CropCalibration::fit(recs.iter().map(|r| (r.points.as_ref().unwrap(), &r.labels))).unwrap();
    let mut ious = Vec::new();
    for r in &recs {
        for kind in ComponentKind::ALL {
            let from_labels = component_rect(&r.labels, kind).unwrap();
            let from_points = crop_from_points(r.points.as_ref().unwrap(), kind, &calib, 128, 128).unwrap();
            ious.push(from_labels.iou(&from_points.rect));
        }
    }
    let mean = ious.iter().sum::<f32>() / ious.len() as f32;
    assert!(mean > 0.7, "mean IoU {mean}");
}

#[test]
fn boundary_sampling_is_uniform_over_candidates() {
    // 10 boundary pixels (first column) and 90 candidates; 50 kept per draw
    let (h, w) = (10, 10);
    let gt: Vec<u8> = (0..100).map(|i| if i % 10 == 0 { 0 } else { 1 }).collect();
    let mut counts = vec![0u64; 100];
    let mut g = rng(51);
    let draws = 1000;
    for _ in 0..draws {
        let m = boundary_sampling_mask(&gt, h, w, 5, &mut g);
        assert_eq!(m.count(), 60);
        for (c, &k) in counts.iter_mut().zip(m.data()) {
            *c += k as u64;
        }
    }
    let candidates: Vec<u64> = (0..100).filter(|i| i % 10 != 0).map(|i| counts[i]).collect();
    let expected = draws as f64 * 50.0 / 90.0;
    let chi2: f64 = candidates.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(89.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

fn stage1_batch(seed: u64, n: usize) -> (NetworkSpec, Tensor<f64>, Vec<LabelMap>) {
    let spec = build_stage1(3, 32).unwrap();
    let cfg = SynthConfig { seed, count: n, height: 32, width: 32, ..SynthConfig::default() };
    let recs = generate_synthetic(&cfg).unwrap();
    let imgs: Vec<&Tensor<f32>> = recs.iter().map(|r| &r.image).collect();
    (spec, Tensor::stack(&imgs).unwrap().cast(), recs.into_iter().map(|r| r.labels).collect())
}

#[test]
fn head_extents_match_their_targets() {
    let (spec, x, labels) = stage1_batch(52, 2);
    let net: Network<f64> = Network::new(spec.clone(), 1).unwrap();
    let pass = net.forward(&x).unwrap();
    let targets = build_targets(&spec, &labels, &mut rng(1), &TargetConfig::default()).unwrap();
    assert_eq!(targets.len(), 3);
    for t in &targets {
        let out = net.head(&pass, t.kind).unwrap().shape();
        assert_eq!(t.targets.len(), out.n * out.plane());
        assert_eq!(t.mask.shape(), out.with_channels(1));
    }
}

#[test]
fn every_parameter_receives_gradient() {
    for variant in Variant::ALL {
        let spec = build_stage1_variant(variant, 3, 32).unwrap();
        let (_, x, labels) = stage1_batch(53, 2);
        let net: Network<f64> = Network::new(spec.clone(), 2).unwrap();
        let targets = build_targets(&spec, &labels, &mut rng(2), &TargetConfig::default()).unwrap();
        let pass = net.forward(&x).unwrap();
        let (_, heads) = total_loss(&net, &pass, &targets, &LossWeights::default()).unwrap();
        let grads = net.backward(&pass, &heads).unwrap();
        for (p, g) in net.params().iter().zip(&grads.buffers) {
            assert!(g.iter().any(|&v| v != 0.0), "{}: {} has no gradient", variant.tag(), p.name);
        }
    }
}

/// Logits with margin 20 in favour of the target class.
fn confident(shape: Shape, targets: &[u8]) -> Tensor<f64> {
    Tensor::from_fn(shape, |n, c, y, x| {
        let t = targets[n * shape.plane() + y * shape.w + x];
        if shape.c == 1 {
            if t == 1 { 20.0 } else { -20.0 }
        } else if c == t as usize {
            20.0
        } else {
            0.0
        }
    })
}

#[test]
fn loss_vanishes_on_confident_correct_heads() {
    let (spec, x, labels) = stage1_batch(54, 1);
    let net: Network<f64> = Network::new(spec.clone(), 3).unwrap();
    let targets = build_targets(&spec, &labels, &mut rng(3), &TargetConfig::default()).unwrap();
    let mut pass = net.forward(&x).unwrap();
    // overwrite the head outputs with perfect logits
    let perfect: Vec<(usize, Tensor<f64>)> = targets
        .iter()
        .map(|t| {
            let slot = spec.slot_of(spec.head(t.kind).unwrap()).unwrap();
            let shape = pass.value(slot).shape();
            let clean: Vec<u8> = t.targets.iter().map(|&v| if v == IGNORE { 0 } else { v }).collect();
            (slot, confident(shape, &clean))
        })
        .collect();
    for (slot, v) in perfect {
        *pass.value_mut(slot) = v;
    }
    let (loss, _) = total_loss(&net, &pass, &targets, &LossWeights::default()).unwrap();
    assert!(loss.total < 1e-6, "{loss:?}");
}

#[test]
fn zero_gate_weight_leaves_the_two_label_terms() {
    let (spec, x, labels) = stage1_batch(55, 2);
    let net: Network<f64> = Network::new(spec.clone(), 4).unwrap();
    let targets = build_targets(&spec, &labels, &mut rng(4), &TargetConfig::default()).unwrap();
    let pass = net.forward(&x).unwrap();
    let w = LossWeights { gate: 0.0, ..LossWeights::default() };
    let (loss, heads) = total_loss(&net, &pass, &targets, &w).unwrap();
    let (full, _) = total_loss(&net, &pass, &targets, &LossWeights::default()).unwrap();
    assert_eq!(loss.total, full.coarse + full.fine);
    assert_eq!(loss.gate, 0.0);
    assert!(heads.iter().all(|(k, _)| *k != HeadKind::Gate));
}

#[test]
fn missing_heads_and_empty_masks_are_errors() {
    let (spec, x, labels) = stage1_batch(56, 1);
    let net: Network<f64> = Network::new(spec.clone(), 5).unwrap();
    let pass = net.forward(&x).unwrap();
    let mut targets = build_targets(&spec, &labels, &mut rng(5), &TargetConfig::default()).unwrap();
    let w = LossWeights::default();
    let only_gate: Vec<HeadTarget> = targets.iter().filter(|t| t.kind == HeadKind::Gate).cloned().collect();
    assert!(matches!(total_loss(&net, &pass, &only_gate, &w), Err(Error::MissingHead(_))));
    let fin = targets.iter_mut().find(|t| t.kind == HeadKind::FinalLabel).unwrap();
    let s = fin.mask.shape();
    fin.mask = LossMask::empty(s.n, s.h, s.w);
    assert_eq!(total_loss(&net, &pass, &targets, &w).unwrap_err(), Error::EmptyMask);

    let cnn = build_stage1_variant(Variant::CnnS, 3, 32).unwrap();
    let cnn_net: Network<f64> = Network::new(cnn, 1).unwrap();
    let cnn_pass = cnn_net.forward(&x).unwrap();
    let full_targets = build_targets(&spec, &labels, &mut rng(6), &TargetConfig::default()).unwrap();
    assert!(matches!(total_loss(&cnn_net, &cnn_pass, &full_targets, &w), Err(Error::MissingHead(_))));
}

#[test]
fn fine_parsing_trains_without_errors() {
    let recs = fine_faces(2, 0.5);
    let spec = build_stage1(11, 128).unwrap();
    let net: Network<f32> = Network::new(spec, 1).unwrap();
    let cfg = sgrnn_core::train::TrainConfig { epochs: 1, batch_size: 2, ..Default::default() };
    let mut t = sgrnn_core::train::Trainer::new(net, cfg).unwrap();
    let stats = t.run_epoch(&recs).unwrap();
    assert!(stats.loss.total.is_finite() && stats.batches == 1);
}

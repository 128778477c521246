use std::path::Path;
use std::process::Command;

use sgrnn::commands::{self, eval::downscale_labels, infer_file, EvalReport, Timing};
use sgrnn::dataset::{load_dataset, save_dataset};
use sgrnn::png_io::{read_gray, read_labels, write_labels, write_rgb};
use sgrnn::{CliError, ModelFile, RunConfig, Stage};
use sgrnn_core::data::{generate_synthetic, SynthConfig};
use sgrnn_core::metrics::Confusion;
use sgrnn_core::model::{LayerOp, Network, Variant};
use sgrnn_core::{LabelMap, Vocabulary};

fn small_config(overrides: &[&str]) -> RunConfig {
    let mut cfg = RunConfig::default();
    let mut all: Vec<String> = ["synth_train_count=10", "synth_test_count=4", "epochs=2"].iter().map(|s| s.to_string()).collect();
    all.extend(overrides.iter().map(|s| s.to_string()));
    cfg.apply_overrides(&all).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn fresh_model(cfg: &RunConfig) -> ModelFile {
    let net = Network::<f32>::new(cfg.build_spec().unwrap(), cfg.seed).unwrap();
    ModelFile::from_network(&net, cfg, None)
}

#[test]
fn model_round_trip_is_byte_exact() {
    let cfg = small_config(&[]);
    let m = fresh_model(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.svrn");
    m.save(&p).unwrap();
    let first = std::fs::read(&p).unwrap();
    let back = ModelFile::load(&p).unwrap();
    let q = dir.path().join("b.svrn");
    back.save(&q).unwrap();
    assert_eq!(first, std::fs::read(&q).unwrap());
    assert_eq!(back.config, cfg);
}

#[test]
fn loaded_model_predicts_identically() {
    let cfg = small_config(&[]);
    let m = fresh_model(&cfg);
    let back = ModelFile::decode(&m.encode(), Path::new("mem")).unwrap();
    let data = generate_synthetic(&cfg.synth_split(true)).unwrap();
    let x = sgrnn_core::train::batch_images::<f32>(&data.iter().collect::<Vec<_>>()).unwrap();
    let a = m.network::<f32>().unwrap().forward(&x).unwrap();
    let b = back.network::<f32>().unwrap().forward(&x).unwrap();
    let last = cfg.build_spec().unwrap().layers.len();
    assert_eq!(a.value(last).data(), b.value(last).data());
}

#[test]
fn corrupt_files_are_rejected() {
    let m = fresh_model(&small_config(&[]));
    let bytes = m.encode();
    let p = Path::new("mem");

    let mut flipped = bytes.clone();
    let mid = bytes.len() - 100;
    flipped[mid] ^= 0x10;
    let e = ModelFile::decode(&flipped, p).unwrap_err();
    assert!(matches!(e, CliError::Format { .. }) && e.to_string().contains("checksum"), "{e}");

    let e = ModelFile::decode(&bytes[..bytes.len() / 2], p).unwrap_err();
    assert!(matches!(e, CliError::Format { .. }), "{e}");

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(ModelFile::decode(&magic, p).unwrap_err().to_string().contains("magic"));

    let mut version = bytes.clone();
    version[4] = 9;
    assert!(ModelFile::decode(&version, p).unwrap_err().to_string().contains("version"));

    assert!(ModelFile::decode(&bytes[..6], p).unwrap_err().to_string().contains("truncated"));
}

#[test]
fn stage_two_model_is_not_a_stage_one_model() {
    let cfg = small_config(&["stage=2-nose", "synth_height=128", "synth_width=128", "input_size=128"]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nose.svrn");
    fresh_model(&cfg).save(&p).unwrap();
    let e = ModelFile::load_expecting(&p, Stage::One).unwrap_err();
    assert!(matches!(e, CliError::Mismatch(_)), "{e}");
    assert_eq!(e.exit_code(), 6);
    ModelFile::load_expecting(&p, Stage::Nose).unwrap();
}

#[test]
fn dataset_round_trip() {
    let synth = SynthConfig { seed: 3, count: 3, vocab: Vocabulary::Fine, ..SynthConfig::default() };
    let recs = generate_synthetic(&synth).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &recs).unwrap();
    let back = load_dataset(dir.path(), Vocabulary::Fine).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in recs.iter().zip(&back) {
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.points, b.points);
        let err = a.image.data().iter().zip(b.image.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max);
        assert!(err <= 0.5 / 255.0 + 1e-6, "quantization error {err}");
    }
}

#[test]
fn extent_mismatch_names_the_sample() {
    let recs = generate_synthetic(&SynthConfig { seed: 4, count: 2, ..SynthConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &recs).unwrap();
    write_labels(&dir.path().join("labels/0001.png"), &LabelMap::filled(32, 64, Vocabulary::Coarse, 0)).unwrap();
    let e = load_dataset(dir.path(), Vocabulary::Coarse).unwrap_err();
    match &e {
        CliError::Data { id, .. } => assert_eq!(id, "0001"),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn palette_png_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.png");
    let data: Vec<u8> = (0..11 * 5).map(|i| (i % 11) as u8).collect();
    let m = LabelMap::from_vec(5, 11, Vocabulary::Fine, data).unwrap();
    write_labels(&p, &m).unwrap();
    assert_eq!(read_labels(&p, Vocabulary::Fine).unwrap(), m);
}

#[test]
fn training_smoke_loss_decreases() {
    let cfg = small_config(&["variant=RNN-G"]);
    let out = commands::train::<f32>(&cfg, &mut |_| {}).unwrap();
    assert_eq!(out.log.len(), 2);
    let (a, b) = (out.log[0].stats.loss.total, out.log[1].stats.loss.total);
    assert!(b < a, "loss went from {a} to {b}");
    assert!(out.log.iter().all(|e| (0.0..=1.0).contains(&e.held_out_accuracy)));
}

#[test]
fn training_is_deterministic_in_double_precision() {
    let cfg = small_config(&["epochs=1", "synth_train_count=6"]);
    let a = commands::train::<f64>(&cfg, &mut |_| {}).unwrap();
    let b = commands::train::<f64>(&cfg, &mut |_| {}).unwrap();
    for (p, q) in a.net.params().iter().zip(b.net.params().iter()) {
        assert_eq!(p.data, q.data, "{}", p.name);
    }
}

#[test]
fn cnn_s_has_no_recurrent_layer() {
    let spec = small_config(&["variant=CNN-S"]).build_spec().unwrap();
    assert_eq!(spec.kind, sgrnn_core::model::NetKind::Stage1(Variant::CnnS));
    assert!(!spec.layers.iter().any(|l| matches!(l.op, LayerOp::Srnn { .. })));
}

#[test]
fn overfit_one_sample_reproduces_labels() {
    let cfg = small_config(&[
        "synth_train_count=1",
        "synth_test_count=1",
        "epochs=1000",
        "learning_rate=0.005",
        "batch_size=1",
        "augment=false",
        "weight_decay=0",
        "lr_step=700",
    ]);
    let data = commands::load_run_data(&cfg).unwrap();
    let data = commands::RunData { test: data.train.clone(), ..data };
    let out = commands::train_on::<f32>(&cfg, &data, &mut |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img.png");
    write_rgb(&img, &data.train[0].image).unwrap();
    let model = ModelFile::from_network(&out.net, &cfg, None);
    let net = model.network::<f32>().unwrap();
    let pred_path = dir.path().join("pred.png");
    let gate_path = dir.path().join("gate.png");
    let inf = infer_file(&net, &img, &pred_path, Some(&gate_path), 1).unwrap();
    let truth = &data.train[0].labels;
    let written = read_labels(&pred_path, Vocabulary::Coarse).unwrap();
    assert_eq!(written, inf.labels);
    let agree = truth.data().iter().zip(written.data()).filter(|(a, b)| a == b).count();
    let frac = agree as f64 / truth.data().len() as f64;
    assert!(frac >= 0.99, "overfit agreement {frac}");

    let (h, w, gray) = read_gray(&gate_path).unwrap();
    assert_eq!((h, w), (64, 64));
    let probs = inf.gate.unwrap();
    for (g, p) in gray.iter().zip(&probs) {
        assert!((0.0..=1.0).contains(p));
        assert_eq!(*g, sgrnn::png_io::quantize(*p));
    }
}

#[test]
fn infer_handles_other_extents() {
    let cfg = small_config(&[]);
    let net = fresh_model(&cfg).network::<f32>().unwrap();
    let img = sgrnn_core::Tensor::filled(sgrnn_core::Shape::new(1, 3, 40, 90), 0.3f32);
    let inf = commands::infer_image(&net, &img, 1).unwrap();
    assert_eq!((inf.labels.height(), inf.labels.width()), (40, 90));
    assert_eq!(inf.gate.unwrap().len(), 40 * 90);
}

#[test]
fn report_identities() {
    let c = Confusion::from_counts(2, vec![8, 2, 2, 8]).unwrap();
    let r = EvalReport::from_confusion(Vocabulary::Coarse, c, Timing::default());
    assert_eq!(r.scores.accuracy, 0.8);
    for s in &r.scores.per_class {
        assert!((s.f_measure - 0.8).abs() < 1e-15);
    }

    let truth = LabelMap::from_vec(1, 6, Vocabulary::Coarse, vec![0, 1, 2, 2, 1, 0]).unwrap();
    let mut conf = Confusion::new(3);
    conf.add_maps(&truth, &truth).unwrap();
    let r = EvalReport::from_confusion(Vocabulary::Coarse, conf, Timing::default());
    assert_eq!(r.scores.accuracy, 1.0);
    assert!(r.scores.per_class.iter().all(|s| s.f_measure == 1.0));

    let mut conf = Confusion::new(3);
    conf.add_maps(&truth, &LabelMap::filled(1, 6, Vocabulary::Coarse, 1)).unwrap();
    let r = EvalReport::from_confusion(Vocabulary::Coarse, conf, Timing::default());
    assert_eq!(r.scores.per_class[1].recall, 1.0);
    assert_eq!(r.scores.per_class[0].f_measure, 0.0);
    assert_eq!(r.scores.per_class[2].f_measure, 0.0);
    assert!(r.to_text().contains("pixel accuracy"));
}

#[test]
fn downscale_picks_block_centres() {
    let data: Vec<u8> = (0..16).map(|i| (i % 3) as u8).collect();
    let m = LabelMap::from_vec(4, 4, Vocabulary::Coarse, data).unwrap();
    let d = downscale_labels(&m, 2).unwrap();
    assert_eq!(d.data(), &[m.get(1, 1), m.get(1, 3), m.get(3, 1), m.get(3, 3)]);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_sgrnn");
    let out = Command::new(bin).args(["--set", "momentum=3", "config"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("momentum"));
    let out = Command::new(bin).args(["eval", "--model", "/nonexistent/model.svrn"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = Command::new(bin).args(["--set", "epochs=4", "config"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("epochs = 4"));
}

#[test]
fn layer_times_account_for_the_whole_pass() {
    let net = fresh_model(&small_config(&[])).network::<f32>().unwrap();
    let t = commands::bench::time_network(&net, 10, 1).unwrap();
    let layers: f64 = t.layers.iter().map(|(_, ms)| ms).sum();
    let rel = (layers - t.image.mean_ms).abs() / t.image.mean_ms;
    assert!(rel <= 0.10, "layers {layers:.3} ms vs end-to-end {:.3} ms", t.image.mean_ms);
    assert!(commands::bench::time_network(&net, 9, 1).is_err());
}

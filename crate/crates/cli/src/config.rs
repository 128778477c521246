//! Run configuration: a plain `key = value` file that fully determines a
//! training run and is embedded in every saved model.

use std::fmt::Write;
use std::path::PathBuf;

use sgrnn_core::data::{AugmentConfig, SynthConfig};
use sgrnn_core::model::{build_stage1_variant, build_stage2, ComponentKind, NetKind, NetworkSpec, Variant};
use sgrnn_core::train::TrainConfig;
use sgrnn_core::Vocabulary;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Eye,
    Nose,
    Mouth,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::One => "1",
            Stage::Eye => "2-eye",
            Stage::Nose => "2-nose",
            Stage::Mouth => "2-mouth",
        }
    }

    pub fn from_tag(s: &str) -> Option<Stage> {
        [Stage::One, Stage::Eye, Stage::Nose, Stage::Mouth].into_iter().find(|t| t.tag() == s)
    }

    /// Component crops used to train a second-stage network.
    pub fn components(self) -> &'static [ComponentKind] {
        match self {
            Stage::One => &[],
            Stage::Eye => &[ComponentKind::EyeLeft, ComponentKind::EyeRight],
            Stage::Nose => &[ComponentKind::Nose],
            Stage::Mouth => &[ComponentKind::Mouth],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub stage: Stage,
    pub variant: Variant,
    /// Stage-1 class count, 3 or 11.
    pub classes: usize,
    /// Stage-1 input side.
    pub input_size: usize,
    pub train: TrainConfig,
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    /// Used when `train_dir` is unset; `count` is the training-set size.
    pub synth: SynthConfig,
    pub synth_test_count: usize,
    pub synth_test_seed: u64,
    /// Worker threads for directional scans.
    pub threads: usize,
    /// Score predictions after nearest-neighbour downscaling to this side.
    pub eval_downscale: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            stage: Stage::One,
            variant: Variant::RnnG,
            classes: 3,
            input_size: 64,
            train: TrainConfig::default(),
            train_dir: None,
            test_dir: None,
            synth: SynthConfig { seed: 1, count: 500, ..SynthConfig::default() },
            synth_test_count: 100,
            synth_test_seed: 2,
            threads: 1,
            eval_downscale: None,
        }
    }
}

fn err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| err(field, format!("cannot parse {v:?}: {e}")))
}

fn opt_usize(field: &str, v: &str) -> Result<Option<usize>> {
    if v == "none" {
        Ok(None)
    } else {
        num(field, v).map(Some)
    }
}

fn show_opt(v: Option<usize>) -> String {
    v.map_or("none".into(), |v| v.to_string())
}

impl RunConfig {
    /// Vocabulary of the images and labels the run reads.
    pub fn data_vocab(&self) -> Vocabulary {
        match (self.stage, self.classes) {
            (Stage::One, 3) => Vocabulary::Coarse,
            _ => Vocabulary::Fine,
        }
    }

    pub fn build_spec(&self) -> Result<NetworkSpec> {
        let spec = match self.stage {
            Stage::One => build_stage1_variant(self.variant, self.classes, self.input_size)?,
            Stage::Eye => build_stage2(NetKind::Eye)?,
            Stage::Nose => build_stage2(NetKind::Nose)?,
            Stage::Mouth => build_stage2(NetKind::Mouth)?,
        };
        Ok(spec)
    }

    /// Synthetic generator settings for the train or test split.
    pub fn synth_split(&self, test: bool) -> SynthConfig {
        let mut s = self.synth.clone();
        s.vocab = self.data_vocab();
        if test {
            s.seed = self.synth_test_seed;
            s.count = self.synth_test_count;
        }
        s
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "seed" => {
                self.seed = num(key, v)?;
                t.seed = self.seed;
            }
            "stage" => self.stage = Stage::from_tag(v).ok_or_else(|| err(key, format!("unknown stage {v:?} (1, 2-eye, 2-nose, 2-mouth)")))?,
            "variant" => self.variant = Variant::from_tag(v).ok_or_else(|| err(key, format!("unknown variant {v:?} (CNN-S, CNN-Deep, RNN, RNN-G)")))?,
            "classes" => self.classes = num(key, v)?,
            "input_size" => self.input_size = num(key, v)?,
            "epochs" => t.epochs = num(key, v)?,
            "batch_size" => t.batch_size = num(key, v)?,
            "learning_rate" => t.sgd.learning_rate = num(key, v)?,
            "momentum" => t.sgd.momentum = num(key, v)?,
            "weight_decay" => t.sgd.weight_decay = num(key, v)?,
            "lr_step" => t.lr_step = num(key, v)?,
            "lr_decay" => t.lr_decay = num(key, v)?,
            "loss_weight_coarse" => t.weights.coarse = num(key, v)?,
            "loss_weight_gate" => t.weights.gate = num(key, v)?,
            "loss_weight_fine" => t.weights.fine = num(key, v)?,
            "boundary_ratio" => t.targets.boundary_ratio = num(key, v)?,
            "background_factor" => t.targets.background_factor = opt_usize(key, v)?,
            "augment" => {
                t.augment = match v {
                    "true" => Some(t.augment.unwrap_or_default()),
                    "false" => None,
                    _ => return Err(err(key, "expected true or false")),
                }
            }
            "augment_rotation" | "augment_scale_min" | "augment_scale_max" | "augment_translation" | "augment_mirror" => {
                let a = t.augment.get_or_insert_with(AugmentConfig::default);
                let x: f32 = num(key, v)?;
                match key {
                    "augment_rotation" => a.max_rotation_deg = x,
                    "augment_scale_min" => a.min_scale = x,
                    "augment_scale_max" => a.max_scale = x,
                    "augment_translation" => a.max_translation = x,
                    _ => a.mirror_prob = x,
                }
            }
            "train_dir" => self.train_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "test_dir" => self.test_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "synth_seed" => self.synth.seed = num(key, v)?,
            "synth_train_count" => self.synth.count = num(key, v)?,
            "synth_test_count" => self.synth_test_count = num(key, v)?,
            "synth_test_seed" => self.synth_test_seed = num(key, v)?,
            "synth_height" => self.synth.height = num(key, v)?,
            "synth_width" => self.synth.width = num(key, v)?,
            "synth_clutter" => self.synth.clutter = num(key, v)?,
            "synth_multi_face" => {
                self.synth.multi_face = if v == "none" {
                    None
                } else {
                    let (a, b) = v.split_once('-').ok_or_else(|| err(key, "expected none or LO-HI"))?;
                    Some((num(key, a)?, num(key, b)?))
                }
            }
            "threads" => self.threads = num(key, v)?,
            "eval_downscale" => self.eval_downscale = opt_usize(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("stage", self.stage.tag().into());
        kv("variant", self.variant.tag().into());
        kv("classes", self.classes.to_string());
        kv("input_size", self.input_size.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("learning_rate", t.sgd.learning_rate.to_string());
        kv("momentum", t.sgd.momentum.to_string());
        kv("weight_decay", t.sgd.weight_decay.to_string());
        kv("lr_step", t.lr_step.to_string());
        kv("lr_decay", t.lr_decay.to_string());
        kv("loss_weight_coarse", t.weights.coarse.to_string());
        kv("loss_weight_gate", t.weights.gate.to_string());
        kv("loss_weight_fine", t.weights.fine.to_string());
        kv("boundary_ratio", t.targets.boundary_ratio.to_string());
        kv("background_factor", show_opt(t.targets.background_factor));
        kv("augment", t.augment.is_some().to_string());
        if let Some(a) = &t.augment {
            kv("augment_rotation", a.max_rotation_deg.to_string());
            kv("augment_scale_min", a.min_scale.to_string());
            kv("augment_scale_max", a.max_scale.to_string());
            kv("augment_translation", a.max_translation.to_string());
            kv("augment_mirror", a.mirror_prob.to_string());
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        kv("train_dir", path(&self.train_dir));
        kv("test_dir", path(&self.test_dir));
        kv("synth_seed", self.synth.seed.to_string());
        kv("synth_train_count", self.synth.count.to_string());
        kv("synth_test_count", self.synth_test_count.to_string());
        kv("synth_test_seed", self.synth_test_seed.to_string());
        kv("synth_height", self.synth.height.to_string());
        kv("synth_width", self.synth.width.to_string());
        kv("synth_clutter", self.synth.clutter.to_string());
        kv("synth_multi_face", self.synth.multi_face.map_or("none".into(), |(a, b)| format!("{a}-{b}")));
        kv("threads", self.threads.to_string());
        kv("eval_downscale", show_opt(self.eval_downscale));
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| CliError::Config(e.to_string().trim_start_matches("invalid configuration: ").to_string()))?;
        if self.stage == Stage::One && !matches!(self.classes, 3 | 11) {
            return Err(err("classes", format!("{} is not 3 or 11", self.classes)));
        }
        if self.stage != Stage::One && self.variant != Variant::RnnG {
            return Err(err("variant", "second-stage networks have a fixed architecture; leave variant at RNN-G"));
        }
        if self.threads == 0 || self.threads > 64 {
            return Err(err("threads", "must lie in 1..=64"));
        }
        if self.eval_downscale == Some(0) {
            return Err(err("eval_downscale", "must be positive or none"));
        }
        self.build_spec().map_err(|e| err("input_size", e))?;
        if self.train_dir.is_none() {
            let synth = self.synth_split(false);
            synth.validate().map_err(|e| err("synth", e))?;
            if self.synth.count == 0 || self.synth_test_count == 0 {
                return Err(err("synth_train_count", "synthetic splits must be non-empty"));
            }
            if self.stage == Stage::One && synth.multi_face.is_none() && (synth.height, synth.width) != (self.input_size, self.input_size) {
                return Err(err("synth_height", format!("synthetic images must be {0}x{0} to match input_size", self.input_size)));
            }
            if synth.multi_face.is_some() && self.input_size != 512 {
                return Err(err("input_size", "multi-face scenes are 512x512"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(&["variant=CNN-S".into(), "background_factor=5".into(), "synth_clutter=0.25".into()]).unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
    }

    #[test]
    fn field_level_errors() {
        let e = RunConfig::parse("momentum = 1.5").unwrap_err().to_string();
        assert!(e.contains("momentum"), "{e}");
        let e = RunConfig::parse("bogus = 1").unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = RunConfig::parse("classes = 4").unwrap_err().to_string();
        assert!(e.contains("classes"), "{e}");
        let e = RunConfig::parse("epochs = many").unwrap_err().to_string();
        assert!(e.contains("epochs"), "{e}");
    }
}

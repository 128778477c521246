use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use sgrnn::commands::{self, TwoStage};
use sgrnn::dataset::load_dataset;
use sgrnn::{CliError, ModelFile, Result, RunConfig, Stage};
use sgrnn_core::model::Network;
use sgrnn_core::Vocabulary;

#[derive(Parser)]
#[command(name = "sgrnn", version, about = "Face parsing with a shallow CNN and a spatially gated RNN")]
struct Cli {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set epochs=5. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration.
    Config,
    /// Write the configured synthetic train/test splits as PNG datasets.
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and save it.
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model, or a two-stage pipeline when component models are given.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset directory; defaults to the test split of the run configuration.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        eye: Option<PathBuf>,
        #[arg(long)]
        nose: Option<PathBuf>,
        #[arg(long)]
        mouth: Option<PathBuf>,
    },
    /// Label one image.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Palette PNG output.
        #[arg(long)]
        out: PathBuf,
        /// Also write the gate probabilities as grayscale.
        #[arg(long)]
        gate: Option<PathBuf>,
    },
    /// Time inference per image and per layer.
    Bench {
        /// Defaults to a freshly initialised network from the configuration.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        threads: Vec<usize>,
        /// Also time the directional scans alone on a square map of this side.
        #[arg(long)]
        scan_side: Option<usize>,
    },
}

fn load_config(cli: &Cli, embedded: Option<&RunConfig>) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, embedded) {
        (Some(p), _) => RunConfig::parse(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?,
        (None, Some(c)) => c.clone(),
        (None, None) => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn eval(cli: &Cli, model: &Path, data: Option<&Path>, parts: [(Stage, Option<&PathBuf>); 3]) -> Result<()> {
    let stage1 = ModelFile::load_expecting(model, Stage::One)?;
    let mut components = Vec::new();
    for (stage, path) in parts {
        if let Some(p) = path {
            components.push(ModelFile::load_expecting(p, stage)?);
        }
    }
    let report = if components.is_empty() {
        let cfg = load_config(cli, Some(&stage1.config))?;
        let records = match data {
            Some(d) => load_dataset(d, stage1.spec.vocab)?,
            None => commands::source_split(&cfg, true)?,
        };
        let net: Network<f32> = stage1.network()?;
        commands::eval_network(&net, &records, cfg.threads, cfg.eval_downscale)?
    } else {
        let cfg = load_config(cli, Some(&components[0].config))?;
        let records = match data {
            Some(d) => load_dataset(d, Vocabulary::Fine)?,
            None => commands::source_split(&cfg, true)?,
        };
        let pipe = TwoStage::new(&stage1, components)?;
        commands::eval_two_stage(&pipe, &records, cfg.threads, cfg.eval_downscale)?
    };
    print!("{}", report.to_text());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Config => print!("{}", load_config(cli, None)?.to_text()),
        Command::GenData { out } => {
            let cfg = load_config(cli, None)?;
            let (a, b) = commands::gen_data(&cfg, out)?;
            info!("wrote {a} training and {b} test samples under {}", out.display());
        }
        Command::Train { out } => {
            let cfg = load_config(cli, None)?;
            let outcome = commands::train::<f32>(&cfg, &mut |e| println!("{e}"))?;
            ModelFile::from_network(&outcome.net, &cfg, outcome.calibration).save(out)?;
            info!("saved {}", out.display());
        }
        Command::Eval { model, data, eye, nose, mouth } => eval(
            cli,
            model,
            data.as_deref(),
            [(Stage::Eye, eye.as_ref()), (Stage::Nose, nose.as_ref()), (Stage::Mouth, mouth.as_ref())],
        )?,
        Command::Infer { model, image, out, gate } => {
            let m = ModelFile::load(model)?;
            let cfg = load_config(cli, Some(&m.config))?;
            commands::infer_file(&m.network()?, image, out, gate.as_deref(), cfg.threads)?;
        }
        Command::Bench { model, iterations, threads, scan_side } => {
            let (net, cfg) = match model {
                Some(p) => {
                    let m = ModelFile::load(p)?;
                    let cfg = load_config(cli, Some(&m.config))?;
                    (m.network()?, cfg)
                }
                None => {
                    let cfg = load_config(cli, None)?;
                    (Network::new(cfg.build_spec()?, cfg.seed)?, cfg)
                }
            };
            info!("benchmarking {}", cfg.build_spec()?.kind.tag());
            print!("{}", commands::bench(&net, *iterations, threads, *scan_side)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

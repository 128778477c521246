//! One module per CLI command, usable as a library.

pub mod bench;
pub mod data;
pub mod eval;
pub mod gen_data;
pub mod infer;
pub mod train;

pub use bench::{bench, BenchReport};
pub use data::{component_samples, fit_calibration, load_run_data, source_split, RunData};
pub use eval::{eval_network, eval_two_stage, EvalReport, Timing, TwoStage};
pub use gen_data::gen_data;
pub use infer::{infer_file, infer_image, Inference};
pub use train::{train, train_on, EpochLog, TrainOutcome};

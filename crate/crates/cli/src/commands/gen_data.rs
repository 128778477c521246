use std::path::Path;

use super::data::source_split;
use crate::config::RunConfig;
use crate::dataset::save_dataset;
use crate::error::Result;

/// Writes the configured train and test splits to `out/train` and
/// `out/test`; returns the sample counts.
pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<(usize, usize)> {
    cfg.validate()?;
    let train = source_split(cfg, false)?;
    save_dataset(&out.join("train"), &train)?;
    let test = source_split(cfg, true)?;
    save_dataset(&out.join("test"), &test)?;
    Ok((train.len(), test.len()))
}

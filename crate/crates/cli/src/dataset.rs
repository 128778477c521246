//! On-disk datasets: `images/NNNN.png`, `labels/NNNN.png` and optional
//! `points/NNNN.txt` (five lines of `x y`).

use std::fs;
use std::path::Path;

use sgrnn_core::data::SampleRecord;
use sgrnn_core::model::KeyPoints;
use sgrnn_core::Vocabulary;

use crate::error::{CliError, Result};
use crate::png_io::{read_labels, read_rgb, write_labels, write_rgb};

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn save_dataset(dir: &Path, records: &[SampleRecord]) -> Result<()> {
    for sub in ["images", "labels", "points"] {
        create_dir(&dir.join(sub))?;
    }
    for (i, rec) in records.iter().enumerate() {
        let id = format!("{i:04}");
        write_rgb(&dir.join("images").join(format!("{id}.png")), &rec.image)?;
        write_labels(&dir.join("labels").join(format!("{id}.png")), &rec.labels)?;
        if let Some(p) = &rec.points {
            let text: String = p.0.iter().map(|(x, y)| format!("{x} {y}\n")).collect();
            let path = dir.join("points").join(format!("{id}.txt"));
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

fn parse_points(text: &str) -> std::result::Result<KeyPoints, String> {
    let mut pts = [(0.0f32, 0.0f32); 5];
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 5 {
        return Err(format!("expected 5 points, found {}", lines.len()));
    }
    for (p, line) in pts.iter_mut().zip(lines) {
        let v: Vec<f32> = line.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|e| format!("{e}"))?;
        if v.len() != 2 {
            return Err(format!("bad point line {line:?}"));
        }
        *p = (v[0], v[1]);
    }
    Ok(KeyPoints(pts))
}

/// Sample ids in `images/`, sorted.
pub fn dataset_ids(dir: &Path) -> Result<Vec<String>> {
    let images = dir.join("images");
    let mut ids = Vec::new();
    for entry in fs::read_dir(&images).map_err(|e| CliError::io(&images, e))? {
        let path = entry.map_err(|e| CliError::io(&images, e))?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn load_sample(dir: &Path, id: &str, vocab: Vocabulary) -> Result<SampleRecord> {
    let data_err = |msg: String| CliError::Data { id: id.to_string(), msg };
    let label_path = dir.join("labels").join(format!("{id}.png"));
    if !label_path.exists() {
        return Err(data_err("image has no label map".into()));
    }
    let image = read_rgb(&dir.join("images").join(format!("{id}.png")))?;
    let labels = read_labels(&label_path, vocab).map_err(|e| match e {
        CliError::Decode { msg, .. } => data_err(msg),
        other => other,
    })?;
    let point_path = dir.join("points").join(format!("{id}.txt"));
    let points = if point_path.exists() {
        let text = fs::read_to_string(&point_path).map_err(|e| CliError::io(&point_path, e))?;
        Some(parse_points(&text).map_err(data_err)?)
    } else {
        None
    };
    let rec = SampleRecord { image, labels, points };
    rec.validate().map_err(|e| data_err(e.to_string()))?;
    Ok(rec)
}

pub fn load_dataset(dir: &Path, vocab: Vocabulary) -> Result<Vec<SampleRecord>> {
    let ids = dataset_ids(dir)?;
    if ids.is_empty() {
        return Err(CliError::Data { id: dir.display().to_string(), msg: "no images found".into() });
    }
    ids.iter().map(|id| load_sample(dir, id, vocab)).collect()
}

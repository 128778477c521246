//! PNG reading and writing for RGB images, palette label maps and
//! grayscale maps.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};
use sgrnn_core::{LabelMap, Shape, Tensor, Vocabulary};

use crate::error::{CliError, Result};
use crate::palette::palette_bytes;

fn decoder(path: &Path, transform: Transformations) -> Result<png::Reader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut d = png::Decoder::new(BufReader::new(f));
    d.set_transformations(transform);
    d.read_info().map_err(|e| CliError::decode(path, e))
}

fn read_frame(path: &Path, r: &mut png::Reader<BufReader<File>>) -> Result<(Vec<u8>, png::OutputInfo)> {
    let size = r.output_buffer_size().ok_or_else(|| CliError::decode(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = r.next_frame(&mut buf).map_err(|e| CliError::decode(path, e))?;
    buf.truncate(info.line_size * info.height as usize);
    Ok((buf, info))
}

/// Any 8/16-bit PNG as a `1 x 3 x H x W` tensor in `[0, 1]`. Alpha is
/// dropped; grayscale is replicated.
pub fn read_rgb(path: &Path) -> Result<Tensor<f32>> {
    let mut r = decoder(path, Transformations::normalize_to_color8())?;
    let (buf, info) = read_frame(path, &mut r)?;
    let (h, w) = (info.height as usize, info.width as usize);
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(CliError::decode(path, "palette was not expanded")),
    };
    let mut t = Tensor::zeros(Shape::new(1, 3, h, w));
    for y in 0..h {
        let row = &buf[y * info.line_size..];
        for x in 0..w {
            let px = &row[x * channels..];
            for c in 0..3 {
                let v = if channels >= 3 { px[c] } else { px[0] };
                *t.at_mut(0, c, y, x) = f32::from(v) / 255.0;
            }
        }
    }
    Ok(t)
}

fn encoder<'a>(path: &Path, h: usize, w: usize, color: ColorType) -> Result<png::Encoder<'a, BufWriter<File>>> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut e = png::Encoder::new(BufWriter::new(f), w as u32, h as u32);
    e.set_color(color);
    e.set_depth(BitDepth::Eight);
    Ok(e)
}

fn finish(path: &Path, e: png::Encoder<'_, BufWriter<File>>, data: &[u8]) -> Result<()> {
    let mut wr = e.write_header().map_err(|err| CliError::decode(path, err))?;
    wr.write_image_data(data).map_err(|err| CliError::decode(path, err))?;
    wr.finish().map_err(|err| CliError::decode(path, err))
}

/// Writes channels 0..3 of item 0, quantized to 8 bits.
pub fn write_rgb(path: &Path, image: &Tensor<f32>) -> Result<()> {
    let s = image.shape();
    let mut data = Vec::with_capacity(s.plane() * 3);
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..3 {
                data.push(quantize(image.at(0, c, y, x)));
            }
        }
    }
    finish(path, encoder(path, s.h, s.w, ColorType::Rgb)?, &data)
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Palette PNG whose pixel indices are the class ids.
pub fn write_labels(path: &Path, labels: &LabelMap) -> Result<()> {
    let mut e = encoder(path, labels.height(), labels.width(), ColorType::Indexed)?;
    e.set_palette(palette_bytes());
    finish(path, e, labels.data())
}

/// Reads raw 8-bit indices (palette or grayscale) as class ids.
pub fn read_labels(path: &Path, vocab: Vocabulary) -> Result<LabelMap> {
    let mut r = decoder(path, Transformations::IDENTITY)?;
    let (buf, info) = read_frame(path, &mut r)?;
    if info.bit_depth != BitDepth::Eight || !matches!(info.color_type, ColorType::Indexed | ColorType::Grayscale) {
        return Err(CliError::decode(path, "labels must be 8-bit palette or grayscale"));
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        data.extend_from_slice(&buf[y * info.line_size..y * info.line_size + w]);
    }
    LabelMap::from_vec(h, w, vocab, data).map_err(|e| CliError::decode(path, e))
}

/// 8-bit grayscale from values in `[0, 1]`.
pub fn write_gray(path: &Path, h: usize, w: usize, values: &[f32]) -> Result<()> {
    let data: Vec<u8> = values.iter().map(|&v| quantize(v)).collect();
    finish(path, encoder(path, h, w, ColorType::Grayscale)?, &data)
}

pub fn read_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut r = decoder(path, Transformations::IDENTITY)?;
    let (buf, info) = read_frame(path, &mut r)?;
    if info.color_type != ColorType::Grayscale || info.bit_depth != BitDepth::Eight {
        return Err(CliError::decode(path, "expected 8-bit grayscale"));
    }
    Ok((info.height as usize, info.width as usize, buf))
}

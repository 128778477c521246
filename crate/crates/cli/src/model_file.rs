//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SVRN" | u32 version
//! u32 len | spec text        (NetworkSpec::to_text)
//! u32 len | run config text  (RunConfig::to_text)
//! u32 len | calibration text (empty for stage-1 models)
//! u32 records
//!   per record: u32 len | name | u32 rank | u32 dims[rank] | f32 values
//! u32 CRC32 of every preceding byte
//! ```

use std::path::Path;

use sgrnn_core::model::{CropCalibration, NetKind, Network, NetworkSpec};
use sgrnn_core::params::{Param, ParamStore};
use sgrnn_core::Real;

use crate::config::{RunConfig, Stage};
use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"SVRN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ModelFile {
    pub spec: NetworkSpec,
    pub config: RunConfig,
    /// Crop geometry used to cut this component network's patches.
    pub calibration: Option<CropCalibration>,
    pub params: ParamStore<f32>,
}

impl ModelFile {
    pub fn from_network<T: Real>(net: &Network<T>, config: &RunConfig, calibration: Option<CropCalibration>) -> ModelFile {
        ModelFile { spec: net.spec().clone(), config: config.clone(), calibration, params: net.params().cast() }
    }

    pub fn network<T: Real>(&self) -> Result<Network<T>> {
        Ok(Network::from_params(self.spec.clone(), self.params.cast())?)
    }

    pub fn stage(&self) -> Stage {
        stage_of(self.spec.kind)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let calib = self.calibration.as_ref().map(|c| c.to_text()).unwrap_or_default();
        for text in [self.spec.to_text(), self.config.to_text(), calib] {
            put_bytes(&mut out, text.as_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in self.params.iter() {
            put_bytes(&mut out, p.name.as_bytes());
            out.extend_from_slice(&(p.dims.len() as u32).to_le_bytes());
            for &d in &p.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// `path` only labels error messages.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelFile> {
        let bad = |msg: String| CliError::format(path, msg);
        if bytes.len() < 12 {
            return Err(bad(format!("truncated: {} bytes", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("bad magic bytes; not a model file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported format version {version} (expected {VERSION})")));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(bad(format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}")));
        }
        let mut r = Reader { buf: body, pos: 8, path };
        let spec_text = r.text("spec")?;
        let config_text = r.text("run config")?;
        let calib_text = r.text("calibration")?;
        let spec = NetworkSpec::from_text(&spec_text).map_err(|e| bad(format!("spec header: {e}")))?;
        let config = RunConfig::parse(&config_text).map_err(|e| bad(format!("run config header: {e}")))?;
        let calibration = if calib_text.is_empty() {
            None
        } else {
            Some(CropCalibration::from_text(&calib_text).map_err(|e| bad(format!("calibration header: {e}")))?)
        };
        if config.stage != stage_of(spec.kind) {
            return Err(bad(format!("header disagrees with itself: spec is {}, config says stage {}", spec.kind.tag(), config.stage.tag())));
        }

        let expected = spec.param_specs();
        let count = r.u32()? as usize;
        let mut found: Vec<Option<Param<f32>>> = vec![None; expected.len()];
        for _ in 0..count {
            let name = r.text("parameter name")?;
            let rank = r.u32()? as usize;
            if rank > 8 {
                return Err(bad(format!("parameter {name}: implausible rank {rank}")));
            }
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let slot = expected
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| bad(format!("parameter {name} is not part of the network")))?;
            if found[slot].is_some() {
                return Err(bad(format!("parameter {name} appears twice")));
            }
            if dims != expected[slot].dims {
                return Err(bad(format!("parameter {name}: shape {dims:?}, network expects {:?}", expected[slot].dims)));
            }
            let len: usize = dims.iter().product();
            let raw = r.take(len * 4, &name)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            found[slot] = Some(Param { name, dims, kind: expected[slot].kind, data });
        }
        if r.pos != body.len() {
            return Err(bad(format!("{} trailing bytes before the checksum", body.len() - r.pos)));
        }
        let mut params = ParamStore::new();
        for (spec_p, p) in expected.iter().zip(found) {
            let p = p.ok_or_else(|| bad(format!("parameter {} is missing", spec_p.name)))?;
            params.push(p)?;
        }
        Ok(ModelFile { spec, config, calibration, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        ModelFile::decode(&bytes, path)
    }

    /// Loads a model and checks it is the network the caller wants.
    pub fn load_expecting(path: &Path, stage: Stage) -> Result<ModelFile> {
        let m = ModelFile::load(path)?;
        if m.stage() != stage {
            return Err(CliError::Mismatch(format!(
                "{} holds a stage {} network ({}), expected stage {}",
                path.display(),
                m.stage().tag(),
                m.spec.kind.tag(),
                stage.tag()
            )));
        }
        Ok(m)
    }
}

pub fn stage_of(kind: NetKind) -> Stage {
    match kind {
        NetKind::Stage1(_) => Stage::One,
        NetKind::Eye => Stage::Eye,
        NetKind::Nose => Stage::Nose,
        NetKind::Mouth => Stage::Mouth,
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(CliError::format(self.path, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, "length field")?.try_into().unwrap()))
    }

    fn text(&mut self, what: &str) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| CliError::format(self.path, format!("{what} is not UTF-8")))
    }
}

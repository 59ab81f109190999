//! Raw binary32 volumes with a JSON sidecar, plus a small CSV form for
//! hand-written test inputs.
//!
//! Raw payload: contiguous little-endian IEEE-754 binary32 values in C order,
//! no header. Values are widened to f64 on read and narrowed on write with
//! round-to-nearest-even (`as f32`); a value that overflows binary32 is
//! rejected rather than written as infinity.
//!
//! Sidecar:
//!
//! ```json
//! { "dims": [128, 128, 128], "spacing": [2.0, 2.0, 2.0],
//!   "dtype": "f32le", "order": "C", "units": "Bq/mL" }
//! ```
//!
//! `labels` (id to name) is an optional extra key used by label volumes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Volume;
use crate::error::{Error, Result};

pub const DTYPE_F32LE: &str = "f32le";
pub const ORDER_C: &str = "C";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeMeta {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub dtype: String,
    pub order: String,
    #[serde(default)]
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<u32, String>>,
}

impl VolumeMeta {
    pub fn for_volume(v: &Volume) -> Self {
        VolumeMeta {
            dims: v.dims().to_vec(),
            spacing: v.spacing().to_vec(),
            dtype: DTYPE_F32LE.into(),
            order: ORDER_C.into(),
            units: v.units().to_string(),
            labels: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let meta: VolumeMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Metadata(format!("{}: {e}", path.display())))?;
        meta.check()?;
        Ok(meta)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("metadata serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn check(&self) -> Result<()> {
        if self.dtype != DTYPE_F32LE {
            return Err(Error::Metadata(format!(
                "unsupported dtype `{}`",
                self.dtype
            )));
        }
        if self.order != ORDER_C {
            return Err(Error::Metadata(format!(
                "unsupported order `{}`",
                self.order
            )));
        }
        super::Shape::from_dims(&self.dims)?;
        if self.spacing.len() != self.dims.len() {
            return Err(Error::Metadata(format!(
                "spacing has {} entries for {} axes",
                self.spacing.len(),
                self.dims.len()
            )));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }
}

pub fn read_volume(path_data: &Path, path_meta: &Path) -> Result<Volume> {
    let meta = VolumeMeta::read(path_meta)?;
    read_volume_with_meta(path_data, &meta)
}

pub(crate) fn read_volume_with_meta(path_data: &Path, meta: &VolumeMeta) -> Result<Volume> {
    let bytes = fs::read(path_data).map_err(|e| Error::io(path_data, e))?;
    let expected = meta.voxel_count();
    if bytes.len() != expected * 4 {
        return Err(Error::SizeMismatch {
            expected,
            actual: bytes.len() / 4,
        });
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Volume::with_metadata(&meta.dims, meta.spacing.clone(), data, meta.units.clone())
}

pub fn write_volume(v: &Volume, path_data: &Path, path_meta: &Path) -> Result<()> {
    write_volume_with_meta(v, path_data, path_meta, VolumeMeta::for_volume(v))
}

pub(crate) fn write_volume_with_meta(
    v: &Volume,
    path_data: &Path,
    path_meta: &Path,
    meta: VolumeMeta,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(v.len() * 4);
    for (index, &value) in v.data().iter().enumerate() {
        let narrow = value as f32;
        if !narrow.is_finite() {
            return Err(Error::NonFinite { index });
        }
        bytes.extend_from_slice(&narrow.to_le_bytes());
    }
    fs::write(path_data, bytes).map_err(|e| Error::io(path_data, e))?;
    meta.write(path_meta)
}

/// Reads comma, semicolon or whitespace separated values. Without `dims`
/// the volume is one-dimensional.
pub fn read_volume_csv(path: &Path, dims: Option<&[usize]>) -> Result<Volume> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split(|c: char| c == ',' || c == ';' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad number `{tok}`", path.display())))?;
            data.push(v);
        }
    }
    match dims {
        Some(d) => Volume::new(d, data),
        None => {
            let n = data.len();
            Volume::new(&[n], data)
        }
    }
}

/// Writes one line per run of the last axis. Values use Rust's shortest
/// round-trip formatting so the file reads back bit-exactly.
pub fn write_volume_csv(v: &Volume, path: &Path) -> Result<()> {
    let row = *v.dims().last().expect("volume has at least one axis");
    let mut out = String::new();
    for chunk in v.data().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

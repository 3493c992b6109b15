//! `PMRP` feature-archive container.
//!
//! One self-describing binary file holds every tensor extracted from a
//! recording, so frame alignment across features is enforced at the
//! container level. Layout:
//!
//! ```text
//! magic "PMRP" | u32 version = 1 | u64 manifest_length | JSON manifest | payload
//! ```
//!
//! The manifest carries `{sample_rate, hop, ratio_f, ratio_l}` plus a tensor
//! list of `{name, dtype: "f32", shape: [rows, cols], offset, labels?}`.
//! Payload tensors are raw little-endian float-32, row-major, at 64-byte
//! aligned absolute offsets.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PMRP";
const VERSION: u32 = 1;
const ALIGN: u64 = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    dtype: String,
    shape: [usize; 2],
    offset: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    sample_rate: u32,
    hop: usize,
    ratio_f: f64,
    ratio_l: f64,
    tensors: Vec<TensorMeta>,
}

/// A named `rows x cols` float-32 tensor, optionally labeled per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub data: Array2<f32>,
    pub labels: Option<Vec<String>>,
}

/// In-memory feature archive; see the module docs for the on-disk layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureArchive {
    pub sample_rate: u32,
    pub hop: usize,
    pub ratio_f: f64,
    pub ratio_l: f64,
    tensors: Vec<Tensor>,
}

fn align_up(v: u64) -> u64 {
    v.div_ceil(ALIGN) * ALIGN
}

impl FeatureArchive {
    pub fn new(sample_rate: u32, hop: usize) -> Self {
        Self {
            sample_rate,
            hop,
            ratio_f: 0.0,
            ratio_l: 0.0,
            tensors: Vec::new(),
        }
    }

    /// Add a tensor; every tensor in one archive must share the frame count.
    pub fn add_tensor(
        &mut self,
        name: impl Into<String>,
        data: Array2<f32>,
        labels: Option<Vec<String>>,
    ) -> Result<()> {
        let name = name.into();
        if self.tensors.iter().any(|t| t.name == name) {
            return Err(Error::invalid(format!("duplicate tensor name '{name}'")));
        }
        if let Some(t) = self.num_frames() {
            if data.nrows() != t {
                return Err(Error::invalid(format!(
                    "tensor '{name}' has {} frames, archive has {t}",
                    data.nrows()
                )));
            }
        }
        if let Some(ref l) = labels {
            if l.len() != data.ncols() {
                return Err(Error::invalid(format!(
                    "tensor '{name}' has {} columns but {} labels",
                    data.ncols(),
                    l.len()
                )));
            }
        }
        self.tensors.push(Tensor { name, data, labels });
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Shared frame count, if any tensor is present.
    pub fn num_frames(&self) -> Option<usize> {
        self.tensors.first().map(|t| t.data.nrows())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        // Offsets appear inside the JSON manifest, and the manifest length
        // moves the 64-byte-aligned payload base, so iterate to a fixpoint.
        let mut manifest_len = 0usize;
        let mut bytes;
        let mut metas;
        let mut iterations = 0;
        loop {
            let mut offset = align_up(16 + manifest_len as u64);
            metas = Vec::with_capacity(self.tensors.len());
            for t in &self.tensors {
                metas.push(TensorMeta {
                    name: t.name.clone(),
                    dtype: "f32".into(),
                    shape: [t.data.nrows(), t.data.ncols()],
                    offset,
                    labels: t.labels.clone(),
                });
                offset = align_up(offset + (t.data.len() * 4) as u64);
            }
            let manifest = Manifest {
                sample_rate: self.sample_rate,
                hop: self.hop,
                ratio_f: self.ratio_f,
                ratio_l: self.ratio_l,
                tensors: metas.clone(),
            };
            bytes = serde_json::to_vec(&manifest).map_err(|e| Error::format(e.to_string()))?;
            if bytes.len() == manifest_len {
                break;
            }
            manifest_len = bytes.len();
            iterations += 1;
            if iterations > 32 {
                return Err(Error::format("manifest layout failed to converge"));
            }
        }

        let total = metas
            .last()
            .map(|m| m.offset + (m.shape[0] * m.shape[1] * 4) as u64)
            .unwrap_or(align_up(16 + manifest_len as u64));
        let mut out = vec![0u8; total as usize];
        out[0..4].copy_from_slice(MAGIC);
        out[4..8].copy_from_slice(&VERSION.to_le_bytes());
        out[8..16].copy_from_slice(&(manifest_len as u64).to_le_bytes());
        out[16..16 + manifest_len].copy_from_slice(&bytes);
        for (t, m) in self.tensors.iter().zip(metas.iter()) {
            let mut pos = m.offset as usize;
            for &v in t.data.iter() {
                out[pos..pos + 4].copy_from_slice(&v.to_le_bytes());
                pos += 4;
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = fs::read(path)?;
        if data.len() < 16 || &data[0..4] != MAGIC {
            return Err(Error::format(format!(
                "{}: not a PMRP archive",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::format(format!(
                "unsupported archive version {version}"
            )));
        }
        let manifest_len = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
        if 16 + manifest_len > data.len() {
            return Err(Error::format("manifest length exceeds file size"));
        }
        let manifest: Manifest = serde_json::from_slice(&data[16..16 + manifest_len])
            .map_err(|e| Error::format(format!("bad manifest JSON: {e}")))?;

        let mut spans: Vec<(u64, u64)> = Vec::new();
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        let mut shared_rows: Option<usize> = None;
        for m in &manifest.tensors {
            if m.dtype != "f32" {
                return Err(Error::format(format!(
                    "tensor '{}' has unsupported dtype '{}'",
                    m.name, m.dtype
                )));
            }
            if m.offset % ALIGN != 0 {
                return Err(Error::format(format!(
                    "tensor '{}' offset {} is not 64-byte aligned",
                    m.name, m.offset
                )));
            }
            let count = m.shape[0] * m.shape[1];
            let end = m.offset + (count * 4) as u64;
            if end > data.len() as u64 {
                return Err(Error::format(format!(
                    "tensor '{}' extends past end of file",
                    m.name
                )));
            }
            for &(s, e) in &spans {
                if m.offset < e && s < end {
                    return Err(Error::format(format!(
                        "tensor '{}' overlaps another tensor",
                        m.name
                    )));
                }
            }
            spans.push((m.offset, end));
            match shared_rows {
                None => shared_rows = Some(m.shape[0]),
                Some(t) if t != m.shape[0] => {
                    return Err(Error::format(format!(
                        "tensor '{}' has {} frames, archive has {t}",
                        m.name, m.shape[0]
                    )));
                }
                _ => {}
            }
            if let Some(ref l) = m.labels {
                if l.len() != m.shape[1] {
                    return Err(Error::format(format!(
                        "tensor '{}' has {} columns but {} labels",
                        m.name,
                        m.shape[1],
                        l.len()
                    )));
                }
            }
            let mut values = Vec::with_capacity(count);
            let base = m.offset as usize;
            for i in 0..count {
                let b = base + i * 4;
                values.push(f32::from_le_bytes(data[b..b + 4].try_into().unwrap()));
            }
            let arr = Array2::from_shape_vec((m.shape[0], m.shape[1]), values)
                .map_err(|e| Error::format(e.to_string()))?;
            tensors.push(Tensor {
                name: m.name.clone(),
                data: arr,
                labels: m.labels.clone(),
            });
        }

        Ok(Self {
            sample_rate: manifest.sample_rate,
            hop: manifest.hop,
            ratio_f: manifest.ratio_f,
            ratio_l: manifest.ratio_l,
            tensors,
        })
    }
}

//! Checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "TBALCKPT"
//! 8       4     format version (u32, currently 1)
//! 12      8     header length H (u64)
//! 20      H     UTF-8 JSON header:
//!                 { "version": 1, "backbone": {...}, "classes": [...],
//!                   "step": n, "tensors": [{"name": .., "shape": [..]}, ...] }
//! 20+H    ...   tensor payloads in header order, each prod(shape) f64 values,
//!               row-major, IEEE-754 little-endian
//! ```
//!
//! Floats in the header are written in shortest round-trip form, so
//! save/load/save is byte-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Backbone, BackboneConfig, MeanPoolClassifier};
use super::tensor::Tensor;
use crate::corpus::LabelCodec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TBALCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model with its label codec and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub model: MeanPoolClassifier,
    pub codec: LabelCodec,
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    backbone: BackboneConfig,
    classes: LabelCodec,
    step: u64,
    tensors: Vec<TensorEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl ModelCheckpoint {
    pub fn new(model: MeanPoolClassifier, codec: LabelCodec, step: u64) -> Result<Self> {
        if codec.num_classes() != model.num_classes() {
            return Err(Error::Shape(format!(
                "codec has {} classes, model {}",
                codec.num_classes(),
                model.num_classes()
            )));
        }
        Ok(ModelCheckpoint { model, codec, step })
    }

    pub fn config(&self) -> &BackboneConfig {
        self.model.config()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let named = self.model.named_parameters();
        let header = Header {
            version: FORMAT_VERSION,
            backbone: self.model.config().clone(),
            classes: self.codec.clone(),
            step: self.step,
            tensors: named
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let payload: usize = named.iter().map(|(_, t)| t.len() * 8).sum();
        let mut out = Vec::with_capacity(20 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in named {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing magic tag"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < header_len {
            return Err(corrupt("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&body[..header_len]).map_err(|e| corrupt(format!("bad header: {e}")))?;
        let layout = header.backbone.parameter_layout();
        if layout.len() != header.tensors.len()
            || layout
                .iter()
                .zip(&header.tensors)
                .any(|((n, s), e)| *n != e.name || *s != e.shape)
        {
            return Err(corrupt("tensor table does not match the backbone config"));
        }
        let mut cursor = &body[header_len..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            if cursor.len() < n * 8 {
                return Err(corrupt(format!("truncated payload for {}", entry.name)));
            }
            let data = cursor[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            cursor = &cursor[n * 8..];
            tensors.push(Tensor::from_vec(&entry.shape, data)?);
        }
        if !cursor.is_empty() {
            return Err(corrupt("trailing bytes after payload"));
        }
        let model = MeanPoolClassifier::from_parameters(header.backbone, tensors)?;
        ModelCheckpoint::new(model, header.classes, header.step)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

//! Binary model file.
//!
//! Layout: 8-byte magic, u32 LE header length, UTF-8 JSON header, raw
//! little-endian tensor payloads in manifest order, then a u64 LE FNV-1a
//! checksum over every preceding byte.

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, OriginModel, Provenance};
use crate::error::{Error, Result};
use crate::tensor::{Activation, DenseLayer, LstmLayer, Network};

pub const MAGIC: &[u8; 8] = b"NOMLSTM1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: Dtype,
    /// byte offset from the start of the payload section
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    taxonomy: Vec<String>,
    provenance: Provenance,
    tensors: Vec<TensorEntry>,
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

impl OriginModel {
    pub fn to_bytes(&self, dtype: Dtype) -> Result<Vec<u8>> {
        let net = self.network();
        let mut tensors = Vec::new();
        let mut offset = 0;
        for (name, t) in net.param_names().into_iter().zip(net.params()) {
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                dtype,
                offset,
            });
            offset += t.len() * dtype.width();
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            config: self.config().clone(),
            taxonomy: self.class_names().to_vec(),
            provenance: self.provenance.clone(),
            tensors,
        };
        let header = serde_json::to_vec(&header)
            .map_err(|e| Error::InvalidModelFile(e.to_string()))?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::InvalidModelFile("header too large".into()))?;

        let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + offset + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        for t in net.params() {
            for &v in t.data() {
                match dtype {
                    Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
                    Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                }
            }
        }
        let sum = checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fixed = MAGIC.len() + 4;
        if bytes.len() < fixed + 8 {
            return Err(Error::ChecksumMismatch);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if checksum(body) != stored {
            return Err(Error::ChecksumMismatch);
        }
        if &body[..MAGIC.len()] != MAGIC {
            return Err(Error::InvalidModelFile("bad magic".into()));
        }
        let header_len =
            u32::from_le_bytes(body[MAGIC.len()..fixed].try_into().expect("4 bytes")) as usize;
        let header_bytes = body
            .get(fixed..fixed + header_len)
            .ok_or_else(|| Error::InvalidModelFile("header length exceeds file".into()))?;
        let bad = |e: serde_json::Error| Error::InvalidModelFile(format!("header: {e}"));

        // Check the version before committing to a header layout.
        let raw: serde_json::Value = serde_json::from_slice(header_bytes).map_err(bad)?;
        let found = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::InvalidModelFile("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::FormatVersionMismatch {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let header: Header = serde_json::from_value(raw).map_err(bad)?;
        header.config.validate()?;

        let payload = &body[fixed + header_len..];
        let mut network = skeleton(&header.config);
        let names = network.param_names();
        if names.len() != header.tensors.len() {
            return Err(Error::InvalidModelFile(format!(
                "expected {} tensors, manifest lists {}",
                names.len(),
                header.tensors.len()
            )));
        }
        for ((name, param), entry) in names.iter().zip(network.params_mut()).zip(&header.tensors) {
            if &entry.name != name || entry.shape != param.shape() {
                return Err(Error::InvalidModelFile(format!(
                    "tensor {} {:?} does not match expected {name} {:?}",
                    entry.name,
                    entry.shape,
                    param.shape()
                )));
            }
            let w = entry.dtype.width();
            let bytes = payload
                .get(entry.offset..entry.offset + param.len() * w)
                .ok_or_else(|| Error::InvalidModelFile(format!("tensor {name} out of bounds")))?;
            for (v, chunk) in param.data_mut().iter_mut().zip(bytes.chunks_exact(w)) {
                *v = match entry.dtype {
                    Dtype::F64 => f64::from_le_bytes(chunk.try_into().expect("8 bytes")),
                    Dtype::F32 => f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64,
                };
            }
        }
        OriginModel::from_parts(header.config, header.taxonomy, network, header.provenance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save_as(path, Dtype::F64)
    }

    pub fn save_as(&self, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes(dtype)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Zero-filled network with the layer shapes `config` describes.
fn skeleton(config: &ModelConfig) -> Network {
    let mut input = config.input_channels;
    let mut lstm = Vec::new();
    for &c in &config.lstm_sizes {
        lstm.push(LstmLayer::zeroed(input, c));
        input = c;
    }
    Network {
        lstm,
        dense: vec![DenseLayer::zeroed(input, config.num_classes, Activation::Softmax)],
        dropout: config.dropout_rate,
    }
}

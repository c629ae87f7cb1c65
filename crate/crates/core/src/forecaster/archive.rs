//! Named-tensor model archive.
//!
//! Layout: the line `LSTMARCH1 <n>\n`, an `n`-byte JSON manifest (names,
//! shapes, byte offsets into the payload), then the payload as little-endian
//! `f32`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lstm::{Arch, LstmModel};
use crate::error::{Error, Result};

const MAGIC: &str = "LSTMARCH1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format: String,
    pub dtype: String,
    pub arch: Arch,
    pub dropout: f64,
    pub residual_sigma: f64,
    pub model_version: String,
    pub tensors: Vec<TensorEntry>,
}

fn shape_of(name: &str, rows: usize, cols: usize) -> Vec<usize> {
    if name.ends_with("bias") {
        vec![cols]
    } else {
        vec![rows, cols]
    }
}

/// Version tag: leading 16 hex digits of the payload's sha256.
pub fn payload_version(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))[..16].to_string()
}

pub fn encode(model: &LstmModel, residual_sigma: f64) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(model.arch.parameter_count() * 4);
    let mut tensors = Vec::new();
    for ((name, r, c), t) in model.arch.tensors().into_iter().zip(&model.params) {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: shape_of(name, r, c),
            offset: payload.len(),
        });
        for v in t.iter() {
            payload.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let manifest = ArchiveManifest {
        format: MAGIC.into(),
        dtype: "f32le".into(),
        arch: model.arch,
        dropout: model.dropout,
        residual_sigma,
        model_version: payload_version(&payload),
        tensors,
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = format!("{MAGIC} {}\n", json.len()).into_bytes();
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Archive(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<(LstmModel, ArchiveManifest)> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not text"))?;
    let len: usize = header
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| bad(format!("bad header {header:?}")))?;
    let body = &bytes[nl + 1..];
    if body.len() < len {
        return Err(bad("truncated manifest"));
    }
    let manifest: ArchiveManifest =
        serde_json::from_slice(&body[..len]).map_err(|e| bad(format!("manifest: {e}")))?;
    let payload = &body[len..];
    if payload_version(payload) != manifest.model_version {
        return Err(bad("payload digest does not match model_version"));
    }
    let mut model = LstmModel::zeros(manifest.arch, manifest.dropout);
    let expected = manifest.arch.tensors();
    if manifest.tensors.len() != expected.len() {
        return Err(bad("tensor count does not match architecture"));
    }
    for (idx, ((name, r, c), entry)) in expected.into_iter().zip(&manifest.tensors).enumerate() {
        if entry.name != name || entry.shape != shape_of(name, r, c) {
            return Err(bad(format!("tensor {} does not match architecture", entry.name)));
        }
        let end = entry.offset + r * c * 4;
        let raw = payload
            .get(entry.offset..end)
            .ok_or_else(|| bad(format!("tensor {name} out of bounds")))?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        model.params[idx] = Array2::from_shape_vec((r, c), values).map_err(|e| bad(e.to_string()))?;
    }
    if !model.all_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_of_quantized_model() {
        let mut m = LstmModel::init(Arch::tiny(), 0.2, 4);
        m.quantize_f32();
        let bytes = encode(&m, 0.0125).unwrap();
        assert!(bytes.starts_with(b"LSTMARCH1 "));
        let (back, manifest) = decode(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(manifest.residual_sigma, 0.0125);
        assert_eq!(manifest.tensors[2].shape, vec![16]);
        assert_eq!(manifest.tensors[1].offset, 16 * 14 * 4);
    }

    #[test]
    fn corruption_is_detected() {
        let m = LstmModel::init(Arch::tiny(), 0.2, 4);
        let mut bytes = encode(&m, 0.01).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(Error::Archive(_))));
        assert!(matches!(decode(b"NOPE 3\n{}"), Err(Error::Archive(_))));
    }
}

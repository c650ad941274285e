//! Checkpoint file: `"SKGCKPT1"`, a u32 LE header length, the JSON header,
//! then every parameter as little-endian f32 values in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GnnModel, ModelSpec};
use crate::autodiff::{Parameter, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SKGCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec: ModelSpec,
    pub layers: Vec<super::LayerConfig>,
    pub seed: u64,
    pub params: Vec<ParamEntry>,
    /// Free-form training metadata (task configuration and the like).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: GnnModel,
}

pub fn encode_checkpoint(model: &GnnModel, seed: u64, metadata: serde_json::Value) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        spec: model.spec().clone(),
        layers: model.layers().to_vec(),
        seed,
        params: model
            .parameters()
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
            })
            .collect(),
        metadata,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.parameters() {
        for &v in p.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let fmt = |offset: usize, message: &str| Error::Format {
        offset,
        message: message.to_string(),
    };
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(fmt(0, "not a checkpoint (bad magic)"));
    }
    let header_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let body = 12 + header_len;
    if bytes.len() < body {
        return Err(fmt(12, "truncated header"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[12..body]).map_err(|e| fmt(12, &e.to_string()))?;
    let mut pos = body;
    let mut params = Vec::with_capacity(header.params.len());
    for entry in &header.params {
        let len = entry.rows * entry.cols;
        if bytes.len() < pos + 4 * len {
            return Err(fmt(pos, &format!("truncated parameter {}", entry.name)));
        }
        let data = bytes[pos..pos + 4 * len]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        pos += 4 * len;
        params.push(Parameter::new(entry.name.clone(), Tensor::new(entry.rows, entry.cols, data)?));
    }
    if pos != bytes.len() {
        return Err(fmt(pos, "trailing bytes after parameters"));
    }
    let model = GnnModel::from_parameters(header.spec.clone(), params)?;
    if model.layers() != header.layers.as_slice() {
        return Err(fmt(12, "layer configs disagree with the model spec"));
    }
    Ok(Checkpoint { header, model })
}

pub fn write_checkpoint(path: &Path, model: &GnnModel, seed: u64, metadata: serde_json::Value) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, seed, metadata)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Head, LayerKind};

    #[test]
    fn round_trip_after_f32_rounding() {
        for kind in LayerKind::ALL {
            let spec = ModelSpec::new(kind, 5, Head::NodeClassifier { classes: 3 });
            let mut model = GnnModel::new(spec, 7).unwrap();
            model.round_to_f32();
            let bytes = encode_checkpoint(&model, 7, serde_json::json!({"task": "x"})).unwrap();
            let ck = decode_checkpoint(&bytes).unwrap();
            assert_eq!(ck.model, model);
            assert_eq!(ck.header.seed, 7);
            assert_eq!(ck.header.metadata["task"], "x");
            assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(decode_checkpoint(b"nope"), Err(Error::Format { offset: 0, .. })));
    }
}

//! Node feature matrices: seeded random features, and the binary embedding
//! file written by the offline exporter.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic  "SKGEMB01"          8 bytes
//! dim    u32
//! count  u32
//! count × { key_len u32, key UTF-8 bytes, dim × f32 }
//! ```

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;

pub const MAGIC: &[u8; 8] = b"SKGEMB01";
pub const DEFAULT_RANDOM_DIM: usize = 768;

/// Dense `n_nodes x dim` features; row `i` belongs to node id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Tensor);

impl FeatureMatrix {
    pub fn new(tensor: Tensor) -> Result<Self> {
        if !tensor.is_finite() {
            return Err(Error::Format {
                offset: 0,
                message: "feature matrix holds non-finite values".into(),
            });
        }
        Ok(Self(tensor))
    }

    pub fn n_nodes(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    /// Rows reordered so that old row `i` lands at `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        Self(self.0.select_rows(&inverse))
    }
}

/// I.i.d. standard-normal features from a seeded generator.
pub fn random_features(n_nodes: usize, dim: usize, seed: u64) -> Result<FeatureMatrix> {
    if dim == 0 {
        return Err(Error::Config("feature dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(FeatureMatrix(Tensor::randn(n_nodes, dim, &mut rng)))
}

/// Parsed embedding file: keyed f32 vectors of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub records: Vec<(String, Vec<f32>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Error,
    ZeroFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadReport {
    pub matched: usize,
    pub zero_filled: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                message: format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl EmbeddingFile {
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8, "magic")? != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected SKGEMB01".into(),
            });
        }
        let dim = cur.u32("dim")? as usize;
        let count = cur.u32("count")? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 20));
        let mut seen = HashSet::new();
        for _ in 0..count {
            let start = cur.pos;
            let key_len = cur.u32("key length")? as usize;
            let key_bytes = cur.take(key_len, "key")?;
            let key = std::str::from_utf8(key_bytes)
                .map_err(|e| Error::Format {
                    offset: start + 4,
                    message: format!("key is not UTF-8: {e}"),
                })?
                .to_string();
            let vec_start = cur.pos;
            let raw = cur.take(dim * 4, "vector")?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(j) = vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::Format {
                    offset: vec_start + 4 * j,
                    message: format!("non-finite value in vector for key {key:?}"),
                });
            }
            if !seen.insert(key.clone()) {
                return Err(Error::Format {
                    offset: start,
                    message: format!("duplicate key {key:?}"),
                });
            }
            records.push((key, vector));
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format {
                offset: cur.pos,
                message: format!("{} trailing bytes", bytes.len() - cur.pos),
            });
        }
        Ok(Self { dim, records })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut seen = HashSet::new();
        let body: usize = self.records.iter().map(|(k, _)| 4 + k.len() + 4 * self.dim).sum();
        let mut out = Vec::with_capacity(16 + body);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (key, vector) in &self.records {
            if !seen.insert(key.as_str()) {
                return Err(Error::Format {
                    offset: out.len(),
                    message: format!("duplicate key {key:?}"),
                });
            }
            if vector.len() != self.dim {
                return Err(Error::Format {
                    offset: out.len(),
                    message: format!("vector for {key:?} has {} values, dim is {}", vector.len(), self.dim),
                });
            }
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Reads the JSONL debug form, one `{"key": .., "vector": [..]}` per line.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            key: String,
            vector: Vec<f32>,
        }
        let mut records: Vec<(String, Vec<f32>)> = Vec::new();
        let mut seen = HashSet::new();
        let mut offset = 0;
        let mut dim = None;
        for line in reader.lines() {
            let line = line?;
            let here = offset;
            offset += line.len() + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Format {
                offset: here,
                message: e.to_string(),
            })?;
            let d = *dim.get_or_insert(parsed.vector.len());
            if parsed.vector.len() != d || parsed.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format {
                    offset: here,
                    message: format!("bad vector for key {:?}", parsed.key),
                });
            }
            if !seen.insert(parsed.key.clone()) {
                return Err(Error::Format {
                    offset: here,
                    message: format!("duplicate key {:?}", parsed.key),
                });
            }
            records.push((parsed.key, parsed.vector));
        }
        Ok(Self {
            dim: dim.unwrap_or(0),
            records,
        })
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for (key, vector) in &self.records {
            serde_json::to_writer(&mut w, &serde_json::json!({ "key": key, "vector": vector }))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Aligns file vectors to graph nodes by key.
pub fn load_features(
    file: &EmbeddingFile,
    graph: &KnowledgeGraph,
    policy: MissingPolicy,
) -> Result<(FeatureMatrix, LoadReport)> {
    if file.dim == 0 {
        return Err(Error::Format {
            offset: 8,
            message: "dimension 0".into(),
        });
    }
    let by_key: HashMap<&str, &[f32]> = file
        .records
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_slice()))
        .collect();
    let mut t = Tensor::zeros(graph.n_nodes(), file.dim);
    let mut report = LoadReport::default();
    for node in graph.nodes() {
        match by_key.get(node.key.as_str()) {
            Some(v) => {
                for (d, s) in t.row_mut(node.node_id).iter_mut().zip(v.iter()) {
                    *d = f64::from(*s);
                }
                report.matched += 1;
            }
            None => match policy {
                MissingPolicy::Error => return Err(Error::Lookup(node.key.clone())),
                MissingPolicy::ZeroFill => report.zero_filled += 1,
            },
        }
    }
    if report.zero_filled > 0 {
        log::warn!("{} nodes had no embedding and were zero-filled", report.zero_filled);
    }
    Ok((FeatureMatrix::new(t)?, report))
}

/// Narrows rows to f32 and pairs them with keys.
pub fn features_to_file(matrix: &FeatureMatrix, keys: &[String]) -> Result<EmbeddingFile> {
    if keys.len() != matrix.n_nodes() {
        return Err(Error::Format {
            offset: 0,
            message: format!("{} keys for {} rows", keys.len(), matrix.n_nodes()),
        });
    }
    let records = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), matrix.row(i).iter().map(|&x| x as f32).collect()))
        .collect();
    Ok(EmbeddingFile {
        dim: matrix.dim(),
        records,
    })
}

pub fn write_features(matrix: &FeatureMatrix, keys: &[String], path: &Path) -> Result<EmbeddingFile> {
    let file = features_to_file(matrix, keys)?;
    std::fs::write(path, file.encode()?)?;
    Ok(file)
}

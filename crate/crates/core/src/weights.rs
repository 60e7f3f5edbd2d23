//! Flat binary weight blob: magic, little-endian `u64` header length, a JSON
//! header listing tensor names and shapes, then every tensor's `f64` values in
//! little-endian order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"UNMIXXW\x01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BlobHeader {
    format: String,
    version: u32,
    seed: u64,
    #[serde(default)]
    meta: serde_json::Value,
    tensors: Vec<TensorHeader>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightBlob {
    pub seed: u64,
    /// Free-form metadata, e.g. the model configuration.
    pub meta: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl WeightBlob {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = BlobHeader {
            format: "unmixx-weights".into(),
            version: 1,
            seed: self.seed,
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorHeader {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::Weights(format!("tensor {} shape/data mismatch", t.name)));
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Weights("bad magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16 + header_len)
            .ok_or_else(|| Error::Weights("truncated header".into()))?;
        let header: BlobHeader = serde_json::from_slice(body)?;
        if header.format != "unmixx-weights" || header.version != 1 {
            return Err(Error::Weights(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let mut data = bytes[16 + header_len..].chunks_exact(8);
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for th in header.tensors {
            let count: usize = th.shape.iter().product();
            let values: Vec<f64> = data
                .by_ref()
                .take(count)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if values.len() != count {
                return Err(Error::Weights(format!("truncated data for {}", th.name)));
            }
            tensors.push(NamedTensor {
                name: th.name,
                shape: th.shape,
                data: values,
            });
        }
        if data.next().is_some() || !data.remainder().is_empty() {
            return Err(Error::Weights("trailing bytes after last tensor".into()));
        }
        Ok(Self {
            seed: header.seed,
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip_and_corruption() {
        let blob = WeightBlob {
            seed: 7,
            meta: serde_json::json!({"features": 4}),
            tensors: vec![
                NamedTensor {
                    name: "a".into(),
                    shape: vec![2, 2],
                    data: vec![1.0, -2.5, 3.25, f64::MIN_POSITIVE],
                },
                NamedTensor {
                    name: "b".into(),
                    shape: vec![1],
                    data: vec![0.1],
                },
            ],
        };
        let bytes = blob.to_bytes().unwrap();
        assert_eq!(WeightBlob::from_bytes(&bytes).unwrap(), blob);
        assert!(WeightBlob::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 8]);
        assert!(WeightBlob::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(WeightBlob::from_bytes(&bad).is_err());
    }
}

//! Self-describing binary checkpoints.
//!
//! Layout: the 8-byte magic `DRVGCKPT`, a little-endian `u32` format
//! version, a little-endian `u64` header length, the UTF-8 JSON header, and
//! then every parameter's values as little-endian `f64` in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingSource;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::tensor::Tensor;
use crate::vocab::{Alphabet, TagSet};

const MAGIC: &[u8; 8] = b"DRVGCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Training provenance stored next to the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub epoch: Option<usize>,
    pub dev_accuracy: Option<f64>,
    pub embedding: Option<EmbeddingSource>,
    pub embedding_dim: Option<usize>,
    /// Caller-defined run configuration.
    #[serde(default)]
    pub run: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    alphabet: Alphabet,
    pos_tags: TagSet,
    params: Vec<ParamInfo>,
    metadata: Metadata,
}

pub fn to_bytes(model: &Model, metadata: &Metadata) -> Vec<u8> {
    let header = Header {
        config: model.config().clone(),
        alphabet: model.alphabet().clone(),
        pos_tags: model.pos_tags().clone(),
        params: model
            .params()
            .iter()
            .map(|p| ParamInfo {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let mut out = Vec::with_capacity(json.len() + 8 * model.params().num_scalars() + 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params().iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint(format!("truncated while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<(Model, Metadata)> {
    let b = &mut bytes;
    if take(b, 8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(b, 4, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(take(b, 8, "header length")?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| Error::Checkpoint("header too large".into()))?;
    let header: Header = serde_json::from_slice(take(b, len, "header")?)
        .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;

    let mut values = Vec::with_capacity(header.params.len());
    for info in &header.params {
        let n: usize = info.shape.iter().product();
        let raw = take(b, n * 8, &format!("parameter `{}`", info.name))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        values.push((info.name.clone(), Tensor::new(info.shape.clone(), data)?));
    }
    if !b.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", b.len())));
    }
    let mut model = Model::new(header.config, header.alphabet, header.pos_tags, 0)?;
    model.params_mut().load_values(values)?;
    Ok((model, header.metadata))
}

pub fn save(path: &Path, model: &Model, metadata: &Metadata) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&to_bytes(model, metadata))
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(Model, Metadata)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}

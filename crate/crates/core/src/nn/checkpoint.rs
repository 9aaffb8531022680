use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"REVOCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Named networks stored in one binary file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub networks: Vec<Mlp>,
}

/// Sidecar text manifest written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub updates: u64,
    pub mode: String,
    pub config_hash: String,
    pub networks: Vec<String>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

pub fn encode(checkpoint: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(checkpoint.networks.len() as u32).to_le_bytes());
    for net in &checkpoint.networks {
        let sizes = net.sizes();
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        out.push(net.output.code());
        for s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
    }
    for net in &checkpoint.networks {
        for layer in &net.layers {
            for v in layer.weights.iter().chain(layer.biases.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let count = r.u32()? as usize;
    let mut headers = Vec::new();
    for _ in 0..count {
        let n = r.u32()? as usize;
        let activation = Activation::from_code(r.u8()?)
            .ok_or_else(|| Error::Checkpoint("unknown output activation".into()))?;
        if n < 2 {
            return Err(Error::Checkpoint("network with fewer than two layer sizes".into()));
        }
        let sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        headers.push((sizes, activation));
    }
    let mut networks = Vec::with_capacity(count);
    for (sizes, activation) in headers {
        let mut layers = Vec::new();
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let needed = inputs
                .checked_mul(outputs)
                .and_then(|n| n.checked_add(outputs))
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::Checkpoint("layer size overflow".into()))?;
            if needed > bytes.len() - r.pos {
                return Err(Error::Checkpoint("truncated checkpoint".into()));
            }
            let weights = (0..inputs * outputs).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let biases = (0..outputs).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((outputs, inputs), weights).expect("sized above"),
                biases: Array1::from(biases),
            });
        }
        let net = Mlp::from_layers(layers, activation)?;
        if !net.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        networks.push(net);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(Checkpoint { networks })
}

/// Writes the binary file and its manifest.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint, manifest: &CheckpointManifest) -> Result<()> {
    if manifest.networks.len() != checkpoint.networks.len() {
        return Err(Error::Checkpoint("manifest names differ from network count".into()));
    }
    let mut file = BufWriter::new(fs::File::create(path)?);
    file.write_all(&encode(checkpoint))?;
    file.flush()?;
    let text = toml::to_string(manifest).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(manifest_path(path), text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, CheckpointManifest)> {
    let bytes = fs::read(path)?;
    let checkpoint = decode(&bytes)?;
    let text = fs::read_to_string(manifest_path(path))?;
    let manifest: CheckpointManifest =
        toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    if manifest.networks.len() != checkpoint.networks.len() {
        return Err(Error::Checkpoint("manifest names differ from network count".into()));
    }
    Ok((checkpoint, manifest))
}

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic prefix of checkpoint archives.
pub const MAGIC_CHECKPOINT: &[u8; 5] = b"ENCK1";
const VERSION: u32 = 1;

/// A trained model archive: a JSON manifest describing what was trained plus
/// every named parameter tensor in f64.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Model family, e.g. "vae", "diffusion", "genre", "context".
    pub kind: String,
    /// Free-form manifest: dims, normalization stats, seeds, data hashes.
    pub meta: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    kind: String,
    meta: serde_json::Value,
}

fn bad(path: &Path, detail: &str) -> Error {
    Error::FormatInvalid(format!("{}: {detail}", path.display()))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let manifest = serde_json::to_vec(&Manifest {
        version: VERSION,
        kind: ckpt.kind.clone(),
        meta: ckpt.meta.clone(),
    })
    .expect("manifest serializes");
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC_CHECKPOINT)?;
    w.write_all(&(manifest.len() as u32).to_le_bytes())?;
    w.write_all(&manifest)?;
    w.write_all(&(ckpt.tensors.len() as u32).to_le_bytes())?;
    for (name, tensor) in &ckpt.tensors {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        let dims = tensor.dims();
        w.write_all(&[dims.len() as u8])?;
        for &d in dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let flat = tensor
            .to_dtype(DType::F64)?
            .flatten_all()?
            .to_vec1::<f64>()?;
        for v in flat {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| bad(path, "truncated header"))?;
    if &magic != MAGIC_CHECKPOINT {
        return Err(bad(path, "not a checkpoint archive"));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)
        .map_err(|_| bad(path, "truncated manifest length"))?;
    let mut manifest = vec![0u8; u32::from_le_bytes(u32b) as usize];
    r.read_exact(&mut manifest)
        .map_err(|_| bad(path, "truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(&manifest)
        .map_err(|e| bad(path, &format!("manifest: {e}")))?;
    if manifest.version != VERSION {
        return Err(Error::CheckpointIncompatible(format!(
            "version {} (reader supports {VERSION})",
            manifest.version
        )));
    }
    r.read_exact(&mut u32b)
        .map_err(|_| bad(path, "truncated tensor count"))?;
    let n_tensors = u32::from_le_bytes(u32b) as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..n_tensors {
        let mut u16b = [0u8; 2];
        r.read_exact(&mut u16b)
            .map_err(|_| bad(path, "truncated tensor name"))?;
        let mut name = vec![0u8; u16::from_le_bytes(u16b) as usize];
        r.read_exact(&mut name)
            .map_err(|_| bad(path, "truncated tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| bad(path, "tensor name not utf-8"))?;
        let mut ndim = [0u8; 1];
        r.read_exact(&mut ndim)
            .map_err(|_| bad(path, "truncated tensor rank"))?;
        let mut dims = Vec::with_capacity(ndim[0] as usize);
        for _ in 0..ndim[0] {
            r.read_exact(&mut u32b)
                .map_err(|_| bad(path, "truncated tensor dims"))?;
            dims.push(u32::from_le_bytes(u32b) as usize);
        }
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut f64b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut f64b)
                .map_err(|_| bad(path, &format!("truncated tensor {name}")))?;
            data.push(f64::from_le_bytes(f64b));
        }
        tensors.insert(name, Tensor::from_vec(data, dims.as_slice(), &Device::Cpu)?);
    }
    Ok(Checkpoint {
        kind: manifest.kind,
        meta: manifest.meta,
        tensors,
    })
}

/// Subset of `tensors` whose names start with `prefix` (for partial loads
/// such as decoder-only decoding).
pub fn filter_prefix(
    tensors: &BTreeMap<String, Tensor>,
    prefix: &str,
) -> BTreeMap<String, Tensor> {
    tensors
        .iter()
        .filter(|(k, _)| k.starts_with(prefix))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut tensors = BTreeMap::new();
        tensors.insert(
            "enc.w".into(),
            Tensor::from_vec(vec![1.5f64, -2.25, 0.0, 1e-300], &[2, 2], &Device::Cpu).unwrap(),
        );
        tensors.insert(
            "dec.b".into(),
            Tensor::from_vec(vec![3.0f64], &[1], &Device::Cpu).unwrap(),
        );
        Checkpoint {
            kind: "vae".into(),
            meta: serde_json::json!({"n_z": 8, "norm_mean": [0.0, 1.0]}),
            tensors,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.enck");
        save_checkpoint(&path, &sample()).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.kind, "vae");
        assert_eq!(back.meta["n_z"], 8);
        assert_eq!(back.tensors.len(), 2);
        assert_eq!(back.tensors["enc.w"].dims(), &[2, 2]);
        assert_eq!(
            back.tensors["enc.w"].to_vec2::<f64>().unwrap(),
            vec![vec![1.5, -2.25], vec![0.0, 1e-300]]
        );
    }

    #[test]
    fn truncated_archive_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.enck");
        save_checkpoint(&path, &sample()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::FormatInvalid(_))
        ));
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.enck");
        std::fs::write(&path, b"NOPE!rest").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::FormatInvalid(_))
        ));
    }

    #[test]
    fn prefix_filter_selects_subtree() {
        let ckpt = sample();
        let dec = filter_prefix(&ckpt.tensors, "dec.");
        assert_eq!(dec.len(), 1);
        assert!(dec.contains_key("dec.b"));
    }
}

//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! 0..8     magic "VIBWALK1"
//! 8..16    u64 header length H
//! 16..16+H JSON header (config, labels, metrics, tensor table)
//! rest     f32 values, tensors back to back in table order
//! ```
//!
//! Each table entry gives the tensor name, shape, kind and element offset
//! into the f32 block.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::layers::Visit;
use super::network::{Network, NetworkConfig};
use super::ModelError;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VIBWALK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Param,
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: TensorKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: NetworkConfig,
    pub labels: Vec<String>,
    #[serde(default)]
    pub metrics: serde_json::Value,
    /// Free-form training context (modality, split, seeds).
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub header: CheckpointHeader,
    pub network: Network<T>,
}

fn collect<T: Scalar>(net: &mut Network<T>) -> (Vec<TensorEntry>, Vec<f32>) {
    let mut table = Vec::new();
    let mut values = Vec::new();
    net.visit_params(&mut |p| {
        table.push(TensorEntry { name: p.name.clone(), shape: p.shape.clone(), kind: TensorKind::Param, offset: values.len(), len: p.len() });
        values.extend(p.value.iter().map(|v| v.as_f32()));
    });
    net.visit_buffers(&mut |b| {
        table.push(TensorEntry { name: b.name.clone(), shape: vec![b.value.len()], kind: TensorKind::Buffer, offset: values.len(), len: b.value.len() });
        values.extend(b.value.iter().map(|v| v.as_f32()));
    });
    (table, values)
}

pub fn write_checkpoint<T: Scalar, W: Write>(
    mut w: W,
    net: &mut Network<T>,
    labels: &[String],
    metrics: serde_json::Value,
    meta: serde_json::Value,
) -> Result<(), ModelError> {
    let (tensors, values) = collect(net);
    let header = CheckpointHeader { config: net.cfg.clone(), labels: labels.to_vec(), metrics, meta, tensors };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u64::<LittleEndian>(json.len() as u64)?;
    w.write_all(&json)?;
    for v in values {
        w.write_f32::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<Checkpoint<T>, ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let len = r.read_u64::<LittleEndian>()? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let total: usize = header.tensors.iter().map(|t| t.len).sum();
    let mut values = vec![0f32; total];
    r.read_f32_into::<LittleEndian>(&mut values)?;

    let mut net = Network::<T>::new(header.config.clone())?;
    let mut missing = Vec::new();
    let find = |name: &str, kind: TensorKind| header.tensors.iter().find(|t| t.name == name && t.kind == kind);
    let mut load = |name: &str, kind: TensorKind, dst: &mut Vec<T>| match find(name, kind) {
        Some(t) if t.len == dst.len() => {
            for (d, s) in dst.iter_mut().zip(&values[t.offset..t.offset + t.len]) {
                *d = T::lit(*s as f64);
            }
        }
        _ => missing.push(name.to_string()),
    };
    net.visit_params(&mut |p| load(&p.name, TensorKind::Param, &mut p.value));
    net.visit_buffers(&mut |b| load(&b.name, TensorKind::Buffer, &mut b.value));
    if !missing.is_empty() {
        return Err(ModelError::Checkpoint(format!("missing or mis-sized tensors: {}", missing.join(", "))));
    }
    Ok(Checkpoint { header, network: net })
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    net: &mut Network<T>,
    labels: &[String],
    metrics: serde_json::Value,
    meta: serde_json::Value,
) -> Result<(), ModelError> {
    write_checkpoint(BufWriter::new(File::create(path)?), net, labels, metrics, meta)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, ModelError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::layers::Mode;
    use crate::model::network::{AuxConfig, Batch};

    #[test]
    fn round_trip_preserves_outputs() {
        let cfg = NetworkConfig {
            block_channels: vec![4, 6],
            input_shape: (1, 9, 9),
            n_classes: 3,
            aux: Some(AuxConfig { in_dim: 20, hidden: 8, layers: 2 }),
            seed: 9,
        };
        let mut net = Network::<f32>::new(cfg).unwrap();
        let batch = Batch { features: (0..162).map(|i| (i as f32 * 0.3).cos()).collect(), aux: Some((0..40).map(|i| i as f32).collect()), len: 2 };
        // move the running statistics off their defaults
        net.forward(&batch, Mode::Train).unwrap();
        let before = net.forward(&batch, Mode::Eval).unwrap();
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &mut net, &labels, serde_json::json!({"macro_f1": 0.5}), serde_json::Value::Null).unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let mut ck = read_checkpoint::<f32, _>(bytes.as_slice()).unwrap();
        assert_eq!(ck.header.labels, labels);
        let after = ck.network.forward(&batch, Mode::Eval).unwrap();
        assert_eq!(before.data, after.data);

        let mut again = Vec::new();
        write_checkpoint(&mut again, &mut ck.network, &labels, serde_json::json!({"macro_f1": 0.5}), serde_json::Value::Null).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_bad_magic() {
        let err = read_checkpoint::<f32, _>(&b"NOTAMODEL0000000"[..]).unwrap_err();
        assert!(matches!(err, ModelError::Checkpoint(_)));
    }
}

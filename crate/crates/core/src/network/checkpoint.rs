//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "EQPHCKPT"
//! version      u32       1
//! meta_len     u64
//! meta         meta_len bytes of UTF-8 JSON: {"spec": ModelSpec, "hopfield": HopfieldConfig}
//! n_tensors    u32
//! per tensor:
//!   name_len   u16
//!   name       UTF-8, e.g. "proj0", "fc1"
//!   ndim       u8        always 2
//!   dims       ndim × u64
//!   data       prod(dims) × f64, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ConnectionId, ModelSpec, Theta};
use crate::error::{Error, Result};
use crate::hopfield::HopfieldConfig;

pub const MAGIC: &[u8; 8] = b"EQPHCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub hopfield: HopfieldConfig,
    pub theta: Theta,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    spec: ModelSpec,
    hopfield: HopfieldConfig,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.theta.check_shapes(&self.spec)?;
        let meta = serde_json::to_vec(&Meta {
            spec: self.spec.clone(),
            hopfield: self.hopfield,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        let tensors: Vec<_> = self.theta.iter().collect();
        w.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for (id, t) in tensors {
            let name = id.to_string();
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[2u8])?;
            for dim in [t.nrows(), t.ncols()] {
                w.write_all(&(dim as u64).to_le_bytes())?;
            }
            for v in t.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = read_u64(&mut r)? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let meta: Meta = serde_json::from_slice(&meta).map_err(|e| Error::Format(e.to_string()))?;
        meta.spec.validate()?;

        let mut theta = Theta::zeros(&meta.spec);
        let count = read_u32(&mut r)? as usize;
        if count != meta.spec.num_connections() {
            return Err(Error::Format(format!(
                "checkpoint holds {count} tensors, model has {} connections",
                meta.spec.num_connections()
            )));
        }
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
            let id: ConnectionId = name.parse()?;
            let mut ndim = [0u8; 1];
            r.read_exact(&mut ndim)?;
            if ndim[0] != 2 {
                return Err(Error::Format(format!("tensor {name} has {} dims, expected 2", ndim[0])));
            }
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let slot = theta
                .get_mut(id)
                .ok_or_else(|| Error::Format(format!("unknown tensor {name}")))?;
            if slot.dim() != (rows, cols) {
                return Err(Error::Format(format!(
                    "tensor {name} has shape ({rows}, {cols}), model expects {:?}",
                    slot.dim()
                )));
            }
            let mut buf = vec![0u8; rows * cols * 8];
            r.read_exact(&mut buf)?;
            let data = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            *slot = Array2::from_shape_vec((rows, cols), data).expect("shape checked above");
        }
        Ok(Self {
            spec: meta.spec,
            hopfield: meta.hopfield,
            theta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

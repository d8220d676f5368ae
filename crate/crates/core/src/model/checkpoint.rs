//! Binary checkpoint format.
//!
//! ```text
//! magic       8 bytes   "AILSRCKP"
//! version     u32 LE
//! header_len  u32 LE
//! header      JSON {"spec": ModelSpec, "meta": CheckpointMeta}
//! n_arrays    u32 LE
//! arrays      n_arrays × (len: u64 LE, len × f64 LE)   layer order: w0 b0 w1 b1 ...
//! has_opt     u8
//! optimizer   (only if has_opt == 1) lr, momentum, weight_decay, clip as f64 LE,
//!             then n_arrays u32 LE and velocity arrays encoded as above
//! checksum    32 bytes SHA-256 of everything before it
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Network, KERNEL};
use crate::numcore::{ConvParams, OptimizerState, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"AILSRCKP";
const CHECKSUM_LEN: usize = 32;

/// Training provenance stored next to the parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub scheme: String,
    pub seed: u64,
    /// Global epoch counter at the time of saving.
    pub epoch: u64,
    /// AIL round (0 for the teacher-initialized phase and for other schemes).
    pub round: u32,
    pub config_hash: String,
    pub scale: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub optimizer: Option<OptimizerState>,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    meta: CheckpointMeta,
}

fn put_array(buf: &mut Vec<u8>, values: &[f64]) {
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn new(network: Network, meta: CheckpointMeta) -> Self {
        Checkpoint {
            network,
            optimizer: None,
            meta,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let header = serde_json::to_vec(&Header {
            spec: self.network.spec().clone(),
            meta: self.meta.clone(),
        })
        .expect("header serializes");
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);

        let params = self.network.param_slices();
        buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for p in params {
            put_array(&mut buf, p);
        }

        match &self.optimizer {
            None => buf.push(0),
            Some(opt) => {
                buf.push(1);
                for v in [opt.lr, opt.momentum, opt.weight_decay, opt.clip] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                buf.extend_from_slice(&(opt.velocity.len() as u32).to_le_bytes());
                for v in &opt.velocity {
                    put_array(&mut buf, v);
                }
            }
        }

        let checksum = Sha256::digest(&buf);
        buf.extend_from_slice(&checksum);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::CorruptCheckpoint("missing magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 12 + CHECKSUM_LEN {
            return Err(Error::CorruptCheckpoint("file too short".into()));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
        }

        let mut r = Reader { buf: body, pos: 12 };
        let header_len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;

        let n_arrays = r.u32()? as usize;
        let expected = header.spec.layer_channels();
        if n_arrays != 2 * expected.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{n_arrays} parameter arrays, spec needs {}",
                2 * expected.len()
            )));
        }
        let mut layers = Vec::with_capacity(expected.len());
        for &(o, i) in &expected {
            let weights = r.array()?;
            let biases = r.array()?;
            let weights = Tensor::from_vec([o, i, KERNEL, KERNEL], weights)
                .map_err(|_| Error::CorruptCheckpoint("weight array has wrong length".into()))?;
            if biases.len() != o {
                return Err(Error::CorruptCheckpoint(
                    "bias array has wrong length".into(),
                ));
            }
            layers.push(ConvParams { weights, biases });
        }
        let network = Network::from_layers(header.spec, layers)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;

        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let lr = r.f64()?;
                let momentum = r.f64()?;
                let weight_decay = r.f64()?;
                let clip = r.f64()?;
                let n = r.u32()? as usize;
                let velocity = (0..n).map(|_| r.array()).collect::<Result<Vec<_>>>()?;
                Some(OptimizerState {
                    velocity,
                    momentum,
                    weight_decay,
                    clip,
                    lr,
                })
            }
            other => {
                return Err(Error::CorruptCheckpoint(format!(
                    "bad optimizer flag {other}"
                )))
            }
        };
        if r.pos != body.len() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }

        Ok(Checkpoint {
            network,
            optimizer,
            meta: header.meta,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn array(&mut self) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        let raw = self.take(
            len.checked_mul(8)
                .ok_or_else(|| Error::CorruptCheckpoint("array too long".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

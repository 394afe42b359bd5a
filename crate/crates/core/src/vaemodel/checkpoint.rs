//! Binary model checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        8 bytes   "RVAECKPT"
//! version      u32       1
//! input_dim    u32
//! hidden_dim   u32
//! latent_dim   u32
//! obs_model    u8        0 = bernoulli, 1 = gaussian
//! divergence   u8        0 = standard, 1 = beta
//! beta         f64       0 for standard
//! sigma        f64
//! n_tensors    u32       10
//! per tensor:  rank u32, rank × dim u32, product(dims) × f64
//! ```
//!
//! Tensors appear in [`PARAM_NAMES`](super::PARAM_NAMES) order. Floats are
//! stored as raw bit patterns, so a write/read cycle is exact.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Arch, ObsModel, VaeParams};
use crate::diffcore::Tensor;
use crate::divergences::{Divergence, LossSpec};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RVAECKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters plus the loss they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: VaeParams,
    pub loss: LossSpec,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let arch = self.params.arch;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
        for dim in [arch.input_dim, arch.hidden_dim, arch.latent_dim] {
            w.write_u32::<LittleEndian>(dim as u32)?;
        }
        w.write_u8(match arch.obs_model {
            ObsModel::Bernoulli => 0,
            ObsModel::Gaussian => 1,
        })?;
        let (tag, beta) = match self.loss.divergence {
            Divergence::Standard => (0, 0.0),
            Divergence::Beta(b) => (1, b),
        };
        w.write_u8(tag)?;
        w.write_f64::<LittleEndian>(beta)?;
        w.write_f64::<LittleEndian>(self.loss.sigma)?;
        let tensors = self.params.tensors();
        w.write_u32::<LittleEndian>(tensors.len() as u32)?;
        for t in tensors {
            w.write_u32::<LittleEndian>(t.rank() as u32)?;
            for &d in t.shape() {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in t.data() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let trunc = |_| Error::Checkpoint("file is truncated".into());

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(trunc)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not an rvae checkpoint (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(trunc)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})"
            )));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        }
        let obs_model = match r.read_u8().map_err(trunc)? {
            0 => ObsModel::Bernoulli,
            1 => ObsModel::Gaussian,
            other => return Err(Error::Checkpoint(format!("unknown observation model tag {other}"))),
        };
        let arch = Arch::new(dims[0], dims[1], dims[2], obs_model)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let tag = r.read_u8().map_err(trunc)?;
        let beta = r.read_f64::<LittleEndian>().map_err(trunc)?;
        let sigma = r.read_f64::<LittleEndian>().map_err(trunc)?;
        let divergence = match tag {
            0 => Divergence::Standard,
            1 => Divergence::Beta(beta),
            other => return Err(Error::Checkpoint(format!("unknown divergence tag {other}"))),
        };
        let loss = LossSpec::new(obs_model, divergence, sigma).map_err(|e| Error::Checkpoint(e.to_string()))?;

        let count = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        if count != 10 {
            return Err(Error::Checkpoint(format!("expected 10 tensors, found {count}")));
        }
        let shapes = arch.shapes();
        let mut tensors = Vec::with_capacity(count);
        for want in &shapes {
            let rank = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
            if rank != want.len() {
                return Err(Error::Checkpoint(format!("tensor rank {rank}, expected {}", want.len())));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u32::<LittleEndian>().map_err(trunc)? as usize);
            }
            if &shape != want {
                return Err(Error::Checkpoint(format!("tensor shape {shape:?}, expected {want:?}")));
            }
            let n: usize = shape.iter().product();
            let mut data = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut data).map_err(trunc)?;
            tensors.push(Tensor::new(&shape, data)?);
        }
        if (r.position() as usize) != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        let tensors: [Tensor; 10] = tensors.try_into().expect("ten tensors read");
        let params = VaeParams::from_tensors(arch, tensors).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self { params, loss })
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

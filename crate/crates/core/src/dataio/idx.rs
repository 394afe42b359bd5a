//! IDX containers as used by the MNIST family.
//!
//! Big-endian: a `u32` magic (`0x00000801` for rank-1 `u8` labels,
//! `0x00000803` for rank-3 `u8` images), one `u32` per dimension, then the
//! raw bytes.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::diffcore::Tensor;
use crate::{Error, Result};

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("bad IDX magic 0x{0:08x} (expected 0x00000801 or 0x00000803)")]
    BadMagic(u32),
    #[error("IDX data truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("IDX dimensions {0:?} overflow the addressable size")]
    DimensionOverflow(Vec<u32>),
    #[error("IDX file has rank {found}, expected {expected}")]
    Rank { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxData {
    pub dims: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl IdxData {
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Rank-3 images as an `N × (rows·cols)` tensor scaled to `[0, 1]`.
    pub fn to_images(&self) -> Result<Tensor, IdxError> {
        if self.rank() != 3 {
            return Err(IdxError::Rank { expected: 3, found: self.rank() });
        }
        let n = self.dims[0];
        let d = self.dims[1] * self.dims[2];
        let data = self.bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Ok(Tensor::matrix(n, d, data).expect("payload length checked on parse"))
    }

    pub fn to_labels(&self) -> Result<Vec<u32>, IdxError> {
        if self.rank() != 1 {
            return Err(IdxError::Rank { expected: 1, found: self.rank() });
        }
        Ok(self.bytes.iter().map(|&b| u32::from(b)).collect())
    }
}

pub fn parse_idx(buf: &[u8]) -> Result<IdxData, IdxError> {
    let word = |at: usize| -> Result<u32, IdxError> {
        buf.get(at..at + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(IdxError::Truncated {
                expected: at + 4,
                actual: buf.len(),
            })
    };
    let magic = word(0)?;
    let rank = match magic {
        IDX_LABELS_MAGIC => 1,
        IDX_IMAGES_MAGIC => 3,
        other => return Err(IdxError::BadMagic(other)),
    };
    let raw: Vec<u32> = (0..rank).map(|i| word(4 + 4 * i)).collect::<Result<_, _>>()?;
    let overflow = || IdxError::DimensionOverflow(raw.clone());
    let payload = raw
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
        .ok_or_else(overflow)?;
    let header = 4 + 4 * rank;
    let expected = header.checked_add(payload).ok_or_else(overflow)?;
    if buf.len() < expected {
        return Err(IdxError::Truncated {
            expected,
            actual: buf.len(),
        });
    }
    Ok(IdxData {
        dims: raw.iter().map(|&d| d as usize).collect(),
        bytes: buf[header..expected].to_vec(),
    })
}

pub fn encode_idx(data: &IdxData) -> Result<Vec<u8>, IdxError> {
    let magic = match data.rank() {
        1 => IDX_LABELS_MAGIC,
        3 => IDX_IMAGES_MAGIC,
        r => return Err(IdxError::Rank { expected: 3, found: r }),
    };
    let dims: Vec<u32> = data
        .dims
        .iter()
        .map(|&d| u32::try_from(d))
        .collect::<Result<_, _>>()
        .map_err(|_| IdxError::DimensionOverflow(Vec::new()))?;
    let payload: usize = data.dims.iter().product();
    if payload != data.bytes.len() {
        return Err(IdxError::Truncated {
            expected: payload,
            actual: data.bytes.len(),
        });
    }
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + payload);
    out.extend_from_slice(&magic.to_be_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&data.bytes);
    Ok(out)
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_idx(&buf)?)
}

pub fn write_idx(path: impl AsRef<Path>, data: &IdxData) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_idx(data)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Quantizes `[0, 1]` pixels to bytes (`round(255·v)`).
pub fn images_to_idx(images: &Tensor, rows: usize, cols: usize) -> IdxData {
    debug_assert_eq!(rows * cols, images.cols());
    IdxData {
        dims: vec![images.rows(), rows, cols],
        bytes: images
            .data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_built_image_file() {
        let mut buf = Vec::new();
        for w in [0x0000_0803u32, 1, 2, 2] {
            buf.extend_from_slice(&w.to_be_bytes());
        }
        buf.extend_from_slice(&[0, 255, 0, 255]);
        let idx = parse_idx(&buf).unwrap();
        assert_eq!(idx.dims, vec![1, 2, 2]);
        assert_eq!(idx.to_images().unwrap().data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn labels_round_trip() {
        let idx = IdxData { dims: vec![3], bytes: vec![7, 2, 1] };
        let back = parse_idx(&encode_idx(&idx).unwrap()).unwrap();
        assert_eq!(back.to_labels().unwrap(), vec![7, 2, 1]);
    }

    #[test]
    fn error_classes() {
        let mut bad = 0x0000_0802u32.to_be_bytes().to_vec();
        bad.extend_from_slice(&[0; 8]);
        assert_eq!(parse_idx(&bad), Err(IdxError::BadMagic(0x0000_0802)));

        let mut short = Vec::new();
        for w in [0x0000_0801u32, 5] {
            short.extend_from_slice(&w.to_be_bytes());
        }
        short.extend_from_slice(&[1, 2]);
        assert_eq!(parse_idx(&short), Err(IdxError::Truncated { expected: 13, actual: 10 }));
        assert!(matches!(parse_idx(&[0, 0, 8]), Err(IdxError::Truncated { .. })));

        let mut header_only = Vec::new();
        for w in [0x0000_0803u32, 2] {
            header_only.extend_from_slice(&w.to_be_bytes());
        }
        assert!(matches!(parse_idx(&header_only), Err(IdxError::Truncated { .. })));
    }

    #[test]
    fn huge_dimensions_overflow() {
        let mut buf = Vec::new();
        for w in [0x0000_0803u32, u32::MAX, u32::MAX, u32::MAX] {
            buf.extend_from_slice(&w.to_be_bytes());
        }
        // 2^96 bytes cannot be addressed.
        assert!(matches!(parse_idx(&buf), Err(IdxError::DimensionOverflow(_))));
    }

    proptest! {
        #[test]
        fn encode_parse_identity(n in 0usize..4, r in 1usize..5, c in 1usize..5, seed in any::<u64>()) {
            let bytes: Vec<u8> = (0..n * r * c).map(|i| (seed.wrapping_mul(i as u64 + 7) >> 13) as u8).collect();
            let idx = IdxData { dims: vec![n, r, c], bytes };
            prop_assert_eq!(parse_idx(&encode_idx(&idx).unwrap()).unwrap(), idx);
        }
    }
}

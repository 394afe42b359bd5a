//! Binary PGM (P5, maxval 255) image grids.

use std::fs;
use std::path::Path;

use crate::diffcore::Tensor;
use crate::{Error, Result};

/// Gray level of the 1-pixel lines between tiles and of empty tiles.
pub const PGM_SEPARATOR: u8 = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Tiles the rows of `images` (each a square image in `[0, 1]`) row-major,
/// `cols` per grid row.
pub fn image_grid_pgm(images: &Tensor, cols: usize) -> Result<Vec<u8>> {
    if images.rank() != 2 || images.rows() == 0 {
        return Err(Error::Invalid(format!("need a non-empty N × D matrix, got {:?}", images.shape())));
    }
    if cols == 0 {
        return Err(Error::Invalid("grid needs at least one column".into()));
    }
    let d = images.cols();
    let side = (d as f64).sqrt().round() as usize;
    if side * side != d {
        return Err(Error::Invalid(format!("{d} pixels do not form a square image")));
    }
    let n = images.rows();
    let cols = cols.min(n);
    let rows = n.div_ceil(cols);
    let width = cols * side + cols - 1;
    let height = rows * side + rows - 1;
    let mut px = vec![PGM_SEPARATOR; width * height];
    for k in 0..n {
        let (gr, gc) = (k / cols, k % cols);
        let (top, left) = (gr * (side + 1), gc * (side + 1));
        for (j, &v) in images.row(k).iter().enumerate() {
            px[(top + j / side) * width + left + j % side] = quantize(v);
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&px);
    Ok(out)
}

pub fn emit_image_grid(images: &Tensor, cols: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = image_grid_pgm(images, cols)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses a P5 file with maxval 255 and single-space/newline separated header.
pub fn read_pgm(bytes: &[u8]) -> Result<Pgm> {
    let bad = |m: &str| Error::Data(format!("PGM: {m}"));
    let mut fields = Vec::new();
    let mut at = 0;
    while fields.len() < 4 {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if start == at {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..at]).map_err(|_| bad("header is not text"))?);
    }
    at += 1;
    if fields[0] != "P5" {
        return Err(bad("missing P5 magic"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let pixels = bytes.get(at..at + width * height).ok_or_else(|| bad("truncated pixels"))?;
    Ok(Pgm {
        width,
        height,
        pixels: pixels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_image_round_trips() {
        let img = Tensor::matrix(1, 4, vec![0.0, 1.0, 0.2, 1.0]).unwrap();
        let bytes = image_grid_pgm(&img, 3).unwrap();
        assert!(bytes.starts_with(b"P5\n"));
        let p = read_pgm(&bytes).unwrap();
        assert_eq!((p.width, p.height), (2, 2));
        assert_eq!(p.pixels, vec![0, 255, 51, 255]);
    }

    #[test]
    fn two_by_two_geometry() {
        let imgs = Tensor::matrix(4, 9, (0..36).map(|i| if i / 9 == 3 { 1.0 } else { 0.0 }).collect()).unwrap();
        let p = read_pgm(&image_grid_pgm(&imgs, 2).unwrap()).unwrap();
        assert_eq!((p.width, p.height), (7, 7));
        // Separator row and column.
        assert!((0..7).all(|c| p.pixels[3 * 7 + c] == PGM_SEPARATOR));
        assert!((0..7).all(|r| p.pixels[r * 7 + 3] == PGM_SEPARATOR));
        // Fourth tile is the bright one.
        assert_eq!(p.pixels[4 * 7 + 4], 255);
        assert_eq!(p.pixels[0], 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(image_grid_pgm(&Tensor::zeros(&[2, 5]), 2).is_err());
        assert!(image_grid_pgm(&Tensor::zeros(&[2, 4]), 0).is_err());
        assert!(read_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(read_pgm(b"P5\n2 2\n255\n\0").is_err());
    }
}

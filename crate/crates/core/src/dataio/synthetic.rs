use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::diffcore::Tensor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Pattern families for the two synthetic classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// Class 0: two horizontal bars. Class 1: two vertical bars.
    Bars,
    /// Class 0: hollow square. Class 1: plus sign.
    Shapes,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Bars => "bars",
            Geometry::Shapes => "shapes",
        })
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bars" => Ok(Geometry::Bars),
            "shapes" => Ok(Geometry::Shapes),
            other => Err(Error::Config(format!("unknown geometry {other:?} (expected bars or shapes)"))),
        }
    }
}

/// Two-class corpus of `√d × √d` images with small positional jitter.
///
/// Labels alternate 0, 1, 0, … so classes are balanced. Foreground pixels
/// sit in `[0.7, 1]`, background in `[0, 0.15]`.
pub fn make_synthetic_clusters(n: usize, d: usize, seed: u64, geometry: Geometry) -> Result<Dataset> {
    let side = (d as f64).sqrt().round() as usize;
    if side * side != d || side < 6 {
        return Err(Error::Invalid(format!(
            "synthetic images need a square pixel count with side ≥ 6, got {d}"
        )));
    }
    let mut rng = stream(seed, Stream::Synthetic);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u32;
        let mask = match geometry {
            Geometry::Bars => bars(side, label, &mut rng),
            Geometry::Shapes => shapes(side, label, &mut rng),
        };
        let ink = rng.random_range(0.7..=1.0);
        for on in mask {
            data.push(if on {
                ink * rng.random_range(0.9..=1.0)
            } else {
                rng.random_range(0.0..=0.15)
            });
        }
        labels.push(label);
    }
    let images = Tensor::matrix(n, d, data)?;
    let source = format!("synthetic(n={n}, d={d}, seed={seed}, geometry={geometry})");
    Dataset::new(images, labels, vec![false; n], source)
}

fn jitter(rng: &mut ChaCha8Rng) -> isize {
    rng.random_range(-1i64..=1) as isize
}

fn bars(side: usize, label: u32, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let thick = (side / 8).max(1);
    let s = side as isize;
    let first = (s / 4 + jitter(rng)).clamp(0, s - 1);
    let second = (3 * s / 4 - thick as isize + jitter(rng)).clamp(0, s - 1);
    let on_band = |k: isize| (first..first + thick as isize).contains(&k) || (second..second + thick as isize).contains(&k);
    let mut mask = vec![false; side * side];
    for r in 0..side {
        for c in 0..side {
            let k = if label == 0 { r } else { c } as isize;
            mask[r * side + c] = on_band(k);
        }
    }
    mask
}

fn shapes(side: usize, label: u32, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let s = side as isize;
    let thick = (s / 8).max(1);
    let (cr, cc) = (s / 2 + jitter(rng), s / 2 + jitter(rng));
    let half = s / 4 + jitter(rng).max(0);
    let mut mask = vec![false; side * side];
    for r in 0..s {
        for c in 0..s {
            let (dr, dc) = (r - cr, c - cc);
            let on = if label == 0 {
                let inside = dr.abs() <= half && dc.abs() <= half;
                let core = dr.abs() <= half - thick && dc.abs() <= half - thick;
                inside && !core
            } else {
                let arm = half + thick;
                (dr.abs() < thick && dc.abs() <= arm) || (dc.abs() < thick && dr.abs() <= arm)
            };
            mask[(r * s + c) as usize] = on;
        }
    }
    mask
}

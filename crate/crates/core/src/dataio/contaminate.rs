use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::diffcore::Tensor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Label given to synthetic noise records.
pub const NOISE_LABEL: u32 = 255;
/// Pixel distribution of noise outliers, before clipping to `[0, 1]`.
pub const NOISE_MEAN: f64 = 0.5;
pub const NOISE_STD: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContaminationKind {
    /// Replace records with clipped N(0.5, 0.25²) pixel noise.
    GaussianNoise,
    /// Replace records with records drawn from another dataset.
    ForeignDataset,
    /// Zero a random horizontal band of 5 rows.
    DropoutBands,
    /// Add a clipped Gaussian bump at a random position.
    Blobs,
}

impl fmt::Display for ContaminationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContaminationKind::GaussianNoise => "gaussian_noise",
            ContaminationKind::ForeignDataset => "foreign_dataset",
            ContaminationKind::DropoutBands => "dropout_bands",
            ContaminationKind::Blobs => "blobs",
        })
    }
}

impl FromStr for ContaminationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian_noise" => Ok(Self::GaussianNoise),
            "foreign_dataset" => Ok(Self::ForeignDataset),
            "dropout_bands" => Ok(Self::DropoutBands),
            "blobs" => Ok(Self::Blobs),
            other => Err(Error::Config(format!(
                "unknown contamination kind {other:?} (expected gaussian_noise, foreign_dataset, dropout_bands or blobs)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContaminationSpec {
    pub kind: ContaminationKind,
    pub fraction: f64,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn new(kind: ContaminationKind, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Invalid(format!("contamination fraction {fraction} outside [0, 1)")));
        }
        Ok(Self { kind, fraction, seed })
    }
}

/// `n` images of `d` clipped N(0.5, 0.25²) pixels.
pub fn noise_images(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let normal = Normal::new(NOISE_MEAN, NOISE_STD).expect("valid noise distribution");
    let data = (0..n * d).map(|_| normal.sample(rng).clamp(0.0, 1.0)).collect();
    Tensor::matrix(n, d, data).expect("n × d buffer")
}

/// Replaces or alters `⌊fraction · N⌋` seeded-random records and flags them.
pub fn contaminate(ds: &Dataset, spec: &ContaminationSpec, outlier_source: Option<&Dataset>) -> Result<Dataset> {
    let spec = ContaminationSpec::new(spec.kind, spec.fraction, spec.seed)?;
    let n = ds.len();
    let d = ds.dim();
    if spec.kind == ContaminationKind::ForeignDataset {
        match outlier_source {
            None => return Err(Error::Data("foreign_dataset contamination needs an outlier source".into())),
            Some(src) if src.dim() != d => {
                return Err(Error::Data(format!(
                    "outlier source has {} pixels per record, dataset has {d}",
                    src.dim()
                )))
            }
            Some(src) if src.is_empty() => return Err(Error::Data("outlier source is empty".into())),
            _ => {}
        }
    }
    if matches!(spec.kind, ContaminationKind::DropoutBands | ContaminationKind::Blobs) {
        let side = (d as f64).sqrt().round() as usize;
        if side * side != d {
            return Err(Error::Data(format!("{} needs square images, got {d} pixels", spec.kind)));
        }
    }

    let count = (spec.fraction * n as f64).floor() as usize;
    let step = format!("contaminate(kind={}, fraction={}, seed={}, count={count})", spec.kind, spec.fraction, spec.seed);
    if count == 0 {
        if spec.fraction > 0.0 {
            log::warn!("fraction {} of {n} records is below one record; nothing replaced", spec.fraction);
        }
        return Ok(ds.clone().with_step(step));
    }

    let mut rng = stream(spec.seed, Stream::Contaminate);
    let mut chosen = sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();

    let mut out = ds.clone();
    let side = (d as f64).sqrt().round() as usize;
    match spec.kind {
        ContaminationKind::GaussianNoise => {
            let noise = noise_images(count, d, &mut rng);
            for (k, &i) in chosen.iter().enumerate() {
                row_mut(&mut out.images, i).copy_from_slice(noise.row(k));
                out.labels[i] = NOISE_LABEL;
            }
        }
        ContaminationKind::ForeignDataset => {
            let src = outlier_source.expect("checked above");
            let picks: Vec<usize> = if src.len() >= count {
                sample(&mut rng, src.len(), count).into_vec()
            } else {
                (0..count).map(|_| rng.random_range(0..src.len())).collect()
            };
            for (&i, &j) in chosen.iter().zip(&picks) {
                row_mut(&mut out.images, i).copy_from_slice(src.images.row(j));
                out.labels[i] = src.labels[j];
            }
        }
        ContaminationKind::DropoutBands => {
            let height = 5.min(side);
            for &i in &chosen {
                let top = rng.random_range(0..=side - height);
                let row = row_mut(&mut out.images, i);
                row[top * side..(top + height) * side].fill(0.0);
            }
        }
        ContaminationKind::Blobs => {
            for &i in &chosen {
                let cr = rng.random_range(0.0..side as f64);
                let cc = rng.random_range(0.0..side as f64);
                let scale = rng.random_range(1.0..(0.15 * side as f64).max(1.5));
                let row = row_mut(&mut out.images, i);
                for r in 0..side {
                    for c in 0..side {
                        let r2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                        let px = &mut row[r * side + c];
                        *px = (*px + (-r2 / (2.0 * scale * scale)).exp()).min(1.0);
                    }
                }
            }
        }
    }
    for &i in &chosen {
        out.is_outlier[i] = true;
    }
    Ok(out.with_step(step))
}

fn row_mut(t: &mut Tensor, i: usize) -> &mut [f64] {
    let c = t.cols();
    &mut t.data_mut()[i * c..(i + 1) * c]
}

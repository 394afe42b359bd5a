//! Datasets: IDX ingestion, synthetic corpora, contamination and splits.
//!
//! Every transform takes `&Dataset` and returns a new one, appending a
//! description of itself to [`DatasetMeta::history`].

mod contaminate;
mod idx;
mod manifest;
mod synthetic;

pub use contaminate::{contaminate, noise_images, ContaminationKind, ContaminationSpec, NOISE_LABEL, NOISE_MEAN, NOISE_STD};
pub use idx::{
    encode_idx, images_to_idx, parse_idx, read_idx, write_idx, IdxData, IdxError, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use manifest::{load_idx_dataset, load_manifest, write_dataset};
pub use synthetic::{make_synthetic_clusters, Geometry};

use rand::seq::SliceRandom;

use crate::diffcore::Tensor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetMeta {
    pub source: String,
    pub history: Vec<String>,
}

/// Images as rows of an `N × D` matrix with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<u32>,
    pub is_outlier: Vec<bool>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<u32>, is_outlier: Vec<bool>, source: impl Into<String>) -> Result<Self> {
        if images.rank() != 2 {
            return Err(Error::Data(format!("images must be a matrix, got shape {:?}", images.shape())));
        }
        let n = images.rows();
        if labels.len() != n || is_outlier.len() != n {
            return Err(Error::Data(format!(
                "{n} images but {} labels and {} outlier flags",
                labels.len(),
                is_outlier.len()
            )));
        }
        if let Some(v) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            images,
            labels,
            is_outlier,
            meta: DatasetMeta {
                source: source.into(),
                history: Vec::new(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.images.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels per record.
    pub fn dim(&self) -> usize {
        self.images.cols()
    }

    pub fn outlier_count(&self) -> usize {
        self.is_outlier.iter().filter(|&&f| f).count()
    }

    pub fn is_binary(&self) -> bool {
        self.images.data().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Records at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            images: self.images.gather_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            is_outlier: idx.iter().map(|&i| self.is_outlier[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    pub(crate) fn with_step(mut self, step: String) -> Self {
        self.meta.history.push(step);
        self
    }
}

/// Pixels at or above `threshold_frac · max(dataset)` become 1, the rest 0.
pub fn binarize(ds: &Dataset, threshold_frac: f64) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::Data("cannot binarize an empty dataset".into()));
    }
    if !(0.0..=1.0).contains(&threshold_frac) {
        return Err(Error::Invalid(format!("threshold fraction {threshold_frac} outside [0, 1]")));
    }
    let max = ds.images.data().iter().copied().fold(0.0, f64::max);
    let threshold = threshold_frac * max;
    let images = ds.images.map(|v| if max > 0.0 && v >= threshold { 1.0 } else { 0.0 });
    let out = Dataset {
        images,
        ..ds.clone()
    };
    Ok(out.with_step(format!("binarize(threshold_frac={threshold_frac})")))
}

/// Seeded disjoint partition; each side keeps the original record order.
pub fn split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Invalid(format!("train fraction {train_frac} must lie in (0, 1)")));
    }
    let n = ds.len();
    let n_train = (train_frac * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Data(format!(
            "splitting {n} records at {train_frac} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Split));
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    let step = |side: &str| format!("split(train_frac={train_frac}, seed={seed}, side={side})");
    Ok((
        ds.subset(train).with_step(step("train")),
        ds.subset(test).with_step(step("test")),
    ))
}

/// Keeps only records whose label is in `keep`.
pub fn filter_labels(ds: &Dataset, keep: &[u32]) -> Dataset {
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| keep.contains(&ds.labels[i])).collect();
    ds.subset(&idx).with_step(format!("filter_labels({keep:?})"))
}

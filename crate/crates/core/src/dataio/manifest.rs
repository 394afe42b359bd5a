//! Dataset manifests: line-oriented `key = value` text pointing at IDX files.
//!
//! ```text
//! images = train-images.idx
//! labels = train-labels.idx
//! outliers = train-outliers.idx
//! source = synthetic(n=2000, d=256, seed=0, geometry=bars)
//! history = contaminate(kind=gaussian_noise, fraction=0.1, seed=0, count=200)
//! ```
//!
//! Relative paths resolve against the manifest's directory. `history` may
//! repeat; `outliers` is optional (all false when absent).

use std::fs;
use std::path::{Path, PathBuf};

use super::idx::{images_to_idx, read_idx, write_idx, IdxData};
use super::{Dataset, DatasetMeta};
use crate::{Error, Result};

/// Images plus labels from a pair of IDX files.
pub fn load_idx_dataset(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let images = read_idx(ip)?.to_images()?;
    let labels = read_idx(lp)?.to_labels()?;
    let n = images.rows();
    Dataset::new(images, labels, vec![false; n], format!("idx({})", ip.display()))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |v: &str| {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    let (mut images, mut labels, mut outliers, mut source) = (None, None, None, None);
    let mut history = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Data(format!("{}:{}: expected `key = value`", path.display(), no + 1)))?;
        let (key, value) = (key.trim(), value.trim().to_string());
        let slot = match key {
            "images" => &mut images,
            "labels" => &mut labels,
            "outliers" => &mut outliers,
            "source" => &mut source,
            "history" => {
                history.push(value);
                continue;
            }
            other => {
                return Err(Error::Data(format!(
                    "{}:{}: unknown manifest key {other:?}",
                    path.display(),
                    no + 1
                )))
            }
        };
        if slot.replace(value).is_some() {
            return Err(Error::Data(format!("{}:{}: duplicate key {key:?}", path.display(), no + 1)));
        }
    }
    let missing = |k: &str| Error::Data(format!("{}: manifest lacks `{k}`", path.display()));
    let images = images.ok_or_else(|| missing("images"))?;
    let labels = labels.ok_or_else(|| missing("labels"))?;

    let mut ds = load_idx_dataset(resolve(&images), resolve(&labels))?;
    if let Some(o) = outliers {
        let flags = read_idx(resolve(&o))?.to_labels()?;
        if flags.len() != ds.len() {
            return Err(Error::Data(format!(
                "outlier file has {} entries for {} images",
                flags.len(),
                ds.len()
            )));
        }
        ds.is_outlier = flags.into_iter().map(|f| f != 0).collect();
    }
    ds.meta = DatasetMeta {
        source: source.unwrap_or(ds.meta.source),
        history,
    };
    Ok(ds)
}

/// Writes `{stem}-images.idx`, `{stem}-labels.idx`, `{stem}-outliers.idx`
/// and `{stem}.manifest` into `dir`; returns the manifest path.
///
/// Pixels are quantized to bytes. Square images are stored as `side × side`,
/// anything else as `1 × D`.
pub fn write_dataset(dir: impl AsRef<Path>, stem: &str, ds: &Dataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = ds.dim();
    let side = (d as f64).sqrt().round() as usize;
    let (rows, cols) = if side * side == d { (side, side) } else { (1, d) };

    let labels = ds
        .labels
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| Error::Data(format!("label {l} does not fit in a byte"))))
        .collect::<Result<Vec<u8>>>()?;
    let files = [
        ("images", format!("{stem}-images.idx"), images_to_idx(&ds.images, rows, cols)),
        ("labels", format!("{stem}-labels.idx"), IdxData { dims: vec![ds.len()], bytes: labels }),
        (
            "outliers",
            format!("{stem}-outliers.idx"),
            IdxData {
                dims: vec![ds.len()],
                bytes: ds.is_outlier.iter().map(|&f| u8::from(f)).collect(),
            },
        ),
    ];
    let mut text = String::new();
    for (key, name, data) in &files {
        write_idx(dir.join(name), data)?;
        text.push_str(&format!("{key} = {name}\n"));
    }
    text.push_str(&format!("source = {}\n", one_line(&ds.meta.source)));
    for step in &ds.meta.history {
        text.push_str(&format!("history = {}\n", one_line(step)));
    }
    let path = dir.join(format!("{stem}.manifest"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{contaminate, make_synthetic_clusters, ContaminationKind, ContaminationSpec, Geometry};

    #[test]
    fn round_trip_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_synthetic_clusters(30, 64, 2, Geometry::Shapes).unwrap();
        let spec = ContaminationSpec::new(ContaminationKind::GaussianNoise, 0.2, 1).unwrap();
        let ds = contaminate(&ds, &spec, None).unwrap();
        let path = write_dataset(dir.path(), "train", &ds).unwrap();
        let back = load_manifest(&path).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.is_outlier, ds.is_outlier);
        assert_eq!(back.meta, ds.meta);
        for (a, b) in back.images.data().iter().zip(ds.images.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        // Second write of the reloaded data is byte-stable.
        let again = write_dataset(dir.path(), "again", &back).unwrap();
        let reread = load_manifest(again).unwrap();
        assert_eq!(reread.images, back.images);
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("bad.manifest");
        fs::write(&m, "images = a.idx\n").unwrap();
        assert!(matches!(load_manifest(&m), Err(Error::Data(_))));
        fs::write(&m, "images = a.idx\nlabels = b.idx\ncolour = red\n").unwrap();
        assert!(matches!(load_manifest(&m), Err(Error::Data(_))));
        fs::write(&m, "images = a.idx\nlabels = b.idx\n").unwrap();
        assert!(matches!(load_manifest(&m), Err(Error::Io { .. })));
        assert!(load_manifest(dir.path().join("none.manifest")).is_err());
    }
}

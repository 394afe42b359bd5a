//! Evaluation: reconstruction errors, the outlier/normal error ratio,
//! ROC/AUC detection, latent exports and image grids.
//!
//! Reconstructions always use the posterior mean (no sampling noise).

mod pgm;
mod sweep;

pub use pgm::{emit_image_grid, image_grid_pgm, read_pgm, Pgm, PGM_SEPARATOR};
pub use sweep::{run_cell, sweep, SweepCell, SweepConfig, SweepGrid};

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::dataio::Dataset;
use crate::vaemodel::VaeParams;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorMode {
    Mse,
    Abs,
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMode::Mse => "mse",
            ErrorMode::Abs => "abs",
        })
    }
}

impl FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mse" => Ok(ErrorMode::Mse),
            "abs" => Ok(ErrorMode::Abs),
            other => Err(Error::Config(format!("unknown error mode {other:?} (expected mse or abs)"))),
        }
    }
}

fn check_dim(params: &VaeParams, ds: &Dataset) -> Result<()> {
    if ds.dim() != params.arch.input_dim {
        return Err(Error::ArchMismatch(format!(
            "dataset has {} pixels per record, model expects {}",
            ds.dim(),
            params.arch.input_dim
        )));
    }
    Ok(())
}

/// Per-record error of `recon` against `images`, averaged over pixels.
pub fn pixel_errors(images: &crate::diffcore::Tensor, recon: &crate::diffcore::Tensor, mode: ErrorMode) -> Vec<f64> {
    let d = images.cols() as f64;
    (0..images.rows())
        .map(|i| {
            let s: f64 = images
                .row(i)
                .iter()
                .zip(recon.row(i))
                .map(|(x, r)| match mode {
                    ErrorMode::Mse => (x - r) * (x - r),
                    ErrorMode::Abs => (x - r).abs(),
                })
                .sum();
            s / d
        })
        .collect()
}

pub fn recon_error(params: &VaeParams, ds: &Dataset, mode: ErrorMode) -> Result<Vec<f64>> {
    check_dim(params, ds)?;
    let recon = params.reconstruct_mean(&ds.images)?;
    Ok(pixel_errors(&ds.images, &recon, mode))
}

fn group_means(values: &[f64], flags: &[bool]) -> Result<(f64, f64)> {
    if values.len() != flags.len() {
        return Err(Error::Invalid(format!("{} values but {} flags", values.len(), flags.len())));
    }
    let (mut sp, mut np, mut sn, mut nn) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &f) in values.iter().zip(flags) {
        if f {
            sp += v;
            np += 1;
        } else {
            sn += v;
            nn += 1;
        }
    }
    if np == 0 || nn == 0 {
        return Err(Error::Data(format!("need both groups, got {np} flagged and {nn} unflagged")));
    }
    Ok((sp / np as f64, sn / nn as f64))
}

/// Mean error over flagged records divided by mean error over the rest.
pub fn ratio_metric(errors: &[f64], flags: &[bool]) -> Result<f64> {
    let (out, normal) = group_means(errors, flags)?;
    Ok(out / normal)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC over all distinct scores (a record is called positive when its score
/// is at least the threshold) and its trapezoidal area.
///
/// Points run from `(0, 0)` at threshold `+∞` to `(1, 1)`; tied scores enter
/// together, so ties contribute half credit.
pub fn roc_auc(scores: &[f64], flags: &[bool]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != flags.len() {
        return Err(Error::Invalid(format!("{} scores but {} flags", scores.len(), flags.len())));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Data(format!("score {s} is not a number")));
    }
    let pos = flags.iter().filter(|&&f| f).count();
    let neg = flags.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data(format!("ROC needs both classes, got {pos} positive and {neg} negative")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut roc = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if flags[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        let last = roc.last().expect("starts non-empty");
        auc += (p.fpr - last.fpr) * (p.tpr + last.tpr) / 2.0;
        roc.push(p);
    }
    Ok((roc, auc))
}

pub fn roc_csv(roc: &[RocPoint]) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in roc {
        writeln!(s, "{},{},{}", p.threshold, p.fpr, p.tpr).unwrap();
    }
    s
}

/// Everything `eval` reports for one model on one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Per-record mean squared error; the detection score.
    pub mse: Vec<f64>,
    /// Per-record mean absolute error; feeds the ratio metric.
    pub abs: Vec<f64>,
    pub ratio_metric: f64,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub run_meta: String,
}

/// Ratio metric from absolute errors, ROC from squared errors.
pub fn evaluate(params: &VaeParams, ds: &Dataset, run_meta: impl Into<String>) -> Result<EvalReport> {
    check_dim(params, ds)?;
    let recon = params.reconstruct_mean(&ds.images)?;
    let mse = pixel_errors(&ds.images, &recon, ErrorMode::Mse);
    let abs = pixel_errors(&ds.images, &recon, ErrorMode::Abs);
    let ratio = ratio_metric(&abs, &ds.is_outlier)?;
    let (roc, auc) = roc_auc(&mse, &ds.is_outlier)?;
    Ok(EvalReport {
        mse,
        abs,
        ratio_metric: ratio,
        roc,
        auc,
        run_meta: run_meta.into(),
    })
}

impl EvalReport {
    /// `index,label,is_outlier,mse,abs`
    pub fn errors_csv(&self, ds: &Dataset) -> String {
        let mut s = String::from("index,label,is_outlier,mse,abs\n");
        for i in 0..self.mse.len() {
            writeln!(s, "{i},{},{},{},{}", ds.labels[i], u8::from(ds.is_outlier[i]), self.mse[i], self.abs[i]).unwrap();
        }
        s
    }

    /// `metric,value` rows.
    pub fn summary_csv(&self) -> String {
        let n = self.mse.len();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
        let mut s = String::from("metric,value\n");
        writeln!(s, "records,{n}").unwrap();
        writeln!(s, "ratio_metric,{}", self.ratio_metric).unwrap();
        writeln!(s, "auc,{}", self.auc).unwrap();
        writeln!(s, "mean_mse,{}", mean(&self.mse)).unwrap();
        writeln!(s, "mean_abs,{}", mean(&self.abs)).unwrap();
        s
    }
}

/// `mu_1..mu_L,label,is_outlier`, one row per record.
pub fn export_latent(params: &VaeParams, ds: &Dataset) -> Result<String> {
    check_dim(params, ds)?;
    let (mu, _) = params.encode_values(&ds.images)?;
    let l = params.arch.latent_dim;
    let mut s = (1..=l).map(|j| format!("mu_{j}")).collect::<Vec<_>>().join(",");
    s.push_str(",label,is_outlier\n");
    for i in 0..ds.len() {
        for v in mu.row(i) {
            write!(s, "{v},").unwrap();
        }
        writeln!(s, "{},{}", ds.labels[i], u8::from(ds.is_outlier[i])).unwrap();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tensor;
    use crate::vaemodel::{Arch, ObsModel};
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], flags: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &fi) in flags.iter().enumerate() {
            for (j, &fj) in flags.iter().enumerate() {
                if fi && !fj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
        let n = rows.len();
        Dataset::new(Tensor::from_rows(&rows).unwrap(), vec![0; n], vec![false; n], "t").unwrap()
    }

    #[test]
    fn pixel_error_examples() {
        let x = Tensor::matrix(2, 2, vec![1.0, 1.0, 0.2, 0.6]).unwrap();
        let r = Tensor::matrix(2, 2, vec![0.0, 0.0, 0.2, 0.6]).unwrap();
        assert_eq!(pixel_errors(&x, &r, ErrorMode::Mse), vec![1.0, 0.0]);
        let r2 = Tensor::matrix(2, 2, vec![1.0, 1.0, 0.5, 0.2]).unwrap();
        let e = pixel_errors(&x, &r2, ErrorMode::Mse);
        assert!((e[1] - (0.09 + 0.16) / 2.0).abs() < 1e-15);
        let a = pixel_errors(&x, &r2, ErrorMode::Abs);
        assert!((a[1] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn recon_error_uses_the_posterior_mean() {
        let arch = Arch::new(4, 3, 2, ObsModel::Bernoulli).unwrap();
        // Zero weights decode every record to sigmoid(0) = 0.5.
        let p = VaeParams::zeros(arch);
        let ds = dataset(vec![vec![0.5; 4], vec![1.0; 4]]);
        assert_eq!(recon_error(&p, &ds, ErrorMode::Mse).unwrap(), vec![0.0, 0.25]);
        let wrong = dataset(vec![vec![0.5; 3]]);
        assert!(matches!(recon_error(&p, &wrong, ErrorMode::Mse), Err(Error::ArchMismatch(_))));
    }

    #[test]
    fn ratio_examples() {
        let flags = [true, false, true, false];
        assert_eq!(ratio_metric(&[1.0, 1.0, 2.0, 2.0], &flags).unwrap(), 1.0);
        assert_eq!(ratio_metric(&[2.0, 1.0, 4.0, 2.0], &flags).unwrap(), 2.0);
        // Group sizes do not matter.
        assert_eq!(ratio_metric(&[3.0, 1.0, 1.0, 1.0], &[true, false, false, false]).unwrap(), 3.0);
        assert!(ratio_metric(&[1.0], &[true]).is_err());
    }

    #[test]
    fn auc_examples() {
        let flags = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &flags).unwrap().1, 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &flags).unwrap().1, 0.5);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.9, 0.8], &flags).unwrap().1, 0.0);
        let (roc, _) = roc_auc(&[0.5; 4], &flags).unwrap();
        assert_eq!(roc.len(), 2);
        assert_eq!((roc[1].fpr, roc[1].tpr), (1.0, 1.0));
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn csv_layouts() {
        let (roc, _) = roc_auc(&[0.9, 0.1], &[true, false]).unwrap();
        assert_eq!(roc_csv(&roc), "threshold,fpr,tpr\ninf,0,0\n0.9,0,1\n0.1,1,1\n");
        let arch = Arch::new(4, 3, 2, ObsModel::Bernoulli).unwrap();
        let p = VaeParams::init(arch, 0).unwrap();
        let ds = dataset(vec![vec![0.5; 4]; 3]);
        let csv = export_latent(&p, &ds).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "mu_1,mu_2,label,is_outlier");
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
        assert_eq!(csv, export_latent(&p, &ds).unwrap());
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            data in prop::collection::vec((0u8..12, any::<bool>()), 2..200)
        ) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| f64::from(s) / 3.0).collect();
            let flags: Vec<bool> = data.iter().map(|&(_, f)| f).collect();
            prop_assume!(flags.iter().any(|&f| f) && flags.iter().any(|&f| !f));
            let (roc, auc) = roc_auc(&scores, &flags).unwrap();
            prop_assert!((auc - pairwise_auc(&scores, &flags)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&auc));
            for w in roc.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            // Strictly monotone transforms leave the AUC unchanged.
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((roc_auc(&warped, &flags).unwrap().1 - auc).abs() < 1e-12);
        }

        #[test]
        fn ratio_is_scale_invariant(
            data in prop::collection::vec((0.01f64..5.0, any::<bool>()), 2..50),
            c in 0.01f64..100.0,
        ) {
            let e: Vec<f64> = data.iter().map(|d| d.0).collect();
            let f: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(f.iter().any(|&x| x) && f.iter().any(|&x| !x));
            let scaled: Vec<f64> = e.iter().map(|v| v * c).collect();
            let (a, b) = (ratio_metric(&e, &f).unwrap(), ratio_metric(&scaled, &f).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

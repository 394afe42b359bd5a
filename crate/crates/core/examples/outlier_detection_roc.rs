// Score held-out records by reconstruction error and compare the VAE and
// RVAE on the ratio metric and ROC. Writes per-record errors, ROC points
// and a grid of outlier reconstructions for each model.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use rvae::dataio::{binarize, contaminate, make_synthetic_clusters, split, ContaminationKind, ContaminationSpec, Geometry};
use rvae::divergences::LossSpec;
use rvae::evalkit::{emit_image_grid, evaluate, roc_csv, EvalReport};
use rvae::optim::{train, TrainConfig};
use rvae::vaemodel::{Arch, ObsModel};

pub fn run(out: &Path, epochs: usize) -> Result<Vec<(f64, EvalReport)>, Box<dyn Error>> {
    let clean = make_synthetic_clusters(800, 64, 1, Geometry::Shapes)?;
    let (tr, te) = split(&clean, 0.75, 1)?;
    let noisy = |ds, seed| -> rvae::Result<_> {
        let spec = ContaminationSpec::new(ContaminationKind::GaussianNoise, 0.1, seed)?;
        binarize(&contaminate(ds, &spec, None)?, 0.5)
    };
    let (tr, te) = (noisy(&tr, 1)?, noisy(&te, 2)?);
    fs::create_dir_all(out)?;

    let arch = Arch::new(64, 64, 4, ObsModel::Bernoulli)?;
    let outliers: Vec<usize> = (0..te.len()).filter(|&i| te.is_outlier[i]).take(8).collect();
    let mut reports = Vec::new();
    for beta in [0.0, 0.01] {
        let loss = if beta == 0.0 { LossSpec::standard(ObsModel::Bernoulli) } else { LossSpec::beta(ObsModel::Bernoulli, beta)? };
        let mut cfg = TrainConfig::new(arch, loss);
        cfg.epochs = epochs;
        cfg.batch_size = 32;
        let (params, _) = train(&cfg, &tr)?;
        let report = evaluate(&params, &te, format!("beta={beta}"))?;
        fs::write(out.join(format!("errors_beta{beta}.csv")), report.errors_csv(&te))?;
        fs::write(out.join(format!("roc_beta{beta}.csv")), roc_csv(&report.roc))?;
        let recon = params.reconstruct_mean(&te.subset(&outliers).images)?;
        emit_image_grid(&recon, 8, out.join(format!("outliers_beta{beta}.pgm")))?;
        reports.push((beta, report));
    }
    Ok(reports)
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("rvae-roc"), PathBuf::from);
    for (beta, r) in run(&out, 20)? {
        let label = if beta == 0.0 { "VAE".to_string() } else { format!("RVAE beta {beta}") };
        println!("{label:>15}: ratio {:8.2}  auc {:.4}", r.ratio_metric, r.auc);
    }
    println!("outputs in {}", out.display());
    Ok(())
}

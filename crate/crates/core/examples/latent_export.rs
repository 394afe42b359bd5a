// Encode a dataset with a trained model and export posterior means as CSV,
// one row per record with its label and outlier flag.

use std::error::Error;
use std::path::PathBuf;

use rvae::dataio::{binarize, contaminate, make_synthetic_clusters, ContaminationKind, ContaminationSpec, Geometry};
use rvae::divergences::LossSpec;
use rvae::evalkit::export_latent;
use rvae::optim::{train, TrainConfig};
use rvae::vaemodel::{Arch, ObsModel};

pub fn run(epochs: usize) -> rvae::Result<String> {
    let clean = make_synthetic_clusters(300, 64, 4, Geometry::Shapes)?;
    let spec = ContaminationSpec::new(ContaminationKind::DropoutBands, 0.1, 4)?;
    let data = binarize(&contaminate(&clean, &spec, None)?, 0.5)?;
    let mut cfg = TrainConfig::new(Arch::new(64, 32, 2, ObsModel::Bernoulli)?, LossSpec::beta(ObsModel::Bernoulli, 0.01)?);
    cfg.epochs = epochs;
    cfg.batch_size = 32;
    let (params, _) = train(&cfg, &data)?;
    export_latent(&params, &data)
}

fn main() -> Result<(), Box<dyn Error>> {
    let csv = run(20)?;
    let path = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("rvae-latent.csv"), PathBuf::from);
    std::fs::write(&path, &csv)?;
    for line in csv.lines().take(6) {
        println!("{line}");
    }
    println!("... {} rows in {}", csv.lines().count() - 1, path.display());
    Ok(())
}

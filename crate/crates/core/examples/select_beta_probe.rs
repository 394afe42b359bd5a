// Train models at several β and probe each with noise images. Inspect the
// grids: pick the β whose noise reconstructions look like its own samples
// while the samples still vary.

use std::error::Error;
use std::path::{Path, PathBuf};

use rvae::betaselect::{probe, summary_csv, write_probe, ProbeResult};
use rvae::dataio::{binarize, make_synthetic_clusters, Geometry};
use rvae::divergences::LossSpec;
use rvae::optim::{train, TrainConfig};
use rvae::vaemodel::{Arch, ObsModel};

pub fn run(out: &Path, epochs: usize) -> Result<Vec<ProbeResult>, Box<dyn Error>> {
    let data = binarize(&make_synthetic_clusters(400, 64, 3, Geometry::Bars)?, 0.5)?;
    let arch = Arch::new(64, 48, 3, ObsModel::Bernoulli)?;
    let mut models = Vec::new();
    for beta in [0.001, 0.01, 0.1] {
        let mut cfg = TrainConfig::new(arch, LossSpec::beta(ObsModel::Bernoulli, beta)?);
        cfg.epochs = epochs;
        cfg.batch_size = 32;
        models.push((beta, train(&cfg, &data)?.0));
    }
    let results = probe(&models, 8, 3)?;
    std::fs::create_dir_all(out)?;
    write_probe(out, &results)?;
    Ok(results)
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("rvae-probe"), PathBuf::from);
    print!("{}", summary_csv(&run(&out, 15)?));
    println!("grids in {}", out.display());
    Ok(())
}

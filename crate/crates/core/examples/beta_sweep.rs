// A small β × contamination-fraction sweep on a worker pool, written as
// sweep.csv, with the best β per fraction.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use rvae::dataio::{make_synthetic_clusters, split, ContaminationKind, Geometry};
use rvae::divergences::LossSpec;
use rvae::evalkit::{sweep, SweepConfig, SweepGrid};
use rvae::optim::TrainConfig;
use rvae::vaemodel::{Arch, ObsModel};

pub fn run(out: &Path, epochs: usize, workers: usize) -> Result<SweepGrid, Box<dyn Error>> {
    let ds = make_synthetic_clusters(600, 64, 2, Geometry::Bars)?;
    let (tr, te) = split(&ds, 0.8, 2)?;
    let mut base = TrainConfig::new(Arch::new(64, 64, 4, ObsModel::Bernoulli)?, LossSpec::standard(ObsModel::Bernoulli));
    base.epochs = epochs;
    base.batch_size = 32;
    let cfg = SweepConfig {
        base,
        betas: vec![0.0, 0.003, 0.03, 0.3],
        fractions: vec![0.05, 0.2],
        kind: ContaminationKind::GaussianNoise,
        test_fraction: 0.1,
        binarize: Some(0.5),
        workers,
    };
    let grid = sweep(&cfg, &tr, &te, None)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), grid.to_csv())?;
    Ok(grid)
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("rvae-sweep"), PathBuf::from);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let grid = run(&out, 15, workers)?;
    print!("{}", grid.to_csv());
    for (j, f) in grid.fractions.iter().enumerate() {
        if let Some(i) = grid.best_beta_idx(j) {
            println!("fraction {f}: best beta {}", grid.betas[i]);
        }
    }
    Ok(())
}

// Train a VAE and an RVAE on synthetic bars with 10% noise outliers and
// save both checkpoints with their training logs.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use rvae::dataio::{binarize, contaminate, make_synthetic_clusters, ContaminationKind, ContaminationSpec, Geometry};
use rvae::divergences::LossSpec;
use rvae::optim::{train, TrainConfig, TrainLog};
use rvae::vaemodel::{write_checkpoint, Arch, Checkpoint, ObsModel};

pub fn run(out: &Path, epochs: usize) -> Result<Vec<(String, TrainLog)>, Box<dyn Error>> {
    let clean = make_synthetic_clusters(600, 64, 0, Geometry::Bars)?;
    let spec = ContaminationSpec::new(ContaminationKind::GaussianNoise, 0.1, 0)?;
    let data = binarize(&contaminate(&clean, &spec, None)?, 0.5)?;
    fs::create_dir_all(out)?;

    let arch = Arch::new(64, 64, 4, ObsModel::Bernoulli)?;
    let mut logs = Vec::new();
    for (name, loss) in [
        ("vae", LossSpec::standard(ObsModel::Bernoulli)),
        ("rvae", LossSpec::beta(ObsModel::Bernoulli, 0.01)?),
    ] {
        let mut cfg = TrainConfig::new(arch, loss);
        cfg.epochs = epochs;
        cfg.batch_size = 32;
        let (params, log) = train(&cfg, &data)?;
        write_checkpoint(out.join(format!("{name}.ckpt")), &Checkpoint { params, loss })?;
        fs::write(out.join(format!("{name}_train_log.csv")), log.to_csv(false))?;
        logs.push((name.to_string(), log));
    }
    Ok(logs)
}

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("rvae-train"), PathBuf::from);
    for (name, log) in run(&out, 20)? {
        let (first, last) = (&log.epochs[0], log.epochs.last().unwrap());
        println!("{name:>4}: loss {:.4} -> {:.4} over {} epochs", first.total, last.total, log.epochs.len());
    }
    println!("checkpoints in {}", out.display());
    Ok(())
}

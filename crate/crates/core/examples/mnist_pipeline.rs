// Digits contaminated with 10% letters: train at β = 0.001 and β = 0.01 and
// write reconstruction grids of the letters.
//
//     cargo run --release --example mnist_pipeline -- MNIST_DIR EMNIST_DIR [N] [OUT]
//
// MNIST_DIR holds train-images-idx3-ubyte and train-labels-idx1-ubyte;
// EMNIST_DIR holds emnist-letters-train-{images-idx3,labels-idx1}-ubyte.

use std::error::Error;
use std::path::PathBuf;

use rvae::dataio::{binarize, contaminate, load_idx_dataset, split, ContaminationKind, ContaminationSpec};
use rvae::divergences::LossSpec;
use rvae::evalkit::{emit_image_grid, run_cell, SweepConfig};
use rvae::optim::TrainConfig;
use rvae::vaemodel::{Arch, ObsModel};

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [mnist, emnist, ..] = args.as_slice() else {
        eprintln!("usage: mnist_pipeline MNIST_DIR EMNIST_DIR [N] [OUT]");
        std::process::exit(2);
    };
    let (mnist, emnist) = (PathBuf::from(mnist), PathBuf::from(emnist));
    let n: usize = args.get(2).map_or(Ok(10_000), |s| s.parse())?;
    let out = args.get(3).map_or_else(|| std::env::temp_dir().join("rvae-mnist"), PathBuf::from);

    let digits = load_idx_dataset(mnist.join("train-images-idx3-ubyte"), mnist.join("train-labels-idx1-ubyte"))?;
    let letters = load_idx_dataset(
        emnist.join("emnist-letters-train-images-idx3-ubyte"),
        emnist.join("emnist-letters-train-labels-idx1-ubyte"),
    )?;
    let digits = digits.subset(&(0..digits.len().min(n)).collect::<Vec<_>>());
    let (tr, te) = split(&digits, 0.8, 0)?;
    let spec = ContaminationSpec::new(ContaminationKind::ForeignDataset, 0.1, 1)?;
    let test = binarize(&contaminate(&te, &spec, Some(&letters))?, 0.5)?;

    let base = TrainConfig::new(Arch::new(digits.dim(), 400, 20, ObsModel::Bernoulli)?, LossSpec::standard(ObsModel::Bernoulli));
    let cfg = SweepConfig {
        base,
        betas: vec![],
        fractions: vec![],
        kind: ContaminationKind::ForeignDataset,
        test_fraction: 0.1,
        binarize: Some(0.5),
        workers: 1,
    };
    std::fs::create_dir_all(&out)?;
    let picked = test.subset(&(0..test.len()).filter(|&i| test.is_outlier[i]).take(32).collect::<Vec<_>>());
    emit_image_grid(&picked.images, 8, out.join("letters_input.pgm"))?;
    for beta in [0.001, 0.01] {
        let (params, report) = run_cell(&cfg, beta, 0.1, &tr, &test, Some(&letters))?;
        emit_image_grid(&params.reconstruct_mean(&picked.images)?, 8, out.join(format!("letters_beta{beta}.pgm")))?;
        println!("beta {beta}: ratio {:.3}  auc {:.4}", report.ratio_metric, report.auc);
    }
    println!("grids in {}", out.display());
    Ok(())
}

//! The `rvae` command line.
//!
//! Every subcommand takes `--config FILE`, any number of `--set key=value`
//! overrides, an optional `--seed` and an output directory `--out`. Before
//! doing any work it writes `resolved.cfg` into the output directory: every
//! key it read, defaults included. Running the same subcommand with
//! `--config resolved.cfg` reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::betaselect::{probe, write_probe};
use crate::config::{ConfigMap, Reader};
use crate::dataio::{
    binarize, contaminate, filter_labels, load_idx_dataset, load_manifest, make_synthetic_clusters, split, write_dataset,
    ContaminationKind, ContaminationSpec, Dataset, Geometry,
};
use crate::divergences::{Divergence, LossSpec};
use crate::evalkit::{emit_image_grid, evaluate, export_latent, roc_csv, sweep, SweepConfig};
use crate::optim::{train_with, AdamConfig, TrainConfig};
use crate::robustfit::{
    density_csv, fit_demo_csv, fit_gaussian_beta, fit_gaussian_mle, sample_mixture, BetaFitOptions, Mixture,
};
use crate::vaemodel::{read_checkpoint, write_checkpoint, Arch, Checkpoint, ObsModel, DEFAULT_HIDDEN, DEFAULT_LATENT};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "rvae", version, about = "Robust variational autoencoders with the β-ELBO")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a dataset manifest.
    Train(CommonArgs),
    /// Evaluate a checkpoint on a (contaminated) test manifest.
    Eval(CommonArgs),
    /// Train and evaluate one model per (β, contamination fraction) cell.
    Sweep(SweepArgs),
    /// Probe checkpoints with fake noise outliers to help choose β.
    SelectBeta(CommonArgs),
    /// Fit a Gaussian to a two-mode mixture by likelihood and by β-cross-entropy.
    RobustfitDemo(CommonArgs),
    /// Build (synthetic or IDX-backed) contaminated dataset manifests.
    MakeData(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file (`key = value`, `[section]` headers, `#` comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed; overrides the `seed` key and `$RVAE_SEED`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Worker threads; overrides `sweep.workers`.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rvae: {e}");
            e.class().exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => run_train(&a),
        Command::Eval(a) => run_eval(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::SelectBeta(a) => run_select_beta(&a),
        Command::RobustfitDemo(a) => run_robustfit(&a),
        Command::MakeData(a) => run_make_data(&a),
    }
}

fn config_map(args: &CommonArgs) -> Result<ConfigMap> {
    let mut map = match &args.config {
        Some(p) => ConfigMap::load(p)?,
        None => ConfigMap::default(),
    };
    map.apply_overrides(&args.set)?;
    if let Some(s) = args.seed {
        map.set("seed", s.to_string());
    }
    Ok(map)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Checks unknown keys, creates the output directory and writes the echo.
fn finish(reader: Reader<'_>, out: &Path) -> Result<()> {
    let echo = reader.finish()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("resolved.cfg"), echo)
}

struct ModelKeys {
    hidden: usize,
    latent: usize,
    obs: ObsModel,
    sigma: f64,
}

impl ModelKeys {
    fn read(r: &Reader<'_>) -> Result<Self> {
        Ok(Self {
            hidden: r.get("model.hidden", DEFAULT_HIDDEN)?,
            latent: r.get("model.latent", DEFAULT_LATENT)?,
            obs: r.get("model.obs", ObsModel::Bernoulli)?,
            sigma: r.get("loss.sigma", crate::divergences::DEFAULT_SIGMA)?,
        })
    }

    fn arch(&self, input_dim: usize) -> Result<Arch> {
        Arch::new(input_dim, self.hidden, self.latent, self.obs)
    }
}

struct TrainKeys {
    epochs: usize,
    batch_size: usize,
    adam: AdamConfig,
    shuffle: bool,
    timing: bool,
    checkpoint_every: usize,
}

impl TrainKeys {
    fn read(r: &Reader<'_>) -> Result<Self> {
        let d = AdamConfig::default();
        Ok(Self {
            epochs: r.get("train.epochs", 20)?,
            batch_size: r.get("train.batch_size", 128)?,
            adam: AdamConfig {
                lr: r.get("train.lr", d.lr)?,
                beta1: r.get("train.adam_beta1", d.beta1)?,
                beta2: r.get("train.adam_beta2", d.beta2)?,
                eps: r.get("train.adam_eps", d.eps)?,
            },
            shuffle: r.get("train.shuffle", true)?,
            timing: r.get("train.timing", false)?,
            checkpoint_every: r.get("train.checkpoint_every", 0)?,
        })
    }

    fn config(&self, arch: Arch, loss: LossSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            arch,
            loss,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            shuffle: self.shuffle,
            adam: self.adam,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

/// Where a corpus comes from: `data.source = synthetic | manifest | idx`.
enum Corpus {
    Synthetic { n: usize, dim: usize, geometry: Geometry },
    Manifest(PathBuf),
    Idx { images: PathBuf, labels: PathBuf },
}

impl Corpus {
    fn read(r: &Reader<'_>) -> Result<Self> {
        let source: String = r.get("data.source", "synthetic".to_string())?;
        Ok(match source.as_str() {
            "synthetic" => Corpus::Synthetic {
                n: r.get("data.n", 2000)?,
                dim: r.get("data.dim", 256)?,
                geometry: r.get("data.geometry", Geometry::Bars)?,
            },
            "manifest" => Corpus::Manifest(r.require::<String>("data.manifest")?.into()),
            "idx" => Corpus::Idx {
                images: r.require::<String>("data.images")?.into(),
                labels: r.require::<String>("data.labels")?.into(),
            },
            other => {
                return Err(Error::Config(format!(
                    "data.source = {other:?}; expected synthetic, manifest or idx"
                )))
            }
        })
    }

    fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            Corpus::Synthetic { n, dim, geometry } => make_synthetic_clusters(*n, *dim, seed, *geometry),
            Corpus::Manifest(p) => load_manifest(p),
            Corpus::Idx { images, labels } => load_idx_dataset(images, labels),
        }
    }
}

/// Optional outlier source for `foreign_dataset` contamination.
fn read_outlier_source(r: &Reader<'_>, prefix: &str) -> Result<Option<Corpus>> {
    if let Some(m) = r.optional::<String>(&format!("{prefix}.source_manifest"))? {
        return Ok(Some(Corpus::Manifest(m.into())));
    }
    let images = r.optional::<String>(&format!("{prefix}.source_images"))?;
    let labels = r.optional::<String>(&format!("{prefix}.source_labels"))?;
    match (images, labels) {
        (Some(i), Some(l)) => Ok(Some(Corpus::Idx { images: i.into(), labels: l.into() })),
        (None, None) => Ok(None),
        _ => Err(Error::Config(format!(
            "{prefix}.source_images and {prefix}.source_labels must be given together"
        ))),
    }
}

fn run_train(args: &CommonArgs) -> Result<()> {
    let map = config_map(args)?;
    let r = map.reader();
    let seed = r.seed()?;
    let data_path: String = r.require("data.train")?;
    let model = ModelKeys::read(&r)?;
    let divergence: Divergence = r.get("loss.divergence", Divergence::Standard)?;
    let keys = TrainKeys::read(&r)?;
    finish(r, &args.out)?;

    let data = load_manifest(&data_path)?;
    let arch = model.arch(data.dim())?;
    let loss = LossSpec::new(model.obs, divergence, model.sigma)?;
    let config = keys.config(arch, loss, seed);
    let out = &args.out;
    let (params, log) = train_with(&config, &data, |epoch, params, _| {
        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            let ckpt = Checkpoint { params: params.clone(), loss };
            write_checkpoint(out.join(format!("model_epoch{epoch}.ckpt")), &ckpt)?;
        }
        Ok(())
    })?;
    write_checkpoint(out.join("model.ckpt"), &Checkpoint { params, loss })?;
    write(&out.join("train_log.csv"), log.to_csv(keys.timing))
}

fn run_eval(args: &CommonArgs) -> Result<()> {
    let map = config_map(args)?;
    let r = map.reader();
    let data_path: String = r.require("data.test")?;
    let ckpt_path: String = r.require("model.checkpoint")?;
    let grid_count: usize = r.get("eval.grid_count", 16)?;
    let latent: bool = r.get("eval.latent", true)?;
    finish(r, &args.out)?;

    let ckpt = read_checkpoint(&ckpt_path)?;
    let data = load_manifest(&data_path)?;
    if data.dim() != ckpt.params.arch.input_dim {
        return Err(Error::ArchMismatch(format!(
            "{data_path} has {} pixels per record but {ckpt_path} was trained on {}",
            data.dim(),
            ckpt.params.arch.input_dim
        )));
    }
    let report = evaluate(&ckpt.params, &data, format!("checkpoint={ckpt_path}, data={data_path}"))?;
    let out = &args.out;
    write(&out.join("errors.csv"), report.errors_csv(&data))?;
    write(&out.join("roc.csv"), roc_csv(&report.roc))?;
    write(&out.join("report.csv"), report.summary_csv())?;
    if latent {
        write(&out.join("latent.csv"), export_latent(&ckpt.params, &data)?)?;
    }
    if grid_count > 0 && is_square(data.dim()) {
        // Top row: up to half outliers then normals; bottom row: their reconstructions.
        let outliers = (0..data.len()).filter(|&i| data.is_outlier[i]).take(grid_count / 2);
        let mut idx: Vec<usize> = outliers.collect();
        let rest = grid_count - idx.len();
        idx.extend((0..data.len()).filter(|&i| !data.is_outlier[i]).take(rest));
        let picked = data.subset(&idx);
        let recon = ckpt.params.reconstruct_mean(&picked.images)?;
        let mut both = picked.images.data().to_vec();
        both.extend_from_slice(recon.data());
        let grid = crate::diffcore::Tensor::matrix(2 * idx.len(), data.dim(), both)?;
        emit_image_grid(&grid, idx.len(), out.join("recon_grid.pgm"))?;
    }
    Ok(())
}

fn is_square(d: usize) -> bool {
    let s = (d as f64).sqrt().round() as usize;
    s * s == d
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let mut map = config_map(&args.common)?;
    if let Some(w) = args.workers {
        map.set("sweep.workers", w.to_string());
    }
    let r = map.reader();
    let seed = r.seed()?;
    let corpus = Corpus::read(&r)?;
    let train_frac: f64 = r.get("split.train_frac", 0.8)?;
    let model = ModelKeys::read(&r)?;
    let keys = TrainKeys::read(&r)?;
    let betas: Vec<f64> = r.list("sweep.betas", &[0.0, 0.001, 0.003, 0.01, 0.03, 0.1])?;
    let fractions: Vec<f64> = r.list("sweep.fractions", &[0.05, 0.1, 0.2])?;
    let kind: ContaminationKind = r.get("sweep.kind", ContaminationKind::GaussianNoise)?;
    let source = read_outlier_source(&r, "sweep")?;
    let test_fraction: f64 = r.get("sweep.test_fraction", 0.1)?;
    let do_binarize: bool = r.get("sweep.binarize", true)?;
    let threshold: f64 = r.get("sweep.threshold", 0.5)?;
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers: usize = r.get("sweep.workers", default_workers)?;
    let save: bool = r.get("sweep.save_checkpoints", false)?;
    finish(r, &args.common.out)?;

    let data = corpus.load(seed)?;
    let source = source.map(|s| s.load(seed)).transpose()?;
    let (train_clean, test_clean) = split(&data, train_frac, seed)?;
    let arch = model.arch(data.dim())?;
    let base_loss = LossSpec::new(model.obs, Divergence::Standard, model.sigma)?;
    let cfg = SweepConfig {
        base: keys.config(arch, base_loss, seed),
        betas,
        fractions,
        kind,
        test_fraction,
        binarize: do_binarize.then_some(threshold),
        workers,
    };
    let grid = sweep(&cfg, &train_clean, &test_clean, source.as_ref())?;
    let out = &args.common.out;
    write(&out.join("sweep.csv"), grid.to_csv())?;
    let failures: Vec<String> = grid
        .cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| format!("beta={} fraction={}: {e}", c.beta, c.fraction)))
        .collect();
    if !failures.is_empty() {
        write(&out.join("failures.log"), failures.join("\n") + "\n")?;
    }
    if save {
        for c in &grid.cells {
            if let Some(p) = &c.params {
                let div = if c.beta == 0.0 { Divergence::Standard } else { Divergence::Beta(c.beta) };
                let loss = LossSpec::new(model.obs, div, model.sigma)?;
                let name = format!("cell_beta{}_frac{}.ckpt", c.beta, c.fraction);
                write_checkpoint(out.join(name), &Checkpoint { params: p.clone(), loss })?;
            }
        }
    }
    Ok(())
}

fn run_select_beta(args: &CommonArgs) -> Result<()> {
    let map = config_map(args)?;
    let r = map.reader();
    let seed = r.seed()?;
    let paths: Vec<String> = r.list("probe.checkpoints", &[])?;
    let n: usize = r.get("probe.n", 8)?;
    finish(r, &args.out)?;

    if paths.is_empty() {
        return Err(Error::Config("probe.checkpoints lists no checkpoint".into()));
    }
    let models = paths
        .iter()
        .map(|p| {
            let c = read_checkpoint(p)?;
            Ok((c.loss.beta_value().unwrap_or(0.0), c.params))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = probe(&models, n, seed)?;
    write_probe(&args.out, &results)?;
    Ok(())
}

fn run_robustfit(args: &CommonArgs) -> Result<()> {
    let map = config_map(args)?;
    let r = map.reader();
    let seed = r.seed()?;
    let d = Mixture::default();
    let n: usize = r.get("mixture.n", 2000)?;
    let mix = Mixture {
        w: r.get("mixture.w", d.w)?,
        m1: r.get("mixture.m1", d.m1)?,
        s1: r.get("mixture.s1", d.s1)?,
        m2: r.get("mixture.m2", d.m2)?,
        s2: r.get("mixture.s2", d.s2)?,
    };
    let fo = BetaFitOptions::default();
    let beta: f64 = r.get("fit.beta", 0.5)?;
    let opts = BetaFitOptions {
        init: None,
        steps: r.get("fit.steps", fo.steps)?,
        lr: r.get("fit.lr", fo.lr)?,
    };
    let bins: usize = r.get("fit.bins", 80)?;
    finish(r, &args.out)?;

    let (xs, _) = sample_mixture(n, &mix, seed)?;
    let fits = [fit_gaussian_mle(&xs)?, fit_gaussian_beta(&xs, beta, &opts)?];
    write(&args.out.join("fit_demo.csv"), fit_demo_csv(&fits))?;
    write(&args.out.join("fit_density.csv"), density_csv(&xs, &fits, bins)?)
}

fn run_make_data(args: &CommonArgs) -> Result<()> {
    let map = config_map(args)?;
    let r = map.reader();
    let seed = r.seed()?;
    let corpus = Corpus::read(&r)?;
    let keep: Vec<u32> = r.list("data.keep_labels", &[])?;
    let kind: ContaminationKind = r.get("contaminate.kind", ContaminationKind::GaussianNoise)?;
    let fraction: f64 = r.get("contaminate.fraction", 0.0)?;
    let source = read_outlier_source(&r, "contaminate")?;
    let do_binarize: bool = r.get("binarize.enabled", true)?;
    let threshold: f64 = r.get("binarize.threshold", 0.5)?;
    let train_frac: f64 = r.get("split.train_frac", 0.8)?;
    finish(r, &args.out)?;

    let mut data = corpus.load(seed)?;
    if !keep.is_empty() {
        data = filter_labels(&data, &keep);
    }
    let source = source.map(|s| s.load(seed)).transpose()?;
    let spec = ContaminationSpec::new(kind, fraction, seed)?;
    data = contaminate(&data, &spec, source.as_ref())?;
    if do_binarize {
        data = binarize(&data, threshold)?;
    }
    if train_frac == 0.0 || train_frac == 1.0 {
        write_dataset(&args.out, "data", &data)?;
    } else {
        let (tr, te) = split(&data, train_frac, seed)?;
        write_dataset(&args.out, "train", &tr)?;
        write_dataset(&args.out, "test", &te)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(out: &Path, set: &[&str]) -> CommonArgs {
        CommonArgs {
            config: None,
            set: set.iter().map(|s| s.to_string()).collect(),
            seed: Some(1),
            out: out.to_path_buf(),
        }
    }

    #[test]
    fn parses_every_subcommand() {
        for sub in ["train", "eval", "sweep", "select-beta", "robustfit-demo", "make-data"] {
            let cli = Cli::try_parse_from(["rvae", sub, "--set", "a=1", "--out", "x"]).unwrap();
            assert!(format!("{:?}", cli.command).contains("a=1"));
        }
        assert!(Cli::try_parse_from(["rvae", "fly"]).is_err());
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = run_robustfit(&args(dir.path(), &["fit.betta=0.5"])).unwrap_err();
        assert_eq!(e.class().exit_code(), 2);
        let e = run_train(&args(dir.path(), &[])).unwrap_err();
        assert!(e.to_string().contains("data.train"));
    }

    #[test]
    fn robustfit_demo_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        run_robustfit(&args(dir.path(), &["mixture.n=300", "fit.bins=10"])).unwrap();
        let csv = fs::read_to_string(dir.path().join("fit_demo.csv")).unwrap();
        assert!(csv.starts_with("method,mu,sigma\nmle,"));
        let echo = fs::read_to_string(dir.path().join("resolved.cfg")).unwrap();
        assert!(echo.contains("seed = 1\n") && echo.contains("[mixture]\nm1 = 0\nm2 = 8\nn = 300\n"));
    }

    #[test]
    fn missing_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let e = run_train(&args(dir.path(), &["data.train=/nonexistent/x.manifest"])).unwrap_err();
        assert_eq!(e.class().exit_code(), 3);
    }
}

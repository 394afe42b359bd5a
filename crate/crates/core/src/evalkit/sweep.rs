//! β × contamination-fraction grids.
//!
//! Each cell contaminates the clean training corpus at its fraction, trains
//! one model and evaluates it on a held-out set contaminated at a fixed
//! fraction, so every cell is scored against the same test records.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{evaluate, EvalReport};
use crate::dataio::{binarize, contaminate, ContaminationKind, ContaminationSpec, Dataset};
use crate::divergences::{Divergence, LossSpec};
use crate::optim::{train, TrainConfig};
use crate::vaemodel::VaeParams;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Architecture, optimizer and seed shared by all cells. Its loss only
    /// contributes the observation model and σ.
    pub base: TrainConfig,
    /// β values; `0` stands for the standard ELBO.
    pub betas: Vec<f64>,
    pub fractions: Vec<f64>,
    pub kind: ContaminationKind,
    /// Outlier fraction of the held-out evaluation set.
    pub test_fraction: f64,
    /// Binarization threshold applied after contamination, if any.
    pub binarize: Option<f64>,
    pub workers: usize,
}

impl SweepConfig {
    fn loss_for(&self, beta: f64) -> Result<LossSpec> {
        let div = if beta == 0.0 { Divergence::Standard } else { Divergence::Beta(beta) };
        LossSpec::new(self.base.loss.obs_model, div, self.base.loss.sigma)
    }
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub beta: f64,
    pub fraction: f64,
    pub ratio: f64,
    pub auc: f64,
    pub error: Option<String>,
    pub params: Option<VaeParams>,
}

#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub betas: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Row-major: `cells[i * fractions.len() + j]` is `(betas[i], fractions[j])`.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, beta_idx: usize, fraction_idx: usize) -> &SweepCell {
        &self.cells[beta_idx * self.fractions.len() + fraction_idx]
    }

    /// `beta,fraction,ratio,auc`; failed cells show `NaN`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("beta,fraction,ratio,auc\n");
        for c in &self.cells {
            writeln!(s, "{},{},{},{}", c.beta, c.fraction, c.ratio, c.auc).unwrap();
        }
        s
    }

    /// Index into `betas` with the highest ratio metric at `fraction_idx`.
    pub fn best_beta_idx(&self, fraction_idx: usize) -> Option<usize> {
        (0..self.betas.len())
            .filter(|&i| self.cell(i, fraction_idx).ratio.is_finite())
            .max_by(|&a, &b| self.cell(a, fraction_idx).ratio.total_cmp(&self.cell(b, fraction_idx).ratio))
    }
}

fn prepare(ds: &Dataset, kind: ContaminationKind, fraction: f64, seed: u64, source: Option<&Dataset>, bin: Option<f64>) -> Result<Dataset> {
    let spec = ContaminationSpec::new(kind, fraction, seed)?;
    let out = contaminate(ds, &spec, source)?;
    match bin {
        Some(t) => binarize(&out, t),
        None => Ok(out),
    }
}

/// The held-out evaluation set shared by every cell.
fn test_set(cfg: &SweepConfig, test: &Dataset, source: Option<&Dataset>) -> Result<Dataset> {
    prepare(test, cfg.kind, cfg.test_fraction, cfg.base.seed.wrapping_add(1), source, cfg.binarize)
}

/// Trains and evaluates one `(β, fraction)` cell.
pub fn run_cell(
    cfg: &SweepConfig,
    beta: f64,
    fraction: f64,
    train_clean: &Dataset,
    test: &Dataset,
    source: Option<&Dataset>,
) -> Result<(VaeParams, EvalReport)> {
    let data = prepare(train_clean, cfg.kind, fraction, cfg.base.seed, source, cfg.binarize)?;
    let tc = TrainConfig {
        loss: cfg.loss_for(beta)?,
        ..cfg.base.clone()
    };
    let (params, _) = train(&tc, &data)?;
    let report = evaluate(&params, test, format!("beta={beta}, fraction={fraction}"))?;
    Ok((params, report))
}

/// Runs all cells on a pool of `cfg.workers` threads. A cell that fails is
/// logged and recorded as `NaN`; cells do not depend on each other or on
/// scheduling order.
pub fn sweep(cfg: &SweepConfig, train_clean: &Dataset, test_clean: &Dataset, source: Option<&Dataset>) -> Result<SweepGrid> {
    if cfg.betas.is_empty() || cfg.fractions.is_empty() {
        return Err(Error::Invalid("sweep needs at least one beta and one fraction".into()));
    }
    for &b in &cfg.betas {
        cfg.loss_for(b)?;
    }
    for &f in &cfg.fractions {
        ContaminationSpec::new(cfg.kind, f, 0)?;
    }
    let test = test_set(cfg, test_clean, source)?;
    let jobs: Vec<(f64, f64)> = cfg
        .betas
        .iter()
        .flat_map(|&b| cfg.fractions.iter().map(move |&f| (b, f)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(beta, fraction)| match run_cell(cfg, beta, fraction, train_clean, &test, source) {
                Ok((params, r)) => SweepCell {
                    beta,
                    fraction,
                    ratio: r.ratio_metric,
                    auc: r.auc,
                    error: None,
                    params: Some(params),
                },
                Err(e) => {
                    log::error!("sweep cell beta={beta} fraction={fraction} failed: {e}");
                    SweepCell {
                        beta,
                        fraction,
                        ratio: f64::NAN,
                        auc: f64::NAN,
                        error: Some(e.to_string()),
                        params: None,
                    }
                }
            })
            .collect()
    });
    Ok(SweepGrid {
        betas: cfg.betas.clone(),
        fractions: cfg.fractions.clone(),
        cells,
    })
}

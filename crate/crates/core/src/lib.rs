//! Robust variational autoencoders.
//!
//! A VAE whose reconstruction term is the β-cross-entropy rather than the
//! log-likelihood, so a training record that the model finds improbable has
//! bounded influence on the fit. The crate carries everything needed to run
//! contamination experiments end to end:
//!
//! - [`diffcore`]: `f64` tensors and reverse-mode differentiation.
//! - [`vaemodel`]: MLP encoder/decoder, reparameterization, checkpoints.
//! - [`divergences`]: KL, standard ELBO, Bernoulli and Gaussian β-ELBO.
//! - [`optim`]: Adam and the minibatch training loop.
//! - [`dataio`]: IDX files, synthetic corpora, contamination, manifests.
//! - [`evalkit`]: reconstruction errors, ratio metric, ROC/AUC, sweeps, PGM grids.
//! - [`betaselect`]: fake-outlier probes for choosing β.
//! - [`robustfit`]: univariate Gaussian fits by likelihood vs β-cross-entropy.
//! - [`cli`]: the `rvae` command line.

pub mod betaselect;
pub mod cli;
pub mod config;
pub mod dataio;
pub mod diffcore;
pub mod divergences;
pub mod evalkit;
pub mod optim;
pub mod robustfit;
pub mod vaemodel;

mod error;
pub(crate) mod rng;

pub use error::{Error, FailureClass, Result};

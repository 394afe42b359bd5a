//! Training objectives.
//!
//! Every loss is reported as `total = −ELBO` (to be minimized) averaged over
//! the minibatch, split into a reconstruction term and the KL regularizer.
//! The β variants replace the log-likelihood reconstruction with the
//! β-cross-entropy between the one-point empirical distribution at `x` and
//! `p(x | z)`; the latent KL term is unchanged.
//!
//! Products over pixels are evaluated as `exp(Σ log ·)` and the `(β+1)/β`
//! prefactor is applied last. Bernoulli probabilities are clamped to
//! `[1e-7, 1 − 1e-7]` before any power or log.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::diffcore::{Graph, Tensor, Var};
use crate::vaemodel::{LatentPosterior, ObsModel, Reconstruction};
use crate::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Divergence {
    /// KL divergence, i.e. the ordinary log-likelihood ELBO.
    Standard,
    /// β-divergence with the given β > 0.
    Beta(f64),
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Standard => f.write_str("standard"),
            Divergence::Beta(b) => write!(f, "beta({b})"),
        }
    }
}

impl FromStr for Divergence {
    type Err = Error;

    /// Accepts `standard`, `kl` or `beta(<value>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("standard") || s.eq_ignore_ascii_case("kl") {
            return Ok(Divergence::Standard);
        }
        let inner = s
            .strip_prefix("beta(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown divergence {s:?}")))?;
        let beta: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad beta value {inner:?}")))?;
        Ok(Divergence::Beta(beta))
    }
}

/// Observation model × divergence, with hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub obs_model: ObsModel,
    pub divergence: Divergence,
    /// Standard deviation of the Gaussian observation model.
    pub sigma: f64,
}

impl LossSpec {
    pub fn new(obs_model: ObsModel, divergence: Divergence, sigma: f64) -> Result<Self> {
        if let Divergence::Beta(b) = divergence {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Invalid(format!("beta must be positive, got {b}")));
            }
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            obs_model,
            divergence,
            sigma,
        })
    }

    pub fn standard(obs_model: ObsModel) -> Self {
        Self {
            obs_model,
            divergence: Divergence::Standard,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn beta(obs_model: ObsModel, beta: f64) -> Result<Self> {
        Self::new(obs_model, Divergence::Beta(beta), DEFAULT_SIGMA)
    }

    pub fn beta_value(&self) -> Option<f64> {
        match self.divergence {
            Divergence::Standard => None,
            Divergence::Beta(b) => Some(b),
        }
    }
}

/// Graph nodes of a loss evaluation (all scalars).
#[derive(Clone, Copy, Debug)]
pub struct LossTerms<'g> {
    pub total: Var<'g>,
    pub recon: Var<'g>,
    pub kl: Var<'g>,
}

impl LossTerms<'_> {
    pub fn value(&self) -> LossValue {
        LossValue {
            total: self.total.item(),
            recon: self.recon.item(),
            kl: self.kl.item(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Per-record `½ Σ_l (μ² + σ² − 1 − log σ²)`, shape `[batch]`.
pub fn kl_per_record<'g>(post: &LatentPosterior<'g>) -> Result<Var<'g>> {
    let (mu, logvar) = (post.mu, post.logvar);
    if mu.shape() != logvar.shape() {
        return Err(Error::ArchMismatch(format!(
            "posterior mean {:?} and log-variance {:?} differ in shape",
            mu.shape(),
            logvar.shape()
        )));
    }
    if !(mu.value().is_finite() && logvar.value().is_finite()) {
        return Err(Error::Invalid("posterior contains non-finite values".into()));
    }
    let terms = mu.pow_scalar(2.0)?.add(logvar.exp()?)?.sub(logvar)?.offset(-1.0)?;
    Ok(terms.sum_axis(1)?.scale(0.5)?)
}

/// Closed-form `KL(q(z|x) ‖ N(0, I))`, averaged over the batch.
pub fn kl_to_std_normal<'g>(post: &LatentPosterior<'g>) -> Result<Var<'g>> {
    Ok(kl_per_record(post)?.mean()?)
}

fn check_pair(x: Var<'_>, out: Var<'_>) -> Result<()> {
    if x.shape() != out.shape() {
        return Err(Error::ArchMismatch(format!(
            "data shape {:?} does not match reconstruction shape {:?}",
            x.shape(),
            out.shape()
        )));
    }
    Ok(())
}

fn check_binary(x: Var<'_>) -> Result<()> {
    if x.value().data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data(
            "the Bernoulli β-ELBO needs binary data; binarize the dataset first".into(),
        ));
    }
    Ok(())
}

fn batch_mean(per_record: Var<'_>) -> Result<Var<'_>> {
    Ok(per_record.mean()?)
}

fn clamped_probs(out: Var<'_>) -> Result<Var<'_>> {
    Ok(out.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)?)
}

fn finish<'g>(recon: Var<'g>, post: &LatentPosterior<'g>) -> Result<LossTerms<'g>> {
    let kl = kl_to_std_normal(post)?;
    let total = recon.add(kl)?;
    Ok(LossTerms { total, recon, kl })
}

/// SGVB estimate of `−ELBO` with one latent sample per record.
pub fn elbo_standard<'g>(
    x: Var<'g>,
    recon: &Reconstruction<'g>,
    post: &LatentPosterior<'g>,
    spec: &LossSpec,
) -> Result<LossTerms<'g>> {
    if spec.divergence != Divergence::Standard {
        return Err(Error::Invalid(format!(
            "elbo_standard called with divergence {}",
            spec.divergence
        )));
    }
    check_pair(x, recon.out)?;
    let per_record = match spec.obs_model {
        ObsModel::Bernoulli => {
            let p = clamped_probs(recon.out)?;
            let g = x.graph();
            let not_x = g.constant(x.value().map(|v| 1.0 - v));
            let ll = x.mul(p.log()?)?.add(not_x.mul(p.neg()?.offset(1.0)?.log()?)?)?;
            ll.sum_axis(1)?.neg()?
        }
        ObsModel::Gaussian => {
            let s2 = spec.sigma * spec.sigma;
            let d = x.shape()[1] as f64;
            let sq = recon.out.sub(x)?.pow_scalar(2.0)?.sum_axis(1)?;
            sq.scale(0.5 / s2)?.offset(0.5 * d * (2.0 * PI * s2).ln())?
        }
    };
    finish(batch_mean(per_record)?, post)
}

/// `−L_β` for Bernoulli pixels:
///
/// `H_β = −(β+1)/β · (∏_d q_d^β − 1) + ∏_d (p_d^{β+1} + (1−p_d)^{β+1})`
/// with `q_d = p_d` where `x_d = 1` and `1 − p_d` where `x_d = 0`.
pub fn beta_elbo_bernoulli<'g>(
    x: Var<'g>,
    recon: &Reconstruction<'g>,
    post: &LatentPosterior<'g>,
    beta: f64,
) -> Result<LossTerms<'g>> {
    check_beta(beta)?;
    check_pair(x, recon.out)?;
    check_binary(x)?;
    let g = x.graph();
    let p = clamped_probs(recon.out)?;
    let one_minus_p = p.neg()?.offset(1.0)?;
    let not_x = g.constant(x.value().map(|v| 1.0 - v));

    let q = x.mul(p)?.add(not_x.mul(one_minus_p)?)?;
    let likelihood_pow = q.log()?.sum_axis(1)?.scale(beta)?.exp()?;
    let fit = likelihood_pow.offset(-1.0)?.scale((beta + 1.0) / beta)?;

    let power_sum = p
        .pow_scalar(beta + 1.0)?
        .add(one_minus_p.pow_scalar(beta + 1.0)?)?
        .log()?
        .sum_axis(1)?
        .exp()?;

    let per_record = power_sum.sub(fit)?;
    finish(batch_mean(per_record)?, post)
}

/// `−L_β` for Gaussian pixels with fixed `σ`:
///
/// `(β+1)/β · (1 − (2πσ²)^{−βD/2} exp(−β/(2σ²) Σ_d (x̂_d − x_d)²))`
///
/// The `∫ N^{β+1}` term is dropped; it does not depend on `x̂` while `σ` is fixed.
pub fn beta_elbo_gaussian<'g>(
    x: Var<'g>,
    recon: &Reconstruction<'g>,
    post: &LatentPosterior<'g>,
    beta: f64,
    sigma: f64,
) -> Result<LossTerms<'g>> {
    check_beta(beta)?;
    if !(sigma > 0.0) {
        return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
    }
    check_pair(x, recon.out)?;
    let s2 = sigma * sigma;
    let d = x.shape()[1] as f64;
    let sq = recon.out.sub(x)?.pow_scalar(2.0)?.sum_axis(1)?;
    let log_density_pow = sq
        .scale(-beta / (2.0 * s2))?
        .offset(-0.5 * beta * d * (2.0 * PI * s2).ln())?;
    let fit = log_density_pow.exp()?.offset(-1.0)?.scale((beta + 1.0) / beta)?;
    finish(batch_mean(fit.neg()?)?, post)
}

/// Dispatches on `spec`.
pub fn loss<'g>(
    spec: &LossSpec,
    x: Var<'g>,
    recon: &Reconstruction<'g>,
    post: &LatentPosterior<'g>,
) -> Result<LossTerms<'g>> {
    match (spec.divergence, spec.obs_model) {
        (Divergence::Standard, _) => elbo_standard(x, recon, post, spec),
        (Divergence::Beta(b), ObsModel::Bernoulli) => beta_elbo_bernoulli(x, recon, post, b),
        (Divergence::Beta(b), ObsModel::Gaussian) => beta_elbo_gaussian(x, recon, post, b, spec.sigma),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("beta must be positive, got {beta}")))
    }
}

/// `∏_d (p_d^{β+1} + (1−p_d)^{β+1})`, i.e. `Σ_x p(x)^{β+1}` over binary `x`.
pub fn bernoulli_power_sum(p: &[f64], beta: f64) -> f64 {
    p.iter()
        .map(|&pd| (pd.powf(beta + 1.0) + (1.0 - pd).powf(beta + 1.0)).ln())
        .sum::<f64>()
        .exp()
}

/// `∫ N(x; m, σ² I_D)^{β+1} dx = (2πσ²)^{−βD/2} (β+1)^{−D/2}`.
pub fn gaussian_power_integral(sigma: f64, beta: f64, dim: usize) -> f64 {
    let d = dim as f64;
    (-0.5 * beta * d * (2.0 * PI * sigma * sigma).ln() - 0.5 * d * (beta + 1.0).ln()).exp()
}

/// β-cross-entropy between the point mass at binary `x` and independent
/// Bernoulli(`p`) pixels.
pub fn beta_cross_entropy_bernoulli(x: &[f64], p: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if x.len() != p.len() {
        return Err(Error::ArchMismatch(format!("{} pixels vs {} probabilities", x.len(), p.len())));
    }
    if x.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("x must be binary".into()));
    }
    let p: Vec<f64> = p.iter().map(|v| v.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)).collect();
    let log_lik: f64 = x
        .iter()
        .zip(&p)
        .map(|(&xd, &pd)| if xd == 1.0 { pd.ln() } else { (1.0 - pd).ln() })
        .sum();
    let fit = (beta + 1.0) / beta * ((beta * log_lik).exp() - 1.0);
    Ok(bernoulli_power_sum(&p, beta) - fit)
}

/// β-cross-entropy between the point mass at `x` and `N(x̂, σ² I)`,
/// including the `∫ N^{β+1}` term.
pub fn beta_cross_entropy_gaussian(x: &[f64], xhat: &[f64], beta: f64, sigma: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(sigma > 0.0) {
        return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
    }
    if x.len() != xhat.len() {
        return Err(Error::ArchMismatch(format!("{} pixels vs {} means", x.len(), xhat.len())));
    }
    let d = x.len() as f64;
    let s2 = sigma * sigma;
    let sq: f64 = x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum();
    if !sq.is_finite() {
        return Err(Error::Invalid("squared error is not finite".into()));
    }
    let density_pow = (-0.5 * beta * d * (2.0 * PI * s2).ln() - beta * sq / (2.0 * s2)).exp();
    let fit = (beta + 1.0) / beta * (density_pow - 1.0);
    Ok(gaussian_power_integral(sigma, beta, x.len()) - fit)
}

/// Evaluates `spec`'s loss on fixed data, probabilities and posterior
/// parameters without any trainable leaves. Handy for checks and reports.
pub fn evaluate(spec: &LossSpec, x: &Tensor, out: &Tensor, mu: &Tensor, logvar: &Tensor) -> Result<LossValue> {
    let g = Graph::new();
    let post = LatentPosterior {
        mu: g.constant(mu.clone()),
        logvar: g.constant(logvar.clone()),
    };
    let recon = Reconstruction {
        out: g.constant(out.clone()),
    };
    Ok(loss(spec, g.constant(x.clone()), &recon, &post)?.value())
}

//! Fitting one univariate Gaussian to contaminated samples, by maximum
//! likelihood and by minimizing the empirical β-cross-entropy
//!
//! ```text
//! H(μ, σ) = −(β+1)/(β n) · Σ_i (N(x_i; μ, σ)^β − 1) + (2πσ²)^{−β/2} (β+1)^{−1/2}
//! ```
//!
//! Each summand lies in `[−(β+1)/(βn)·(sup N^β − 1), (β+1)/(βn)]`, so a single
//! far-away sample cannot drag the fit; the sample mean has no such bound.

use std::fmt::{self, Write as _};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::divergences::gaussian_power_integral;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Floor applied to fitted standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitMethod {
    Mle,
    Beta(f64),
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitMethod::Mle => f.write_str("mle"),
            FitMethod::Beta(b) => write!(f, "beta({b})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub mu: f64,
    pub sigma: f64,
    /// Objective after every accepted step; the first entry is at the start.
    pub objective_trace: Vec<f64>,
    pub method: FitMethod,
}

/// Two-component mixture `w·N(m1, s1²) + (1−w)·N(m2, s2²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mixture {
    pub w: f64,
    pub m1: f64,
    pub s1: f64,
    pub m2: f64,
    pub s2: f64,
}

impl Default for Mixture {
    /// 0.9·N(0, 1) + 0.1·N(8, 1).
    fn default() -> Self {
        Self { w: 0.9, m1: 0.0, s1: 1.0, m2: 8.0, s2: 1.0 }
    }
}

impl Mixture {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Invalid(format!("mixture weight {} outside [0, 1]", self.w)));
        }
        if !(self.s1 > 0.0 && self.s2 > 0.0 && self.s1.is_finite() && self.s2.is_finite()) {
            return Err(Error::Invalid(format!("component scales must be positive, got {} and {}", self.s1, self.s2)));
        }
        if !(self.m1.is_finite() && self.m2.is_finite()) {
            return Err(Error::Invalid("component means must be finite".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.w * self.m1 + (1.0 - self.w) * self.m2
    }
}

/// `n` seeded draws; the flag marks draws from the second component.
pub fn sample_mixture(n: usize, mix: &Mixture, seed: u64) -> Result<(Vec<f64>, Vec<bool>)> {
    mix.validate()?;
    let mut rng = stream(seed, Stream::Mixture);
    let c1 = Normal::new(mix.m1, mix.s1).map_err(|e| Error::Invalid(e.to_string()))?;
    let c2 = Normal::new(mix.m2, mix.s2).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut xs = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for _ in 0..n {
        let second = rng.random::<f64>() >= mix.w;
        xs.push(if second { c2.sample(&mut rng) } else { c1.sample(&mut rng) });
        flags.push(second);
    }
    Ok((xs, flags))
}

fn check_samples(xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {}", xs.len())));
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::Data(format!("sample {x} is not finite")));
    }
    Ok(())
}

fn mean_neg_log_likelihood(xs: &[f64], mu: f64, sigma: f64) -> f64 {
    let n = xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - mu) * (x - mu)).sum();
    0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() + ss / (2.0 * sigma * sigma * n)
}

/// Sample mean and population standard deviation.
pub fn fit_gaussian_mle(xs: &[f64]) -> Result<FitResult> {
    check_samples(xs)?;
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    let mut sigma = var.sqrt();
    if sigma < SIGMA_FLOOR {
        log::warn!("samples are (nearly) identical; sigma floored at {SIGMA_FLOOR}");
        sigma = SIGMA_FLOOR;
    }
    Ok(FitResult {
        mu,
        sigma,
        objective_trace: vec![mean_neg_log_likelihood(xs, mu, sigma)],
        method: FitMethod::Mle,
    })
}

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let r = (x - mu) / sigma;
    (-0.5 * r * r).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Empirical β-cross-entropy of `N(μ, σ²)` against the samples.
pub fn beta_objective(xs: &[f64], beta: f64, mu: f64, sigma: f64) -> f64 {
    let n = xs.len() as f64;
    let s: f64 = xs.iter().map(|&x| normal_pdf(x, mu, sigma).powf(beta) - 1.0).sum();
    -(beta + 1.0) / (beta * n) * s + gaussian_power_integral(sigma, beta, 1)
}

/// Gradient of [`beta_objective`] with respect to `(μ, log σ)`.
pub fn beta_objective_grad(xs: &[f64], beta: f64, mu: f64, sigma: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let s2 = sigma * sigma;
    let (mut gm, mut gs) = (0.0, 0.0);
    for &x in xs {
        let r = x - mu;
        let w = normal_pdf(x, mu, sigma).powf(beta);
        gm += w * r / s2;
        gs += w * (r * r / s2 - 1.0);
    }
    let c = (beta + 1.0) / n;
    (-c * gm, -c * gs - beta * gaussian_power_integral(sigma, beta, 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaFitOptions {
    /// Starting point; the MLE when `None`.
    pub init: Option<(f64, f64)>,
    pub steps: usize,
    pub lr: f64,
}

impl Default for BetaFitOptions {
    fn default() -> Self {
        Self { init: None, steps: 2000, lr: 0.5 }
    }
}

/// Gradient descent on `(μ, log σ)`. A step that would raise the objective
/// is retried with half the learning rate, so the trace never increases.
pub fn fit_gaussian_beta(xs: &[f64], beta: f64, opts: &BetaFitOptions) -> Result<FitResult> {
    check_samples(xs)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("beta must be positive, got {beta}")));
    }
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return Err(Error::Invalid(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let (mut mu, sigma0) = match opts.init {
        Some(p) => p,
        None => {
            let m = fit_gaussian_mle(xs)?;
            (m.mu, m.sigma)
        }
    };
    if !(sigma0 > 0.0 && mu.is_finite()) {
        return Err(Error::Invalid(format!("bad starting point ({mu}, {sigma0})")));
    }
    let mut log_s = sigma0.ln();
    let mut f = beta_objective(xs, beta, mu, sigma0);
    let mut trace = vec![f];
    let mut lr = opts.lr;
    let diverged = |trace: &[f64]| {
        Error::NonFinite {
            what: format!("beta-fit objective (trace {trace:?})"),
            epoch: trace.len(),
            batch: 0,
        }
    };
    if !f.is_finite() {
        return Err(diverged(&trace));
    }
    for _ in 0..opts.steps {
        let (gm, gs) = beta_objective_grad(xs, beta, mu, log_s.exp());
        if !(gm.is_finite() && gs.is_finite()) {
            return Err(diverged(&trace));
        }
        if gm.hypot(gs) < 1e-12 {
            break;
        }
        let mut accepted = false;
        while lr > 1e-12 {
            let (m2, l2) = (mu - lr * gm, log_s - lr * gs);
            let f2 = beta_objective(xs, beta, m2, l2.exp());
            if f2.is_finite() && f2 <= f {
                (mu, log_s, f) = (m2, l2, f2);
                accepted = true;
                lr = (lr * 1.1).min(opts.lr);
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(f);
    }
    Ok(FitResult {
        mu,
        sigma: log_s.exp().max(SIGMA_FLOOR),
        objective_trace: trace,
        method: FitMethod::Beta(beta),
    })
}

/// `method,mu,sigma`
pub fn fit_demo_csv(fits: &[FitResult]) -> String {
    let mut s = String::from("method,mu,sigma\n");
    for f in fits {
        writeln!(s, "{},{},{}", f.method, f.mu, f.sigma).unwrap();
    }
    s
}

/// Histogram density of the samples next to each fitted density, evaluated
/// at bin centres: `x,empirical,<method>...`.
pub fn density_csv(xs: &[f64], fits: &[FitResult], bins: usize) -> Result<String> {
    check_samples(xs)?;
    if bins == 0 {
        return Err(Error::Invalid("need at least one bin".into()));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0usize; bins];
    for &x in xs {
        counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let mut s = String::from("x,empirical");
    for f in fits {
        write!(s, ",{}", f.method).unwrap();
    }
    s.push('\n');
    let n = xs.len() as f64;
    for (b, &c) in counts.iter().enumerate() {
        let x = lo + (b as f64 + 0.5) * width;
        write!(s, "{x},{}", c as f64 / (n * width)).unwrap();
        for f in fits {
            write!(s, ",{}", normal_pdf(x, f.mu, f.sigma)).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

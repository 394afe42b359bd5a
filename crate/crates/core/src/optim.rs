//! Adam and the minibatch training loop.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::Dataset;
use crate::diffcore::{Graph, Tensor};
use crate::divergences::{self, LossSpec, LossValue};
use crate::rng::{stream, Stream};
use crate::vaemodel::{reparameterize, Arch, VaeParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
            .unzip();
        Self { config, t: 0, m, v }
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.v[i]
    }

    /// One bias-corrected Adam update. Nothing is modified if any gradient
    /// is non-finite or mis-shaped.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Invalid(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.len() != self.m[i].len() {
                return Err(Error::Invalid(format!(
                    "tensor {i}: param shape {:?}, grad shape {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if let Some(bad) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "non-finite gradient in tensor {i} at element {bad}"
                )));
            }
        }

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub arch: Arch,
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub adam: AdamConfig,
    /// Save a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(arch: Arch, loss: LossSpec) -> Self {
        Self {
            arch,
            loss,
            epochs: 20,
            batch_size: 128,
            seed: 0,
            shuffle: true,
            adam: AdamConfig::default(),
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if self.arch.obs_model != self.loss.obs_model {
            return Err(Error::Invalid(format!(
                "model observes {} data but the loss is {}",
                self.arch.obs_model, self.loss.obs_model
            )));
        }
        LossSpec::new(self.loss.obs_model, self.loss.divergence, self.loss.sigma)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// `epoch,total,recon,kl,wall_ms`. With `timing` off the wall-clock
    /// column is written as 0 so reruns produce identical bytes.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut s = String::from("epoch,total,recon,kl,wall_ms\n");
        for e in &self.epochs {
            let ms = if timing { e.wall_ms } else { 0 };
            writeln!(s, "{},{:e},{:e},{:e},{}", e.epoch, e.total, e.recon, e.kl, ms).unwrap();
        }
        s
    }

    /// Same losses, ignoring wall-clock time.
    pub fn same_losses(&self, other: &TrainLog) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.total.to_bits() == b.total.to_bits()
                    && a.recon.to_bits() == b.recon.to_bits()
                    && a.kl.to_bits() == b.kl.to_bits()
            })
    }
}

/// Loss and parameter gradients for one minibatch with a given noise draw.
pub fn batch_gradients(params: &VaeParams, spec: &LossSpec, x: &Tensor, eps: &Tensor) -> Result<(LossValue, Vec<Tensor>)> {
    let g = Graph::new();
    let bound = params.bind(&g, true);
    let xv = g.constant(x.clone());
    let post = bound.encode(xv)?;
    let z = reparameterize(&post, eps)?;
    let recon = bound.decode(z)?;
    let terms = divergences::loss(spec, xv, &recon, &post)?;
    let value = terms.value();
    let grads = g.backward(terms.total)?;
    Ok((value, bound.vars().iter().map(|&v| grads.wrt(v)).collect()))
}

pub fn train(config: &TrainConfig, data: &Dataset) -> Result<(VaeParams, TrainLog)> {
    train_with(config, data, |_, _, _| Ok(()))
}

/// Trains and calls `on_epoch(epoch, params, log_row)` after every epoch.
///
/// The initialization, shuffling and reparameterization noise each draw
/// from their own stream derived from `config.seed`, so a run is fully
/// determined by `(config, data)`. The final short minibatch is kept.
pub fn train_with(
    config: &TrainConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(usize, &VaeParams, &EpochLog) -> Result<()>,
) -> Result<(VaeParams, TrainLog)> {
    config.validate()?;
    if data.dim() != config.arch.input_dim {
        return Err(Error::ArchMismatch(format!(
            "dataset has {} pixels per record, model expects {}",
            data.dim(),
            config.arch.input_dim
        )));
    }
    if data.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }

    let mut params = VaeParams::init(config.arch, config.seed)?;
    let mut adam = AdamState::new(config.adam, params.tensors());
    let mut shuffle_rng = stream(config.seed, Stream::Shuffle);
    let mut noise_rng = stream(config.seed, Stream::Noise);
    let latent = config.arch.latent_dim;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let (mut total, mut recon, mut kl) = (0.0, 0.0, 0.0);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let x = data.images.gather_rows(idx);
            let eps = Tensor::matrix(
                idx.len(),
                latent,
                (0..idx.len() * latent).map(|_| StandardNormal.sample(&mut noise_rng)).collect(),
            )?;
            let non_finite = |what: String| Error::NonFinite { what, epoch, batch };
            let (value, grads) = batch_gradients(&params, &config.loss, &x, &eps).map_err(|e| match e {
                Error::Diff(d) => non_finite(d.to_string()),
                other => other,
            })?;
            if !(value.total.is_finite() && value.recon.is_finite() && value.kl.is_finite()) {
                return Err(non_finite(format!("loss ({value:?})")));
            }
            adam.step(&mut params.tensors_mut(), &grads)
                .map_err(|e| non_finite(e.to_string()))?;
            let w = idx.len() as f64;
            total += value.total * w;
            recon += value.recon * w;
            kl += value.kl * w;
        }
        let n = data.len() as f64;
        let row = EpochLog {
            epoch,
            total: total / n,
            recon: recon / n,
            kl: kl / n,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        log::debug!("epoch {epoch}: total {:.5} recon {:.5} kl {:.5}", row.total, row.recon, row.kl);
        on_epoch(epoch, &params, &row)?;
        log.epochs.push(row);
    }
    Ok((params, log))
}

//! MLP encoder/decoder pair with a diagonal-Gaussian latent.
//!
//! Both sides have a single ReLU hidden layer. The decoder always ends in a
//! sigmoid: for the Bernoulli model the outputs are pixel probabilities, for
//! the Gaussian model they are the means of unit-variance pixels in `[0, 1]`.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::diffcore::{Graph, Tensor, Var};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 400;
pub const DEFAULT_LATENT: usize = 20;

/// Observation model `p(x | z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsModel {
    Bernoulli,
    Gaussian,
}

impl fmt::Display for ObsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObsModel::Bernoulli => "bernoulli",
            ObsModel::Gaussian => "gaussian",
        })
    }
}

impl FromStr for ObsModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(ObsModel::Bernoulli),
            "gaussian" => Ok(ObsModel::Gaussian),
            other => Err(Error::Config(format!(
                "unknown observation model {other:?} (expected bernoulli or gaussian)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arch {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub obs_model: ObsModel,
}

impl Arch {
    pub fn new(input_dim: usize, hidden_dim: usize, latent_dim: usize, obs_model: ObsModel) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || latent_dim == 0 {
            return Err(Error::Invalid(format!(
                "architecture dimensions must be positive, got D={input_dim} H={hidden_dim} L={latent_dim}"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            latent_dim,
            obs_model,
        })
    }

    /// Shapes of the ten parameter tensors, in [`VaeParams::tensors`] order.
    pub fn shapes(&self) -> [Vec<usize>; 10] {
        let (d, h, l) = (self.input_dim, self.hidden_dim, self.latent_dim);
        [
            vec![d, h],
            vec![h],
            vec![h, l],
            vec![l],
            vec![h, l],
            vec![l],
            vec![l, h],
            vec![h],
            vec![h, d],
            vec![d],
        ]
    }
}

pub const PARAM_NAMES: [&str; 10] = [
    "enc_w1",
    "enc_b1",
    "enc_w_mu",
    "enc_b_mu",
    "enc_w_logvar",
    "enc_b_logvar",
    "dec_w1",
    "dec_b1",
    "dec_w_out",
    "dec_b_out",
];

/// All weights and biases. Weights are stored `fan_in × fan_out` so a batch
/// of row vectors multiplies on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeParams {
    pub arch: Arch,
    pub enc_w1: Tensor,
    pub enc_b1: Tensor,
    pub enc_w_mu: Tensor,
    pub enc_b_mu: Tensor,
    pub enc_w_logvar: Tensor,
    pub enc_b_logvar: Tensor,
    pub dec_w1: Tensor,
    pub dec_b1: Tensor,
    pub dec_w_out: Tensor,
    pub dec_b_out: Tensor,
}

impl VaeParams {
    /// Weights ~ U(−1/√fan_in, 1/√fan_in), biases zero.
    pub fn init(arch: Arch, seed: u64) -> Result<Self> {
        let arch = Arch::new(arch.input_dim, arch.hidden_dim, arch.latent_dim, arch.obs_model)?;
        let mut rng = stream(seed, Stream::Init);
        let tensors = arch.shapes().map(|shape| {
            if shape.len() == 1 {
                Tensor::zeros(&shape)
            } else {
                let a = 1.0 / (shape[0] as f64).sqrt();
                let n = shape[0] * shape[1];
                let data = (0..n).map(|_| rng.random_range(-a..=a)).collect();
                Tensor::new(&shape, data).expect("shape from arch")
            }
        });
        Self::from_tensors(arch, tensors)
    }

    pub fn zeros(arch: Arch) -> Self {
        Self::from_tensors(arch, arch.shapes().map(|s| Tensor::zeros(&s))).expect("shapes from arch")
    }

    pub fn from_tensors(arch: Arch, t: [Tensor; 10]) -> Result<Self> {
        for ((tensor, shape), name) in t.iter().zip(arch.shapes()).zip(PARAM_NAMES) {
            if tensor.shape() != shape.as_slice() {
                return Err(Error::ArchMismatch(format!(
                    "{name} has shape {:?}, architecture needs {shape:?}",
                    tensor.shape()
                )));
            }
            if !tensor.is_finite() {
                return Err(Error::Checkpoint(format!("{name} contains non-finite entries")));
            }
        }
        let [enc_w1, enc_b1, enc_w_mu, enc_b_mu, enc_w_logvar, enc_b_logvar, dec_w1, dec_b1, dec_w_out, dec_b_out] = t;
        Ok(Self {
            arch,
            enc_w1,
            enc_b1,
            enc_w_mu,
            enc_b_mu,
            enc_w_logvar,
            enc_b_logvar,
            dec_w1,
            dec_b1,
            dec_w_out,
            dec_b_out,
        })
    }

    pub fn tensors(&self) -> [&Tensor; 10] {
        [
            &self.enc_w1,
            &self.enc_b1,
            &self.enc_w_mu,
            &self.enc_b_mu,
            &self.enc_w_logvar,
            &self.enc_b_logvar,
            &self.dec_w1,
            &self.dec_b1,
            &self.dec_w_out,
            &self.dec_b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 10] {
        [
            &mut self.enc_w1,
            &mut self.enc_b1,
            &mut self.enc_w_mu,
            &mut self.enc_b_mu,
            &mut self.enc_w_logvar,
            &mut self.enc_b_logvar,
            &mut self.dec_w1,
            &mut self.dec_b1,
            &mut self.dec_w_out,
            &mut self.dec_b_out,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Places every tensor on `graph`, trainable or constant.
    pub fn bind<'g>(&self, graph: &'g Graph, trainable: bool) -> BoundParams<'g> {
        let vars = self.tensors().map(|t| {
            if trainable {
                graph.param(t.clone())
            } else {
                graph.constant(t.clone())
            }
        });
        BoundParams {
            arch: self.arch,
            vars,
        }
    }

    /// Posterior mean and log-variance for each row of `x`.
    pub fn encode_values(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let g = Graph::new();
        let p = self.bind(&g, false);
        let post = p.encode(g.constant(x.clone()))?;
        Ok((post.mu.value(), post.logvar.value()))
    }

    pub fn decode_values(&self, z: &Tensor) -> Result<Tensor> {
        let g = Graph::new();
        let p = self.bind(&g, false);
        Ok(p.decode(g.constant(z.clone()))?.out.value())
    }

    /// Decoder output at the posterior mean (`eps = 0`).
    pub fn reconstruct_mean(&self, x: &Tensor) -> Result<Tensor> {
        let (mu, _) = self.encode_values(x)?;
        self.decode_values(&mu)
    }
}

/// [`VaeParams`] placed on a graph.
pub struct BoundParams<'g> {
    pub arch: Arch,
    vars: [Var<'g>; 10],
}

#[derive(Clone, Copy, Debug)]
pub struct LatentPosterior<'g> {
    pub mu: Var<'g>,
    pub logvar: Var<'g>,
}

/// Decoder output: Bernoulli probabilities or Gaussian means.
#[derive(Clone, Copy, Debug)]
pub struct Reconstruction<'g> {
    pub out: Var<'g>,
}

impl<'g> BoundParams<'g> {
    pub fn vars(&self) -> &[Var<'g>; 10] {
        &self.vars
    }

    fn check_cols(&self, v: Var<'g>, want: usize, what: &str) -> Result<()> {
        let shape = v.shape();
        if shape.len() != 2 || shape[1] != want {
            return Err(Error::ArchMismatch(format!(
                "{what} has shape {shape:?}, model expects {want} columns"
            )));
        }
        Ok(())
    }

    pub fn encode(&self, x: Var<'g>) -> Result<LatentPosterior<'g>> {
        self.check_cols(x, self.arch.input_dim, "encoder input")?;
        let [w1, b1, w_mu, b_mu, w_lv, b_lv, ..] = self.vars;
        let h = x.matmul(w1)?.add_row(b1)?.relu()?;
        let mu = h.matmul(w_mu)?.add_row(b_mu)?;
        let logvar = h.matmul(w_lv)?.add_row(b_lv)?;
        Ok(LatentPosterior { mu, logvar })
    }

    pub fn decode(&self, z: Var<'g>) -> Result<Reconstruction<'g>> {
        self.check_cols(z, self.arch.latent_dim, "latent code")?;
        let [.., w1, b1, w_out, b_out] = self.vars;
        let h = z.matmul(w1)?.add_row(b1)?.relu()?;
        let out = h.matmul(w_out)?.add_row(b_out)?.sigmoid()?;
        Ok(Reconstruction { out })
    }
}

/// `z = mu + exp(logvar / 2) ⊙ eps`; `eps` enters as a constant.
pub fn reparameterize<'g>(post: &LatentPosterior<'g>, eps: &Tensor) -> Result<Var<'g>> {
    let shape = post.mu.shape();
    if eps.shape() != shape.as_slice() {
        return Err(Error::ArchMismatch(format!(
            "noise has shape {:?}, posterior has {shape:?}",
            eps.shape()
        )));
    }
    let g = post.mu.graph();
    let std = post.logvar.scale(0.5)?.exp()?;
    Ok(post.mu.add(std.mul(g.constant(eps.clone()))?)?)
}

//! Choosing β by probing trained models with fake outliers.
//!
//! For each candidate model, reconstruct a batch of Gaussian-noise images
//! and draw the same number of decoder samples from the prior. A model
//! that maps noise onto something indistinguishable from its own samples,
//! while the samples still vary, is ignoring the outlier. The grids are the
//! primary output. The two numbers in the summary are a heuristic aid:
//!
//! - `proxy_score`: mean distance from each noise reconstruction to its
//!   nearest decoder sample (small = indistinguishable).
//! - `variability`: mean pairwise distance between decoder samples
//!   (near 0 = collapsed decoder).
//!
//! Distances are root-mean-square over pixels.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};

use crate::dataio::noise_images;
use crate::diffcore::Tensor;
use crate::evalkit::{emit_image_grid, image_grid_pgm};
use crate::rng::{stream, Stream};
use crate::vaemodel::{ObsModel, VaeParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub beta: f64,
    /// Noise inputs as fed to the model (binarized for Bernoulli models).
    pub noise: Tensor,
    pub reconstructions: Tensor,
    pub samples: Tensor,
    pub proxy_score: f64,
    pub variability: f64,
}

impl ProbeResult {
    /// Two-row PGM: reconstructions on top, decoder samples below.
    pub fn grid(&self) -> Result<Vec<u8>> {
        image_grid_pgm(&self.stacked(), self.samples.rows())
    }

    fn stacked(&self) -> Tensor {
        let mut data = self.reconstructions.data().to_vec();
        data.extend_from_slice(self.samples.data());
        Tensor::matrix(2 * self.samples.rows(), self.samples.cols(), data).expect("matching shapes")
    }
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Mean nearest-neighbour distance from rows of `a` to rows of `b`.
pub fn nearest_neighbor_distance(a: &Tensor, b: &Tensor) -> f64 {
    let total: f64 = (0..a.rows())
        .map(|i| (0..b.rows()).map(|j| rms(a.row(i), b.row(j))).fold(f64::INFINITY, f64::min))
        .sum();
    total / a.rows() as f64
}

/// Mean distance over unordered pairs of distinct rows; 0 for a single row.
pub fn mean_pairwise_distance(a: &Tensor) -> f64 {
    let n = a.rows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += rms(a.row(i), a.row(j));
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Probes every `(β, model)` pair with the same noise images and latent draws.
pub fn probe(models: &[(f64, VaeParams)], n_probe: usize, seed: u64) -> Result<Vec<ProbeResult>> {
    if n_probe == 0 {
        return Err(Error::Invalid("n_probe must be at least 1".into()));
    }
    let Some((_, first)) = models.first() else {
        return Err(Error::Invalid("probe needs at least one model".into()));
    };
    let arch = first.arch;
    if let Some((b, m)) = models.iter().find(|(_, m)| m.arch != arch) {
        return Err(Error::ArchMismatch(format!(
            "model for beta {b} has {:?}, the first model has {arch:?}",
            m.arch
        )));
    }
    let mut rng = stream(seed, Stream::Probe);
    let mut noise = noise_images(n_probe, arch.input_dim, &mut rng);
    if arch.obs_model == ObsModel::Bernoulli {
        let max = noise.data().iter().copied().fold(0.0, f64::max);
        noise = noise.map(|v| if v >= 0.5 * max { 1.0 } else { 0.0 });
    }
    let z = Tensor::matrix(
        n_probe,
        arch.latent_dim,
        (0..n_probe * arch.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
    )?;
    models
        .iter()
        .map(|(beta, params)| {
            let reconstructions = params.reconstruct_mean(&noise)?;
            let samples = params.decode_values(&z)?;
            Ok(ProbeResult {
                beta: *beta,
                proxy_score: nearest_neighbor_distance(&reconstructions, &samples),
                variability: mean_pairwise_distance(&samples),
                noise: noise.clone(),
                reconstructions,
                samples,
            })
        })
        .collect()
}

/// `beta,proxy_score,variability`
pub fn summary_csv(results: &[ProbeResult]) -> String {
    let mut s = String::from("beta,proxy_score,variability\n");
    for r in results {
        writeln!(s, "{},{},{}", r.beta, r.proxy_score, r.variability).unwrap();
    }
    s
}

/// Writes `probe_beta_<β>.pgm` per model and `probe_summary.csv`.
pub fn write_probe(dir: impl AsRef<Path>, results: &[ProbeResult]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for r in results {
        let path = dir.join(format!("probe_beta_{}.pgm", r.beta));
        emit_image_grid(&r.stacked(), r.samples.rows(), &path)?;
        written.push(path);
    }
    let path = dir.join("probe_summary.csv");
    std::fs::write(&path, summary_csv(results)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vaemodel::Arch;

    fn arch() -> Arch {
        Arch::new(16, 8, 2, ObsModel::Bernoulli).unwrap()
    }

    #[test]
    fn distance_helpers() {
        let a = Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let b = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(nearest_neighbor_distance(&a, &b), 0.5);
        assert_eq!(mean_pairwise_distance(&a), 1.0);
        assert_eq!(mean_pairwise_distance(&b), 0.0);
    }

    #[test]
    fn identical_models_give_identical_grids() {
        let m = VaeParams::init(arch(), 3).unwrap();
        let r = probe(&[(0.1, m.clone()), (0.2, m)], 4, 9).unwrap();
        assert_eq!(r[0].grid().unwrap(), r[1].grid().unwrap());
        assert_eq!(r[0].proxy_score, r[1].proxy_score);
        let again = probe(&[(0.1, VaeParams::init(arch(), 3).unwrap())], 4, 9).unwrap();
        assert_eq!(again[0], r[0]);
    }

    #[test]
    fn collapsed_decoder_has_no_variability() {
        // All-zero weights decode every z to the same image.
        let r = probe(&[(0.5, VaeParams::zeros(arch()))], 6, 0).unwrap();
        assert_eq!(r[0].variability, 0.0);
        assert!(r[0].noise.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn noise_mapped_outside_the_prior_scores_high() {
        // Shift every posterior mean to z = 10: reconstructions then come
        // from a region the prior never samples.
        let a = Arch::new(64, 32, 2, ObsModel::Bernoulli).unwrap();
        for seed in 0..5 {
            let base = VaeParams::init(a, seed).unwrap();
            let mut shifted = base.clone();
            shifted.enc_b_mu = Tensor::full(&[2], 10.0);
            let r = probe(&[(0.0, base), (0.0, shifted)], 16, seed).unwrap();
            assert!(r[1].proxy_score > r[1].variability, "{} vs {}", r[1].proxy_score, r[1].variability);
            assert!(r[1].proxy_score > r[0].proxy_score);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = VaeParams::init(arch(), 0).unwrap();
        let other = VaeParams::init(Arch::new(16, 4, 2, ObsModel::Bernoulli).unwrap(), 0).unwrap();
        assert!(matches!(probe(&[(0.1, m.clone()), (0.2, other)], 2, 0), Err(Error::ArchMismatch(_))));
        assert!(probe(&[(0.1, m)], 0, 0).is_err());
        assert!(probe(&[], 2, 0).is_err());
    }

    #[test]
    fn writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let r = probe(&[(0.01, VaeParams::init(arch(), 0).unwrap())], 3, 0).unwrap();
        let files = write_probe(dir.path(), &r).unwrap();
        assert!(files[0].ends_with("probe_beta_0.01.pgm"));
        let csv = std::fs::read_to_string(&files[1]).unwrap();
        assert!(csv.starts_with("beta,proxy_score,variability\n0.01,"));
    }
}

// Build the β-ELBO on a tiny batch, backpropagate, and compare a few
// parameter gradients with central finite differences. Also shows the
// Bernoulli normalizer against brute-force enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rvae::diffcore::Tensor;
use rvae::divergences::{bernoulli_power_sum, LossSpec};
use rvae::optim::batch_gradients;
use rvae::vaemodel::{Arch, ObsModel, VaeParams};

/// Largest relative gradient error over the probed coordinates.
pub fn run(beta: f64) -> rvae::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let arch = Arch::new(6, 5, 2, ObsModel::Bernoulli)?;
    let mut params = VaeParams::init(arch, 1)?;
    let spec = LossSpec::beta(ObsModel::Bernoulli, beta)?;
    let x = Tensor::matrix(4, 6, (0..24).map(|_| f64::from(rng.random_range(0..2u8))).collect())?;
    let eps = Tensor::matrix(4, 2, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())?;

    let (value, grads) = batch_gradients(&params, &spec, &x, &eps)?;
    println!("loss {:.6} (recon {:.6}, kl {:.6})", value.total, value.recon, value.kl);

    let h = 1e-6;
    let mut worst = 0.0f64;
    for (t, name) in rvae::vaemodel::PARAM_NAMES.iter().enumerate() {
        let i = grads[t].len() / 2;
        let orig = params.tensors()[t].data()[i];
        params.tensors_mut()[t].data_mut()[i] = orig + h;
        let up = batch_gradients(&params, &spec, &x, &eps)?.0.total;
        params.tensors_mut()[t].data_mut()[i] = orig - h;
        let down = batch_gradients(&params, &spec, &x, &eps)?.0.total;
        params.tensors_mut()[t].data_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let an = grads[t].data()[i];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
        worst = worst.max(rel);
        println!("{name:>14}[{i}]  autodiff {an:+.8e}  fd {fd:+.8e}  rel {rel:.1e}");
    }
    Ok(worst)
}

fn enumerate(p: &[f64], beta: f64) -> f64 {
    (0u32..1 << p.len())
        .map(|m| {
            p.iter()
                .enumerate()
                .map(|(i, &pi)| if m >> i & 1 == 1 { pi } else { 1.0 - pi })
                .product::<f64>()
                .powf(beta + 1.0)
        })
        .sum()
}

fn main() -> rvae::Result<()> {
    let worst = run(0.05)?;
    println!("worst relative error {worst:.1e}");
    let p = [0.1, 0.7, 0.45, 0.9, 0.3];
    println!("normalizer: product {:.12}  enumeration {:.12}", bernoulli_power_sum(&p, 0.05), enumerate(&p, 0.05));
    Ok(())
}

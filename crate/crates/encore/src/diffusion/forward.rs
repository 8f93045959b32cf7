use candle_core::Tensor;
use rand_chacha::ChaCha12Rng;

use crate::diffusion::schedule::DiffusionSchedule;
use crate::error::Result;
use crate::nn::params::randn_tensor;

/// Closed-form forward jump: z_t = √ᾱ_t z0 + √(1−ᾱ_t) ε.
pub fn q_sample(z0: &Tensor, t: usize, eps: &Tensor, sched: &DiffusionSchedule) -> Result<Tensor> {
    let ab = sched.alpha_bar_at(t)?;
    let out = ((z0 * ab.sqrt())? + (eps * (1.0 - ab).sqrt())?)?;
    Ok(out)
}

/// q_sample with ε drawn from `rng` as a standard normal of z0's shape.
/// Returns the noised latent together with the ε used, which the loss
/// needs as its regression target.
pub fn q_sample_rng(
    z0: &Tensor,
    t: usize,
    sched: &DiffusionSchedule,
    rng: &mut ChaCha12Rng,
) -> Result<(Tensor, Tensor)> {
    let eps = randn_tensor(rng, z0.dims())?;
    let z_t = q_sample(z0, t, &eps, sched)?;
    Ok((z_t, eps))
}

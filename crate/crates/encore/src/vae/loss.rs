use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::motion::MotionSequence;
use crate::vae::model::PosteriorParams;

/// Sum of squared errors between two same-shape tensors.
pub fn reconstruction_sum(x: &Tensor, x_hat: &Tensor) -> Result<Tensor> {
    Ok((x - x_hat)?.sqr()?.sum_all()?)
}

/// Closed-form KL(N(mu, sigma²) ‖ N(0, I)) summed over all elements:
/// ½ Σ (mu² + sigma² − 1 − 2 ln sigma).
pub fn kl_sum(mu: &Tensor, sigma: &Tensor) -> Result<Tensor> {
    let terms = (((mu.sqr()? + sigma.sqr()?)? - 1.0)? - (sigma.log()? * 2.0)?)?;
    Ok((terms.sum_all()? * 0.5)?)
}

/// Sequence-level VAE objective on raw frames. Returns
/// (L_rec, L_KL, L_rec + beta_kl·L_KL).
pub fn vae_loss(
    x: &MotionSequence,
    x_hat: &MotionSequence,
    p: &PosteriorParams,
    beta_kl: f64,
) -> Result<(f64, f64, f64)> {
    if x.t() != x_hat.t() {
        return Err(Error::ShapeMismatch(format!(
            "reconstruction has {} frames, input {}",
            x_hat.t(),
            x.t()
        )));
    }
    let rec: f64 = x
        .frames()
        .iter()
        .zip(x_hat.frames())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    let kl = kl_sum(&p.mu, &p.sigma)?.to_scalar::<f64>()?;
    let total = rec + beta_kl * kl;
    if !(rec.is_finite() && kl.is_finite() && total.is_finite()) {
        return Err(Error::NonFiniteLoss(format!("rec {rec}, kl {kl}")));
    }
    Ok((rec, kl, total))
}

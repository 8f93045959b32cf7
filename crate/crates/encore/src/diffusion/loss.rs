use candle_core::Tensor;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::diffusion::denoiser::NoisePredictor;
use crate::diffusion::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::nn::params::randn_tensor;

/// Deterministic loss core: the per-sample timesteps and the injected
/// noise are passed in explicitly, which keeps the computation a pure
/// function of tensors and so finite-difference checkable. Returns the
/// scalar mean of (ε̂ − ε)² over every latent element.
pub fn diffusion_loss_terms(
    den: &dyn NoisePredictor,
    z0: &Tensor,
    c: &Tensor,
    ts: &[usize],
    eps: &Tensor,
    sched: &DiffusionSchedule,
) -> Result<Tensor> {
    let (b, _, _) = z0.dims3()?;
    if ts.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "got {} timesteps for batch of {b}",
            ts.len()
        )));
    }
    if eps.dims() != z0.dims() {
        return Err(Error::ShapeMismatch(format!(
            "noise shape {:?} does not match latent {:?}",
            eps.dims(),
            z0.dims()
        )));
    }
    let mut signal = Vec::with_capacity(b);
    let mut noise = Vec::with_capacity(b);
    for &t in ts {
        let ab = sched.alpha_bar_at(t)?;
        signal.push(ab.sqrt());
        noise.push((1.0 - ab).sqrt());
    }
    let dev = z0.device();
    let signal = Tensor::from_vec(signal, (b, 1, 1), dev)?;
    let noise = Tensor::from_vec(noise, (b, 1, 1), dev)?;
    let z_t = (z0.broadcast_mul(&signal)? + eps.broadcast_mul(&noise)?)?;
    let eps_hat = den.predict(&z_t, ts, c)?;
    Ok((eps_hat - eps)?.sqr()?.mean_all()?)
}

/// Training objective: draws t uniformly from {1..T} and ε from N(0, I)
/// per batch element, then scores the denoiser's ε prediction.
pub fn diffusion_loss(
    den: &dyn NoisePredictor,
    z0: &Tensor,
    c: &Tensor,
    sched: &DiffusionSchedule,
    rng: &mut ChaCha12Rng,
) -> Result<Tensor> {
    let (b, _, _) = z0.dims3()?;
    let ts: Vec<usize> = (0..b)
        .map(|_| rng.random_range(1..=sched.t_steps))
        .collect();
    let eps = randn_tensor(rng, z0.dims())?;
    diffusion_loss_terms(den, z0, c, &ts, &eps, sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::conditioning::D_COND;
    use crate::diffusion::denoiser::{
        DenoiserConfig, FixedDenoiser, TransformerDenoiser, ZeroDenoiser,
    };
    use crate::nn::gradcheck::{fd_gradient, rel_err, stored_gradient};
    use crate::nn::params::ParamBuilder;
    use crate::rng::stream;

    #[test]
    fn zero_prediction_scores_one_per_element() {
        let sched = DiffusionSchedule::default_paper();
        let mut rng = stream(1, "test-loss-zero");
        let z0 = randn_tensor(&mut rng, &[16, 4, 16]).unwrap();
        let c = randn_tensor(&mut rng, &[16, 5, D_COND]).unwrap();
        let mut acc = 0.0;
        let reps = 8;
        for _ in 0..reps {
            let loss = diffusion_loss(&ZeroDenoiser, &z0, &c, &sched, &mut rng).unwrap();
            acc += loss.to_scalar::<f64>().unwrap();
        }
        let mean = acc / reps as f64;
        // E[ε²] = 1, averaged over 8×1024 draws.
        assert!((0.95..=1.05).contains(&mean), "mean loss {mean}");
    }

    #[test]
    fn exact_prediction_scores_zero() {
        let sched = DiffusionSchedule::default_paper();
        let mut rng = stream(2, "test-loss-exact");
        let z0 = randn_tensor(&mut rng, &[3, 4, 8]).unwrap();
        let c = randn_tensor(&mut rng, &[3, 5, D_COND]).unwrap();
        let eps = randn_tensor(&mut rng, &[3, 4, 8]).unwrap();
        let den = FixedDenoiser { eps: eps.clone() };
        let loss = diffusion_loss_terms(&den, &z0, &c, &[1, 400, 1000], &eps, &sched).unwrap();
        assert_eq!(loss.to_scalar::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn timestep_count_must_match_batch() {
        let sched = DiffusionSchedule::default_paper();
        let mut rng = stream(3, "test-loss-shape");
        let z0 = randn_tensor(&mut rng, &[2, 3, 4]).unwrap();
        let c = randn_tensor(&mut rng, &[2, 5, D_COND]).unwrap();
        let eps = randn_tensor(&mut rng, &[2, 3, 4]).unwrap();
        assert!(matches!(
            diffusion_loss_terms(&ZeroDenoiser, &z0, &c, &[1], &eps, &sched),
            Err(Error::ShapeMismatch(_))
        ));
        let bad_eps = randn_tensor(&mut rng, &[2, 3, 5]).unwrap();
        assert!(matches!(
            diffusion_loss_terms(&ZeroDenoiser, &z0, &c, &[1, 2], &bad_eps, &sched),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            diffusion_loss_terms(&ZeroDenoiser, &z0, &c, &[0, 2], &eps, &sched),
            Err(Error::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn analytic_gradient_matches_finite_difference() {
        let cfg = DenoiserConfig {
            d_z: 4,
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 24,
            d_cond: D_COND,
        };
        let pb = ParamBuilder::fresh(9, "test-loss-grad");
        let den = TransformerDenoiser::new(&pb.pp("den"), &cfg).unwrap();
        let sched = DiffusionSchedule::default_paper();
        let mut rng = stream(10, "test-loss-grad-data");
        let z0 = randn_tensor(&mut rng, &[2, 3, 4]).unwrap();
        let c = randn_tensor(&mut rng, &[2, 4, D_COND]).unwrap();
        let eps = randn_tensor(&mut rng, &[2, 3, 4]).unwrap();
        let ts = [7usize, 640];

        let den2 = den.clone();
        let (z02, c2, eps2) = (z0.clone(), c.clone(), eps.clone());
        let sched2 = sched.clone();
        let mut loss_fn = move || -> Result<Tensor> {
            diffusion_loss_terms(&den2, &z02, &c2, &ts, &eps2, &sched2)
        };
        let grads = loss_fn().unwrap().backward().unwrap();
        let vars = pb.vars();
        for (vi, idx) in [(0usize, 0usize), (3, 2), (9, 1), (vars.len() - 1, 0)] {
            let var = &vars[vi];
            let n = var.as_tensor().elem_count();
            let an = stored_gradient(&grads, var, idx % n).unwrap();
            let fd = fd_gradient(var, idx % n, 1e-5, &mut loss_fn).unwrap();
            assert!(
                rel_err(an, fd) < 1e-4 || (an.abs() < 1e-8 && fd.abs() < 1e-6),
                "var {vi} idx {idx}: analytic {an} vs fd {fd}"
            );
        }
    }
}

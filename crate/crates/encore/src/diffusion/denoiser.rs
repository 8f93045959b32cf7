use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::diffusion::conditioning::D_COND;
use crate::error::{Error, Result};
use crate::nn::layers::{
    scalar_sinusoidal_embedding, sinusoidal_positions, LayerNorm, Linear, TransformerLayer,
};
use crate::nn::params::ParamBuilder;

/// Anything that predicts the forward-process noise ε from a noised
/// latent, its timestep, and the conditioning rows.
pub trait NoisePredictor {
    /// `z_t` is (B, n_z, d_z); `t` holds one 1-based timestep per batch
    /// element; `c` is (B, T, D_COND). Output has z_t's shape.
    fn predict(&self, z_t: &Tensor, t: &[usize], c: &Tensor) -> Result<Tensor>;
}

/// Test stub that predicts no noise at all.
pub struct ZeroDenoiser;

impl NoisePredictor for ZeroDenoiser {
    fn predict(&self, z_t: &Tensor, _t: &[usize], _c: &Tensor) -> Result<Tensor> {
        Ok(z_t.zeros_like()?)
    }
}

/// Test stub that returns a fixed tensor, e.g. the exact ε that was mixed in.
pub struct FixedDenoiser {
    pub eps: Tensor,
}

impl NoisePredictor for FixedDenoiser {
    fn predict(&self, z_t: &Tensor, _t: &[usize], _c: &Tensor) -> Result<Tensor> {
        if self.eps.dims() != z_t.dims() {
            return Err(Error::ShapeMismatch(format!(
                "fixed noise shape {:?} does not match latent {:?}",
                self.eps.dims(),
                z_t.dims()
            )));
        }
        Ok(self.eps.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub d_z: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub d_cond: usize,
}

impl DenoiserConfig {
    pub fn for_latent(d_z: usize) -> Self {
        DenoiserConfig {
            d_z,
            d_model: 256,
            n_layers: 6,
            n_heads: 4,
            d_ff: 512,
            d_cond: D_COND,
        }
    }
}

/// Transformer over the n_z latent tokens with cross-attention into the
/// conditioning rows. The timestep enters as a sinusoidal embedding pushed
/// through a two-layer MLP and added to every token. A direct linear skip
/// from z_t to the output keeps the noised latent readable past the final
/// LayerNorm, the same role the input-to-output skip plays in U-Net
/// denoisers.
#[derive(Clone)]
pub struct TransformerDenoiser {
    in_proj: Linear,
    t_fc1: Linear,
    t_fc2: Linear,
    cond_proj: Linear,
    layers: Vec<TransformerLayer>,
    ln_f: LayerNorm,
    out_proj: Linear,
    skip_proj: Linear,
    cfg: DenoiserConfig,
}

impl TransformerDenoiser {
    pub fn new(pb: &ParamBuilder, cfg: &DenoiserConfig) -> Result<Self> {
        let in_proj = Linear::new(pb, "in_proj", cfg.d_z, cfg.d_model)?;
        let t_fc1 = Linear::new(pb, "t_fc1", cfg.d_model, cfg.d_model)?;
        let t_fc2 = Linear::new(pb, "t_fc2", cfg.d_model, cfg.d_model)?;
        let cond_proj = Linear::new(pb, "cond_proj", cfg.d_cond, cfg.d_model)?;
        let layers = (0..cfg.n_layers)
            .map(|i| {
                TransformerLayer::new(pb, &format!("layer{i}"), cfg.d_model, cfg.n_heads, cfg.d_ff, true)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransformerDenoiser {
            in_proj,
            t_fc1,
            t_fc2,
            cond_proj,
            layers,
            ln_f: LayerNorm::new(pb, "ln_f", cfg.d_model)?,
            out_proj: Linear::new(pb, "out_proj", cfg.d_model, cfg.d_z)?,
            skip_proj: Linear::new(pb, "skip_proj", cfg.d_z, cfg.d_z)?,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.cfg
    }
}

impl NoisePredictor for TransformerDenoiser {
    fn predict(&self, z_t: &Tensor, t: &[usize], c: &Tensor) -> Result<Tensor> {
        let (b, n_z, d_z) = z_t.dims3()?;
        if d_z != self.cfg.d_z {
            return Err(Error::ShapeMismatch(format!(
                "denoiser expects latent width {}, got {d_z}",
                self.cfg.d_z
            )));
        }
        if t.len() != b {
            return Err(Error::ShapeMismatch(format!(
                "got {} timesteps for batch of {b}",
                t.len()
            )));
        }
        let (cb, _, cd) = c.dims3()?;
        if cb != b || cd != self.cfg.d_cond {
            return Err(Error::ShapeMismatch(format!(
                "conditioning is {:?}, expected ({b}, _, {})",
                c.dims(),
                self.cfg.d_cond
            )));
        }
        let ts: Vec<f64> = t.iter().map(|&v| v as f64).collect();
        let temb = scalar_sinusoidal_embedding(&ts, self.cfg.d_model)?;
        let temb = self.t_fc2.forward(&self.t_fc1.forward(&temb)?.relu()?)?;
        let mut h = self.in_proj.forward(z_t)?;
        h = h.broadcast_add(&sinusoidal_positions(n_z, self.cfg.d_model)?)?;
        h = h.broadcast_add(&temb.unsqueeze(1)?)?;
        let mem = self.cond_proj.forward(c)?;
        for layer in &self.layers {
            h = layer.forward(&h, Some(&mem))?;
        }
        let main = self.out_proj.forward(&self.ln_f.forward(&h)?)?;
        Ok((main + self.skip_proj.forward(z_t)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::randn_tensor;
    use crate::rng::stream;

    fn tiny_cfg() -> DenoiserConfig {
        DenoiserConfig {
            d_z: 6,
            d_model: 16,
            n_layers: 2,
            n_heads: 2,
            d_ff: 32,
            d_cond: D_COND,
        }
    }

    fn build(seed: u64) -> TransformerDenoiser {
        let pb = ParamBuilder::fresh(seed, "test-denoiser");
        TransformerDenoiser::new(&pb.pp("den"), &tiny_cfg()).unwrap()
    }

    #[test]
    fn output_shape_matches_input() {
        let den = build(1);
        let mut rng = stream(2, "test-den-io");
        for &(b, n_z, t_len) in &[(1usize, 4usize, 10usize), (3, 8, 25)] {
            let z = randn_tensor(&mut rng, &[b, n_z, 6]).unwrap();
            let c = randn_tensor(&mut rng, &[b, t_len, D_COND]).unwrap();
            let ts = vec![5usize; b];
            let out = den.predict(&z, &ts, &c).unwrap();
            assert_eq!(out.dims(), z.dims());
        }
    }

    #[test]
    fn timestep_and_conditioning_change_the_output() {
        let den = build(3);
        let mut rng = stream(4, "test-den-sens");
        let z = randn_tensor(&mut rng, &[1, 4, 6]).unwrap();
        let c1 = randn_tensor(&mut rng, &[1, 8, D_COND]).unwrap();
        let c2 = randn_tensor(&mut rng, &[1, 8, D_COND]).unwrap();
        let base = den.predict(&z, &[10], &c1).unwrap();
        let other_t = den.predict(&z, &[900], &c1).unwrap();
        let other_c = den.predict(&z, &[10], &c2).unwrap();
        let d_t = (&base - &other_t).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
        let d_c = (&base - &other_c).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
        assert!(d_t > 1e-8, "timestep had no effect");
        assert!(d_c > 1e-8, "conditioning had no effect");
        // Repeat of the same inputs is bitwise stable.
        let again = den.predict(&z, &[10], &c1).unwrap();
        assert_eq!(
            base.flatten_all().unwrap().to_vec1::<f64>().unwrap(),
            again.flatten_all().unwrap().to_vec1::<f64>().unwrap()
        );
    }

    #[test]
    fn shape_errors_are_reported() {
        let den = build(5);
        let mut rng = stream(6, "test-den-err");
        let z = randn_tensor(&mut rng, &[2, 4, 6]).unwrap();
        let c = randn_tensor(&mut rng, &[2, 8, D_COND]).unwrap();
        assert!(matches!(
            den.predict(&z, &[1], &c),
            Err(Error::ShapeMismatch(_))
        ));
        let bad_c = randn_tensor(&mut rng, &[2, 8, D_COND - 1]).unwrap();
        assert!(matches!(
            den.predict(&z, &[1, 2], &bad_c),
            Err(Error::ShapeMismatch(_))
        ));
        let bad_z = randn_tensor(&mut rng, &[2, 4, 5]).unwrap();
        assert!(matches!(
            den.predict(&bad_z, &[1, 2], &c),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn stubs_behave_as_documented() {
        let mut rng = stream(7, "test-den-stub");
        let z = randn_tensor(&mut rng, &[1, 3, 4]).unwrap();
        let c = randn_tensor(&mut rng, &[1, 5, D_COND]).unwrap();
        let zero = ZeroDenoiser.predict(&z, &[1], &c).unwrap();
        assert_eq!(zero.abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap(), 0.0);
        let eps = randn_tensor(&mut rng, &[1, 3, 4]).unwrap();
        let fixed = FixedDenoiser { eps: eps.clone() };
        let out = fixed.predict(&z, &[1], &c).unwrap();
        assert_eq!(
            out.flatten_all().unwrap().to_vec1::<f64>().unwrap(),
            eps.flatten_all().unwrap().to_vec1::<f64>().unwrap()
        );
        let wrong = FixedDenoiser {
            eps: randn_tensor(&mut rng, &[1, 3, 5]).unwrap(),
        };
        assert!(wrong.predict(&z, &[1], &c).is_err());
    }
}

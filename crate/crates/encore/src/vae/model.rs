use candle_core::{Device, Tensor};

use crate::error::{Error, Result};
use crate::label::GenreLabel;
use crate::motion::{MotionSequence, FRAME_WIDTH};
use crate::nn::layers::{sinusoidal_positions, LayerNorm, Linear, TransformerLayer};
use crate::nn::params::{Init, ParamBuilder};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VaeConfig {
    pub n_z: usize,
    pub d_z: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            n_z: 8,
            d_z: 256,
            d_model: 512,
            n_layers: 9,
            n_heads: 4,
            d_ff: 1024,
        }
    }
}

/// Posterior over the latent tokens: elementwise mean and positive scale,
/// both (B, n_z, d_z).
#[derive(Debug, Clone)]
pub struct PosteriorParams {
    pub mu: Tensor,
    pub sigma: Tensor,
}

/// A point in the latent space, (B, n_z, d_z).
#[derive(Debug, Clone)]
pub struct LatentSequence {
    pub z: Tensor,
}

/// z = mu + sigma ⊙ eps.
pub fn reparameterize(p: &PosteriorParams, eps: &Tensor) -> Result<LatentSequence> {
    if eps.dims() != p.mu.dims() {
        return Err(Error::ShapeMismatch(format!(
            "eps {:?} vs posterior {:?}",
            eps.dims(),
            p.mu.dims()
        )));
    }
    Ok(LatentSequence {
        z: (&p.mu + (&p.sigma * eps)?)?,
    })
}

/// Distribution tokens attend over embedded frames; two heads read the
/// posterior off the token outputs.
#[derive(Debug, Clone)]
pub struct VaeEncoder {
    in_proj: Linear,
    dist_tokens: Tensor,
    layers: Vec<TransformerLayer>,
    ln_f: LayerNorm,
    mu_head: Linear,
    logsig_head: Linear,
    cfg: VaeConfig,
}

impl VaeEncoder {
    pub fn new(pb: &ParamBuilder, cfg: &VaeConfig) -> Result<Self> {
        let pb = pb.pp("enc");
        let layers = (0..cfg.n_layers)
            .map(|i| {
                TransformerLayer::new(&pb, &format!("layer{i}"), cfg.d_model, cfg.n_heads, cfg.d_ff, false)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VaeEncoder {
            in_proj: Linear::new(&pb, "in_proj", FRAME_WIDTH, cfg.d_model)?,
            dist_tokens: pb.get("dist_tokens", &[cfg.n_z, cfg.d_model], Init::Normal(0.02))?,
            layers,
            ln_f: LayerNorm::new(&pb, "ln_f", cfg.d_model)?,
            mu_head: Linear::new(&pb, "mu_head", cfg.d_model, cfg.d_z)?,
            logsig_head: Linear::new(&pb, "logsig_head", cfg.d_model, cfg.d_z)?,
            cfg: cfg.clone(),
        })
    }

    /// `x` is (B, T, 219) normalized frames.
    pub fn forward(&self, x: &Tensor) -> Result<PosteriorParams> {
        let (b, t_len, _) = x.dims3()?;
        let frames =
            self.in_proj.forward(x)?.broadcast_add(&sinusoidal_positions(t_len, self.cfg.d_model)?)?;
        let tokens = self
            .dist_tokens
            .unsqueeze(0)?
            .broadcast_as((b, self.cfg.n_z, self.cfg.d_model))?;
        let mut h = Tensor::cat(&[&tokens, &frames], 1)?;
        for layer in &self.layers {
            h = layer.forward(&h, None)?;
        }
        let out = self.ln_f.forward(&h.narrow(1, 0, self.cfg.n_z)?)?;
        let mu = self.mu_head.forward(&out)?;
        // Clamp keeps sigma in a numerically sane positive range.
        let sigma = self.logsig_head.forward(&out)?.clamp(-15.0, 10.0)?.exp()?;
        Ok(PosteriorParams { mu, sigma })
    }
}

/// Zero queries plus positions cross-attend to the projected latent tokens;
/// UNet-style long skips add the output of layer i into the input of layer
/// depth−1−i.
#[derive(Debug, Clone)]
pub struct VaeDecoder {
    z_proj: Linear,
    layers: Vec<TransformerLayer>,
    ln_f: LayerNorm,
    out_proj: Linear,
    cfg: VaeConfig,
}

impl VaeDecoder {
    pub fn new(pb: &ParamBuilder, cfg: &VaeConfig) -> Result<Self> {
        let pb = pb.pp("dec");
        let layers = (0..cfg.n_layers)
            .map(|i| {
                TransformerLayer::new(&pb, &format!("layer{i}"), cfg.d_model, cfg.n_heads, cfg.d_ff, true)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VaeDecoder {
            z_proj: Linear::new(&pb, "z_proj", cfg.d_z, cfg.d_model)?,
            layers,
            ln_f: LayerNorm::new(&pb, "ln_f", cfg.d_model)?,
            out_proj: Linear::new(&pb, "out_proj", cfg.d_model, FRAME_WIDTH)?,
            cfg: cfg.clone(),
        })
    }

    /// `z` is (B, n_z, d_z); returns (B, l, 219) normalized frames.
    pub fn forward(&self, z: &Tensor, l: usize) -> Result<Tensor> {
        assert!(l >= 1, "decode length must be at least 1");
        let (b, _, _) = z.dims3()?;
        let mem = self.z_proj.forward(z)?;
        let queries = sinusoidal_positions(l, self.cfg.d_model)?
            .unsqueeze(0)?
            .broadcast_as((b, l, self.cfg.d_model))?
            .contiguous()?;
        let depth = self.layers.len();
        let mut h = queries;
        let mut saved: Vec<Tensor> = Vec::with_capacity(depth);
        for (i, layer) in self.layers.iter().enumerate() {
            let j = depth - 1 - i;
            let inp = if j < i { (&h + &saved[j])? } else { h.clone() };
            h = layer.forward(&inp, Some(&mem))?;
            saved.push(h.clone());
        }
        self.out_proj.forward(&self.ln_f.forward(&h)?)
    }
}

/// Full VAE with its input normalization. `encoder` is absent when loaded
/// from a decoder-only checkpoint; decoding still works then.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub cfg: VaeConfig,
    pub encoder: Option<VaeEncoder>,
    pub decoder: VaeDecoder,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
}

impl VaeModel {
    pub fn new(pb: &ParamBuilder, cfg: &VaeConfig, norm_mean: Vec<f64>, norm_std: Vec<f64>) -> Result<Self> {
        assert_eq!(norm_mean.len(), FRAME_WIDTH);
        assert_eq!(norm_std.len(), FRAME_WIDTH);
        assert!(norm_std.iter().all(|&s| s > 0.0));
        Ok(VaeModel {
            cfg: cfg.clone(),
            encoder: Some(VaeEncoder::new(pb, cfg)?),
            decoder: VaeDecoder::new(pb, cfg)?,
            norm_mean,
            norm_std,
        })
    }

    /// Frames of `seq` as a normalized (1, T, 219) tensor.
    pub fn normalize(&self, seq: &MotionSequence) -> Result<Tensor> {
        let t_len = seq.t();
        let data: Vec<f64> = seq
            .frames()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v as f64 - self.norm_mean[i % FRAME_WIDTH]) / self.norm_std[i % FRAME_WIDTH])
            .collect();
        Ok(Tensor::from_vec(data, (1, t_len, FRAME_WIDTH), &Device::Cpu)?)
    }

    /// Posterior for one sequence.
    pub fn encode(&self, seq: &MotionSequence) -> Result<PosteriorParams> {
        let enc = self.encoder.as_ref().ok_or_else(|| {
            Error::CheckpointIncompatible("encoder not present in this checkpoint".into())
        })?;
        enc.forward(&self.normalize(seq)?)
    }

    /// Decodes one latent (1, n_z, d_z) to an l-frame sequence at `fps`.
    /// Rotations come back unprojected; callers validate or project.
    pub fn decode(&self, z: &LatentSequence, l: usize, fps: f64, genre: Option<GenreLabel>) -> Result<MotionSequence> {
        let out = self.decoder.forward(&z.z, l)?;
        let flat = out.flatten_all()?.to_vec1::<f64>()?;
        let frames: Vec<f32> = flat
            .iter()
            .enumerate()
            .map(|(i, &v)| (v * self.norm_std[i % FRAME_WIDTH] + self.norm_mean[i % FRAME_WIDTH]) as f32)
            .collect();
        MotionSequence::new(frames, fps, genre)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{fd_gradient, rel_err, stored_gradient};

    pub(crate) fn tiny_cfg() -> VaeConfig {
        VaeConfig {
            n_z: 3,
            d_z: 8,
            d_model: 16,
            n_layers: 2,
            n_heads: 2,
            d_ff: 24,
        }
    }

    fn unit_norm() -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; FRAME_WIDTH], vec![1.0; FRAME_WIDTH])
    }

    fn seq(t_len: usize, scale: f32) -> MotionSequence {
        let frames: Vec<f32> = (0..t_len * FRAME_WIDTH)
            .map(|i| scale * ((i * 13 % 29) as f32 - 14.0) / 10.0)
            .collect();
        MotionSequence::new(frames, 20.0, None).unwrap()
    }

    #[test]
    fn posterior_shapes_hold_for_any_t() {
        let (m, s) = unit_norm();
        let pb = ParamBuilder::fresh(1, "vae");
        let vae = VaeModel::new(&pb, &tiny_cfg(), m, s).unwrap();
        for t_len in [1, 7, 40] {
            let p = vae.encode(&seq(t_len, 1.0)).unwrap();
            assert_eq!(p.mu.dims(), &[1, 3, 8]);
            assert_eq!(p.sigma.dims(), &[1, 3, 8]);
            let sig = p.sigma.flatten_all().unwrap().to_vec1::<f64>().unwrap();
            assert!(sig.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn encode_is_deterministic_and_input_sensitive() {
        let (m, s) = unit_norm();
        let pb = ParamBuilder::fresh(2, "vae");
        let vae = VaeModel::new(&pb, &tiny_cfg(), m, s).unwrap();
        let a1 = vae.encode(&seq(9, 1.0)).unwrap().mu.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let a2 = vae.encode(&seq(9, 1.0)).unwrap().mu.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let b = vae.encode(&seq(9, 0.5)).unwrap().mu.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
    }

    #[test]
    fn reparameterize_identities() {
        let mu = Tensor::from_vec(vec![1.0f64, -2.0], &[1, 1, 2], &Device::Cpu).unwrap();
        let sigma = Tensor::from_vec(vec![0.5f64, 2.0], &[1, 1, 2], &Device::Cpu).unwrap();
        let p = PosteriorParams { mu: mu.clone(), sigma };
        let zeros = mu.zeros_like().unwrap();
        let z = reparameterize(&p, &zeros).unwrap();
        assert_eq!(z.z.flatten_all().unwrap().to_vec1::<f64>().unwrap(), vec![1.0, -2.0]);

        let tiny = PosteriorParams {
            mu: mu.clone(),
            sigma: (mu.ones_like().unwrap() * 1e-12).unwrap(),
        };
        let e = Tensor::from_vec(vec![3.0f64, -4.0], &[1, 1, 2], &Device::Cpu).unwrap();
        let z = reparameterize(&tiny, &e).unwrap().z.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert!((z[0] - 1.0).abs() < 1e-10 && (z[1] + 2.0).abs() < 1e-10);

        let std = PosteriorParams {
            mu: mu.zeros_like().unwrap(),
            sigma: mu.ones_like().unwrap(),
        };
        let z = reparameterize(&std, &e).unwrap().z.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert_eq!(z, vec![3.0, -4.0]);

        let bad = Tensor::from_vec(vec![0.0f64; 4], &[1, 2, 2], &Device::Cpu).unwrap();
        assert!(matches!(reparameterize(&p, &bad), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn decode_shapes_and_sensitivity() {
        let (m, s) = unit_norm();
        let pb = ParamBuilder::fresh(3, "vae");
        let vae = VaeModel::new(&pb, &tiny_cfg(), m, s).unwrap();
        for l in [1usize, 240, 1000] {
            let z = LatentSequence {
                z: Tensor::from_vec(
                    (0..3 * 8).map(|i| (i as f64).sin()).collect(),
                    &[1, 3, 8],
                    &Device::Cpu,
                )
                .unwrap(),
            };
            let out = vae.decode(&z, l, 20.0, None).unwrap();
            assert_eq!(out.t(), l);
        }
        let za = LatentSequence {
            z: Tensor::from_vec(vec![0.3f64; 24], &[1, 3, 8], &Device::Cpu).unwrap(),
        };
        let zb = LatentSequence {
            z: Tensor::from_vec(vec![-0.9f64; 24], &[1, 3, 8], &Device::Cpu).unwrap(),
        };
        let a = vae.decode(&za, 5, 20.0, None).unwrap();
        let b = vae.decode(&zb, 5, 20.0, None).unwrap();
        let dist: f32 = a
            .frames()
            .iter()
            .zip(b.frames())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(dist > 1e-3, "decode ignored z (distance {dist})");
    }

    #[test]
    fn kl_gradient_matches_finite_difference() {
        let (m, s) = unit_norm();
        let pb = ParamBuilder::fresh(4, "vae");
        let vae = VaeModel::new(&pb, &tiny_cfg(), m, s).unwrap();
        let x = vae.normalize(&seq(4, 1.0)).unwrap();
        let enc = vae.encoder.clone().unwrap();
        let x2 = x.clone();
        let mut loss_fn = move || -> Result<Tensor> {
            let p = enc.forward(&x2)?;
            crate::vae::loss::kl_sum(&p.mu, &p.sigma)
        };
        let loss = loss_fn().unwrap();
        let grads = loss.backward().unwrap();
        let vars = pb.vars();
        for (vi, idx) in [(1usize, 0usize), (5, 3), (9, 2)] {
            let var = &vars[vi % vars.len()];
            let n = var.as_tensor().elem_count();
            let an = stored_gradient(&grads, var, idx % n).unwrap();
            let fd = fd_gradient(var, idx % n, 1e-5, &mut loss_fn).unwrap();
            assert!(
                rel_err(an, fd) < 1e-4 || (an.abs() < 1e-8 && fd.abs() < 1e-6),
                "var {vi}: analytic {an} vs fd {fd}"
            );
        }
    }
}

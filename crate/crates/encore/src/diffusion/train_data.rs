use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use rand_chacha::ChaCha12Rng;

use crate::corpus::read_manifest;
use crate::error::{Error, Result};
use crate::hash::hash_files;
use crate::label::{GenreLabel, N_GENRES};
use crate::motion::{MotionSequence, FRAME_WIDTH};
use crate::music::MusicFeatureSequence;
use crate::nn::params::randn_tensor;
use crate::vae::{VaeConfig, VaeModel};

/// Windowed corpus prepared for latent training: per-window posterior
/// (μ, σ) from the frozen VAE, the aligned feature rows, and the genre.
/// Latents are standardized per element so the chain's N(0, I) terminus
/// matches the data scale; the stats ship with the checkpoint.
pub(crate) struct LatentWindowSet {
    mu: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    feats: Vec<Vec<f64>>,
    genres: Vec<GenreLabel>,
    pub c_in: usize,
    pub window: usize,
    pub fps: f64,
    pub latent_mean: Vec<f64>,
    pub latent_std: Vec<f64>,
    pub corpus_hash: String,
}

impl LatentWindowSet {
    pub fn load(manifest: &Path, vae: &VaeModel, window: usize, stride: usize) -> Result<Self> {
        let entries = read_manifest(manifest)?;
        let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
        let mut paths: Vec<PathBuf> = vec![manifest.to_path_buf()];
        let mut mu = Vec::new();
        let mut sigma = Vec::new();
        let mut feats = Vec::new();
        let mut genres = Vec::new();
        let mut c_in = 0usize;
        let mut fps = 0.0f64;
        for e in &entries {
            let mpath = e.motion_path(dir);
            let fpath = e.features_path(dir);
            let seq = MotionSequence::load(&mpath)?;
            let mf = MusicFeatureSequence::load(&fpath)?.align_to_motion(seq.fps(), seq.t())?;
            if fps == 0.0 {
                fps = seq.fps();
                c_in = mf.c();
            } else if seq.fps() != fps {
                return Err(Error::FormatInvalid(format!(
                    "{}: frame rate {} differs from corpus rate {fps}",
                    mpath.display(),
                    seq.fps()
                )));
            } else if mf.c() != c_in {
                return Err(Error::FormatInvalid(format!(
                    "{}: {} feature channels, corpus has {c_in}",
                    fpath.display(),
                    mf.c()
                )));
            }
            let t_len = seq.t();
            let mut start = 0usize;
            while start + window <= t_len {
                let frames =
                    seq.frames()[start * FRAME_WIDTH..(start + window) * FRAME_WIDTH].to_vec();
                let win = MotionSequence::new(frames, fps, Some(e.genre))?;
                let p = vae.encode(&win)?;
                mu.push(p.mu.flatten_all()?.to_vec1::<f64>()?);
                sigma.push(p.sigma.flatten_all()?.to_vec1::<f64>()?);
                let rows: Vec<f64> = mf.feats()[start * c_in..(start + window) * c_in]
                    .iter()
                    .map(|&v| v as f64)
                    .collect();
                feats.push(rows);
                genres.push(e.genre);
                start += stride;
            }
            paths.push(mpath);
            paths.push(fpath);
        }
        if mu.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let corpus_hash = hash_files(&paths)?;

        let d = mu[0].len();
        let n = mu.len() as f64;
        let mut latent_mean = vec![0.0f64; d];
        let mut sq = vec![0.0f64; d];
        for m in &mu {
            for (i, &v) in m.iter().enumerate() {
                latent_mean[i] += v;
                sq[i] += v * v;
            }
        }
        let mut latent_std = vec![0.0f64; d];
        for i in 0..d {
            latent_mean[i] /= n;
            latent_std[i] = (sq[i] / n - latent_mean[i] * latent_mean[i])
                .max(0.0)
                .sqrt()
                .max(1e-6);
        }
        Ok(LatentWindowSet {
            mu,
            sigma,
            feats,
            genres,
            c_in,
            window,
            fps,
            latent_mean,
            latent_std,
            corpus_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    /// Draws standardized z0 latents for the given windows: posterior
    /// sample (μ + σ ⊙ ε) pushed through the stored normalization.
    pub fn sample_z0(
        &self,
        idx: &[usize],
        cfg: &VaeConfig,
        rng: &mut ChaCha12Rng,
    ) -> Result<Tensor> {
        let b = idx.len();
        let d = cfg.n_z * cfg.d_z;
        let eps = randn_tensor(rng, &[b, d])?
            .flatten_all()?
            .to_vec1::<f64>()?;
        let mut data = Vec::with_capacity(b * d);
        for (k, &i) in idx.iter().enumerate() {
            let (m, s) = (&self.mu[i], &self.sigma[i]);
            for j in 0..d {
                let z = m[j] + s[j] * eps[k * d + j];
                data.push((z - self.latent_mean[j]) / self.latent_std[j]);
            }
        }
        Ok(Tensor::from_vec(
            data,
            (b, cfg.n_z, cfg.d_z),
            &Device::Cpu,
        )?)
    }

    /// (B, window, c_in) feature rows.
    pub fn features_batch(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.window * self.c_in);
        for &i in idx {
            data.extend_from_slice(&self.feats[i]);
        }
        Ok(Tensor::from_vec(
            data,
            (idx.len(), self.window, self.c_in),
            &Device::Cpu,
        )?)
    }

    /// (B, window, N_GENRES) one-hot rows, constant over each window.
    pub fn genre_batch(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.window * N_GENRES);
        for &i in idx {
            let oh: Vec<f64> = self.genres[i].one_hot().iter().map(|&v| v as f64).collect();
            for _ in 0..self.window {
                data.extend_from_slice(&oh);
            }
        }
        Ok(Tensor::from_vec(
            data,
            (idx.len(), self.window, N_GENRES),
            &Device::Cpu,
        )?)
    }
}

use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use candle_nn::Optimizer;
use serde::{Deserialize, Serialize};

use crate::corpus::read_manifest;
use crate::error::{Error, Result};
use crate::hash::hash_files;
use crate::motion::{sliding_window, MotionSequence, FRAME_WIDTH};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::optim::{adamw, Batcher};
use crate::nn::params::{randn_tensor, ParamBuilder};
use crate::rng::{derive_seed, stream};
use crate::vae::loss::{kl_sum, reconstruction_sum};
use crate::vae::model::{reparameterize, VaeConfig, VaeDecoder, VaeEncoder, VaeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeTrainConfig {
    pub model: VaeConfig,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta_kl: f64,
    pub window: usize,
    pub stride: usize,
    pub log_every: usize,
    /// Stop early once mean squared error per element (normalized space)
    /// drops below this.
    pub stop_rec: Option<f64>,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            model: VaeConfig::default(),
            seed: 0,
            steps: 2000,
            batch_size: 8,
            lr: 1e-4,
            beta_kl: 1e-4,
            window: 240,
            stride: 40,
            log_every: 10,
            stop_rec: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub rec: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainLog {
    pub entries: Vec<TrainLogEntry>,
}

/// Fixed-length normalized training windows plus the normalization stats.
pub(crate) struct WindowSet {
    pub windows: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub window: usize,
    pub corpus_hash: String,
}

pub(crate) fn load_windows(manifest: &Path, window: usize, stride: usize) -> Result<WindowSet> {
    let entries = read_manifest(manifest)?;
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut paths: Vec<PathBuf> = vec![manifest.to_path_buf()];
    let mut raw: Vec<Vec<f32>> = Vec::new();
    for e in &entries {
        let path = e.motion_path(dir);
        let seq = MotionSequence::load(&path)?;
        for w in sliding_window(&seq, window, stride) {
            raw.push(w.frames().to_vec());
        }
        paths.push(path);
    }
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let corpus_hash = hash_files(&paths)?;

    let n_frames: usize = raw.len() * window;
    let mut mean = vec![0.0f64; FRAME_WIDTH];
    let mut sq = vec![0.0f64; FRAME_WIDTH];
    for w in &raw {
        for (i, &v) in w.iter().enumerate() {
            mean[i % FRAME_WIDTH] += v as f64;
            sq[i % FRAME_WIDTH] += (v as f64) * (v as f64);
        }
    }
    let mut std = vec![0.0f64; FRAME_WIDTH];
    for c in 0..FRAME_WIDTH {
        mean[c] /= n_frames as f64;
        // Population variance with a floor so constant channels stay usable.
        std[c] = (sq[c] / n_frames as f64 - mean[c] * mean[c]).max(0.0).sqrt().max(1e-6);
    }
    let windows = raw
        .iter()
        .map(|w| {
            w.iter()
                .enumerate()
                .map(|(i, &v)| (v as f64 - mean[i % FRAME_WIDTH]) / std[i % FRAME_WIDTH])
                .collect()
        })
        .collect();
    Ok(WindowSet {
        windows,
        mean,
        std,
        window,
        corpus_hash,
    })
}

impl WindowSet {
    /// Stacks the given windows into a (B, window, 219) tensor.
    pub fn batch(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.window * FRAME_WIDTH);
        for &i in idx {
            data.extend_from_slice(&self.windows[i]);
        }
        Ok(Tensor::from_vec(
            data,
            (idx.len(), self.window, FRAME_WIDTH),
            &Device::Cpu,
        )?)
    }
}

/// Trains the sequence VAE on every fixed-length window of the corpus and
/// writes a checkpoint reproducible from (seed, config, corpus).
pub fn train_vae(manifest: &Path, cfg: &VaeTrainConfig, out: &Path) -> Result<TrainLog> {
    let set = load_windows(manifest, cfg.window, cfg.stride)?;
    let pb = ParamBuilder::fresh(derive_seed(cfg.seed, "vae-init"), "vae");
    let model = VaeModel::new(&pb, &cfg.model, set.mean.clone(), set.std.clone())?;
    let encoder = model.encoder.as_ref().expect("fresh model has encoder");
    let mut opt = adamw(pb.vars(), cfg.lr)?;
    let mut batcher = Batcher::new(set.windows.len(), cfg.seed, "vae-shuffle");
    let mut eps_rng = stream(cfg.seed, "vae-eps");
    let warmup_steps = (cfg.steps / 10).max(1);
    let elems = (cfg.window * FRAME_WIDTH) as f64;

    let mut log = TrainLog::default();
    let mut trained_steps = 0usize;
    for step in 0..cfg.steps {
        let idx = batcher.next_batch(cfg.batch_size);
        let x = set.batch(&idx)?;
        let b = idx.len() as f64;
        let p = encoder.forward(&x)?;
        let eps = randn_tensor(&mut eps_rng, p.mu.dims())?;
        let z = reparameterize(&p, &eps)?;
        let x_hat = model.decoder.forward(&z.z, cfg.window)?;
        let rec = (reconstruction_sum(&x, &x_hat)? / b)?;
        let kl = (kl_sum(&p.mu, &p.sigma)? / b)?;
        let beta = cfg.beta_kl * ((step + 1) as f64 / warmup_steps as f64).min(1.0);
        let total = (&rec + (&kl * beta)?)?;
        let (rec_v, kl_v) = (rec.to_scalar::<f64>()?, kl.to_scalar::<f64>()?);
        if !rec_v.is_finite() || !kl_v.is_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "step {step}: rec {rec_v}, kl {kl_v}"
            )));
        }
        opt.backward_step(&total)?;
        trained_steps = step + 1;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            log::info!("vae step {step}: rec {rec_v:.4} kl {kl_v:.4}");
            log.entries.push(TrainLogEntry {
                step,
                rec: rec_v,
                kl: kl_v,
            });
        }
        if let Some(target) = cfg.stop_rec {
            if rec_v / elems <= target {
                break;
            }
        }
    }

    save_checkpoint(
        out,
        &Checkpoint {
            kind: "vae".into(),
            meta: serde_json::json!({
                "config": cfg.model,
                "train": {
                    "seed": cfg.seed,
                    "steps": cfg.steps,
                    "trained_steps": trained_steps,
                    "batch_size": cfg.batch_size,
                    "lr": cfg.lr,
                    "beta_kl": cfg.beta_kl,
                    "window": cfg.window,
                    "stride": cfg.stride,
                },
                "norm_mean": set.mean,
                "norm_std": set.std,
                "corpus_hash": set.corpus_hash,
            }),
            tensors: pb.named_tensors(),
        },
    )?;
    Ok(log)
}

/// Rebuilds a VAE from a checkpoint. The encoder is optional: an archive
/// stripped to `dec.*` tensors still decodes.
pub fn load_vae(path: &Path) -> Result<VaeModel> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.kind != "vae" {
        return Err(Error::CheckpointIncompatible(format!(
            "expected a vae checkpoint, found {}",
            ckpt.kind
        )));
    }
    let cfg: VaeConfig = serde_json::from_value(ckpt.meta["config"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("config: {e}")))?;
    let norm_mean: Vec<f64> = serde_json::from_value(ckpt.meta["norm_mean"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("norm_mean: {e}")))?;
    let norm_std: Vec<f64> = serde_json::from_value(ckpt.meta["norm_std"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("norm_std: {e}")))?;
    if norm_mean.len() != FRAME_WIDTH || norm_std.len() != FRAME_WIDTH {
        return Err(Error::CheckpointIncompatible(
            "normalization stats have wrong width".into(),
        ));
    }
    let has_encoder = ckpt.tensors.keys().any(|k| k.starts_with("enc."));
    let pb = ParamBuilder::from_tensors(ckpt.tensors);
    let decoder = VaeDecoder::new(&pb, &cfg)?;
    let encoder = if has_encoder {
        Some(VaeEncoder::new(&pb, &cfg)?)
    } else {
        None
    };
    Ok(VaeModel {
        cfg,
        encoder,
        decoder,
        norm_mean,
        norm_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_corpus, CorpusSpec};
    use crate::hash::hash_file;
    use crate::label::GenreLabel;
    use crate::nn::checkpoint::filter_prefix;
    use crate::vae::model::LatentSequence;

    fn tiny_train_cfg() -> VaeTrainConfig {
        VaeTrainConfig {
            model: VaeConfig {
                n_z: 2,
                d_z: 8,
                d_model: 16,
                n_layers: 2,
                n_heads: 2,
                d_ff: 24,
            },
            seed: 7,
            steps: 30,
            batch_size: 3,
            lr: 1e-3,
            beta_kl: 1e-4,
            window: 40,
            stride: 40,
            log_every: 1,
            stop_rec: None,
        }
    }

    fn small_corpus(n_pairs: usize, seed: u64) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            n_pairs,
            seed,
            ..CorpusSpec::default()
        };
        let manifest = gen_corpus(&spec, dir.path()).unwrap();
        (dir, manifest)
    }

    #[test]
    fn empty_manifest_is_empty_corpus() {
        let (_dir, manifest) = small_corpus(0, 1);
        let out = manifest.parent().unwrap().join("vae.enck");
        assert!(matches!(
            train_vae(&manifest, &tiny_train_cfg(), &out),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn single_window_rec_loss_decreases() {
        let (_dir, manifest) = small_corpus(1, 3);
        let out = manifest.parent().unwrap().join("vae.enck");
        let mut cfg = tiny_train_cfg();
        cfg.steps = 60;
        cfg.batch_size = 1;
        cfg.window = 240;
        cfg.lr = 3e-3;
        let log = train_vae(&manifest, &cfg, &out).unwrap();
        let rec: Vec<f64> = log.entries.iter().map(|e| e.rec).collect();
        assert!(rec.len() >= 50);
        // Boxcar-smoothed curve over the first 50 logged steps must trend
        // down: each smoothed point 5 later is no higher (tiny slack), and
        // the overall drop is real.
        let smooth: Vec<f64> = (0..=45)
            .map(|i| rec[i..i + 5].iter().sum::<f64>() / 5.0)
            .collect();
        for i in 0..smooth.len() - 5 {
            assert!(
                smooth[i + 5] <= smooth[i] * 1.02,
                "smoothed rec rose at {i}: {} -> {}",
                smooth[i],
                smooth[i + 5]
            );
        }
        assert!(smooth[smooth.len() - 1] < smooth[0] * 0.8, "{smooth:?}");
    }

    #[test]
    fn large_beta_pushes_posterior_to_prior() {
        let (_dir, manifest) = small_corpus(1, 5);
        let out = manifest.parent().unwrap().join("vae.enck");
        let mut cfg = tiny_train_cfg();
        cfg.steps = 220;
        cfg.beta_kl = 1e3;
        cfg.lr = 3e-3;
        train_vae(&manifest, &cfg, &out).unwrap();
        let model = load_vae(&out).unwrap();
        let seq = MotionSequence::load(
            &manifest.parent().unwrap().join("pair_00000.encm"),
        )
        .unwrap();
        let win = sliding_window(&seq, 40, 40).remove(0);
        let p = model.encode(&win).unwrap();
        let mu = p.mu.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let sigma = p.sigma.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let mean_abs_mu: f64 = mu.iter().map(|v| v.abs()).sum::<f64>() / mu.len() as f64;
        let mean_sigma: f64 = sigma.iter().sum::<f64>() / sigma.len() as f64;
        assert!(mean_abs_mu < 0.1, "mean |mu| {mean_abs_mu}");
        assert!((0.8..=1.2).contains(&mean_sigma), "mean sigma {mean_sigma}");
    }

    #[test]
    fn fixed_seed_gives_identical_checkpoints() {
        let (_dir, manifest) = small_corpus(2, 9);
        let out1 = manifest.parent().unwrap().join("vae1.enck");
        let out2 = manifest.parent().unwrap().join("vae2.enck");
        let cfg = tiny_train_cfg();
        train_vae(&manifest, &cfg, &out1).unwrap();
        train_vae(&manifest, &cfg, &out2).unwrap();
        assert_eq!(hash_file(&out1).unwrap(), hash_file(&out2).unwrap());
        let mut cfg2 = cfg;
        cfg2.seed = 8;
        train_vae(&manifest, &cfg2, &out2).unwrap();
        assert_ne!(hash_file(&out1).unwrap(), hash_file(&out2).unwrap());
    }

    #[test]
    fn decoder_only_checkpoint_still_decodes() {
        let (_dir, manifest) = small_corpus(1, 11);
        let dir = manifest.parent().unwrap();
        let full = dir.join("vae.enck");
        let mut cfg = tiny_train_cfg();
        cfg.steps = 5;
        train_vae(&manifest, &cfg, &full).unwrap();
        let ckpt = load_checkpoint(&full).unwrap();
        let stripped = Checkpoint {
            kind: ckpt.kind.clone(),
            meta: ckpt.meta.clone(),
            tensors: filter_prefix(&ckpt.tensors, "dec."),
        };
        let dec_path = dir.join("vae-dec.enck");
        save_checkpoint(&dec_path, &stripped).unwrap();
        let model = load_vae(&dec_path).unwrap();
        assert!(model.encoder.is_none());
        let z = LatentSequence {
            z: Tensor::from_vec(vec![0.1f64; 2 * 8], &[1, 2, 8], &Device::Cpu).unwrap(),
        };
        let out = model.decode(&z, 12, 20.0, Some(GenreLabel::Pop)).unwrap();
        assert_eq!(out.t(), 12);
        let seq = MotionSequence::load(&dir.join("pair_00000.encm")).unwrap();
        assert!(matches!(
            model.encode(&seq),
            Err(Error::CheckpointIncompatible(_))
        ));
        // The full checkpoint's decode output is reproduced exactly by the
        // stripped one.
        let full_model = load_vae(&full).unwrap();
        assert_eq!(
            full_model.decode(&z, 12, 20.0, None).unwrap().frames(),
            model.decode(&z, 12, 20.0, None).unwrap().frames()
        );
    }
}

use std::path::Path;

use candle_core::Tensor;
use candle_nn::Optimizer;
use serde::{Deserialize, Serialize};

use crate::diffusion::denoiser::{DenoiserConfig, TransformerDenoiser};
use crate::diffusion::loss::diffusion_loss;
use crate::diffusion::schedule::{
    make_schedule, DiffusionSchedule, DEFAULT_BETA1, DEFAULT_BETA_T, DEFAULT_INFER_STEPS,
    DEFAULT_T_STEPS,
};
use crate::error::{Error, Result};
use crate::label::N_GENRES;
use crate::music::{ContextEncoder, ContextEncoderConfig, D_CONTEXT};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::optim::{adamw, Batcher};
use crate::nn::params::ParamBuilder;
use crate::rng::{derive_seed, stream};
use crate::vae::{load_vae, VaeConfig};

use super::train_data::LatentWindowSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTrainConfig {
    /// Denoiser transformer shape; its latent width comes from the VAE.
    pub den_d_model: usize,
    pub den_layers: usize,
    pub den_heads: usize,
    pub den_ff: usize,
    /// Context encoder shape; its input width comes from the feature files.
    pub ctx_d_model: usize,
    pub ctx_layers: usize,
    pub ctx_heads: usize,
    pub ctx_ff: usize,
    pub t_steps: usize,
    pub beta1: f64,
    pub beta_t: f64,
    pub infer_steps: usize,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub window: usize,
    pub stride: usize,
    pub log_every: usize,
    /// Stop early once the noise-prediction MSE drops below this.
    pub stop_loss: Option<f64>,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        DiffusionTrainConfig {
            den_d_model: 256,
            den_layers: 6,
            den_heads: 4,
            den_ff: 512,
            ctx_d_model: D_CONTEXT,
            ctx_layers: 2,
            ctx_heads: 4,
            ctx_ff: 1024,
            t_steps: DEFAULT_T_STEPS,
            beta1: DEFAULT_BETA1,
            beta_t: DEFAULT_BETA_T,
            infer_steps: DEFAULT_INFER_STEPS,
            seed: 0,
            steps: 2000,
            batch_size: 8,
            lr: 1e-4,
            window: 240,
            stride: 40,
            log_every: 10,
            stop_loss: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionLogEntry {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DiffusionTrainLog {
    pub entries: Vec<DiffusionLogEntry>,
}

/// Denoiser, context encoder, and everything needed to sample with them.
pub struct DiffusionModel {
    pub denoiser: TransformerDenoiser,
    pub context: ContextEncoder,
    pub sched: DiffusionSchedule,
    pub vae_cfg: VaeConfig,
    /// Frame rate of the conditioning rows, i.e. the corpus motion rate.
    pub fps: f64,
    /// Per-element normalization of the latent space the chain runs in.
    pub latent_mean: Vec<f64>,
    pub latent_std: Vec<f64>,
}

/// Trains the conditional latent denoiser jointly with the music context
/// encoder. The VAE is loaded frozen: posteriors are computed once per
/// window and only resampled through their stored (μ, σ).
pub fn train_diffusion(
    manifest: &Path,
    vae_ckpt: &Path,
    cfg: &DiffusionTrainConfig,
    out: &Path,
) -> Result<DiffusionTrainLog> {
    let vae = load_vae(vae_ckpt)?;
    let sched = make_schedule(cfg.t_steps, cfg.beta1, cfg.beta_t, cfg.infer_steps)?;
    let set = LatentWindowSet::load(manifest, &vae, cfg.window, cfg.stride)?;

    let den_cfg = DenoiserConfig {
        d_z: vae.cfg.d_z,
        d_model: cfg.den_d_model,
        n_layers: cfg.den_layers,
        n_heads: cfg.den_heads,
        d_ff: cfg.den_ff,
        d_cond: cfg.ctx_d_model + N_GENRES,
    };
    let ctx_cfg = ContextEncoderConfig {
        c_in: set.c_in,
        d_model: cfg.ctx_d_model,
        n_layers: cfg.ctx_layers,
        n_heads: cfg.ctx_heads,
        d_ff: cfg.ctx_ff,
        use_positions: true,
    };
    let pb = ParamBuilder::fresh(derive_seed(cfg.seed, "diff-init"), "diff");
    let den = TransformerDenoiser::new(&pb.pp("den"), &den_cfg)?;
    let ctx = ContextEncoder::new(&pb.pp("ctx"), &ctx_cfg)?;
    let mut opt = adamw(pb.vars(), cfg.lr)?;
    let mut batcher = Batcher::new(set.len(), cfg.seed, "diff-shuffle");
    let mut rng = stream(cfg.seed, "diff-eps");

    let mut log = DiffusionTrainLog::default();
    let mut trained_steps = 0usize;
    for step in 0..cfg.steps {
        let idx = batcher.next_batch(cfg.batch_size);
        let z0 = set.sample_z0(&idx, &vae.cfg, &mut rng)?;
        let feats = set.features_batch(&idx)?;
        let genre_rows = set.genre_batch(&idx)?;
        let ctx_out = ctx.forward(&feats)?;
        let c = Tensor::cat(&[&ctx_out, &genre_rows], 2)?;
        let loss = diffusion_loss(&den, &z0, &c, &sched, &mut rng)?;
        let loss_v = loss.to_scalar::<f64>()?;
        if !loss_v.is_finite() {
            return Err(Error::NonFiniteLoss(format!("step {step}: {loss_v}")));
        }
        opt.backward_step(&loss)?;
        trained_steps = step + 1;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            log::info!("diffusion step {step}: loss {loss_v:.4}");
            log.entries.push(DiffusionLogEntry { step, loss: loss_v });
        }
        if let Some(target) = cfg.stop_loss {
            if loss_v <= target {
                break;
            }
        }
    }

    save_checkpoint(
        out,
        &Checkpoint {
            kind: "diffusion".into(),
            meta: serde_json::json!({
                "version": 1,
                "denoiser": den_cfg,
                "context": ctx_cfg_json(&ctx_cfg),
                "schedule": {
                    "t_steps": cfg.t_steps,
                    "beta1": cfg.beta1,
                    "beta_t": cfg.beta_t,
                    "infer_steps": cfg.infer_steps,
                },
                "vae": vae.cfg,
                "fps": set.fps,
                "latent_mean": set.latent_mean,
                "latent_std": set.latent_std,
                "train": {
                    "seed": cfg.seed,
                    "steps": cfg.steps,
                    "trained_steps": trained_steps,
                    "batch_size": cfg.batch_size,
                    "lr": cfg.lr,
                    "window": cfg.window,
                    "stride": cfg.stride,
                },
                "corpus_hash": set.corpus_hash,
            }),
            tensors: pb.named_tensors(),
        },
    )?;
    Ok(log)
}

fn ctx_cfg_json(cfg: &ContextEncoderConfig) -> serde_json::Value {
    serde_json::json!({
        "c_in": cfg.c_in,
        "d_model": cfg.d_model,
        "n_layers": cfg.n_layers,
        "n_heads": cfg.n_heads,
        "d_ff": cfg.d_ff,
        "use_positions": cfg.use_positions,
    })
}

fn ctx_cfg_from_json(v: &serde_json::Value) -> Result<ContextEncoderConfig> {
    let field = |name: &str| -> Result<u64> {
        v[name]
            .as_u64()
            .ok_or_else(|| Error::CheckpointIncompatible(format!("context.{name} missing")))
    };
    Ok(ContextEncoderConfig {
        c_in: field("c_in")? as usize,
        d_model: field("d_model")? as usize,
        n_layers: field("n_layers")? as usize,
        n_heads: field("n_heads")? as usize,
        d_ff: field("d_ff")? as usize,
        use_positions: v["use_positions"].as_bool().unwrap_or(true),
    })
}

pub fn load_diffusion(path: &Path) -> Result<DiffusionModel> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.kind != "diffusion" {
        return Err(Error::CheckpointIncompatible(format!(
            "expected a diffusion checkpoint, found {}",
            ckpt.kind
        )));
    }
    let den_cfg: DenoiserConfig = serde_json::from_value(ckpt.meta["denoiser"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("denoiser: {e}")))?;
    let ctx_cfg = ctx_cfg_from_json(&ckpt.meta["context"])?;
    let vae_cfg: VaeConfig = serde_json::from_value(ckpt.meta["vae"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("vae: {e}")))?;
    let s = &ckpt.meta["schedule"];
    let sched = make_schedule(
        s["t_steps"].as_u64().unwrap_or(0) as usize,
        s["beta1"].as_f64().unwrap_or(0.0),
        s["beta_t"].as_f64().unwrap_or(0.0),
        s["infer_steps"].as_u64().unwrap_or(0) as usize,
    )?;
    let fps = ckpt.meta["fps"]
        .as_f64()
        .ok_or_else(|| Error::CheckpointIncompatible("fps missing".into()))?;
    let latent_mean: Vec<f64> = serde_json::from_value(ckpt.meta["latent_mean"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("latent_mean: {e}")))?;
    let latent_std: Vec<f64> = serde_json::from_value(ckpt.meta["latent_std"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("latent_std: {e}")))?;
    let n_latent = vae_cfg.n_z * vae_cfg.d_z;
    if latent_mean.len() != n_latent || latent_std.len() != n_latent {
        return Err(Error::CheckpointIncompatible(format!(
            "latent stats have {} entries, expected {n_latent}",
            latent_mean.len()
        )));
    }
    if den_cfg.d_z != vae_cfg.d_z {
        return Err(Error::CheckpointIncompatible(format!(
            "denoiser latent width {} does not match vae {}",
            den_cfg.d_z, vae_cfg.d_z
        )));
    }
    let pb = ParamBuilder::from_tensors(ckpt.tensors);
    let denoiser = TransformerDenoiser::new(&pb.pp("den"), &den_cfg)?;
    let context = ContextEncoder::new(&pb.pp("ctx"), &ctx_cfg)?;
    Ok(DiffusionModel {
        denoiser,
        context,
        sched,
        vae_cfg,
        fps,
        latent_mean,
        latent_std,
    })
}

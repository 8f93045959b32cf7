use std::path::{Path, PathBuf};

use candle_core::Tensor;
use candle_nn::Optimizer;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::genre::model::{
    cross_entropy, load_backbone_dump, normalize_spec, Backbone, BackboneConfig, GenreHead,
    GenreModel, GenreModelConfig,
};
use crate::genre::patch::{patch_matrix, PatchEmbedder};
use crate::genre::spectrogram::Spectrogram;
use crate::hash::hash_files;
use crate::label::N_GENRES;
use crate::music::MusicFeatureSequence;
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::optim::{adamw, Batcher};
use crate::nn::params::ParamBuilder;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreTrainConfig {
    /// Patch side; the grid floor-crops whatever the corpus images measure.
    pub p: usize,
    pub d_model: usize,
    /// Backbone shape; ignored when a dump supplies the backbone.
    pub backbone_layers: usize,
    pub backbone_heads: usize,
    pub backbone_ff: usize,
    pub head_hidden: usize,
    /// Keep backbone weights out of the optimizer.
    pub backbone_frozen: bool,
    /// Externally saved backbone archive; loading one forces frozen.
    pub backbone_dump: Option<PathBuf>,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub log_every: usize,
    /// Stop early once the cross-entropy drops below this.
    pub stop_loss: Option<f64>,
}

impl Default for GenreTrainConfig {
    fn default() -> Self {
        GenreTrainConfig {
            p: 16,
            d_model: 256,
            backbone_layers: 2,
            backbone_heads: 4,
            backbone_ff: 512,
            head_hidden: 128,
            backbone_frozen: false,
            backbone_dump: None,
            seed: 0,
            steps: 1000,
            batch_size: 8,
            lr: 1e-4,
            log_every: 10,
            stop_loss: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenreLogEntry {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GenreTrainLog {
    pub entries: Vec<GenreLogEntry>,
}

fn load_spectrograms(
    manifest: &Path,
) -> Result<(Vec<Spectrogram>, Vec<usize>, String, usize, usize)> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut specs = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    let mut files = vec![manifest.to_path_buf()];
    for e in &entries {
        let fp = e.features_path(dir);
        let mf = MusicFeatureSequence::load(&fp)?;
        specs.push(Spectrogram::from_features(&mf)?);
        labels.push(e.genre.index());
        files.push(fp);
    }
    let (n_mels, n_frames) = (specs[0].n_mels(), specs[0].n_frames());
    for (s, e) in specs.iter().zip(&entries) {
        if s.n_mels() != n_mels || s.n_frames() != n_frames {
            return Err(Error::FormatInvalid(format!(
                "{}: image {}x{} differs from the corpus {n_mels}x{n_frames}",
                e.stem,
                s.n_mels(),
                s.n_frames()
            )));
        }
    }
    Ok((specs, labels, hash_files(&files)?, n_mels, n_frames))
}

/// Per-mel-row population mean and std over the whole corpus, std floored
/// at 1e-6 so constant rows stay usable.
fn mel_stats(specs: &[Spectrogram], n_mels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0f64; n_mels];
    let mut sq = vec![0.0f64; n_mels];
    let mut count = 0usize;
    for s in specs {
        count += s.n_frames();
        for m in 0..n_mels {
            for t in 0..s.n_frames() {
                let v = s.value(m, t);
                sum[m] += v;
                sq[m] += v * v;
            }
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let std: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / count as f64 - m * m).max(0.0).sqrt().max(1e-6))
        .collect();
    (mean, std)
}

/// Trains the classifier on the corpus feature images. The backbone is a
/// fresh encoder, frozen or trainable per the config, or comes frozen from
/// an external dump; patch projection, positions, and head always train.
pub fn train_genre(manifest: &Path, cfg: &GenreTrainConfig, out: &Path) -> Result<GenreTrainLog> {
    let (specs, labels, corpus_hash, n_mels, n_frames) = load_spectrograms(manifest)?;
    let pb = ParamBuilder::fresh(derive_seed(cfg.seed, "genre-init"), "genre");
    let embed = PatchEmbedder::new(&pb.pp("embed"), cfg.p, cfg.d_model, n_mels, n_frames)?;
    let head = GenreHead::new(&pb.pp("head"), cfg.d_model, cfg.head_hidden)?;

    let (b_cfg, backbone, backbone_tensors, backbone_vars, frozen) = match &cfg.backbone_dump {
        Some(path) => {
            let (bc, bb, bt) = load_backbone_dump(path)?;
            if bc.d_model != cfg.d_model {
                return Err(Error::CheckpointIncompatible(format!(
                    "backbone dump width {} does not match d_model {}",
                    bc.d_model, cfg.d_model
                )));
            }
            let bt = bt
                .into_iter()
                .map(|(k, v)| (format!("backbone.{k}"), v))
                .collect();
            (bc, bb, bt, Vec::new(), true)
        }
        None => {
            let bc = BackboneConfig {
                d_model: cfg.d_model,
                n_layers: cfg.backbone_layers,
                n_heads: cfg.backbone_heads,
                d_ff: cfg.backbone_ff,
            };
            let pbb = ParamBuilder::fresh(derive_seed(cfg.seed, "genre-backbone"), "genre-backbone");
            let bb = Backbone::new(&pbb.pp("backbone"), &bc, cfg.backbone_frozen)?;
            let vars = if cfg.backbone_frozen {
                Vec::new()
            } else {
                pbb.vars()
            };
            (bc, bb, pbb.named_tensors(), vars, cfg.backbone_frozen)
        }
    };

    let (mel_mean, mel_std) = mel_stats(&specs, n_mels);
    // Patch content is constant under training, so flatten once; gradients
    // begin at the projection.
    let mats: Vec<Tensor> = specs
        .iter()
        .map(|s| patch_matrix(&normalize_spec(s, &mel_mean, &mel_std)?, cfg.p))
        .collect::<Result<_>>()?;

    let mut vars = pb.vars();
    vars.extend(backbone_vars);
    let mut opt = adamw(vars, cfg.lr)?;
    let mut batcher = Batcher::new(specs.len(), cfg.seed, "genre-shuffle");

    let mut log = GenreTrainLog::default();
    let mut trained_steps = 0usize;
    for step in 0..cfg.steps {
        let idx = batcher.next_batch(cfg.batch_size);
        let chosen: Vec<Tensor> = idx.iter().map(|&i| mats[i].clone()).collect();
        let tokens = embed.embed_mats(&Tensor::stack(&chosen, 0)?)?;
        let enc = backbone.encode(&tokens)?;
        let logits = head.forward(&enc)?;
        let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let loss = cross_entropy(&logits, &batch_labels)?;
        let loss_v = loss.to_scalar::<f64>()?;
        if !loss_v.is_finite() {
            return Err(Error::NonFiniteLoss(format!("step {step}: {loss_v}")));
        }
        opt.backward_step(&loss)?;
        trained_steps = step + 1;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            log::info!("genre step {step}: loss {loss_v:.4}");
            log.entries.push(GenreLogEntry { step, loss: loss_v });
        }
        if let Some(target) = cfg.stop_loss {
            if loss_v <= target {
                break;
            }
        }
    }

    let model_cfg = GenreModelConfig {
        n_mels,
        n_frames,
        p: cfg.p,
        d_model: cfg.d_model,
        backbone: b_cfg,
        head_hidden: cfg.head_hidden,
    };
    let mut tensors = pb.named_tensors();
    tensors.extend(backbone_tensors);
    save_checkpoint(
        out,
        &Checkpoint {
            kind: "genre".into(),
            meta: serde_json::json!({
                "version": 1,
                "model": model_cfg,
                "backbone_frozen": frozen,
                "n_classes": N_GENRES,
                "mel_mean": mel_mean,
                "mel_std": mel_std,
                "train": {
                    "seed": cfg.seed,
                    "steps": cfg.steps,
                    "trained_steps": trained_steps,
                    "batch_size": cfg.batch_size,
                    "lr": cfg.lr,
                },
                "corpus_hash": corpus_hash,
            }),
            tensors,
        },
    )?;
    Ok(log)
}

pub fn load_genre(path: &Path) -> Result<GenreModel> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.kind != "genre" {
        return Err(Error::CheckpointIncompatible(format!(
            "expected a genre checkpoint, found {}",
            ckpt.kind
        )));
    }
    let cfg: GenreModelConfig = serde_json::from_value(ckpt.meta["model"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("model: {e}")))?;
    if ckpt.meta["n_classes"].as_u64() != Some(N_GENRES as u64) {
        return Err(Error::CheckpointIncompatible(format!(
            "n_classes {}, expected {N_GENRES}",
            ckpt.meta["n_classes"]
        )));
    }
    let frozen = ckpt.meta["backbone_frozen"].as_bool().unwrap_or(true);
    let mel_mean: Vec<f64> = serde_json::from_value(ckpt.meta["mel_mean"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("mel_mean: {e}")))?;
    let mel_std: Vec<f64> = serde_json::from_value(ckpt.meta["mel_std"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("mel_std: {e}")))?;
    if mel_mean.len() != cfg.n_mels || mel_std.len() != cfg.n_mels {
        return Err(Error::CheckpointIncompatible(format!(
            "mel stats have {} rows, expected {}",
            mel_mean.len(),
            cfg.n_mels
        )));
    }
    if !ckpt.tensors.keys().any(|k| k.starts_with("backbone.")) {
        return Err(Error::BackboneMissing(
            "checkpoint contains no backbone tensors".into(),
        ));
    }
    let pb = ParamBuilder::from_tensors(ckpt.tensors);
    let embed = PatchEmbedder::new(&pb.pp("embed"), cfg.p, cfg.d_model, cfg.n_mels, cfg.n_frames)?;
    let backbone = Backbone::new(&pb.pp("backbone"), &cfg.backbone, frozen)?;
    let head = GenreHead::new(&pb.pp("head"), cfg.d_model, cfg.head_hidden)?;
    Ok(GenreModel {
        cfg,
        embed,
        backbone,
        head,
        mel_mean,
        mel_std,
    })
}

/// Deterministic index split for held-out evaluation: shuffles 0..n and
/// holds out round(n * frac), at least 1 and at most n - 1. Both halves
/// come back sorted.
pub fn holdout_split(n: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(n >= 2, "need at least two items to split");
    assert!((0.0..1.0).contains(&frac), "holdout fraction must be in [0, 1)");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "genre-split"));
    let n_held = (((n as f64) * frac).round() as usize).clamp(1, n - 1);
    let mut held: Vec<usize> = order[..n_held].to_vec();
    let mut train: Vec<usize> = order[n_held..].to_vec();
    held.sort_unstable();
    train.sort_unstable();
    (train, held)
}

/// Accuracy of the classifier over manifest entries, evaluated in chunks.
pub fn evaluate_genre(
    model: &GenreModel,
    manifest_dir: &Path,
    entries: &[ManifestEntry],
) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut correct = 0usize;
    for chunk in entries.chunks(16) {
        let mut specs = Vec::with_capacity(chunk.len());
        for e in chunk {
            let mf = MusicFeatureSequence::load(&e.features_path(manifest_dir))?;
            specs.push(Spectrogram::from_features(&mf)?);
        }
        let logits = model.logits_batch(&specs)?;
        let rows = logits.to_vec2::<f64>()?;
        for (row, e) in rows.iter().zip(chunk) {
            let arg = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .expect("nonempty")
                .0;
            if arg == e.genre.index() {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / entries.len() as f64)
}

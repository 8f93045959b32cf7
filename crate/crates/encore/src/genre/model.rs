use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{Device, Tensor, D};
use candle_nn::ops::{log_softmax, softmax};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genre::patch::{PatchEmbedder, PatchSequence};
use crate::genre::spectrogram::Spectrogram;
use crate::label::{GenreLabel, N_GENRES};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::layers::{Linear, TransformerLayer, INIT_STD};
use crate::nn::params::{Init, ParamBuilder};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
}

/// Transformer encoder over patch tokens. When `frozen` is set its
/// parameters are kept out of every optimizer, standing in for a large
/// pretrained model whose weights only the head may adapt around.
#[derive(Debug, Clone)]
pub struct Backbone {
    layers: Vec<TransformerLayer>,
    cfg: BackboneConfig,
    frozen: bool,
}

impl Backbone {
    pub fn new(pb: &ParamBuilder, cfg: &BackboneConfig, frozen: bool) -> Result<Self> {
        let layers = (0..cfg.n_layers)
            .map(|i| {
                TransformerLayer::new(
                    pb,
                    &format!("layer{i}"),
                    cfg.d_model,
                    cfg.n_heads,
                    cfg.d_ff,
                    false,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Backbone {
            layers,
            cfg: cfg.clone(),
            frozen,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.cfg
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    /// Encodes (b, n_patches, d_model) tokens, same shape out.
    pub fn encode(&self, tokens: &Tensor) -> Result<Tensor> {
        let (_b, _n, d) = tokens.dims3()?;
        if d != self.cfg.d_model {
            return Err(Error::ParamShapeMismatch(format!(
                "backbone expects width {}, got {d}",
                self.cfg.d_model
            )));
        }
        let mut x = tokens.clone();
        for layer in &self.layers {
            x = layer.forward(&x, None)?;
        }
        Ok(x)
    }
}

/// Encoded features for one patch sequence, shape (n_patches, d_model).
pub fn backbone_encode(ps: &PatchSequence, backbone: &Backbone) -> Result<Tensor> {
    Ok(backbone.encode(&ps.patches.unsqueeze(0)?)?.squeeze(0)?)
}

/// Writes a standalone backbone archive: a fresh encoder whose weights
/// stand in for an externally pretrained model. Loading it always yields a
/// frozen backbone.
pub fn write_backbone_dump(path: &Path, cfg: &BackboneConfig, seed: u64) -> Result<()> {
    let pb = ParamBuilder::fresh(derive_seed(seed, "backbone-dump"), "backbone-dump");
    Backbone::new(&pb, cfg, true)?;
    save_checkpoint(
        path,
        &Checkpoint {
            kind: "backbone".into(),
            meta: serde_json::json!({ "version": 1, "config": cfg }),
            tensors: pb.named_tensors(),
        },
    )
}

/// Loads a backbone dump. Returns the config, the frozen backbone, and its
/// raw tensors so a classifier checkpoint can embed them.
pub fn load_backbone_dump(
    path: &Path,
) -> Result<(BackboneConfig, Backbone, BTreeMap<String, Tensor>)> {
    if !path.exists() {
        return Err(Error::BackboneMissing(format!(
            "no backbone dump at {}",
            path.display()
        )));
    }
    let ckpt = load_checkpoint(path)?;
    if ckpt.kind != "backbone" {
        return Err(Error::CheckpointIncompatible(format!(
            "expected a backbone dump, found {}",
            ckpt.kind
        )));
    }
    let cfg: BackboneConfig = serde_json::from_value(ckpt.meta["config"].clone())
        .map_err(|e| Error::CheckpointIncompatible(format!("backbone config: {e}")))?;
    let pb = ParamBuilder::from_tensors(ckpt.tensors.clone());
    let backbone = Backbone::new(&pb, &cfg, true)?;
    Ok((cfg, backbone, ckpt.tensors))
}

/// Classification head: two kernel-3 convolutions over the patch axis, a
/// skip connection back onto the backbone features, mean pooling, and a
/// two-layer MLP. The final layer starts zeroed, so a fresh head scores
/// every class equally and the first cross-entropy is exactly ln 4.
#[derive(Debug, Clone)]
pub struct GenreHead {
    conv1_w: Tensor,
    conv1_b: Tensor,
    conv2_w: Tensor,
    conv2_b: Tensor,
    fc1: Linear,
    fc2: Linear,
    d_model: usize,
}

impl GenreHead {
    pub fn new(pb: &ParamBuilder, d_model: usize, hidden: usize) -> Result<Self> {
        Ok(GenreHead {
            conv1_w: pb.get("conv1.w", &[d_model, d_model, 3], Init::Normal(INIT_STD))?,
            conv1_b: pb.get("conv1.b", &[d_model], Init::Zeros)?,
            conv2_w: pb.get("conv2.w", &[d_model, d_model, 3], Init::Normal(INIT_STD))?,
            conv2_b: pb.get("conv2.b", &[d_model], Init::Zeros)?,
            fc1: Linear::new(pb, "fc1", d_model, hidden)?,
            fc2: Linear::new_zeroed(pb, "fc2", hidden, N_GENRES)?,
            d_model,
        })
    }

    /// logits = MLP(mean over patches of (CNN(features) + features)), with
    /// `features` shaped (b, n_patches, d_model).
    pub fn forward(&self, feats: &Tensor) -> Result<Tensor> {
        let (_b, _n, d) = feats.dims3()?;
        if d != self.d_model {
            return Err(Error::ParamShapeMismatch(format!(
                "head expects width {}, got {d}",
                self.d_model
            )));
        }
        let h = conv3_over_patches(feats, &self.conv1_w, &self.conv1_b)?.relu()?;
        let h = conv3_over_patches(&h, &self.conv2_w, &self.conv2_b)?;
        let skip = (h + feats)?;
        let pooled = skip.mean(1)?;
        self.fc2.forward(&self.fc1.forward(&pooled)?.relu()?)
    }
}

/// Kernel-3, stride-1, zero-padded convolution along the patch axis of
/// (b, n, d_in) features, keeping the standard (d_out, d_in, 3) kernel
/// layout. Spelled as three shifted matmuls: the backend's conv1d computes
/// a wrong kernel gradient whenever the batch holds more than one sample.
fn conv3_over_patches(x: &Tensor, w: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (b, n, _d) = x.dims3()?;
    let d_out = bias.dims1()?;
    let zero_row = x.narrow(1, 0, 1)?.zeros_like()?;
    let prev = if n > 1 {
        Tensor::cat(&[&zero_row, &x.narrow(1, 0, n - 1)?], 1)?
    } else {
        zero_row.clone()
    };
    let next = if n > 1 {
        Tensor::cat(&[&x.narrow(1, 1, n - 1)?, &zero_row], 1)?
    } else {
        zero_row
    };
    let mut y: Option<Tensor> = None;
    for (k, xt) in [(0usize, &prev), (1, x), (2, &next)] {
        let wk = w.narrow(2, k, 1)?.squeeze(2)?.t()?;
        let term = xt.flatten(0, 1)?.contiguous()?.matmul(&wk.contiguous()?)?;
        y = Some(match y {
            None => term,
            Some(acc) => (acc + term)?,
        });
    }
    Ok(y
        .expect("three kernel taps")
        .reshape((b, n, d_out))?
        .broadcast_add(bias)?)
}

/// Class logits for one encoded patch sequence (n_patches, d_model).
pub fn head_predict(features: &Tensor, head: &GenreHead) -> Result<Tensor> {
    Ok(head.forward(&features.unsqueeze(0)?)?.squeeze(0)?)
}

/// Mean cross-entropy of logit rows (b, n_classes) against class indices.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (b, k) = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {b} logit rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::ShapeMismatch(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let mut mask = vec![0.0f64; b * k];
    for (i, &l) in labels.iter().enumerate() {
        mask[i * k + l] = 1.0;
    }
    let mask = Tensor::from_vec(mask, (b, k), &Device::Cpu)?;
    let logp = log_softmax(logits, D::Minus1)?;
    Ok(((logp * mask)?.sum_all()? * (-1.0 / b as f64))?)
}

/// Softmax over the last axis as plain probabilities.
pub fn probs(logits: &Tensor) -> Result<Vec<f64>> {
    Ok(softmax(logits, D::Minus1)?.flatten_all()?.to_vec1::<f64>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreModelConfig {
    /// Input geometry the patch grid and positions were built for.
    pub n_mels: usize,
    pub n_frames: usize,
    pub p: usize,
    pub d_model: usize,
    pub backbone: BackboneConfig,
    pub head_hidden: usize,
}

/// Full classifier: normalization stats, patch embedder, backbone, head.
pub struct GenreModel {
    pub cfg: GenreModelConfig,
    pub embed: PatchEmbedder,
    pub backbone: Backbone,
    pub head: GenreHead,
    /// Per-mel-row corpus statistics applied before patching.
    pub mel_mean: Vec<f64>,
    pub mel_std: Vec<f64>,
}

/// Standardizes each mel row with the stored corpus statistics.
pub(crate) fn normalize_spec(spec: &Spectrogram, mean: &[f64], std: &[f64]) -> Result<Spectrogram> {
    let nf = spec.n_frames();
    let mut mel = Vec::with_capacity(spec.n_mels() * nf);
    for m in 0..spec.n_mels() {
        for t in 0..nf {
            mel.push((spec.value(m, t) - mean[m]) / std[m]);
        }
    }
    Spectrogram::new(mel, spec.n_mels(), nf)
}

impl GenreModel {
    pub(crate) fn normalize(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        if spec.n_mels() != self.cfg.n_mels {
            return Err(Error::ParamShapeMismatch(format!(
                "spectrogram has {} mel rows, the classifier expects {}",
                spec.n_mels(),
                self.cfg.n_mels
            )));
        }
        normalize_spec(spec, &self.mel_mean, &self.mel_std)
    }

    /// Class logits for a batch of raw spectrograms.
    pub fn logits_batch(&self, specs: &[Spectrogram]) -> Result<Tensor> {
        let normed: Vec<Spectrogram> = specs
            .iter()
            .map(|s| self.normalize(s))
            .collect::<Result<_>>()?;
        let refs: Vec<&Spectrogram> = normed.iter().collect();
        let tokens = self.embed.patchify_batch(&refs)?;
        let enc = self.backbone.encode(&tokens)?;
        self.head.forward(&enc)
    }

    /// Predicted label with the full softmax row.
    pub fn predict(&self, spec: &Spectrogram) -> Result<(GenreLabel, [f64; N_GENRES])> {
        let logits = self.logits_batch(std::slice::from_ref(spec))?;
        let p = probs(&logits)?;
        let mut row = [0.0; N_GENRES];
        row.copy_from_slice(&p);
        let arg = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probs"))
            .expect("nonempty")
            .0;
        Ok((GenreLabel::from_index(arg)?, row))
    }
}

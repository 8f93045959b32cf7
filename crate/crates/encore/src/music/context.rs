use candle_core::{Device, Tensor};

use crate::error::{Error, Result};
use crate::music::types::MusicFeatureSequence;
use crate::nn::layers::{sinusoidal_positions, LayerNorm, Linear, TransformerLayer};
use crate::nn::params::ParamBuilder;

/// Width of the encoded music context.
pub const D_CONTEXT: usize = 512;

/// Per-frame music context produced by the encoder, shape (T, 512).
#[derive(Debug, Clone)]
pub struct ContextEmbedding {
    emb: Tensor,
}

impl ContextEmbedding {
    /// Wraps a precomputed (T, 512) f64 embedding.
    pub fn from_tensor(emb: Tensor) -> Result<Self> {
        let (_, d) = emb.dims2()?;
        if d != D_CONTEXT {
            return Err(Error::ShapeMismatch(format!(
                "context rows must have {D_CONTEXT} entries, got {d}"
            )));
        }
        Ok(Self { emb })
    }

    pub fn t(&self) -> usize {
        self.emb.dims()[0]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.emb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextEncoderConfig {
    pub c_in: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub use_positions: bool,
}

impl ContextEncoderConfig {
    pub fn for_input(c_in: usize) -> Self {
        ContextEncoderConfig {
            c_in,
            d_model: D_CONTEXT,
            n_layers: 2,
            n_heads: 4,
            d_ff: 1024,
            use_positions: true,
        }
    }
}

/// Two-layer transformer that lifts music feature rows to the 512-dim
/// conditioning sequence.
#[derive(Debug, Clone)]
pub struct ContextEncoder {
    in_proj: Linear,
    layers: Vec<TransformerLayer>,
    ln_f: LayerNorm,
    cfg: ContextEncoderConfig,
}

impl ContextEncoder {
    pub fn new(pb: &ParamBuilder, cfg: &ContextEncoderConfig) -> Result<Self> {
        let in_proj = Linear::new(pb, "in_proj", cfg.c_in, cfg.d_model)?;
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
        Ok(ContextEncoder {
            in_proj,
            layers,
            ln_f: LayerNorm::new(pb, "ln_f", cfg.d_model)?,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ContextEncoderConfig {
        &self.cfg
    }

    /// `feats` is (B, T, c_in) in f64; output is (B, T, d_model).
    pub fn forward(&self, feats: &Tensor) -> Result<Tensor> {
        let (_, t_len, c) = feats.dims3()?;
        if c != self.cfg.c_in {
            return Err(Error::ParamShapeMismatch(format!(
                "encoder expects {} input channels, got {c}",
                self.cfg.c_in
            )));
        }
        let mut x = self.in_proj.forward(feats)?;
        if self.cfg.use_positions {
            x = x.broadcast_add(&sinusoidal_positions(t_len, self.cfg.d_model)?)?;
        }
        for layer in &self.layers {
            x = layer.forward(&x, None)?;
        }
        self.ln_f.forward(&x)
    }
}

/// Feature rows as a (1, T, C) f64 tensor, the encoder's input layout.
pub fn features_tensor(mf: &MusicFeatureSequence) -> Result<Tensor> {
    let data: Vec<f64> = mf.feats().iter().map(|&v| v as f64).collect();
    Ok(Tensor::from_vec(data, (1, mf.t(), mf.c()), &Device::Cpu)?)
}

/// Encodes one aligned feature sequence to its (T, 512) context.
pub fn encode_context(
    mf: &MusicFeatureSequence,
    encoder: &ContextEncoder,
) -> Result<ContextEmbedding> {
    let out = encoder.forward(&features_tensor(mf)?)?;
    let (_, t_len, d) = out.dims3()?;
    Ok(ContextEmbedding {
        emb: out.reshape((t_len, d))?,
    })
}

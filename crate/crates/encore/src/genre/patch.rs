use candle_core::{Device, Tensor};

use crate::error::{Error, Result};
use crate::genre::spectrogram::Spectrogram;
use crate::nn::layers::{Linear, INIT_STD};
use crate::nn::params::{Init, ParamBuilder};

/// Patch-token view of one spectrogram: projected patch embeddings with
/// their positional table, both (n_patches, d_model).
#[derive(Debug, Clone)]
pub struct PatchSequence {
    /// proj(flattened patch) + position, the backbone's input tokens.
    pub patches: Tensor,
    /// The learnable positional table alone.
    pub positions: Tensor,
}

/// Non-overlapping p x p grid over an n_mels x n_frames image with the
/// remainder cropped. Returns (mel blocks, frame blocks).
pub fn patch_grid(n_mels: usize, n_frames: usize, p: usize) -> Result<(usize, usize)> {
    if p == 0 || p > n_mels || p > n_frames {
        return Err(Error::PatchTooLarge {
            p,
            mels: n_mels,
            frames: n_frames,
        });
    }
    Ok((n_mels / p, n_frames / p))
}

/// Flattens every patch in mel-major order: patch (mi, fi) sits at index
/// mi * frame_blocks + fi and lists its p x p cells row by row. Shape
/// (n_patches, p²).
pub(crate) fn patch_matrix(spec: &Spectrogram, p: usize) -> Result<Tensor> {
    let (mb, fb) = patch_grid(spec.n_mels(), spec.n_frames(), p)?;
    let mut data = vec![0.0f64; mb * fb * p * p];
    for mi in 0..mb {
        for fi in 0..fb {
            let base = (mi * fb + fi) * p * p;
            for dm in 0..p {
                for df in 0..p {
                    data[base + dm * p + df] = spec.value(mi * p + dm, fi * p + df);
                }
            }
        }
    }
    Ok(Tensor::from_vec(data, (mb * fb, p * p), &Device::Cpu)?)
}

/// Linear patch projection plus learnable positions, built for one fixed
/// input geometry.
#[derive(Debug, Clone)]
pub struct PatchEmbedder {
    p: usize,
    n_mels: usize,
    n_frames: usize,
    n_patches: usize,
    proj: Linear,
    pos: Tensor,
}

impl PatchEmbedder {
    pub fn new(
        pb: &ParamBuilder,
        p: usize,
        d_model: usize,
        n_mels: usize,
        n_frames: usize,
    ) -> Result<Self> {
        let (mb, fb) = patch_grid(n_mels, n_frames, p)?;
        let n_patches = mb * fb;
        Ok(PatchEmbedder {
            p,
            n_mels,
            n_frames,
            n_patches,
            proj: Linear::new(pb, "proj", p * p, d_model)?,
            pos: pb.get("pos", &[n_patches, d_model], Init::Normal(INIT_STD))?,
        })
    }

    pub fn n_patches(&self) -> usize {
        self.n_patches
    }

    fn check_dims(&self, spec: &Spectrogram) -> Result<()> {
        if spec.n_mels() != self.n_mels || spec.n_frames() != self.n_frames {
            return Err(Error::ParamShapeMismatch(format!(
                "spectrogram {}x{} does not match the embedder's {}x{}",
                spec.n_mels(),
                spec.n_frames(),
                self.n_mels,
                self.n_frames
            )));
        }
        Ok(())
    }

    /// Projects a precomputed (b, n_patches, p²) patch stack into tokens.
    pub(crate) fn embed_mats(&self, mats: &Tensor) -> Result<Tensor> {
        Ok(self.proj.forward(mats)?.broadcast_add(&self.pos)?)
    }

    /// Patch tokens for one spectrogram.
    pub fn patchify(&self, spec: &Spectrogram) -> Result<PatchSequence> {
        self.check_dims(spec)?;
        let mats = patch_matrix(spec, self.p)?.unsqueeze(0)?;
        let patches = self.embed_mats(&mats)?.squeeze(0)?;
        Ok(PatchSequence {
            patches,
            positions: self.pos.clone(),
        })
    }

    /// Patch tokens for a batch, shape (b, n_patches, d_model).
    pub fn patchify_batch(&self, specs: &[&Spectrogram]) -> Result<Tensor> {
        let mut mats = Vec::with_capacity(specs.len());
        for s in specs {
            self.check_dims(s)?;
            mats.push(patch_matrix(s, self.p)?);
        }
        self.embed_mats(&Tensor::stack(&mats, 0)?)
    }
}

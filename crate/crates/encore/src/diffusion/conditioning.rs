use candle_core::{Device, Tensor};

use crate::error::{Error, Result};
use crate::label::{GenreLabel, N_GENRES};
use crate::music::{ContextEmbedding, D_CONTEXT};

/// Width of a conditioning row: context embedding plus genre one-hot.
pub const D_COND: usize = D_CONTEXT + N_GENRES;

/// Per-frame conditioning for the denoiser: each of the T rows is the
/// music context embedding with the genre one-hot appended, so the last
/// `N_GENRES` entries of every row form a valid one-hot.
#[derive(Debug, Clone)]
pub struct Conditioning {
    c: Tensor,
}

impl Conditioning {
    pub fn new(ctx: &ContextEmbedding, genre: GenreLabel) -> Result<Self> {
        let t_len = ctx.t();
        let oh: Vec<f64> = genre.one_hot().iter().map(|&v| v as f64).collect();
        let genre_rows = Tensor::from_vec(oh, (1, N_GENRES), &Device::Cpu)?
            .broadcast_as((t_len, N_GENRES))?
            .contiguous()?;
        let c = Tensor::cat(&[ctx.tensor(), &genre_rows], 1)?;
        Ok(Self { c })
    }

    /// Wraps an externally built (T, D_COND) tensor, checking the genre
    /// columns really are one-hot.
    pub fn from_tensor(c: Tensor) -> Result<Self> {
        let (_, width) = c.dims2()?;
        if width != D_COND {
            return Err(Error::ShapeMismatch(format!(
                "conditioning rows must have {D_COND} entries, got {width}"
            )));
        }
        let tail = c.narrow(1, D_CONTEXT, N_GENRES)?.to_vec2::<f64>()?;
        for (i, row) in tail.iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != N_GENRES - 1 {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} genre columns are not one-hot: {row:?}"
                )));
            }
        }
        Ok(Self { c })
    }

    pub fn t(&self) -> usize {
        self.c.dims2().expect("conditioning is 2-d").0
    }

    /// (T, D_COND) rows.
    pub fn tensor(&self) -> &Tensor {
        &self.c
    }

    /// (1, T, D_COND) view for batch-shaped consumers.
    pub fn batch(&self) -> Result<Tensor> {
        Ok(self.c.unsqueeze(0)?)
    }

    pub fn genre(&self) -> Result<GenreLabel> {
        let tail = self.c.narrow(1, D_CONTEXT, N_GENRES)?.to_vec2::<f64>()?;
        let idx = tail[0]
            .iter()
            .position(|&v| v == 1.0)
            .ok_or_else(|| Error::ShapeMismatch("genre columns are not one-hot".into()))?;
        GenreLabel::from_index(idx)
    }
}

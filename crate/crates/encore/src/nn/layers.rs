use candle_core::{Device, Tensor, D};
use candle_nn::ops::softmax;

use crate::error::Result;
use crate::nn::params::{Init, ParamBuilder};

/// Weight init scale for all fresh linear layers.
pub const INIT_STD: f64 = 0.02;
const LN_EPS: f64 = 1e-5;

/// Affine map y = x Wᵀ + b over the last dimension.
#[derive(Debug, Clone)]
pub struct Linear {
    w: Tensor,
    b: Tensor,
    d_in: usize,
    d_out: usize,
}

impl Linear {
    pub fn new(pb: &ParamBuilder, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let pb = pb.pp(name);
        Ok(Linear {
            w: pb.get("w", &[d_out, d_in], Init::Normal(INIT_STD))?,
            b: pb.get("b", &[d_out], Init::Zeros)?,
            d_in,
            d_out,
        })
    }

    /// Zero weight and bias; used for heads that must start as the zero map.
    pub fn new_zeroed(pb: &ParamBuilder, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let pb = pb.pp(name);
        Ok(Linear {
            w: pb.get("w", &[d_out, d_in], Init::Zeros)?,
            b: pb.get("b", &[d_out], Init::Zeros)?,
            d_in,
            d_out,
        })
    }

    /// Applies over the last axis of a rank-2 or rank-3 input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let n: usize = dims[..dims.len() - 1].iter().product();
        let flat = x.reshape((n, self.d_in))?;
        let y = flat.matmul(&self.w.t()?)?.broadcast_add(&self.b)?;
        let mut out_dims = dims;
        *out_dims.last_mut().expect("nonempty") = self.d_out;
        Ok(y.reshape(out_dims)?)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    w: Tensor,
    b: Tensor,
}

impl LayerNorm {
    pub fn new(pb: &ParamBuilder, name: &str, d: usize) -> Result<Self> {
        let pb = pb.pp(name);
        Ok(LayerNorm {
            w: pb.get("w", &[d], Init::Ones)?,
            b: pb.get("b", &[d], Init::Zeros)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mu = x.mean_keepdim(D::Minus1)?;
        let xc = x.broadcast_sub(&mu)?;
        let var = xc.sqr()?.mean_keepdim(D::Minus1)?;
        let xn = xc.broadcast_div(&(var + LN_EPS)?.sqrt()?)?;
        Ok(xn.broadcast_mul(&self.w)?.broadcast_add(&self.b)?)
    }
}

/// Batched multi-head attention; self-attention when `kv` is the query
/// input, cross-attention otherwise. No masking: every sequence here is
/// encoded bidirectionally.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    n_heads: usize,
    d_head: usize,
}

impl MultiHeadAttention {
    pub fn new(pb: &ParamBuilder, name: &str, d_model: usize, n_heads: usize) -> Result<Self> {
        assert!(d_model % n_heads == 0, "d_model must divide into heads");
        let pb = pb.pp(name);
        Ok(MultiHeadAttention {
            wq: Linear::new(&pb, "wq", d_model, d_model)?,
            wk: Linear::new(&pb, "wk", d_model, d_model)?,
            wv: Linear::new(&pb, "wv", d_model, d_model)?,
            wo: Linear::new(&pb, "wo", d_model, d_model)?,
            n_heads,
            d_head: d_model / n_heads,
        })
    }

    /// `q_in` is (B, Tq, D); `kv_in` is (B, Tk, D) with matching B and D.
    pub fn forward(&self, q_in: &Tensor, kv_in: &Tensor) -> Result<Tensor> {
        let (b, tq, d) = q_in.dims3()?;
        let (_, tk, _) = kv_in.dims3()?;
        let split = |t: &Tensor, len: usize| -> Result<Tensor> {
            Ok(t.reshape((b, len, self.n_heads, self.d_head))?
                .transpose(1, 2)?
                .contiguous()?)
        };
        let q = split(&self.wq.forward(q_in)?, tq)?;
        let k = split(&self.wk.forward(kv_in)?, tk)?;
        let v = split(&self.wv.forward(kv_in)?, tk)?;
        let scale = 1.0 / (self.d_head as f64).sqrt();
        let scores = (q.matmul(&k.transpose(2, 3)?.contiguous()?)? * scale)?;
        let attn = softmax(&scores, D::Minus1)?;
        let ctx = attn
            .matmul(&v)?
            .transpose(1, 2)?
            .reshape((b, tq, d))?;
        self.wo.forward(&ctx)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    w1: Linear,
    w2: Linear,
}

impl FeedForward {
    pub fn new(pb: &ParamBuilder, name: &str, d_model: usize, d_ff: usize) -> Result<Self> {
        let pb = pb.pp(name);
        Ok(FeedForward {
            w1: Linear::new(&pb, "w1", d_model, d_ff)?,
            w2: Linear::new(&pb, "w2", d_ff, d_model)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.w2.forward(&self.w1.forward(x)?.relu()?)
    }
}

/// Pre-norm transformer block with optional cross-attention.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    cross: Option<(LayerNorm, MultiHeadAttention)>,
    ln2: LayerNorm,
    ffn: FeedForward,
}

impl TransformerLayer {
    pub fn new(
        pb: &ParamBuilder,
        name: &str,
        d_model: usize,
        n_heads: usize,
        d_ff: usize,
        with_cross: bool,
    ) -> Result<Self> {
        let pb = pb.pp(name);
        let cross = if with_cross {
            Some((
                LayerNorm::new(&pb, "lnc", d_model)?,
                MultiHeadAttention::new(&pb, "cross", d_model, n_heads)?,
            ))
        } else {
            None
        };
        Ok(TransformerLayer {
            ln1: LayerNorm::new(&pb, "ln1", d_model)?,
            attn: MultiHeadAttention::new(&pb, "attn", d_model, n_heads)?,
            cross,
            ln2: LayerNorm::new(&pb, "ln2", d_model)?,
            ffn: FeedForward::new(&pb, "ffn", d_model, d_ff)?,
        })
    }

    /// `ctx` must be Some iff the layer was built with cross-attention.
    pub fn forward(&self, x: &Tensor, ctx: Option<&Tensor>) -> Result<Tensor> {
        debug_assert_eq!(self.cross.is_some(), ctx.is_some());
        let h = self.ln1.forward(x)?;
        let mut x = (x + self.attn.forward(&h, &h)?)?;
        if let (Some((lnc, cattn)), Some(ctx)) = (&self.cross, ctx) {
            let q = lnc.forward(&x)?;
            x = (&x + cattn.forward(&q, ctx)?)?;
        }
        let h = self.ln2.forward(&x)?;
        Ok((&x + self.ffn.forward(&h)?)?)
    }
}

/// Sinusoidal positional encoding table, shape (t_len, d).
pub fn sinusoidal_positions(t_len: usize, d: usize) -> Result<Tensor> {
    assert!(d % 2 == 0, "encoding dim must be even");
    let mut data = vec![0.0f64; t_len * d];
    for pos in 0..t_len {
        for i in 0..d / 2 {
            let freq = 10000f64.powf(-2.0 * i as f64 / d as f64);
            data[pos * d + 2 * i] = (pos as f64 * freq).sin();
            data[pos * d + 2 * i + 1] = (pos as f64 * freq).cos();
        }
    }
    Ok(Tensor::from_vec(data, (t_len, d), &Device::Cpu)?)
}

/// Sinusoidal embedding of arbitrary scalar positions (diffusion timesteps),
/// shape (values.len(), d).
pub fn scalar_sinusoidal_embedding(values: &[f64], d: usize) -> Result<Tensor> {
    assert!(d % 2 == 0, "encoding dim must be even");
    let mut data = vec![0.0f64; values.len() * d];
    for (row, &v) in values.iter().enumerate() {
        for i in 0..d / 2 {
            let freq = 10000f64.powf(-2.0 * i as f64 / d as f64);
            data[row * d + 2 * i] = (v * freq).sin();
            data[row * d + 2 * i + 1] = (v * freq).cos();
        }
    }
    Ok(Tensor::from_vec(data, (values.len(), d), &Device::Cpu)?)
}

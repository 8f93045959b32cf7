use candle_core::Var;
use candle_nn::optim::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;

use crate::error::Result;
use crate::rng::stream;

/// AdamW with the stack's default learning rate hyperparameters
/// (beta 0.9/0.999, eps 1e-8) and no weight decay: every trainer here
/// targets small corpora where decay only fights convergence.
pub fn adamw(vars: Vec<Var>, lr: f64) -> Result<AdamW> {
    Ok(AdamW::new(
        vars,
        ParamsAdamW {
            lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?)
}

/// Deterministic index batcher: reshuffles the pool each epoch from its own
/// seeded stream.
pub struct Batcher {
    order: Vec<usize>,
    pos: usize,
    rng: rand_chacha::ChaCha12Rng,
}

impl Batcher {
    pub fn new(n: usize, seed: u64, tag: &str) -> Self {
        let mut b = Batcher {
            order: (0..n).collect(),
            pos: 0,
            rng: stream(seed, tag),
        };
        b.order.shuffle(&mut b.rng);
        b
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        for _ in 0..size.min(self.order.len()) {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

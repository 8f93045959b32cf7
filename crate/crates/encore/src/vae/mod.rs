//! Transformer sequence VAE: distribution-token encoder, cross-attention
//! decoder with long skips, closed-form Gaussian KL objective, and a
//! deterministic trainer.

mod loss;
mod model;
mod train;

pub use loss::{kl_sum, reconstruction_sum, vae_loss};
pub use model::{
    reparameterize, LatentSequence, PosteriorParams, VaeConfig, VaeDecoder, VaeEncoder, VaeModel,
};
pub use train::{load_vae, train_vae, TrainLog, TrainLogEntry, VaeTrainConfig};

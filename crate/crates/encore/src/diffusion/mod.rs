//! Conditional latent diffusion over the VAE's token space: linear-beta
//! DDPM schedule, transformer noise predictor cross-attending to the music
//! context, strided ancestral sampler, and the end-to-end generation path.

mod conditioning;
mod denoiser;
mod forward;
mod generate;
mod loss;
mod sample;
mod schedule;
mod train;
mod train_data;

pub use conditioning::{Conditioning, D_COND};
pub use denoiser::{DenoiserConfig, FixedDenoiser, NoisePredictor, TransformerDenoiser, ZeroDenoiser};
pub use forward::{q_sample, q_sample_rng};
pub use generate::generate_dance;
pub use loss::{diffusion_loss, diffusion_loss_terms};
pub use sample::{denoise_step, sample_latent, sample_latent_seeded};
pub use schedule::{
    make_schedule, DiffusionSchedule, StridedSchedule, DEFAULT_BETA1, DEFAULT_BETA_T,
    DEFAULT_INFER_STEPS, DEFAULT_T_STEPS,
};
pub use train::{
    load_diffusion, train_diffusion, DiffusionLogEntry, DiffusionModel, DiffusionTrainConfig,
    DiffusionTrainLog,
};

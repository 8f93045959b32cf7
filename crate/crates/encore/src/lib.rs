//! Music-conditioned dance generation: motion representation, synthetic
//! music/dance corpus, music feature encoding, genre prediction, a motion
//! sequence VAE, latent diffusion, and choreography evaluation metrics.

pub mod container;
pub mod corpus;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod genre;
pub mod hash;
pub mod label;
pub mod motion;
pub mod music;
pub mod nn;
pub mod vae;
pub mod rng;

pub use error::{Error, Result};

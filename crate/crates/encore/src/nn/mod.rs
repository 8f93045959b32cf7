//! Shared neural-network plumbing: seeded parameter creation, transformer
//! building blocks, checkpoint archives, optimization, and finite-difference
//! gradient verification. Everything runs on CPU in f64.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;

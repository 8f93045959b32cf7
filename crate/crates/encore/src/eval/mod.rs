//! Choreography evaluation: kinetic/geometric features, Fréchet distance,
//! diversity, beat alignment, and the physical foot-contact score.

mod beats;
mod geometric;
mod kinetic;
mod pfc;
mod stats;
mod suite;

pub use beats::{beat_align_score, dance_beats, peak_pick_maxima};
pub use geometric::{
    geometric_features, mirror_x, GeometricConfig, GeometricFeature, GEOMETRIC_DIM,
    GEOMETRIC_PAIRS, GEOMETRIC_UNPAIRED,
};
pub use kinetic::{kinetic_features, KineticFeature, KINETIC_DIM};
pub use pfc::pfc;
pub use stats::{diversity, fid, fid_reference, fit_stats, GaussianStats, COV_REG};
pub use suite::{evaluate_suite, EvalReport};

//! Deterministic synthetic music and dance corpus.
//!
//! Each pair couples a beat-locked motion loop (four genre-specific
//! keyframes, eased quaternion interpolation) with a feature sequence whose
//! channels encode the same phase, tempo, and genre information the motion
//! follows, so the mapping from music to motion is learnable by design.

mod gen;
mod grid;
mod manifest;
mod motif;
mod spec;

pub use gen::{assign_pairs, beat_grid, gen_corpus, gen_pair};
pub use grid::BeatGrid;
pub use manifest::{read_manifest, write_manifest, ManifestEntry};
pub use motif::{bank, classify_motion_nearest_centroid, genre_centroid, Pose, LOOP_LEN};
pub use spec::{CorpusSpec, MIN_FRAMES, TEMPO_MAX, TEMPO_MIN};

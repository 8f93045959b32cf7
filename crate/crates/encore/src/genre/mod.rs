//! Genre classification over log-mel images.
//!
//! Audio becomes a fixed-geometry [`Spectrogram`] (or a corpus feature file
//! stands in for one), gets cut into square patches, linearly projected,
//! position-tagged, run through a transformer backbone, and scored by a
//! small convolutional head with a residual skip. The backbone can be a
//! fresh encoder trained along with the head, held frozen, or loaded from
//! an external dump that is always frozen; the head, patch projection, and
//! positions train in every mode.

mod model;
mod patch;
mod spectrogram;
mod train;

pub use model::{
    backbone_encode, cross_entropy, head_predict, load_backbone_dump, probs, write_backbone_dump,
    Backbone, BackboneConfig, GenreHead, GenreModel, GenreModelConfig,
};
pub use patch::{patch_grid, PatchEmbedder, PatchSequence};
pub use spectrogram::{
    make_spectrogram, mel_log_floor, Spectrogram, CANONICAL_FRAMES, DEFAULT_N_MELS,
    SPECTROGRAM_SECONDS,
};
pub use train::{
    evaluate_genre, holdout_split, load_genre, train_genre, GenreLogEntry, GenreTrainConfig,
    GenreTrainLog,
};

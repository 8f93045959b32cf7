//! Music conditioning: spectral feature extraction, precomputed-embedding
//! loading, frame alignment, context encoding, and music beat detection.

mod beats;
mod context;
mod spectral;
mod types;
mod wav;

pub use beats::detect_music_beats;
pub use context::{
    encode_context, features_tensor, ContextEmbedding, ContextEncoder, ContextEncoderConfig,
    D_CONTEXT,
};
pub(crate) use spectral::{hann, mel_filterbank};
pub use spectral::{extract_from_wav, extract_spectral_features};
pub use types::{
    default_spectral_map, infer_channel_map, ChannelMap, MusicFeatureSequence, JUKEBOX_DIM,
    SPECTRAL_DIM,
};
pub use wav::read_wav_mono;

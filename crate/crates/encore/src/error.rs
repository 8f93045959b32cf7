//! Crate-wide error type.
//!
//! One variant per failure condition surfaced by the public API. The CLI maps
//! these onto single-line diagnostics and nonzero exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // motion
    #[error("rotation block invalid at frame {frame}, joint {joint}: {detail}")]
    RotationInvalid {
        frame: usize,
        joint: usize,
        detail: String,
    },
    #[error("sequence shape invalid: got {got}, expected {expected}")]
    ShapeInvalid { got: String, expected: String },
    #[error("joint parent array is not a tree: {0}")]
    CycleDetected(String),
    #[error("empty result: {0}")]
    EmptyResult(String),

    // corpus
    #[error("corpus spec invalid: {0}")]
    SpecInvalid(String),

    // containers / files
    #[error("file format invalid: {0}")]
    FormatInvalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    // music
    #[error("audio too short: need at least {need_s} s, got {got_s:.3} s")]
    AudioTooShort { need_s: f64, got_s: f64 },
    #[error("sample rate {0} Hz unsupported (need >= 8000)")]
    SampleRateUnsupported(u32),
    #[error("feature length {feat_t} at {feat_fps} fps cannot align to {motion_t} motion frames")]
    LengthMismatch {
        feat_t: usize,
        feat_fps: f64,
        motion_t: usize,
    },
    #[error("no onset channel in feature sequence")]
    NoOnsetChannel,

    // models
    #[error("parameter shape mismatch: {0}")]
    ParamShapeMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("patch size {p} too large for spectrogram {mels}x{frames}")]
    PatchTooLarge { p: usize, mels: usize, frames: usize },
    #[error("backbone missing: {0}")]
    BackboneMissing(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(String),

    // diffusion
    #[error("diffusion schedule invalid: {0}")]
    ScheduleInvalid(String),
    #[error("diffusion step {t} out of range 1..={t_max}")]
    StepOutOfRange { t: usize, t_max: usize },

    // eval
    #[error("sequence too short: need {need} frames, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("too few samples: need {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("feature dimension mismatch: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
    #[error("music beat list is empty")]
    EmptyMusicBeats,

    // config / checkpoints
    #[error("config parse error: {0}")]
    ParseError(String),
    #[error("unknown config key: {0}")]
    UnknownKey(String),
    #[error("config value out of range: {0}")]
    RangeError(String),
    #[error("checkpoint incompatible: {0}")]
    CheckpointIncompatible(String),
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Candle(#[from] candle_core::Error),
}

impl Error {
    /// Stable diagnostic code, used by the CLI for single-line failures.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RotationInvalid { .. } => "ROTATION_INVALID",
            Error::ShapeInvalid { .. } => "SHAPE_INVALID",
            Error::CycleDetected(_) => "CYCLE_DETECTED",
            Error::EmptyResult(_) => "EMPTY_RESULT",
            Error::SpecInvalid(_) => "SPEC_INVALID",
            Error::FormatInvalid(_) => "FORMAT_INVALID",
            Error::Io(_) => "IO_ERROR",
            Error::AudioTooShort { .. } => "AUDIO_TOO_SHORT",
            Error::SampleRateUnsupported(_) => "SAMPLE_RATE_UNSUPPORTED",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::NoOnsetChannel => "NO_ONSET_CHANNEL",
            Error::ParamShapeMismatch(_) => "PARAM_SHAPE_MISMATCH",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::PatchTooLarge { .. } => "PATCH_TOO_LARGE",
            Error::BackboneMissing(_) => "BACKBONE_MISSING",
            Error::EmptyCorpus => "EMPTY_CORPUS",
            Error::NonFiniteLoss(_) => "NONFINITE_LOSS",
            Error::ScheduleInvalid(_) => "SCHEDULE_INVALID",
            Error::StepOutOfRange { .. } => "STEP_OUT_OF_RANGE",
            Error::TooShort { .. } => "TOO_SHORT",
            Error::TooFewSamples { .. } => "TOO_FEW_SAMPLES",
            Error::DimMismatch { .. } => "DIM_MISMATCH",
            Error::EmptyMusicBeats => "EMPTY_MUSIC_BEATS",
            Error::ParseError(_) => "PARSE_ERROR",
            Error::UnknownKey(_) => "UNKNOWN_KEY",
            Error::RangeError(_) => "RANGE_ERROR",
            Error::CheckpointIncompatible(_) => "CHECKPOINT_INCOMPATIBLE",
            Error::Usage(_) => "USAGE_ERROR",
            Error::Candle(_) => "INTERNAL",
        }
    }
}

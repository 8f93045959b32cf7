use crate::error::{Error, Result};
use crate::label::GenreLabel;

/// Parameters of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_pairs: usize,
    /// Genres with mixing weights; weights must sum to 1.
    pub genres: Vec<(GenreLabel, f64)>,
    pub duration_s: f64,
    pub fps: f64,
    pub tempo_range_bpm: (f64, f64),
}

pub const TEMPO_MIN: f64 = 60.0;
pub const TEMPO_MAX: f64 = 180.0;
/// Shortest usable sequence: one training window.
pub const MIN_FRAMES: f64 = 240.0;

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.genres.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::SpecInvalid(format!("genre weights sum to {sum}")));
        }
        if self.genres.iter().any(|(_, w)| *w < 0.0) {
            return Err(Error::SpecInvalid("negative genre weight".into()));
        }
        let (lo, hi) = self.tempo_range_bpm;
        if !(TEMPO_MIN..=TEMPO_MAX).contains(&lo) || !(TEMPO_MIN..=TEMPO_MAX).contains(&hi) || lo > hi
        {
            return Err(Error::SpecInvalid(format!(
                "tempo range [{lo}, {hi}] outside [{TEMPO_MIN}, {TEMPO_MAX}]"
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::SpecInvalid("fps and duration must be positive".into()));
        }
        if self.duration_s * self.fps < MIN_FRAMES {
            return Err(Error::SpecInvalid(format!(
                "duration {} s at {} fps is under {MIN_FRAMES} frames",
                self.duration_s, self.fps
            )));
        }
        Ok(())
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 0,
            n_pairs: 16,
            genres: crate::label::ALL_GENRES.iter().map(|&g| (g, 0.25)).collect(),
            duration_s: 12.0,
            fps: 20.0,
            tempo_range_bpm: (90.0, 150.0),
        }
    }
}

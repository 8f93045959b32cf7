use std::path::Path;

use crate::container::{self, Container, MAGIC_FEATURES};
use crate::error::{Error, Result};
use crate::label::GenreLabel;

/// Channel count of the default spectral stack:
/// mfcc 20 | mfcc_delta 20 | chroma 12 | tempogram 16 | onset 1.
pub const SPECTRAL_DIM: usize = 69;
/// Channel count of externally computed embedding dumps.
pub const JUKEBOX_DIM: usize = 4800;

/// Named channel spans in storage order.
pub type ChannelMap = Vec<(String, usize)>;

pub fn default_spectral_map() -> ChannelMap {
    vec![
        ("mfcc".into(), 20),
        ("mfcc_delta".into(), 20),
        ("chroma".into(), 12),
        ("tempogram".into(), 16),
        ("onset".into(), 1),
    ]
}

/// Feature files carry no channel map; well-known widths get the standard
/// maps, anything else a single unnamed span.
pub fn infer_channel_map(c: usize) -> ChannelMap {
    match c {
        SPECTRAL_DIM => default_spectral_map(),
        JUKEBOX_DIM => vec![("jukebox".into(), JUKEBOX_DIM)],
        other => vec![("feat".into(), other)],
    }
}

/// Frame-aligned music conditioning features, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicFeatureSequence {
    feats: Vec<f32>,
    c: usize,
    fps: f64,
    pub channel_map: ChannelMap,
    pub genre: Option<GenreLabel>,
}

impl MusicFeatureSequence {
    pub fn new(
        feats: Vec<f32>,
        c: usize,
        fps: f64,
        channel_map: ChannelMap,
        genre: Option<GenreLabel>,
    ) -> Result<Self> {
        let span_sum: usize = channel_map.iter().map(|(_, n)| n).sum();
        if span_sum != c {
            return Err(Error::ShapeInvalid {
                got: format!("channel map covers {span_sum}"),
                expected: format!("{c} channels"),
            });
        }
        if c == 0 || feats.is_empty() || feats.len() % c != 0 {
            return Err(Error::ShapeInvalid {
                got: format!("{} values, {c} channels", feats.len()),
                expected: "nonempty T x C array".into(),
            });
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::ShapeInvalid {
                got: format!("fps {fps}"),
                expected: "positive finite fps".into(),
            });
        }
        if let Some(bad) = feats.iter().find(|v| !v.is_finite()) {
            return Err(Error::ShapeInvalid {
                got: format!("non-finite value {bad}"),
                expected: "finite entries".into(),
            });
        }
        Ok(MusicFeatureSequence {
            feats,
            c,
            fps,
            channel_map,
            genre,
        })
    }

    pub fn t(&self) -> usize {
        self.feats.len() / self.c
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn feats(&self) -> &[f32] {
        &self.feats
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.feats[t * self.c..(t + 1) * self.c]
    }

    /// Start offset and width of a named channel span.
    pub fn span(&self, name: &str) -> Option<(usize, usize)> {
        let mut start = 0;
        for (n, w) in &self.channel_map {
            if n == name {
                return Some((start, *w));
            }
            start += w;
        }
        None
    }

    /// The onset-strength channel as one value per frame.
    pub fn onset_envelope(&self) -> Result<Vec<f64>> {
        let (start, width) = self.span("onset").ok_or(Error::NoOnsetChannel)?;
        debug_assert_eq!(width, 1);
        Ok((0..self.t())
            .map(|t| self.row(t)[start] as f64)
            .collect())
    }

    pub fn to_container(&self) -> Container {
        Container::new(
            self.fps,
            self.t(),
            self.c,
            GenreLabel::to_byte(self.genre),
            self.feats.clone(),
        )
    }

    pub fn from_container(c: Container) -> Result<Self> {
        let genre = GenreLabel::from_byte(c.genre)?;
        let map = infer_channel_map(c.width);
        MusicFeatureSequence::new(c.data, c.width, c.fps, map, genre)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write(path, &MAGIC_FEATURES, &self.to_container())
    }

    /// Reads a stored feature file, including externally computed embedding
    /// dumps (any width is accepted; the channel map is inferred).
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(container::read(path, &MAGIC_FEATURES)?)
    }

    /// Resamples along time by linear interpolation so the output has
    /// exactly `motion_t` rows at `motion_fps`. The implied length
    /// t·motion_fps/fps must land within ±2 frames of `motion_t`; larger
    /// gaps mean the features belong to different audio.
    pub fn align_to_motion(&self, motion_fps: f64, motion_t: usize) -> Result<Self> {
        assert!(motion_fps.is_finite() && motion_fps > 0.0);
        let implied = self.t() as f64 * motion_fps / self.fps;
        if (implied - motion_t as f64).abs() > 2.0 {
            return Err(Error::LengthMismatch {
                feat_t: self.t(),
                feat_fps: self.fps,
                motion_t,
            });
        }
        if motion_t == self.t() && motion_fps == self.fps {
            return Ok(self.clone());
        }
        let t_in = self.t();
        // Output row i sits at time i/motion_fps, so it reads source index
        // i·fps/motion_fps, clamped at the end.
        let scale = self.fps / motion_fps;
        let mut feats = Vec::with_capacity(motion_t * self.c);
        for i in 0..motion_t {
            let s = (i as f64 * scale).min((t_in - 1) as f64);
            let lo = (s.floor() as usize).min(t_in - 1);
            let frac = s - lo as f64;
            if frac == 0.0 || lo + 1 >= t_in {
                feats.extend_from_slice(self.row(lo));
            } else {
                let a = self.row(lo);
                let b = self.row(lo + 1);
                for k in 0..self.c {
                    feats.push(((1.0 - frac) * a[k] as f64 + frac * b[k] as f64) as f32);
                }
            }
        }
        MusicFeatureSequence::new(
            feats,
            self.c,
            motion_fps,
            self.channel_map.clone(),
            self.genre,
        )
    }
}

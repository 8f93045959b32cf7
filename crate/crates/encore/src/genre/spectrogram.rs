use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::music::{hann, mel_filterbank, MusicFeatureSequence};

/// Mel bands of a waveform-derived spectrogram.
pub const DEFAULT_N_MELS: usize = 128;
/// Analysis window in seconds; longer input is center-cropped, shorter is
/// right-padded with the log floor.
pub const SPECTROGRAM_SECONDS: f64 = 10.0;
/// Spectrogram frame rate. The hop is fixed in seconds, so every sample
/// rate yields the same `CANONICAL_FRAMES` columns.
pub const SPECTROGRAM_FPS: f64 = 20.0;
/// Columns of every waveform-derived spectrogram.
pub const CANONICAL_FRAMES: usize = 200;
/// Additive floor inside the log so silent bands stay finite.
pub const MEL_LOG_EPS: f64 = 1e-10;

const N_FFT: usize = 1024;
const N_BINS: usize = N_FFT / 2 + 1;

/// Log power of a fully silent mel cell; padding frames are filled with it.
pub fn mel_log_floor() -> f64 {
    MEL_LOG_EPS.ln()
}

/// Log-mel image, `n_mels` rows by `n_frames` columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    mel: Vec<f64>,
    n_mels: usize,
    n_frames: usize,
}

impl Spectrogram {
    pub fn new(mel: Vec<f64>, n_mels: usize, n_frames: usize) -> Result<Self> {
        if n_mels == 0 || n_frames == 0 || mel.len() != n_mels * n_frames {
            return Err(Error::FormatInvalid(format!(
                "spectrogram data has {} entries, expected {n_mels}x{n_frames}",
                mel.len()
            )));
        }
        if !mel.iter().all(|v| v.is_finite()) {
            return Err(Error::FormatInvalid(
                "non-finite spectrogram entry".into(),
            ));
        }
        Ok(Spectrogram {
            mel,
            n_mels,
            n_frames,
        })
    }

    /// Classifier input for corpora that store feature files instead of
    /// audio: the T x C feature matrix transposed into a C x T image. Rows
    /// become feature channels; patching and classification are unchanged.
    pub fn from_features(mf: &MusicFeatureSequence) -> Result<Self> {
        let (t_len, c) = (mf.t(), mf.c());
        let mut mel = vec![0.0; c * t_len];
        for t in 0..t_len {
            let row = mf.row(t);
            for (ch, &v) in row.iter().enumerate() {
                mel[ch * t_len + t] = v as f64;
            }
        }
        Spectrogram::new(mel, c, t_len)
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Cell at mel row `m`, frame column `t`.
    pub fn value(&self, m: usize, t: usize) -> f64 {
        self.mel[m * self.n_frames + t]
    }

    pub fn mel(&self) -> &[f64] {
        &self.mel
    }
}

/// Log-mel analysis of a mono waveform over a 10 s window: input longer
/// than the window is center-cropped, shorter input is right-padded with
/// `mel_log_floor()`. Always `DEFAULT_N_MELS` x `CANONICAL_FRAMES`.
pub fn make_spectrogram(waveform: &[f64], sample_rate: u32) -> Result<Spectrogram> {
    assert!(sample_rate > 0, "sample rate must be positive");
    let got_s = waveform.len() as f64 / sample_rate as f64;
    if got_s < 1.0 {
        return Err(Error::AudioTooShort { need_s: 1.0, got_s });
    }
    let win_samples = (SPECTROGRAM_SECONDS * sample_rate as f64).round() as usize;
    let wave = if waveform.len() > win_samples {
        &waveform[(waveform.len() - win_samples) / 2..][..win_samples]
    } else {
        waveform
    };
    let hop = sample_rate as f64 / SPECTROGRAM_FPS;
    let n_real = (((wave.len() as f64 / hop) + 1e-9).floor() as usize).min(CANONICAL_FRAMES);

    let window = hann(N_FFT);
    let fb = mel_filterbank(DEFAULT_N_MELS, N_FFT, sample_rate);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(N_FFT);
    let mut mel = vec![mel_log_floor(); DEFAULT_N_MELS * CANONICAL_FRAMES];
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    for t in 0..n_real {
        let start = (t as f64 * hop).round() as usize;
        for n in 0..N_FFT {
            let s = wave.get(start + n).copied().unwrap_or(0.0);
            buf[n] = Complex::new(s * window[n], 0.0);
        }
        fft.process(&mut buf);
        for m in 0..DEFAULT_N_MELS {
            let e: f64 = (0..N_BINS)
                .map(|k| fb[m * N_BINS + k] * buf[k].norm_sqr())
                .sum();
            mel[m * CANONICAL_FRAMES + t] = (e + MEL_LOG_EPS).ln();
        }
    }
    Spectrogram::new(mel, DEFAULT_N_MELS, CANONICAL_FRAMES)
}

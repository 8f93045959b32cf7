use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::music::types::{default_spectral_map, MusicFeatureSequence, SPECTRAL_DIM};
use crate::music::wav::read_wav_mono;

const N_FFT: usize = 1024;
const N_BINS: usize = N_FFT / 2 + 1;
const N_MELS: usize = 40;
const N_MFCC: usize = 20;
const N_CHROMA: usize = 12;
const N_TEMPO: usize = 16;
/// Floor inside the log so silent bands stay finite.
const LOG_EPS: f64 = 1e-10;
/// Half-width of the centered autocorrelation window for the tempogram.
const TEMPO_HALF_WIN: usize = 32;

/// Hann window of `n` samples.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank over [0, sr/2]: `n_mels` rows by
/// `n_fft / 2 + 1` columns.
pub(crate) fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Vec<f64> {
    let n_bins = n_fft / 2 + 1;
    let fmax = sample_rate as f64 / 2.0;
    let mel_pts: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(hz_to_mel(fmax) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let mut fb = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, mid, hi) = (mel_pts[m], mel_pts[m + 1], mel_pts[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * sample_rate as f64 / n_fft as f64;
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            fb[m * n_bins + k] = w;
        }
    }
    fb
}

/// Orthonormal DCT-II basis, N_MFCC rows by N_MELS columns.
fn dct_basis() -> Vec<f64> {
    let m = N_MELS as f64;
    let mut basis = vec![0.0; N_MFCC * N_MELS];
    for c in 0..N_MFCC {
        let alpha = if c == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
        for j in 0..N_MELS {
            basis[c * N_MELS + j] =
                alpha * (std::f64::consts::PI * c as f64 * (2 * j + 1) as f64 / (2.0 * m)).cos();
        }
    }
    basis
}

/// Pitch class (C = 0 .. B = 11) for each FFT bin, or None outside the
/// melodic range. 440 Hz maps to class 9 (A).
fn bin_pitch_classes(sample_rate: u32) -> Vec<Option<usize>> {
    (0..N_BINS)
        .map(|k| {
            let f = k as f64 * sample_rate as f64 / N_FFT as f64;
            if !(55.0..4186.01).contains(&f) || f >= sample_rate as f64 / 2.0 {
                return None;
            }
            let semis = (12.0 * (f / 440.0).log2()).round() as i64;
            Some(((9 + semis).rem_euclid(12)) as usize)
        })
        .collect()
}

/// Frames a waveform into MFCC, MFCC delta, chromagram, tempogram, and onset
/// strength channels at `target_fps`. The hop is `sample_rate / target_fps`
/// samples, so a 10 s clip at 20 fps yields exactly 200 frames.
pub fn extract_spectral_features(
    waveform: &[f64],
    sample_rate: u32,
    target_fps: f64,
) -> Result<MusicFeatureSequence> {
    assert!(target_fps.is_finite() && target_fps > 0.0);
    if sample_rate < 8000 {
        return Err(Error::SampleRateUnsupported(sample_rate));
    }
    let got_s = waveform.len() as f64 / sample_rate as f64;
    if got_s < 1.0 {
        return Err(Error::AudioTooShort { need_s: 1.0, got_s });
    }
    let hop = sample_rate as f64 / target_fps;
    let t_len = ((waveform.len() as f64 / hop) + 1e-9).floor().max(1.0) as usize;

    let window = hann(N_FFT);
    let fb = mel_filterbank(N_MELS, N_FFT, sample_rate);
    let dct = dct_basis();
    let classes = bin_pitch_classes(sample_rate);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(N_FFT);

    // Pass 1: per-frame log-mel power and raw chroma.
    let mut logmel = vec![0.0f64; t_len * N_MELS];
    let mut chroma = vec![0.0f64; t_len * N_CHROMA];
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    for t in 0..t_len {
        let start = (t as f64 * hop).round() as usize;
        for n in 0..N_FFT {
            let s = waveform.get(start + n).copied().unwrap_or(0.0);
            buf[n] = Complex::new(s * window[n], 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..N_BINS].iter().map(|c| c.norm_sqr()).collect();
        for m in 0..N_MELS {
            let e: f64 = (0..N_BINS).map(|k| fb[m * N_BINS + k] * power[k]).sum();
            logmel[t * N_MELS + m] = (e + LOG_EPS).ln();
        }
        for (k, class) in classes.iter().enumerate() {
            if let Some(p) = class {
                chroma[t * N_CHROMA + p] += power[k];
            }
        }
        let peak = chroma[t * N_CHROMA..(t + 1) * N_CHROMA]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        if peak > 0.0 {
            for v in &mut chroma[t * N_CHROMA..(t + 1) * N_CHROMA] {
                *v /= peak;
            }
        }
    }

    // Pass 2: MFCC and onset strength (positive log-mel flux).
    let mut mfcc = vec![0.0f64; t_len * N_MFCC];
    let mut onset = vec![0.0f64; t_len];
    for t in 0..t_len {
        for c in 0..N_MFCC {
            mfcc[t * N_MFCC + c] = (0..N_MELS)
                .map(|j| dct[c * N_MELS + j] * logmel[t * N_MELS + j])
                .sum();
        }
        if t > 0 {
            onset[t] = (0..N_MELS)
                .map(|m| (logmel[t * N_MELS + m] - logmel[(t - 1) * N_MELS + m]).max(0.0))
                .sum();
        }
    }

    // Pass 3: assemble rows in channel_map order.
    let mut feats = vec![0.0f32; t_len * SPECTRAL_DIM];
    for t in 0..t_len {
        let row = &mut feats[t * SPECTRAL_DIM..(t + 1) * SPECTRAL_DIM];
        for c in 0..N_MFCC {
            row[c] = mfcc[t * N_MFCC + c] as f32;
        }
        // Delta: central difference with replicated endpoints.
        let prev = t.saturating_sub(1);
        let next = (t + 1).min(t_len - 1);
        for c in 0..N_MFCC {
            row[N_MFCC + c] =
                ((mfcc[next * N_MFCC + c] - mfcc[prev * N_MFCC + c]) / 2.0) as f32;
        }
        for c in 0..N_CHROMA {
            row[40 + c] = chroma[t * N_CHROMA + c] as f32;
        }
        // Tempogram: onset autocorrelation at lags 1..=16 frames over a
        // centered window, normalized by window energy.
        let lo = t.saturating_sub(TEMPO_HALF_WIN);
        let hi = (t + TEMPO_HALF_WIN).min(t_len - 1);
        let energy: f64 = (lo..=hi).map(|u| onset[u] * onset[u]).sum();
        for (c, lag) in (1..=N_TEMPO).enumerate() {
            let acc: f64 = (lo.max(lag)..=hi).map(|u| onset[u] * onset[u - lag]).sum();
            row[52 + c] = (acc / (energy + LOG_EPS)) as f32;
        }
        row[68] = onset[t] as f32;
    }
    MusicFeatureSequence::new(feats, SPECTRAL_DIM, target_fps, default_spectral_map(), None)
}

/// Reads a WAV file and extracts the spectral feature channels.
pub fn extract_from_wav(path: &Path, target_fps: f64) -> Result<MusicFeatureSequence> {
    let (mono, sr) = read_wav_mono(path)?;
    extract_spectral_features(&mono, sr, target_fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn sine(freq: f64, seconds: f64, sr: u32) -> Vec<f64> {
        (0..(seconds * sr as f64) as usize)
            .map(|n| 0.8 * (std::f64::consts::TAU * freq * n as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn ten_seconds_at_20fps_gives_200_frames() {
        let mf = extract_spectral_features(&sine(330.0, 10.0, 16000), 16000, 20.0).unwrap();
        assert_eq!(mf.t(), 200);
        assert_eq!(mf.c(), SPECTRAL_DIM);
        assert_eq!(mf.fps(), 20.0);
    }

    #[test]
    fn silence_has_zero_onset() {
        let mf = extract_spectral_features(&vec![0.0; 32000], 16000, 20.0).unwrap();
        let onset = mf.onset_envelope().unwrap();
        assert!(onset.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_tone_concentrates_chroma_at_its_pitch_class() {
        // Oracle: the pitch class follows directly from the frequency;
        // 440 Hz is A (class 9), 261.626 Hz is C (class 0).
        for (freq, class) in [(440.0, 9usize), (261.626, 0)] {
            let mf = extract_spectral_features(&sine(freq, 3.0, 16000), 16000, 20.0).unwrap();
            let (start, width) = mf.span("chroma").unwrap();
            assert_eq!(width, 12);
            for t in 0..mf.t() {
                let row = mf.row(t);
                let argmax = (0..12)
                    .max_by(|&a, &b| {
                        row[start + a].partial_cmp(&row[start + b]).unwrap()
                    })
                    .unwrap();
                assert_eq!(argmax, class, "freq {freq} frame {t}");
            }
        }
    }

    #[test]
    fn low_sample_rate_rejected() {
        let err = extract_spectral_features(&vec![0.0; 8000], 4000, 20.0).unwrap_err();
        assert!(matches!(err, Error::SampleRateUnsupported(4000)));
    }

    #[test]
    fn short_audio_rejected() {
        let err = extract_spectral_features(&vec![0.0; 4000], 8000, 20.0).unwrap_err();
        assert!(matches!(err, Error::AudioTooShort { .. }));
    }

    #[test]
    fn onset_nonnegative_and_finite_on_noise() {
        let mut rng = stream(7, "spectral-noise");
        let wave: Vec<f64> = (0..48000).map(|_| rng.random_range(-0.9..0.9)).collect();
        let mf = extract_spectral_features(&wave, 16000, 20.0).unwrap();
        let onset = mf.onset_envelope().unwrap();
        assert!(onset.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn delta_channel_tracks_mfcc_central_difference() {
        let mut rng = stream(8, "spectral-delta");
        let wave: Vec<f64> = (0..80000)
            .map(|n| {
                let f = 200.0 + 150.0 * ((n / 8000) % 3) as f64;
                0.5 * (std::f64::consts::TAU * f * n as f64 / 16000.0).sin()
                    + 0.05 * rng.random_range(-1.0..1.0)
            })
            .collect();
        let mf = extract_spectral_features(&wave, 16000, 20.0).unwrap();
        let (ms, _) = mf.span("mfcc").unwrap();
        let (ds, _) = mf.span("mfcc_delta").unwrap();
        for t in 1..mf.t() - 1 {
            for c in 0..20 {
                let expect = (mf.row(t + 1)[ms + c] - mf.row(t - 1)[ms + c]) / 2.0;
                assert!((mf.row(t)[ds + c] - expect).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn wav_file_path_produces_same_chroma_peak() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for s in sine(440.0, 2.0, 16000) {
            w.write_sample((s * 32767.0) as i16).unwrap();
        }
        w.finalize().unwrap();
        let mf = extract_from_wav(&path, 20.0).unwrap();
        assert_eq!(mf.t(), 40);
        let (start, _) = mf.span("chroma").unwrap();
        let row = mf.row(10);
        let argmax = (0..12)
            .max_by(|&a, &b| row[start + a].partial_cmp(&row[start + b]).unwrap())
            .unwrap();
        assert_eq!(argmax, 9);
    }
}

use std::path::Path;

use crate::error::{Error, Result};

/// Decodes a WAV file to a mono f64 waveform in [-1, 1] plus its sample
/// rate. Multi-channel input is downmixed by averaging.
pub fn read_wav_mono(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::FormatInvalid(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int
        || !(spec.bits_per_sample == 16 || spec.bits_per_sample == 24)
    {
        return Err(Error::FormatInvalid(format!(
            "{}: only 16/24-bit PCM supported, got {:?} {}-bit",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
    let channels = spec.channels as usize;
    let mut mono = Vec::new();
    let mut acc = 0.0f64;
    let mut in_frame = 0usize;
    for s in reader.samples::<i32>() {
        let s = s.map_err(|e| Error::FormatInvalid(format!("{}: {e}", path.display())))?;
        acc += s as f64 * scale;
        in_frame += 1;
        if in_frame == channels {
            mono.push(acc / channels as f64);
            acc = 0.0;
            in_frame = 0;
        }
    }
    Ok((mono, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_wav(path: &Path, spec: hound::WavSpec, frames: &[[f64; 2]]) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        let full = (1i64 << (spec.bits_per_sample - 1)) as f64;
        for f in frames {
            for c in 0..spec.channels as usize {
                let v = (f[c] * full).round().clamp(-full, full - 1.0) as i32;
                w.write_sample(v).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn stereo_16bit_downmixes_to_average() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write_wav(&path, spec, &[[0.5, -0.5], [0.25, 0.25], [-1.0, 0.0]]);
        let (mono, sr) = read_wav_mono(&path).unwrap();
        assert_eq!(sr, 16000);
        assert_eq!(mono.len(), 3);
        assert!(mono[0].abs() < 1e-4);
        assert!((mono[1] - 0.25).abs() < 1e-4);
        assert!((mono[2] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn mono_24bit_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        write_wav(&path, spec, &[[0.125, 0.0], [-0.75, 0.0]]);
        let (mono, sr) = read_wav_mono(&path).unwrap();
        assert_eq!(sr, 22050);
        assert!((mono[0] - 0.125).abs() < 1e-6);
        assert!((mono[1] + 0.75).abs() < 1e-6);
    }

    #[test]
    fn float_wav_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_wav_mono(&path),
            Err(Error::FormatInvalid(_))
        ));
    }
}

use crate::error::{Error, Result};
use crate::motion::rotation::nearest_rotation;
use crate::motion::types::{MotionSequence, FRAME_WIDTH, N_JOINTS};

/// Training windows at starts 0, step, 2·step, … with start+win ≤ T.
/// Returns an empty list when the sequence is shorter than the window.
pub fn sliding_window(seq: &MotionSequence, win: usize, step: usize) -> Vec<MotionSequence> {
    assert!(win >= 1 && step >= 1, "win and step must be positive");
    let t = seq.t();
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= t {
        let rows = seq.frames()[start * FRAME_WIDTH..(start + win) * FRAME_WIDTH].to_vec();
        out.push(MotionSequence::new(rows, seq.fps(), seq.genre).expect("window shape"));
        start += step;
    }
    out
}

/// Resamples to a new frame rate: frame count scales by target_fps/fps,
/// translation is linearly interpolated, rotation blocks are interpolated
/// entry-wise then projected back to the nearest rotation. Source frames that
/// land exactly on the grid are copied bit-exactly, so resampling to the same
/// rate is the identity.
pub fn resample_fps(seq: &MotionSequence, target_fps: f64) -> Result<MotionSequence> {
    assert!(
        target_fps.is_finite() && target_fps > 0.0,
        "target fps must be positive"
    );
    let t = seq.t();
    let new_t = ((t as f64) * target_fps / seq.fps()).round() as i64;
    if new_t < 1 {
        return Err(Error::EmptyResult(format!(
            "{t} frames at {} fps resample to {new_t} frames at {target_fps} fps",
            seq.fps()
        )));
    }
    let new_t = new_t as usize;
    let ratio = seq.fps() / target_fps;
    let mut frames = Vec::with_capacity(new_t * FRAME_WIDTH);
    for i in 0..new_t {
        let s = i as f64 * ratio;
        let lo = (s.floor() as usize).min(t - 1);
        let frac = s - lo as f64;
        if frac == 0.0 || lo + 1 >= t {
            frames.extend_from_slice(seq.frame(lo));
            continue;
        }
        let a = seq.frame(lo);
        let b = seq.frame(lo + 1);
        let mut row = [0.0f32; FRAME_WIDTH];
        for k in 0..FRAME_WIDTH {
            row[k] = ((1.0 - frac) * a[k] as f64 + frac * b[k] as f64) as f32;
        }
        // Entry-wise blends of rotations drift off the manifold; project back.
        for j in 0..N_JOINTS {
            let m = nalgebra::Matrix3::new(
                row[j * 9] as f64,
                row[j * 9 + 1] as f64,
                row[j * 9 + 2] as f64,
                row[j * 9 + 3] as f64,
                row[j * 9 + 4] as f64,
                row[j * 9 + 5] as f64,
                row[j * 9 + 6] as f64,
                row[j * 9 + 7] as f64,
                row[j * 9 + 8] as f64,
            );
            let r = nearest_rotation(&m);
            for rr in 0..3 {
                for cc in 0..3 {
                    row[j * 9 + rr * 3 + cc] = r[(rr, cc)] as f32;
                }
            }
        }
        frames.extend_from_slice(&row);
    }
    MotionSequence::new(frames, target_fps, seq.genre)
}

use crate::corpus::BeatGrid;
use crate::error::{Error, Result};
use crate::motion::{JointPositions, N_JOINTS};

/// Round-off guard: a candidate must clear its neighbors by this fraction
/// of the envelope's largest magnitude, so an analytically flat envelope
/// computed in floating point stays extremum-free.
fn noise_eps(env: &[f64]) -> f64 {
    1e-9 * env.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Local minima of `env` after non-max suppression over `radius` frames.
/// Boundaries count: an endpoint below its single neighbor is a minimum, so
/// a beat on the first frame is not lost. Within the radius only the deepest
/// minimum survives (ties keep the earlier one).
pub(crate) fn local_minima_nms(env: &[f64], radius: usize) -> Vec<usize> {
    let n = env.len();
    let eps = noise_eps(env);
    let mut cand = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || env[i] < env[i - 1] - eps;
        let right_ok = i + 1 == n || env[i] < env[i + 1] - eps;
        if n > 1 && left_ok && right_ok {
            cand.push(i);
        }
    }
    let mut keep = vec![true; cand.len()];
    for a in 0..cand.len() {
        for b in a + 1..cand.len() {
            if cand[b] - cand[a] > radius {
                break;
            }
            if env[cand[b]] < env[cand[a]] {
                keep[a] = false;
            } else {
                keep[b] = false;
            }
        }
    }
    cand.into_iter()
        .zip(keep)
        .filter_map(|(i, k)| k.then_some(i))
        .collect()
}

/// Strict local maxima above `threshold`, boundary-inclusive, with
/// `radius`-frame non-max suppression (the higher peak wins, ties keep the
/// earlier one).
pub fn peak_pick_maxima(env: &[f64], threshold: f64, radius: usize) -> Vec<usize> {
    let n = env.len();
    let eps = noise_eps(env);
    let mut cand = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || env[i] > env[i - 1] + eps;
        let right_ok = i + 1 == n || env[i] > env[i + 1] + eps;
        if n > 1 && left_ok && right_ok && env[i] > threshold {
            cand.push(i);
        }
    }
    let mut keep = vec![true; cand.len()];
    for a in 0..cand.len() {
        for b in a + 1..cand.len() {
            if cand[b] - cand[a] > radius {
                break;
            }
            if env[cand[b]] > env[cand[a]] {
                keep[a] = false;
            } else {
                keep[b] = false;
            }
        }
    }
    cand.into_iter()
        .zip(keep)
        .filter_map(|(i, k)| k.then_some(i))
        .collect()
}

/// Moving average with a centered window, shrinking at the edges.
pub(crate) fn smooth(env: &[f64], half: usize) -> Vec<f64> {
    let n = env.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            env[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Kinematic dance beats: minima of the mean-joint speed envelope, smoothed
/// by a 5-frame moving average, with 3-frame non-max suppression. The speed
/// sample between frames t and t+1 is assigned time (t + 0.5)/fps.
pub fn dance_beats(jp: &JointPositions) -> Result<BeatGrid> {
    let t_len = jp.t();
    if t_len < 3 {
        return Err(Error::TooShort {
            need: 3,
            got: t_len,
        });
    }
    let mut env = Vec::with_capacity(t_len - 1);
    for t in 0..t_len - 1 {
        let a = jp.frame(t);
        let b = jp.frame(t + 1);
        let mut sum = 0.0;
        for j in 0..N_JOINTS {
            let dx = b[j * 3] - a[j * 3];
            let dy = b[j * 3 + 1] - a[j * 3 + 1];
            let dz = b[j * 3 + 2] - a[j * 3 + 2];
            sum += (dx * dx + dy * dy + dz * dz).sqrt();
        }
        env.push(sum / N_JOINTS as f64 * jp.fps);
    }
    let smoothed = smooth(&env, 2);
    let times = local_minima_nms(&smoothed, 3)
        .into_iter()
        .map(|i| (i as f64 + 0.5) / jp.fps)
        .collect();
    BeatGrid::new(times)
}

/// Beat alignment: mean over music beats of exp(−min‖t_d − t_m‖² / (2σ²)),
/// the Gaussian affinity of each music beat to its nearest dance beat.
/// Always in [0, 1]; an empty dance grid scores 0.
pub fn beat_align_score(bm: &BeatGrid, bd: &BeatGrid, sigma: f64) -> Result<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    if bm.is_empty() {
        return Err(Error::EmptyMusicBeats);
    }
    if bd.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &tm in bm.times() {
        let min_sq = bd
            .times()
            .iter()
            .map(|&td| (td - tm) * (td - tm))
            .fold(f64::INFINITY, f64::min);
        total += (-min_sq / (2.0 * sigma * sigma)).exp();
    }
    Ok(total / bm.len() as f64)
}

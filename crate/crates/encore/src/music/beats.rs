use crate::corpus::BeatGrid;
use crate::error::Result;
use crate::eval::peak_pick_maxima;
use crate::music::MusicFeatureSequence;

/// Music beats: local maxima of the onset-strength envelope that exceed
/// mean + 1 std, with 3-frame non-max suppression. Onset sample i describes
/// frame i, so a beat lands at i/fps seconds. A flat envelope has no strict
/// maxima and yields an empty grid.
pub fn detect_music_beats(mf: &MusicFeatureSequence) -> Result<BeatGrid> {
    let env = mf.onset_envelope()?;
    let n = env.len() as f64;
    let mean = env.iter().sum::<f64>() / n;
    let var = env.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let threshold = mean + var.sqrt();
    let times = peak_pick_maxima(&env, threshold, 3)
        .into_iter()
        .map(|i| i as f64 / mf.fps())
        .collect();
    BeatGrid::new(times)
}

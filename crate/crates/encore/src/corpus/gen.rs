use std::path::{Path, PathBuf};

use nalgebra::UnitQuaternion;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::grid::BeatGrid;
use crate::corpus::manifest::{write_manifest, ManifestEntry};
use crate::corpus::motif::{bank, LOOP_LEN};
use crate::corpus::spec::{CorpusSpec, MIN_FRAMES, TEMPO_MAX, TEMPO_MIN};
use crate::error::{Error, Result};
use crate::label::GenreLabel;
use crate::motion::{MotionSequence, FRAME_WIDTH, N_JOINTS};
use crate::music::{default_spectral_map, MusicFeatureSequence, SPECTRAL_DIM};
use crate::rng::{derive_seed_indexed, stream};

/// Beats at multiples of the beat period that fall inside the track.
pub fn beat_grid(tempo_bpm: f64, duration_s: f64) -> BeatGrid {
    let period = 60.0 / tempo_bpm;
    let mut times = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * period;
        if t >= duration_s {
            break;
        }
        times.push(t);
        k += 1;
    }
    BeatGrid::new(times).expect("grid is increasing by construction")
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Maximum per-axis keyframe perturbation; the axis-angle delta norm stays
/// within 0.05 rad, far inside the separation between genre banks.
const PERTURB_AXIS: f64 = 0.05 / 1.7320508075688772;
const ROOT_PERTURB: f64 = 0.01;

struct PerturbedBank {
    quats: Vec<[UnitQuaternion<f64>; N_JOINTS]>,
    roots: Vec<[f64; 3]>,
}

fn perturbed_bank(seed: u64, genre: GenreLabel) -> PerturbedBank {
    let mut rng = stream(seed, "motion-perturb");
    let poses = bank(genre);
    let mut quats = Vec::with_capacity(LOOP_LEN);
    let mut roots = Vec::with_capacity(LOOP_LEN);
    for pose in &poses {
        let base = pose.quaternions();
        let jittered: [UnitQuaternion<f64>; N_JOINTS] = std::array::from_fn(|j| {
            let d = nalgebra::Vector3::new(
                rng.random_range(-PERTURB_AXIS..=PERTURB_AXIS),
                rng.random_range(-PERTURB_AXIS..=PERTURB_AXIS),
                rng.random_range(-PERTURB_AXIS..=PERTURB_AXIS),
            );
            UnitQuaternion::from_scaled_axis(d) * base[j]
        });
        quats.push(jittered);
        roots.push([
            pose.root[0] + rng.random_range(-ROOT_PERTURB..=ROOT_PERTURB),
            pose.root[1] + rng.random_range(-ROOT_PERTURB..=ROOT_PERTURB),
            pose.root[2] + rng.random_range(-ROOT_PERTURB..=ROOT_PERTURB),
        ]);
    }
    PerturbedBank { quats, roots }
}

/// Phase of frame `t`: enclosing beat index, fraction into the interval, and
/// the eased blend weight.
fn phase(t: usize, fps: f64, period: f64) -> (usize, f64, f64) {
    let time = t as f64 / fps;
    let k = (time / period).floor() as usize;
    let tau = (time - k as f64 * period) / period;
    (k, tau, smoothstep(tau))
}

fn gen_motion(
    seed: u64,
    genre: GenreLabel,
    t_len: usize,
    fps: f64,
    period: f64,
) -> MotionSequence {
    let bank = perturbed_bank(seed, genre);
    let mut frames = vec![0.0f32; t_len * FRAME_WIDTH];
    for t in 0..t_len {
        let (k, _, s) = phase(t, fps, period);
        let a = k % LOOP_LEN;
        let b = (k + 1) % LOOP_LEN;
        let row = &mut frames[t * FRAME_WIDTH..(t + 1) * FRAME_WIDTH];
        for j in 0..N_JOINTS {
            let q = bank.quats[a][j].slerp(&bank.quats[b][j], s);
            let m = q.to_rotation_matrix();
            for r in 0..3 {
                for c in 0..3 {
                    row[j * 9 + r * 3 + c] = m[(r, c)] as f32;
                }
            }
        }
        for axis in 0..3 {
            let ra = bank.roots[a][axis];
            let rb = bank.roots[b][axis];
            row[N_JOINTS * 9 + axis] = (ra + (rb - ra) * s) as f32;
        }
    }
    MotionSequence::new(frames, fps, Some(genre)).expect("generated shape")
}

fn chroma_template(genre: GenreLabel) -> [f64; 12] {
    match genre {
        GenreLabel::Pop => [1.0, 0.0, 0.0, 0.0, 0.8, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.0],
        GenreLabel::Ballet => [0.0, 0.9, 0.0, 1.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.2, 0.0, 0.0],
        GenreLabel::Latin => [0.0, 0.0, 1.0, 0.0, 0.0, 0.8, 0.0, 0.0, 0.2, 0.9, 0.0, 0.0],
        GenreLabel::House => [0.9, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.7],
    }
}

/// Seeded slow sinusoid mixture for the distractor channels.
struct SmoothNoise {
    comps: Vec<(f64, f64, f64)>,
}

impl SmoothNoise {
    fn new(rng: &mut impl Rng) -> Self {
        let comps = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.01..0.04),
                    rng.random_range(0.2..2.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        SmoothNoise { comps }
    }

    fn at(&self, time: f64) -> f64 {
        self.comps
            .iter()
            .map(|&(a, f, p)| a * (std::f64::consts::TAU * f * time + p).sin())
            .sum()
    }
}

fn gen_music(
    seed: u64,
    genre: GenreLabel,
    t_len: usize,
    fps: f64,
    period: f64,
    tempo_bpm: f64,
    beats: &BeatGrid,
) -> MusicFeatureSequence {
    let mut rng = stream(seed, "music-noise");
    let noise: Vec<SmoothNoise> = (0..8).map(|_| SmoothNoise::new(&mut rng)).collect();
    let template = chroma_template(genre);
    let tempo_norm = (tempo_bpm - TEMPO_MIN) / (TEMPO_MAX - TEMPO_MIN);
    let tempo_channel = tempo_norm * 15.0;
    let beat_frames: Vec<f64> = beats.times().iter().map(|b| b * fps).collect();

    let mut feats = vec![0.0f32; t_len * SPECTRAL_DIM];
    let mut prev_mfcc = [0.0f64; 20];
    for t in 0..t_len {
        let (k, tau, s) = phase(t, fps, period);
        let time = t as f64 / fps;
        let row = &mut feats[t * SPECTRAL_DIM..(t + 1) * SPECTRAL_DIM];

        // mfcc: the motion's own control signal. Channels 0-3 blend the
        // active and upcoming keyframe slots with the same eased weight the
        // motion uses, 4-7 carry beat phase and tempo, 8-11 the genre,
        // 12-19 seeded distractors.
        let mut mfcc = [0.0f64; 20];
        mfcc[k % LOOP_LEN] += 1.0 - s;
        mfcc[(k + 1) % LOOP_LEN] += s;
        mfcc[4] = (std::f64::consts::TAU * tau).cos();
        mfcc[5] = (std::f64::consts::TAU * tau).sin();
        mfcc[6] = s;
        mfcc[7] = tempo_norm;
        mfcc[8 + genre.index()] = 1.0;
        for (c, n) in noise.iter().enumerate() {
            mfcc[12 + c] = n.at(time);
        }
        for (c, &v) in mfcc.iter().enumerate() {
            row[c] = v as f32;
        }
        // mfcc_delta: per-frame finite difference in physical time.
        if t > 0 {
            for c in 0..20 {
                row[20 + c] = ((mfcc[c] - prev_mfcc[c]) * fps) as f32;
            }
        }
        prev_mfcc = mfcc;
        // chroma: genre template, amplitude peaking on the beat.
        let amp = 0.7 + 0.3 * (std::f64::consts::TAU * tau).cos();
        for c in 0..12 {
            row[40 + c] = (template[c] * amp) as f32;
        }
        // tempogram: a bump at the tempo's channel.
        for c in 0..16 {
            let d = c as f64 - tempo_channel;
            row[52 + c] = ((-d * d / 2.0).exp() + 0.05) as f32;
        }
        // onset: unit Gaussian bumps (sigma = 1 frame) on beat frames.
        let onset: f64 = beat_frames
            .iter()
            .filter(|&&b| (t as f64 - b).abs() <= 5.0)
            .map(|&b| {
                let d = t as f64 - b;
                (-d * d / 2.0).exp()
            })
            .sum();
        row[68] = onset as f32;
    }
    MusicFeatureSequence::new(feats, SPECTRAL_DIM, fps, default_spectral_map(), Some(genre))
        .expect("generated shape")
}

/// One deterministic music/motion pair with its beat grid.
pub fn gen_pair(
    seed: u64,
    genre: GenreLabel,
    duration_s: f64,
    fps: f64,
    tempo_bpm: f64,
) -> Result<(MusicFeatureSequence, MotionSequence, BeatGrid)> {
    if !(TEMPO_MIN..=TEMPO_MAX).contains(&tempo_bpm) {
        return Err(Error::SpecInvalid(format!(
            "tempo {tempo_bpm} outside [{TEMPO_MIN}, {TEMPO_MAX}]"
        )));
    }
    if !(duration_s.is_finite() && fps > 0.0) || duration_s * fps < MIN_FRAMES {
        return Err(Error::SpecInvalid(format!(
            "duration {duration_s} s at {fps} fps is under {MIN_FRAMES} frames"
        )));
    }
    let t_len = (duration_s * fps).round() as usize;
    let period = 60.0 / tempo_bpm;
    let beats = beat_grid(tempo_bpm, duration_s);
    let motion = gen_motion(seed, genre, t_len, fps, period);
    let music = gen_music(seed, genre, t_len, fps, period, tempo_bpm, &beats);
    Ok((music, motion, beats))
}

/// Per-pair assignments drawn once, in order, from the corpus seed, so pair
/// i's content never depends on scheduling.
pub fn assign_pairs(spec: &CorpusSpec) -> Vec<(GenreLabel, f64, u64)> {
    let mut rng = stream(spec.seed, "corpus-assign");
    let (lo, hi) = spec.tempo_range_bpm;
    (0..spec.n_pairs)
        .map(|i| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut genre = spec.genres.last().map(|(g, _)| *g).unwrap_or(GenreLabel::Pop);
            for &(g, w) in &spec.genres {
                acc += w;
                if u < acc {
                    genre = g;
                    break;
                }
            }
            let tempo = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            (genre, tempo, derive_seed_indexed(spec.seed, "corpus-pair", i as u64))
        })
        .collect()
}

/// Generates `spec.n_pairs` music/motion pairs under `out_dir` and writes
/// `manifest.tsv` listing them. Returns the manifest path.
pub fn gen_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let assignments = assign_pairs(spec);
    let entries: Vec<ManifestEntry> = assignments
        .par_iter()
        .enumerate()
        .map(|(i, &(genre, tempo, seed))| -> Result<ManifestEntry> {
            let (music, motion, _) = gen_pair(seed, genre, spec.duration_s, spec.fps, tempo)?;
            let stem = format!("pair_{i:05}");
            motion.save(&out_dir.join(format!("{stem}.encm")))?;
            music.save(&out_dir.join(format!("{stem}.encf")))?;
            Ok(ManifestEntry {
                stem,
                genre,
                tempo_bpm: tempo,
                seed,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = out_dir.join("manifest.tsv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

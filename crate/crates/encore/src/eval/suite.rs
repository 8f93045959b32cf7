use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{read_manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::eval::{
    beat_align_score, dance_beats, diversity, fid, fit_stats, geometric_features,
    kinetic_features, pfc, GeometricConfig,
};
use crate::motion::{
    forward_kinematics, project_rotations, JointPositions, MotionSequence, SkeletonTemplate,
};
use crate::music::{detect_music_beats, MusicFeatureSequence};

/// The six-metric evaluation record plus sample counts.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    #[serde(rename = "FID_k")]
    pub fid_k: f64,
    #[serde(rename = "FID_g")]
    pub fid_g: f64,
    #[serde(rename = "Div_k")]
    pub div_k: f64,
    #[serde(rename = "Div_g")]
    pub div_g: f64,
    #[serde(rename = "BAS")]
    pub bas: f64,
    #[serde(rename = "PFC")]
    pub pfc: f64,
    pub n_gen: usize,
    pub n_ref: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let rows = [
            ("FID_k", self.fid_k),
            ("FID_g", self.fid_g),
            ("Div_k", self.div_k),
            ("Div_g", self.div_g),
            ("BAS", self.bas),
            ("PFC", self.pfc),
        ];
        let mut out = String::new();
        out.push_str(&format!("{:<8}{:>14}\n", "metric", "value"));
        for (name, v) in rows {
            out.push_str(&format!("{name:<8}{v:>14.6}\n"));
        }
        out.push_str(&format!(
            "{:<8}{:>14}\n{:<8}{:>14}\n",
            "n_gen", self.n_gen, "n_ref", self.n_ref
        ));
        out
    }
}

struct SequenceEval {
    kinetic: Vec<f64>,
    geometric: Vec<f64>,
    bas: Option<f64>,
    pfc: f64,
}

fn load_positions(path: &Path, skel: &SkeletonTemplate) -> Result<JointPositions> {
    let seq = MotionSequence::load(path)?;
    // Evaluation accepts model output; blocks are projected to the rotation
    // manifold rather than rejected.
    let seq = project_rotations(&seq);
    forward_kinematics(&seq, skel)
}

fn eval_one(
    entry: &ManifestEntry,
    dir: &Path,
    skel: &SkeletonTemplate,
    cfg: &GeometricConfig,
    sigma: Option<f64>,
    with_music: bool,
) -> Result<SequenceEval> {
    let jp = load_positions(&entry.motion_path(dir), skel)?;
    let kinetic = kinetic_features(&jp)?.v;
    let geometric = geometric_features(&jp, cfg)?.to_f64();
    let bas = if with_music {
        let mf = MusicFeatureSequence::load(&entry.features_path(dir))?;
        let bm = detect_music_beats(&mf)?;
        let bd = dance_beats(&jp)?;
        let s = sigma.unwrap_or(3.0 / jp.fps);
        Some(beat_align_score(&bm, &bd, s)?)
    } else {
        None
    };
    let pfc_score = pfc(&jp, 0.0)?;
    Ok(SequenceEval {
        kinetic,
        geometric,
        bas,
        pfc: pfc_score,
    })
}

/// Runs the full metric suite: FID over kinetic and geometric features of
/// generated vs reference sets, diversity within the generated set, and
/// mean beat alignment (against each pair's own music) and foot-contact
/// score over the generated set. `sigma` defaults to 3 frames in seconds at
/// each sequence's fps.
pub fn evaluate_suite(
    gen_manifest: &Path,
    ref_manifest: &Path,
    skel: &SkeletonTemplate,
    sigma: Option<f64>,
) -> Result<EvalReport> {
    let cfg = GeometricConfig::default();
    let gen_entries = read_manifest(gen_manifest)?;
    let ref_entries = read_manifest(ref_manifest)?;
    if gen_entries.is_empty() || ref_entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let gen_dir = gen_manifest.parent().unwrap_or(Path::new("."));
    let ref_dir = ref_manifest.parent().unwrap_or(Path::new("."));
    let gen_evals: Vec<SequenceEval> = gen_entries
        .par_iter()
        .map(|e| eval_one(e, gen_dir, skel, &cfg, sigma, true))
        .collect::<Result<_>>()?;
    let ref_evals: Vec<SequenceEval> = ref_entries
        .par_iter()
        .map(|e| eval_one(e, ref_dir, skel, &cfg, sigma, false))
        .collect::<Result<_>>()?;

    let gen_k: Vec<Vec<f64>> = gen_evals.iter().map(|e| e.kinetic.clone()).collect();
    let gen_g: Vec<Vec<f64>> = gen_evals.iter().map(|e| e.geometric.clone()).collect();
    let ref_k: Vec<Vec<f64>> = ref_evals.iter().map(|e| e.kinetic.clone()).collect();
    let ref_g: Vec<Vec<f64>> = ref_evals.iter().map(|e| e.geometric.clone()).collect();

    let fid_k = fid(&fit_stats(&gen_k)?, &fit_stats(&ref_k)?)?;
    let fid_g = fid(&fit_stats(&gen_g)?, &fit_stats(&ref_g)?)?;
    let div_k = diversity(&gen_k)?;
    let div_g = diversity(&gen_g)?;
    let n_gen = gen_evals.len();
    let bas = gen_evals.iter().filter_map(|e| e.bas).sum::<f64>() / n_gen as f64;
    let pfc = gen_evals.iter().map(|e| e.pfc).sum::<f64>() / n_gen as f64;

    Ok(EvalReport {
        fid_k,
        fid_g,
        div_k,
        div_g,
        bas,
        pfc,
        n_gen,
        n_ref: ref_evals.len(),
    })
}

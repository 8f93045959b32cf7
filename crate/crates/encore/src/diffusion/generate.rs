use candle_core::{Device, Tensor};

use crate::diffusion::conditioning::Conditioning;
use crate::diffusion::sample::sample_latent_seeded;
use crate::diffusion::train::DiffusionModel;
use crate::error::{Error, Result};
use crate::label::GenreLabel;
use crate::motion::{project_rotations, MotionSequence};
use crate::music::encode_context;
use crate::music::MusicFeatureSequence;
use crate::vae::{LatentSequence, VaeModel};

/// Music-conditioned generation: encode the features, sample the latent
/// chain, decode, and snap each rotation block back onto SO(3). The output
/// has exactly one motion frame per conditioning row, at the frame rate
/// the diffusion model was trained on.
pub fn generate_dance(
    mf: &MusicFeatureSequence,
    genre: GenreLabel,
    vae: &VaeModel,
    diff: &DiffusionModel,
    seed: u64,
) -> Result<MotionSequence> {
    if vae.cfg != diff.vae_cfg {
        return Err(Error::CheckpointIncompatible(format!(
            "diffusion model was trained against a different vae: {:?} vs {:?}",
            diff.vae_cfg, vae.cfg
        )));
    }
    if mf.c() != diff.context.config().c_in {
        return Err(Error::CheckpointIncompatible(format!(
            "feature width {} does not match the context encoder's {}",
            mf.c(),
            diff.context.config().c_in
        )));
    }
    if (mf.fps() - diff.fps).abs() > 1e-9 {
        return Err(Error::FormatInvalid(format!(
            "features are at {} fps but the model generates at {} fps; align them first",
            mf.fps(),
            diff.fps
        )));
    }
    let ctx = encode_context(mf, &diff.context)?;
    let cond = Conditioning::new(&ctx, genre)?;
    let (n_z, d_z) = (vae.cfg.n_z, vae.cfg.d_z);
    let z_norm = sample_latent_seeded(&cond.batch()?, &diff.sched, &diff.denoiser, n_z, d_z, seed)?;
    let mean = Tensor::from_vec(diff.latent_mean.clone(), (1, n_z, d_z), &Device::Cpu)?;
    let std = Tensor::from_vec(diff.latent_std.clone(), (1, n_z, d_z), &Device::Cpu)?;
    let z = (z_norm.broadcast_mul(&std)? + mean)?;
    let raw = vae.decode(&LatentSequence { z }, mf.t(), diff.fps, Some(genre))?;
    Ok(project_rotations(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::train::tests::{corpus_and_vae, tiny_diff_cfg, tiny_vae_cfg};
    use crate::diffusion::train::{load_diffusion, train_diffusion};
    use crate::motion::validate_motion;
    use crate::vae::{load_vae, train_vae};

    fn pipeline() -> (tempfile::TempDir, VaeModel, DiffusionModel, MusicFeatureSequence) {
        let (dir, manifest, vae_path) = corpus_and_vae(1, 31);
        let diff_path = dir.path().join("diff.enck");
        train_diffusion(&manifest, &vae_path, &tiny_diff_cfg(), &diff_path).unwrap();
        let vae = load_vae(&vae_path).unwrap();
        let diff = load_diffusion(&diff_path).unwrap();
        let mf = MusicFeatureSequence::load(&dir.path().join("pair_00000.encf")).unwrap();
        (dir, vae, diff, mf)
    }

    #[test]
    fn output_matches_conditioning_length_and_is_valid() {
        let (_dir, vae, diff, mf) = pipeline();
        let out = generate_dance(&mf, GenreLabel::Ballet, &vae, &diff, 5).unwrap();
        assert_eq!(out.t(), mf.t());
        assert_eq!(out.fps(), diff.fps);
        validate_motion(&out, 1e-3).unwrap();
    }

    #[test]
    fn same_seed_reproduces_frames_exactly() {
        let (_dir, vae, diff, mf) = pipeline();
        let a = generate_dance(&mf, GenreLabel::Pop, &vae, &diff, 9).unwrap();
        let b = generate_dance(&mf, GenreLabel::Pop, &vae, &diff, 9).unwrap();
        assert_eq!(a.frames(), b.frames());
        let c = generate_dance(&mf, GenreLabel::Pop, &vae, &diff, 10).unwrap();
        assert_ne!(a.frames(), c.frames());
        // Genre changes the conditioning, so frames change too.
        let d = generate_dance(&mf, GenreLabel::House, &vae, &diff, 9).unwrap();
        assert_ne!(a.frames(), d.frames());
    }

    #[test]
    fn mismatched_checkpoints_are_rejected() {
        let (dir, vae, diff, mf) = pipeline();
        // A second vae with a different latent width cannot serve this
        // diffusion model.
        let manifest = dir.path().join("manifest.tsv");
        let other_path = dir.path().join("vae-other.enck");
        let mut other_cfg = tiny_vae_cfg();
        other_cfg.model.d_z = 4;
        train_vae(&manifest, &other_cfg, &other_path).unwrap();
        let other = load_vae(&other_path).unwrap();
        assert!(matches!(
            generate_dance(&mf, GenreLabel::Pop, &other, &diff, 1),
            Err(Error::CheckpointIncompatible(_))
        ));

        // Feature width mismatch.
        let narrow = MusicFeatureSequence::new(
            vec![0.0; mf.t() * 3],
            3,
            mf.fps(),
            vec![("feat".into(), 3)],
            None,
        )
        .unwrap();
        assert!(matches!(
            generate_dance(&narrow, GenreLabel::Pop, &vae, &diff, 1),
            Err(Error::CheckpointIncompatible(_))
        ));

        // Frame-rate mismatch.
        let off_rate = MusicFeatureSequence::new(
            mf.feats().to_vec(),
            mf.c(),
            mf.fps() * 2.0,
            vec![("feat".into(), mf.c())],
            None,
        )
        .unwrap();
        assert!(matches!(
            generate_dance(&off_rate, GenreLabel::Pop, &vae, &diff, 1),
            Err(Error::FormatInvalid(_))
        ));
    }
}

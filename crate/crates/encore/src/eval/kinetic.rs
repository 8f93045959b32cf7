use crate::error::{Error, Result};
use crate::motion::{JointPositions, N_JOINTS};

pub const KINETIC_DIM: usize = N_JOINTS * 3;

/// Per-joint, per-axis mean kinetic energy of a motion sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticFeature {
    pub v: Vec<f64>,
}

/// For joint j and axis a: mean over frames of the squared finite-difference
/// velocity in physical units, halved (kinetic-energy convention):
/// mean_t ((p[t+1] − p[t]) · fps)² / 2.
pub fn kinetic_features(jp: &JointPositions) -> Result<KineticFeature> {
    let t_len = jp.t();
    if t_len < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: t_len,
        });
    }
    let mut v = vec![0.0f64; KINETIC_DIM];
    let scale = jp.fps * jp.fps / 2.0;
    for t in 0..t_len - 1 {
        let a = jp.frame(t);
        let b = jp.frame(t + 1);
        for k in 0..KINETIC_DIM {
            let d = b[k] - a[k];
            v[k] += d * d;
        }
    }
    let n = (t_len - 1) as f64;
    for e in v.iter_mut() {
        *e = *e / n * scale;
    }
    Ok(KineticFeature { v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positions(t: usize, f: impl Fn(usize, usize) -> [f64; 3], fps: f64) -> JointPositions {
        let mut pos = Vec::with_capacity(t * N_JOINTS * 3);
        for i in 0..t {
            for j in 0..N_JOINTS {
                pos.extend_from_slice(&f(i, j));
            }
        }
        JointPositions { pos, fps }
    }

    #[test]
    fn static_motion_is_all_zeros() {
        let jp = positions(10, |_, j| [j as f64, 0.0, 1.0], 20.0);
        let k = kinetic_features(&jp).unwrap();
        assert_eq!(k.v.len(), KINETIC_DIM);
        assert!(k.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_velocity_gives_half_v_squared() {
        // Joint 3 moves at 1.5 units/s along x; everything else static.
        let fps = 20.0;
        let vel = 1.5;
        let jp = positions(
            40,
            |i, j| {
                if j == 3 {
                    [vel * i as f64 / fps, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0]
                }
            },
            fps,
        );
        let k = kinetic_features(&jp).unwrap();
        let expect = vel * vel / 2.0;
        assert!((k.v[3 * 3] - expect).abs() < 1e-9, "got {}", k.v[9]);
        let rest: f64 = k.v.iter().enumerate().filter(|(i, _)| *i != 9).map(|(_, x)| x).sum();
        assert_eq!(rest, 0.0);
    }

    #[test]
    fn doubling_fps_changes_smooth_features_by_under_five_percent() {
        // One sinusoidal trajectory sampled at 20 and 40 fps.
        let traj = |time: f64, j: usize| {
            [
                (time * 2.1 + j as f64).sin(),
                0.3 * (time * 1.3).cos(),
                0.1 * j as f64,
            ]
        };
        let lo = positions(100, |i, j| traj(i as f64 / 20.0, j), 20.0);
        let hi = positions(200, |i, j| traj(i as f64 / 40.0, j), 40.0);
        let klo = kinetic_features(&lo).unwrap();
        let khi = kinetic_features(&hi).unwrap();
        for (a, b) in klo.v.iter().zip(&khi.v) {
            if *b > 1e-6 {
                assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn single_frame_is_too_short() {
        let jp = positions(1, |_, _| [0.0; 3], 20.0);
        assert!(matches!(
            kinetic_features(&jp),
            Err(Error::TooShort { need: 2, got: 1 })
        ));
    }
}

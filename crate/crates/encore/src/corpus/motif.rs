use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::label::{GenreLabel, ALL_GENRES};
use crate::motion::{joints, MotionSequence, N_JOINTS};

/// Keyframes per motif loop. Consecutive loop poses (wrap included) always
/// differ, so eased interpolation has a true velocity minimum at every beat.
pub const LOOP_LEN: usize = 4;

/// One keyframe: per-joint axis-angle rotations plus a root offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub axis_angle: [[f64; 3]; N_JOINTS],
    pub root: [f64; 3],
}

impl Pose {
    fn neutral() -> Self {
        Pose {
            axis_angle: [[0.0; 3]; N_JOINTS],
            root: [0.0; 3],
        }
    }

    fn with(mut self, joint: usize, aa: [f64; 3]) -> Self {
        self.axis_angle[joint] = aa;
        self
    }

    fn root_at(mut self, root: [f64; 3]) -> Self {
        self.root = root;
        self
    }

    pub fn quaternions(&self) -> [UnitQuaternion<f64>; N_JOINTS] {
        std::array::from_fn(|j| {
            let aa = Vector3::new(
                self.axis_angle[j][0],
                self.axis_angle[j][1],
                self.axis_angle[j][2],
            );
            UnitQuaternion::from_scaled_axis(aa)
        })
    }

    /// The 216 rotation-matrix entries of this pose, row-major per joint.
    pub fn rotation_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(N_JOINTS * 9);
        for q in self.quaternions() {
            let m: Matrix3<f64> = *q.to_rotation_matrix().matrix();
            for r in 0..3 {
                for c in 0..3 {
                    v.push(m[(r, c)]);
                }
            }
        }
        v
    }
}

/// The four-keyframe loop for one genre. Banks are pairwise disjoint: every
/// genre moves a signature joint set nowhere near the others' angle ranges.
pub fn bank(genre: GenreLabel) -> Vec<Pose> {
    use joints::*;
    match genre {
        // Asymmetric elbow hits with a twisting torso.
        GenreLabel::Pop => vec![
            Pose::neutral()
                .with(LEFT_ELBOW, [1.25, 0.0, 0.0])
                .with(RIGHT_ELBOW, [0.2, 0.0, 0.0])
                .with(SPINE2, [0.0, 0.35, 0.0])
                .with(NECK, [0.2, 0.0, 0.0])
                .root_at([0.04, 0.0, 0.0]),
            Pose::neutral()
                .with(LEFT_ELBOW, [0.2, 0.0, 0.0])
                .with(RIGHT_ELBOW, [1.25, 0.0, 0.0])
                .with(SPINE2, [0.0, -0.35, 0.0])
                .with(NECK, [-0.15, 0.0, 0.0])
                .root_at([-0.04, 0.0, 0.0]),
            Pose::neutral()
                .with(LEFT_ELBOW, [1.05, 0.0, 0.3])
                .with(RIGHT_ELBOW, [0.45, 0.0, -0.3])
                .with(SPINE2, [0.12, 0.25, 0.0])
                .root_at([0.02, 0.03, 0.0]),
            Pose::neutral()
                .with(LEFT_ELBOW, [0.45, 0.0, -0.3])
                .with(RIGHT_ELBOW, [1.05, 0.0, 0.3])
                .with(SPINE2, [0.12, -0.25, 0.0])
                .root_at([-0.02, 0.03, 0.0]),
        ],
        // Arms raised wide over turned-out hips, alternating plié.
        GenreLabel::Ballet => vec![
            Pose::neutral()
                .with(LEFT_SHOULDER, [0.0, -1.15, 0.0])
                .with(RIGHT_SHOULDER, [0.0, 1.15, 0.0])
                .with(LEFT_HIP, [0.0, 0.0, 0.5])
                .with(RIGHT_HIP, [0.0, 0.0, -0.5])
                .root_at([0.0, 0.0, 0.02]),
            Pose::neutral()
                .with(LEFT_SHOULDER, [0.0, -0.9, 0.25])
                .with(RIGHT_SHOULDER, [0.0, 0.9, 0.25])
                .with(LEFT_HIP, [0.0, 0.0, 0.5])
                .with(RIGHT_HIP, [0.0, 0.0, -0.5])
                .with(LEFT_KNEE, [0.9, 0.0, 0.0])
                .root_at([0.0, 0.0, -0.03]),
            Pose::neutral()
                .with(LEFT_SHOULDER, [0.0, -1.3, -0.2])
                .with(RIGHT_SHOULDER, [0.0, 1.3, 0.2])
                .with(LEFT_HIP, [0.0, 0.0, 0.45])
                .with(RIGHT_HIP, [0.0, 0.0, -0.45])
                .with(SPINE1, [0.0, 0.0, 0.15])
                .root_at([0.0, 0.0, 0.04]),
            Pose::neutral()
                .with(LEFT_SHOULDER, [0.0, -0.9, -0.25])
                .with(RIGHT_SHOULDER, [0.0, 0.9, -0.25])
                .with(LEFT_HIP, [0.0, 0.0, 0.5])
                .with(RIGHT_HIP, [0.0, 0.0, -0.5])
                .with(RIGHT_KNEE, [0.9, 0.0, 0.0])
                .root_at([0.0, 0.0, -0.03]),
        ],
        // Hips swinging side to side under counter-rotating spine; collars
        // held open in every keyframe so the stance itself is a signature.
        GenreLabel::Latin => vec![
            Pose::neutral()
                .with(PELVIS, [0.0, 0.0, 0.3])
                .with(SPINE1, [0.0, 0.0, -0.45])
                .with(LEFT_COLLAR, [0.0, 0.0, 0.35])
                .with(RIGHT_COLLAR, [0.0, 0.0, -0.35])
                .with(LEFT_ELBOW, [0.3, 0.0, 0.0])
                .with(RIGHT_ELBOW, [0.3, 0.0, 0.0])
                .root_at([0.06, 0.0, 0.0]),
            Pose::neutral()
                .with(PELVIS, [0.15, 0.0, 0.0])
                .with(SPINE1, [-0.15, 0.0, 0.0])
                .with(LEFT_COLLAR, [0.0, 0.0, 0.35])
                .with(RIGHT_COLLAR, [0.0, 0.0, -0.35])
                .with(LEFT_ELBOW, [0.45, 0.0, 0.2])
                .with(RIGHT_ELBOW, [0.15, 0.0, -0.2])
                .root_at([0.0, 0.02, 0.0]),
            Pose::neutral()
                .with(PELVIS, [0.0, 0.0, -0.3])
                .with(SPINE1, [0.0, 0.0, 0.45])
                .with(LEFT_COLLAR, [0.0, 0.0, 0.35])
                .with(RIGHT_COLLAR, [0.0, 0.0, -0.35])
                .with(LEFT_ELBOW, [0.3, 0.0, 0.0])
                .with(RIGHT_ELBOW, [0.3, 0.0, 0.0])
                .root_at([-0.06, 0.0, 0.0]),
            Pose::neutral()
                .with(PELVIS, [0.15, 0.0, 0.0])
                .with(SPINE1, [-0.15, 0.0, 0.0])
                .with(LEFT_COLLAR, [0.0, 0.0, 0.35])
                .with(RIGHT_COLLAR, [0.0, 0.0, -0.35])
                .with(LEFT_ELBOW, [0.15, 0.0, -0.2])
                .with(RIGHT_ELBOW, [0.45, 0.0, 0.2])
                .root_at([0.0, -0.02, 0.0]),
        ],
        // Knee bounce: deep flexion on the beat, light on the off-beat.
        GenreLabel::House => vec![
            Pose::neutral()
                .with(LEFT_KNEE, [0.85, 0.0, 0.0])
                .with(RIGHT_KNEE, [0.85, 0.0, 0.0])
                .with(LEFT_HIP, [-0.45, 0.0, 0.0])
                .with(RIGHT_HIP, [-0.45, 0.0, 0.0])
                .with(SPINE1, [0.25, 0.0, 0.0])
                .root_at([0.0, 0.0, -0.07]),
            Pose::neutral()
                .with(LEFT_KNEE, [0.25, 0.0, 0.0])
                .with(RIGHT_KNEE, [0.25, 0.0, 0.0])
                .with(LEFT_HIP, [-0.12, 0.0, 0.0])
                .with(RIGHT_HIP, [-0.12, 0.0, 0.0])
                .with(LEFT_ANKLE, [-0.2, 0.0, 0.0])
                .root_at([0.0, 0.0, 0.0]),
            Pose::neutral()
                .with(LEFT_KNEE, [0.85, 0.0, 0.0])
                .with(RIGHT_KNEE, [0.85, 0.0, 0.0])
                .with(LEFT_HIP, [-0.45, 0.0, 0.0])
                .with(RIGHT_HIP, [-0.45, 0.0, 0.0])
                .with(SPINE1, [0.25, 0.0, 0.0])
                .with(NECK, [0.15, 0.0, 0.0])
                .root_at([0.01, 0.0, -0.07]),
            Pose::neutral()
                .with(LEFT_KNEE, [0.35, 0.0, 0.0])
                .with(RIGHT_KNEE, [0.35, 0.0, 0.0])
                .with(LEFT_HIP, [-0.15, 0.0, 0.0])
                .with(RIGHT_HIP, [-0.15, 0.0, 0.0])
                .with(RIGHT_ANKLE, [-0.2, 0.0, 0.0])
                .root_at([-0.01, 0.0, 0.0]),
        ],
    }
}

/// Mean rotation vector of a genre's unperturbed keyframes.
pub fn genre_centroid(genre: GenreLabel) -> Vec<f64> {
    let poses = bank(genre);
    let mut c = vec![0.0; N_JOINTS * 9];
    for p in &poses {
        for (acc, v) in c.iter_mut().zip(p.rotation_vector()) {
            *acc += v;
        }
    }
    for v in c.iter_mut() {
        *v /= poses.len() as f64;
    }
    c
}

/// Nearest-centroid genre classifier over the time-averaged rotation
/// entries of a motion sequence. The banks are far apart relative to the
/// corpus perturbation, so this recovers the generating genre exactly.
pub fn classify_motion_nearest_centroid(seq: &MotionSequence) -> GenreLabel {
    let mut mean = vec![0.0f64; N_JOINTS * 9];
    let t_len = seq.t();
    for t in 0..t_len {
        let f = seq.frame(t);
        for (k, m) in mean.iter_mut().enumerate() {
            *m += f[k] as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= t_len as f64;
    }
    let mut best = ALL_GENRES[0];
    let mut best_d = f64::INFINITY;
    for &g in &ALL_GENRES {
        let c = genre_centroid(g);
        let d: f64 = mean
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best_d {
            best_d = d;
            best = g;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bank_has_distinct_consecutive_poses() {
        for g in ALL_GENRES {
            let b = bank(g);
            assert_eq!(b.len(), LOOP_LEN);
            for i in 0..LOOP_LEN {
                let a = &b[i];
                let c = &b[(i + 1) % LOOP_LEN];
                assert_ne!(a, c, "{g}: keyframes {i} and {}", (i + 1) % LOOP_LEN);
            }
        }
    }

    #[test]
    fn banks_are_pairwise_disjoint() {
        for (i, &ga) in ALL_GENRES.iter().enumerate() {
            for &gb in &ALL_GENRES[i + 1..] {
                for pa in bank(ga) {
                    for pb in bank(gb) {
                        assert_ne!(pa, pb, "{ga} and {gb} share a keyframe");
                    }
                }
            }
        }
    }

    #[test]
    fn centroids_are_well_separated() {
        let mut min_d = f64::INFINITY;
        for (i, &ga) in ALL_GENRES.iter().enumerate() {
            for &gb in &ALL_GENRES[i + 1..] {
                let a = genre_centroid(ga);
                let b = genre_centroid(gb);
                let d: f64 = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                min_d = min_d.min(d);
            }
        }
        // Far beyond the 0.05 rad per-pair perturbation.
        assert!(min_d > 0.5, "minimum centroid distance {min_d}");
    }
}

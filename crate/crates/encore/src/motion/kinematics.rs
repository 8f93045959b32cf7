use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::motion::skeleton::SkeletonTemplate;
use crate::motion::types::{JointPositions, MotionSequence, N_JOINTS};

/// Global joint positions: the root takes the frame translation; each child
/// sits at parent_global_rotation · offset + parent_position, with rotations
/// accumulated down the chain.
pub fn forward_kinematics(
    seq: &MotionSequence,
    skel: &SkeletonTemplate,
) -> Result<JointPositions> {
    skel.validate()?;
    // Root-first traversal order; the parent table need not be index-sorted.
    let mut order = Vec::with_capacity(N_JOINTS);
    let mut stack = vec![0usize];
    while let Some(j) = stack.pop() {
        order.push(j);
        for c in (1..N_JOINTS).rev() {
            if skel.parent[c] as usize == j {
                stack.push(c);
            }
        }
    }
    let t_len = seq.t();
    let mut pos = vec![0.0f64; t_len * N_JOINTS * 3];
    let mut global_rot = vec![Matrix3::<f64>::identity(); N_JOINTS];
    let mut global_pos = vec![Vector3::<f64>::zeros(); N_JOINTS];
    for t in 0..t_len {
        let tr = seq.translation(t);
        global_rot[0] = seq.rotation(t, 0);
        global_pos[0] = Vector3::new(tr[0], tr[1], tr[2]);
        for &j in order.iter().skip(1) {
            let p = skel.parent[j] as usize;
            let off = Vector3::new(skel.offset[j][0], skel.offset[j][1], skel.offset[j][2]);
            global_pos[j] = global_rot[p] * off + global_pos[p];
            global_rot[j] = global_rot[p] * seq.rotation(t, j);
        }
        for j in 0..N_JOINTS {
            let base = (t * N_JOINTS + j) * 3;
            pos[base] = global_pos[j].x;
            pos[base + 1] = global_pos[j].y;
            pos[base + 2] = global_pos[j].z;
        }
    }
    Ok(JointPositions {
        pos,
        fps: seq.fps(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::motion::types::{identity_frames, FRAME_WIDTH};

    fn rest_pose_positions(skel: &SkeletonTemplate) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; N_JOINTS];
        for j in 1..N_JOINTS {
            let p = skel.parent[j] as usize;
            out[j] = [
                out[p][0] + skel.offset[j][0],
                out[p][1] + skel.offset[j][1],
                out[p][2] + skel.offset[j][2],
            ];
        }
        out
    }

    #[test]
    fn identity_rotations_give_cumulative_offsets_exactly() {
        let skel = SkeletonTemplate::default_smpl24();
        let seq = MotionSequence::new(identity_frames(2), 20.0, None).unwrap();
        let jp = forward_kinematics(&seq, &skel).unwrap();
        let rest = rest_pose_positions(&skel);
        for t in 0..2 {
            for j in 0..N_JOINTS {
                assert_eq!(jp.joint(t, j), rest[j], "frame {t} joint {j}");
            }
        }
    }

    #[test]
    fn translation_shifts_every_joint() {
        let skel = SkeletonTemplate::default_smpl24();
        let mut frames = identity_frames(1);
        frames[FRAME_WIDTH - 3] = 1.0;
        frames[FRAME_WIDTH - 2] = 2.0;
        frames[FRAME_WIDTH - 1] = 3.0;
        let seq = MotionSequence::new(frames, 20.0, None).unwrap();
        let jp = forward_kinematics(&seq, &skel).unwrap();
        let rest = rest_pose_positions(&skel);
        // Association order differs between the chain accumulation and the
        // reference sum, so allow round-off.
        for j in 0..N_JOINTS {
            let p = jp.joint(0, j);
            assert!((p[0] - (rest[j][0] + 1.0)).abs() < 1e-12);
            assert!((p[1] - (rest[j][1] + 2.0)).abs() < 1e-12);
            assert!((p[2] - (rest[j][2] + 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn root_rotation_turns_child_offset() {
        // Root rotated 90° about z: left hip offset (0.09, 0, -0.05) lands at
        // (0, 0.09, -0.05).
        let skel = SkeletonTemplate::default_smpl24();
        let mut frames = identity_frames(1);
        // Row-major 90° z rotation: [[0,-1,0],[1,0,0],[0,0,1]].
        frames[0] = 0.0;
        frames[1] = -1.0;
        frames[3] = 1.0;
        frames[4] = 0.0;
        let seq = MotionSequence::new(frames, 20.0, None).unwrap();
        let jp = forward_kinematics(&seq, &skel).unwrap();
        let hip = jp.joint(0, 1);
        assert!((hip[0] - 0.0).abs() < 1e-12);
        assert!((hip[1] - 0.09).abs() < 1e-12);
        assert!((hip[2] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn broken_tree_is_reported() {
        let skel = {
            let mut s = SkeletonTemplate::default_smpl24();
            s.parent[10] = 10;
            s
        };
        let seq = MotionSequence::new(identity_frames(1), 20.0, None).unwrap();
        assert!(matches!(
            forward_kinematics(&seq, &skel),
            Err(Error::CycleDetected(_))
        ));
    }
}

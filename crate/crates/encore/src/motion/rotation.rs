use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::motion::types::{MotionSequence, FRAME_WIDTH, N_JOINTS};

/// Checks every 3x3 block is a rotation: ‖RRᵀ − I‖_F ≤ tol and
/// |det R − 1| ≤ tol. Reports the first offending (frame, joint).
pub fn validate_motion(seq: &MotionSequence, tol: f64) -> Result<()> {
    assert!(tol > 0.0, "tolerance must be positive");
    if seq.frames().len() % FRAME_WIDTH != 0 {
        return Err(Error::ShapeInvalid {
            got: seq.frames().len().to_string(),
            expected: format!("multiple of {FRAME_WIDTH}"),
        });
    }
    for t in 0..seq.t() {
        for j in 0..N_JOINTS {
            let r = seq.rotation(t, j);
            let ortho = (r * r.transpose() - Matrix3::identity()).norm();
            let det = r.determinant();
            if ortho > tol || (det - 1.0).abs() > tol {
                return Err(Error::RotationInvalid {
                    frame: t,
                    joint: j,
                    detail: format!("‖RRᵀ−I‖_F = {ortho:.3e}, det = {det:.6}"),
                });
            }
        }
    }
    Ok(())
}

/// Nearest rotation matrix in Frobenius norm: the orthogonal polar factor,
/// with the determinant forced positive.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let d = (u * vt).determinant();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    // Flip the axis with the smallest singular value to restore det = +1.
    let mut s = Matrix3::identity();
    s[(2, 2)] = sign;
    u * s * vt
}

/// Projects every rotation block of a generated sequence to its nearest
/// rotation, leaving translation untouched.
pub fn project_rotations(seq: &MotionSequence) -> MotionSequence {
    let mut frames = seq.frames().to_vec();
    for t in 0..seq.t() {
        for j in 0..N_JOINTS {
            let r = nearest_rotation(&seq.rotation(t, j));
            let base = t * FRAME_WIDTH + j * 9;
            for row in 0..3 {
                for col in 0..3 {
                    frames[base + row * 3 + col] = r[(row, col)] as f32;
                }
            }
        }
    }
    MotionSequence::new(frames, seq.fps(), seq.genre).expect("shape preserved")
}

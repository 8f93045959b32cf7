use crate::error::{Error, Result};
use crate::motion::{joints, JointPositions, N_JOINTS};

/// Physical foot contact score.
///
/// The center of mass is approximated by the mean of all joint positions.
/// For each interior frame i (central second differences, physical units):
///
/// ```text
/// ā_i = (a_x, a_y, max(0, a_z))   COM acceleration, downward part discarded
/// s_i = ‖ā_i‖ · ‖v̄_i^left‖ · ‖v̄_i^right‖
/// ```
///
/// with foot velocities taken at the toe joints. Accelerating sideways or
/// upward while both feet move means the acceleration cannot come from
/// static contact; s_i grows with that violation. The score is
/// mean_i(s_i) / max_i‖ā_i‖, which is 0 for static motion and whenever one
/// foot is planted at every frame. `ground_z` names the ground plane height
/// for callers that track it; the score itself is height-independent, so the
/// value does not enter the formula.
pub fn pfc(jp: &JointPositions, ground_z: f64) -> Result<f64> {
    let _ = ground_z;
    let t_len = jp.t();
    if t_len < 3 {
        return Err(Error::TooShort {
            need: 3,
            got: t_len,
        });
    }
    let fps = jp.fps;
    let com: Vec<[f64; 3]> = (0..t_len)
        .map(|t| {
            let f = jp.frame(t);
            let mut c = [0.0; 3];
            for j in 0..N_JOINTS {
                c[0] += f[j * 3];
                c[1] += f[j * 3 + 1];
                c[2] += f[j * 3 + 2];
            }
            c.map(|v| v / N_JOINTS as f64)
        })
        .collect();
    let norm3 = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let vel = |p1: [f64; 3], p0: [f64; 3]| {
        [
            (p1[0] - p0[0]) * fps,
            (p1[1] - p0[1]) * fps,
            (p1[2] - p0[2]) * fps,
        ]
    };
    let mut s_sum = 0.0;
    let mut a_max = 0.0f64;
    for i in 1..t_len - 1 {
        let a = [
            (com[i + 1][0] - 2.0 * com[i][0] + com[i - 1][0]) * fps * fps,
            (com[i + 1][1] - 2.0 * com[i][1] + com[i - 1][1]) * fps * fps,
            (com[i + 1][2] - 2.0 * com[i][2] + com[i - 1][2]) * fps * fps,
        ];
        let a_bar = [a[0], a[1], a[2].max(0.0)];
        let a_norm = norm3(a_bar);
        a_max = a_max.max(a_norm);
        let vl = vel(
            jp.joint(i + 1, joints::LEFT_FOOT),
            jp.joint(i - 1, joints::LEFT_FOOT),
        );
        let vr = vel(
            jp.joint(i + 1, joints::RIGHT_FOOT),
            jp.joint(i - 1, joints::RIGHT_FOOT),
        );
        // Central difference spans two frame intervals.
        let vl = vl.map(|v| v / 2.0);
        let vr = vr.map(|v| v / 2.0);
        s_sum += a_norm * norm3(vl) * norm3(vr);
    }
    if a_max == 0.0 {
        return Ok(0.0);
    }
    Ok(s_sum / (t_len - 2) as f64 / a_max)
}

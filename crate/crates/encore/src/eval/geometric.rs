use crate::error::{Error, Result};
use crate::motion::{joints, JointPositions, N_JOINTS};

pub const GEOMETRIC_DIM: usize = 33;
/// Features 2i and 2i+1 are the left/right versions of relation i.
pub const GEOMETRIC_PAIRS: usize = 14;
pub const GEOMETRIC_UNPAIRED: usize = 5;

/// Boolean relational pose descriptor, majority-voted over time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricFeature {
    pub g: Vec<bool>,
}

impl GeometricFeature {
    pub fn to_f64(&self) -> Vec<f64> {
        self.g.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Thresholds for the relational tests. Versioned so that frozen golden
/// feature vectors stay valid: bump `version` whenever any value changes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricConfig {
    pub version: u32,
    /// Reference length: rest-pose shoulder-to-shoulder distance (units).
    pub shoulder_width: f64,
    /// Rest-pose shoulder-to-wrist length (units).
    pub arm_length: f64,
    /// "near head": wrist-head distance below this multiple of shoulder width.
    pub near_head_k: f64,
    /// "near hips": wrist-pelvis distance below this multiple of shoulder width.
    pub near_hip_k: f64,
    /// "arm extended": wrist-shoulder distance above this multiple of arm length.
    pub extended_k: f64,
    /// "elbow bent" / "knee bent": interior angle below this (radians).
    pub bend_angle: f64,
    /// "hand forward": wrist y minus chest y above this (units).
    pub hand_forward: f64,
    /// "foot raised": ankle z above the other ankle by this (units).
    pub foot_raise: f64,
    /// "knee raised": knee z above pelvis z minus this (units).
    pub knee_raise_drop: f64,
    /// "foot forward": ankle y minus pelvis y above this (units).
    pub foot_forward: f64,
    /// "stance wide (one side)": ankle x beyond chest x by this (units).
    pub foot_wide: f64,
    /// "arm hanging": wrist z below pelvis z minus this (units).
    pub hang_drop: f64,
    /// "hands together": wrist-wrist distance below this multiple of shoulder width.
    pub hands_close_k: f64,
    /// "feet apart": ankle-ankle distance above this multiple of shoulder width.
    pub feet_apart_k: f64,
    /// "upright": neck above pelvis by this multiple of rest torso length.
    pub upright_k: f64,
    /// Rest-pose pelvis-to-neck height (units).
    pub torso_length: f64,
    /// "head forward": head y minus pelvis y above this (units).
    pub head_forward: f64,
    /// "crouched": pelvis-above-lowest-ankle below this multiple of rest leg drop.
    pub crouch_k: f64,
    /// Rest-pose pelvis-to-ankle vertical drop (units).
    pub leg_drop: f64,
}

impl Default for GeometricConfig {
    fn default() -> Self {
        GeometricConfig {
            version: 1,
            shoulder_width: 0.34,
            arm_length: 0.51,
            near_head_k: 1.2,
            near_hip_k: 1.0,
            extended_k: 0.85,
            bend_angle: 110.0f64.to_radians(),
            hand_forward: 0.10,
            foot_raise: 0.08,
            knee_raise_drop: 0.20,
            foot_forward: 0.10,
            foot_wide: 0.18,
            hang_drop: 0.30,
            hands_close_k: 0.5,
            feet_apart_k: 1.5,
            upright_k: 0.9,
            torso_length: 0.50,
            head_forward: 0.10,
            crouch_k: 0.7,
            leg_drop: 0.83,
        }
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Interior angle at `mid` formed by `a` and `b`, in radians.
fn angle_at(mid: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let u = [a[0] - mid[0], a[1] - mid[1], a[2] - mid[2]];
    let v = [b[0] - mid[0], b[1] - mid[1], b[2] - mid[2]];
    let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return std::f64::consts::PI;
    }
    let c = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv);
    c.clamp(-1.0, 1.0).acos()
}

/// Per-frame relational tests. The first 28 entries are 14 left/right pairs
/// stored (left, right); the final 5 are side-symmetric. Side-dependent x
/// tests use the convention "toward the other side", so an x-mirrored pose
/// (see [`mirror_x`]) swaps each pair and fixes every unpaired feature.
fn frame_features(p: &dyn Fn(usize) -> [f64; 3], cfg: &GeometricConfig) -> [bool; GEOMETRIC_DIM] {
    use joints::*;
    let mut g = [false; GEOMETRIC_DIM];
    let sides = [
        (LEFT_WRIST, LEFT_SHOULDER, LEFT_ELBOW, LEFT_ANKLE, LEFT_KNEE, 1.0),
        (
            RIGHT_WRIST,
            RIGHT_SHOULDER,
            RIGHT_ELBOW,
            RIGHT_ANKLE,
            RIGHT_KNEE,
            -1.0,
        ),
    ];
    for (s, &(wrist, shoulder, elbow, ankle, knee, side)) in sides.iter().enumerate() {
        let w = p(wrist);
        let sh = p(shoulder);
        let el = p(elbow);
        let an = p(ankle);
        let kn = p(knee);
        let other_an = p(if s == 0 { RIGHT_ANKLE } else { LEFT_ANKLE });
        let hip = p(if s == 0 { LEFT_HIP } else { RIGHT_HIP });
        let pelvis = p(PELVIS);
        let chest = p(SPINE3);
        let head = p(HEAD);
        let f = [
            // wrist above shoulder
            w[2] > sh[2],
            // wrist above head
            w[2] > head[2],
            // wrist near head
            dist(w, head) < cfg.near_head_k * cfg.shoulder_width,
            // wrist near pelvis
            dist(w, pelvis) < cfg.near_hip_k * cfg.shoulder_width,
            // arm extended
            dist(w, sh) > cfg.extended_k * cfg.arm_length,
            // elbow bent
            angle_at(el, sh, w) < cfg.bend_angle,
            // wrist forward of chest
            w[1] - chest[1] > cfg.hand_forward,
            // wrist crossed past the body midline toward the other side
            side * (chest[0] - w[0]) > 0.0,
            // foot raised above the other foot
            an[2] - other_an[2] > cfg.foot_raise,
            // knee bent
            angle_at(kn, hip, an) < cfg.bend_angle,
            // knee raised toward hip height
            kn[2] > pelvis[2] - cfg.knee_raise_drop,
            // foot forward of pelvis
            an[1] - pelvis[1] > cfg.foot_forward,
            // foot planted out wide on its own side
            side * (an[0] - chest[0]) > cfg.foot_wide,
            // arm hanging low
            w[2] < pelvis[2] - cfg.hang_drop,
        ];
        for (i, &b) in f.iter().enumerate() {
            g[2 * i + s] = b;
        }
    }
    let lw = p(LEFT_WRIST);
    let rw = p(RIGHT_WRIST);
    let la = p(LEFT_ANKLE);
    let ra = p(RIGHT_ANKLE);
    let pelvis = p(PELVIS);
    let neck = p(NECK);
    let head = p(HEAD);
    g[28] = dist(lw, rw) < cfg.hands_close_k * cfg.shoulder_width;
    g[29] = dist(la, ra) > cfg.feet_apart_k * cfg.shoulder_width;
    g[30] = neck[2] - pelvis[2] > cfg.upright_k * cfg.torso_length;
    g[31] = head[1] - pelvis[1] > cfg.head_forward;
    g[32] = pelvis[2] - la[2].min(ra[2]) < cfg.crouch_k * cfg.leg_drop;
    g
}

/// 33 boolean relational features, each reduced over frames by strict
/// majority vote (true when set in more than half the frames).
pub fn geometric_features(jp: &JointPositions, cfg: &GeometricConfig) -> Result<GeometricFeature> {
    let t_len = jp.t();
    if t_len < 1 {
        return Err(Error::TooShort {
            need: 1,
            got: t_len,
        });
    }
    let mut counts = [0usize; GEOMETRIC_DIM];
    for t in 0..t_len {
        let f = frame_features(&|j| jp.joint(t, j), cfg);
        for (c, &b) in counts.iter_mut().zip(f.iter()) {
            if b {
                *c += 1;
            }
        }
    }
    let g = counts.iter().map(|&c| 2 * c > t_len).collect();
    Ok(GeometricFeature { g })
}

/// Mirror a pose sequence across the x = 0 plane: left/right joints swap
/// positions and every x coordinate flips sign.
pub fn mirror_x(jp: &JointPositions) -> JointPositions {
    let mut out = jp.clone();
    for t in 0..jp.t() {
        for j in 0..N_JOINTS {
            let src = joints::MIRROR_PAIRS
                .iter()
                .find_map(|&(l, r)| {
                    if j == l {
                        Some(r)
                    } else if j == r {
                        Some(l)
                    } else {
                        None
                    }
                })
                .unwrap_or(j);
            let p = jp.joint(t, src);
            let base = (t * N_JOINTS + j) * 3;
            out.pos[base] = -p[0];
            out.pos[base + 1] = p[1];
            out.pos[base + 2] = p[2];
        }
    }
    out
}

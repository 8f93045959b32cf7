use std::path::Path;

use nalgebra::Matrix3;

use crate::container::{self, Container, MAGIC_MOTION};
use crate::error::{Error, Result};
use crate::label::GenreLabel;

pub const N_JOINTS: usize = 24;
/// 24 row-major 3x3 rotation blocks then 3 root-translation coords.
pub const FRAME_WIDTH: usize = N_JOINTS * 9 + 3;

/// Per-frame SMPL parameters at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: Vec<f32>,
    fps: f64,
    pub genre: Option<GenreLabel>,
}

impl MotionSequence {
    pub fn new(frames: Vec<f32>, fps: f64, genre: Option<GenreLabel>) -> Result<Self> {
        if frames.is_empty() || frames.len() % FRAME_WIDTH != 0 {
            return Err(Error::ShapeInvalid {
                got: frames.len().to_string(),
                expected: format!("nonempty multiple of {FRAME_WIDTH}"),
            });
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::ShapeInvalid {
                got: format!("fps {fps}"),
                expected: "positive finite fps".into(),
            });
        }
        Ok(MotionSequence { frames, fps, genre })
    }

    pub fn t(&self) -> usize {
        self.frames.len() / FRAME_WIDTH
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t * FRAME_WIDTH..(t + 1) * FRAME_WIDTH]
    }

    /// Rotation block of joint `j` at frame `t` as a row-major 3x3 matrix.
    pub fn rotation(&self, t: usize, j: usize) -> Matrix3<f64> {
        let b = &self.frame(t)[j * 9..j * 9 + 9];
        Matrix3::new(
            b[0] as f64,
            b[1] as f64,
            b[2] as f64,
            b[3] as f64,
            b[4] as f64,
            b[5] as f64,
            b[6] as f64,
            b[7] as f64,
            b[8] as f64,
        )
    }

    pub fn translation(&self, t: usize) -> [f64; 3] {
        let f = self.frame(t);
        [
            f[N_JOINTS * 9] as f64,
            f[N_JOINTS * 9 + 1] as f64,
            f[N_JOINTS * 9 + 2] as f64,
        ]
    }

    pub fn to_container(&self) -> Container {
        Container::new(
            self.fps,
            self.t(),
            FRAME_WIDTH,
            GenreLabel::to_byte(self.genre),
            self.frames.clone(),
        )
    }

    pub fn from_container(c: Container) -> Result<Self> {
        if c.width != FRAME_WIDTH {
            return Err(Error::ShapeInvalid {
                got: format!("width {}", c.width),
                expected: format!("width {FRAME_WIDTH}"),
            });
        }
        let genre = GenreLabel::from_byte(c.genre)?;
        MotionSequence::new(c.data, c.fps, genre)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write(path, &MAGIC_MOTION, &self.to_container())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(container::read(path, &MAGIC_MOTION)?)
    }
}

/// Global joint coordinates produced by forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPositions {
    /// Row-major [T][24][3].
    pub pos: Vec<f64>,
    pub fps: f64,
}

impl JointPositions {
    pub fn t(&self) -> usize {
        self.pos.len() / (N_JOINTS * 3)
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let i = (t * N_JOINTS + j) * 3;
        [self.pos[i], self.pos[i + 1], self.pos[i + 2]]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.pos[t * N_JOINTS * 3..(t + 1) * N_JOINTS * 3]
    }
}

/// Frames that hold an identity pose at the origin.
pub fn identity_frames(t: usize) -> Vec<f32> {
    let mut f = vec![0.0f32; t * FRAME_WIDTH];
    for row in f.chunks_exact_mut(FRAME_WIDTH) {
        for j in 0..N_JOINTS {
            row[j * 9] = 1.0;
            row[j * 9 + 4] = 1.0;
            row[j * 9 + 8] = 1.0;
        }
    }
    f
}

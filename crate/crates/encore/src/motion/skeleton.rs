use serde::Deserialize;

use crate::error::{Error, Result};
use crate::motion::types::N_JOINTS;

/// Parent table and rest-pose bone offsets for the 24-joint SMPL skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTemplate {
    pub names: Vec<String>,
    pub parent: Vec<i32>,
    pub offset: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
struct SkeletonFile {
    version: u32,
    joints: Vec<JointEntry>,
}

#[derive(Deserialize)]
struct JointEntry {
    name: String,
    parent: i32,
    offset: [f64; 3],
}

impl SkeletonTemplate {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: SkeletonFile =
            serde_json::from_str(s).map_err(|e| Error::FormatInvalid(format!("skeleton: {e}")))?;
        if file.version != 1 {
            return Err(Error::FormatInvalid(format!(
                "skeleton version {} unsupported",
                file.version
            )));
        }
        let skel = SkeletonTemplate {
            names: file.joints.iter().map(|j| j.name.clone()).collect(),
            parent: file.joints.iter().map(|j| j.parent).collect(),
            offset: file.joints.iter().map(|j| j.offset).collect(),
        };
        skel.validate()?;
        Ok(skel)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Built-in rest pose shipped with the crate.
    pub fn default_smpl24() -> Self {
        Self::from_json_str(include_str!("../../data/skeleton_smpl24.json"))
            .expect("bundled skeleton data is valid")
    }

    /// Checks the parent array is a tree rooted at joint 0 with a zero root
    /// offset.
    pub fn validate(&self) -> Result<()> {
        if self.parent.len() != N_JOINTS || self.offset.len() != N_JOINTS {
            return Err(Error::CycleDetected(format!(
                "expected {N_JOINTS} joints, got {}",
                self.parent.len()
            )));
        }
        if self.parent[0] != -1 {
            return Err(Error::CycleDetected("joint 0 must be the root".into()));
        }
        if self.offset[0] != [0.0, 0.0, 0.0] {
            return Err(Error::CycleDetected("root offset must be zero".into()));
        }
        for j in 1..N_JOINTS {
            let p = self.parent[j];
            if p < 0 || p as usize >= N_JOINTS {
                return Err(Error::CycleDetected(format!(
                    "joint {j} has parent {p} out of range"
                )));
            }
            // Walk to the root; a walk longer than the joint count is a cycle.
            let mut cur = j;
            for _ in 0..N_JOINTS {
                let p = self.parent[cur];
                if p == -1 {
                    if cur != 0 {
                        return Err(Error::CycleDetected(format!(
                            "joint {j} reaches non-root {cur} with no parent"
                        )));
                    }
                    cur = usize::MAX;
                    break;
                }
                cur = p as usize;
            }
            if cur != usize::MAX {
                return Err(Error::CycleDetected(format!(
                    "joint {j} never reaches the root"
                )));
            }
        }
        Ok(())
    }
}

/// Joint indices of the bundled skeleton, in parent-table order.
pub mod joints {
    pub const PELVIS: usize = 0;
    pub const LEFT_HIP: usize = 1;
    pub const RIGHT_HIP: usize = 2;
    pub const SPINE1: usize = 3;
    pub const LEFT_KNEE: usize = 4;
    pub const RIGHT_KNEE: usize = 5;
    pub const SPINE2: usize = 6;
    pub const LEFT_ANKLE: usize = 7;
    pub const RIGHT_ANKLE: usize = 8;
    pub const SPINE3: usize = 9;
    pub const LEFT_FOOT: usize = 10;
    pub const RIGHT_FOOT: usize = 11;
    pub const NECK: usize = 12;
    pub const LEFT_COLLAR: usize = 13;
    pub const RIGHT_COLLAR: usize = 14;
    pub const HEAD: usize = 15;
    pub const LEFT_SHOULDER: usize = 16;
    pub const RIGHT_SHOULDER: usize = 17;
    pub const LEFT_ELBOW: usize = 18;
    pub const RIGHT_ELBOW: usize = 19;
    pub const LEFT_WRIST: usize = 20;
    pub const RIGHT_WRIST: usize = 21;
    pub const LEFT_HAND: usize = 22;
    pub const RIGHT_HAND: usize = 23;

    /// (left, right) joint index pairs that mirror across the x axis.
    pub const MIRROR_PAIRS: [(usize, usize); 9] = [
        (LEFT_HIP, RIGHT_HIP),
        (LEFT_KNEE, RIGHT_KNEE),
        (LEFT_ANKLE, RIGHT_ANKLE),
        (LEFT_FOOT, RIGHT_FOOT),
        (LEFT_COLLAR, RIGHT_COLLAR),
        (LEFT_SHOULDER, RIGHT_SHOULDER),
        (LEFT_ELBOW, RIGHT_ELBOW),
        (LEFT_WRIST, RIGHT_WRIST),
        (LEFT_HAND, RIGHT_HAND),
    ];
}

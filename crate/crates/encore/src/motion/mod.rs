//! Motion data model, validation, forward kinematics, and dataset
//! windowing/resampling.

mod kinematics;
mod rotation;
mod skeleton;
mod types;
mod window;

pub use kinematics::forward_kinematics;
pub use rotation::{nearest_rotation, project_rotations, validate_motion};
pub use skeleton::{joints, SkeletonTemplate};
pub use types::{identity_frames, JointPositions, MotionSequence, FRAME_WIDTH, N_JOINTS};
pub use window::{resample_fps, sliding_window};

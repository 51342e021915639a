//! Rolling-shutter motion-blur simulation from RGB-D frames and camera
//! rotation recovery from tracked point displacements.

pub mod error;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod raster;
pub mod recovery;
pub mod simulator;
pub mod synth;
pub mod tracker;
pub mod trajectory;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{CameraKind, CameraModel, FieldPoint, RotationPlane, RotationSample};
pub use ingest::{build_scenarios, load_depth, load_rgb, Scenario};
pub use metrics::{evaluate, EvalConfig, EvalReport};
pub use raster::{DepthMap, RgbImage};
pub use recovery::{recover_trajectory, RecoveryConfig};
pub use simulator::{render_frame, render_video, SimConfig, VideoFrames};
pub use tracker::{DeltaField, QueryGrid};
pub use trajectory::{Trajectory, TrajectoryLabel};

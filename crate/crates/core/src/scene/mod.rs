//! Synthetic multi-view scene simulator: driving-like object layouts, a
//! six-camera pinhole rig, history query sets, and Gaussian heatmap targets
//! for supervising the token scorer. No real dataset is involved; everything
//! is a deterministic function of a seed.

mod generate;
mod geometry;
mod heatmap;
mod io;
mod queries;

pub use generate::{generate_sequence, Frame, SceneSequence, FRAME_DT};
pub use geometry::{back_project, project_boxes, CameraRig, CameraView, Projection, Transform4};
pub use heatmap::{gaussian_radius, render_gaussian_targets, HeatmapTarget, GAUSSIAN_MIN_OVERLAP};
pub use io::{dump_dataset, load_dataset, load_frame_record, FrameRecord, SCENE_MAGIC};
pub use queries::{simulate_history_queries, HistoryQuerySet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum object speed the simulator emits (m/s).
pub const V_MAX: f64 = 10.0;

/// A simulated object: center and velocity in the frame's ego coordinates,
/// box size in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub velocity: [f64; 3],
    pub class_id: u8,
}

impl SceneObject {
    pub fn validate(&self) -> Result<()> {
        if self.size.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument {
                name: "size",
                reason: format!("box size must be strictly positive, got {:?}", self.size),
            });
        }
        let speed = self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
        if speed > V_MAX + 1e-9 {
            return Err(Error::InvalidArgument {
                name: "velocity",
                reason: format!("speed {speed:.3} exceeds v_max {V_MAX}"),
            });
        }
        Ok(())
    }
}

//! Token compression for ViT-style multi-view encoders.
//!
//! The crate is organized around the compression pipeline:
//!
//! - [`numerics`]: dense matrices, linear layers, activations, seeded RNG.
//! - [`scene`]: synthetic multi-view scenes, camera projection, history
//!   queries, and Gaussian heatmap supervision targets.
//! - [`motion`]: temporal alignment of history queries and motion-conditioned
//!   layer normalization.
//! - [`mqts`]: motion query-guided token selection — importance scoring,
//!   top-k splitting, update scheduling, and scorer training.
//! - [`router`]: bridge-token dynamic router and the compressed encoder
//!   forward pass.
//! - [`tokens`]: synthetic token generation standing in for patch embedding.
//! - [`flops`]: analytic MAC/FLOP accounting for baseline vs compressed runs.
//! - [`bench`]: wall-clock measurement harness.
//! - [`report`]: JSON/CSV report emission and heatmap dumps.

pub mod bench;
pub mod error;
pub mod flops;
pub mod motion;
pub mod mqts;
pub mod numerics;
pub mod report;
pub mod router;
pub mod scene;
pub mod tokens;

pub use error::{Error, Result};

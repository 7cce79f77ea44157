//! BRAU-Net: a U-shaped segmentation network built from bi-level routing
//! attention blocks, with its training pipeline and verification suites.

pub mod attention;
mod error;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod verify;

pub use error::{CoreError, Result};

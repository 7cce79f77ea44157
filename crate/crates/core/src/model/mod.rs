//! The U-shaped encoder/decoder assembled from BiFormer blocks.

mod blocks;
mod config;
mod net;

pub use blocks::{BiformerBlock, FinalExpand, PatchEmbed, PatchExpand, PatchMerge, SkipFuse};
pub use config::{ModelConfig, STAGES};
pub use net::{BrauNet, DecoderStage};

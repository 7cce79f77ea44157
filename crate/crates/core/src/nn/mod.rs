//! Parameter storage and the layers built on the tape.

pub mod init;
mod layers;
mod params;

pub use layers::{
    BatchNorm2d, Conv2d, LayerNorm, Linear, Mlp, BATCH_NORM_EPS, BATCH_NORM_MOMENTUM, LAYER_NORM_EPS,
};
pub use params::{BatchStatUpdate, Ctx, ParamId, ParamStore};

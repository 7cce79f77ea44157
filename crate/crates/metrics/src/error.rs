use thiserror::Error;

use crate::mask::Structure;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask shapes differ: {0}")]
    Shape(String),
    #[error("invalid mask: {0}")]
    Label(String),
    #[error("{structure} region is empty")]
    EmptyRegion { structure: Structure },
    #[error("angle-of-progression geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

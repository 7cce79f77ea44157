//! Data ingestion, augmentation, loss, optimization and the training loop.

pub mod augment;
pub mod config;
pub mod data;
pub mod loss;
pub mod optim;
pub mod predict;
pub mod synthetic;
pub mod train;

pub use augment::{augment, AugmentConfig};
pub use config::{DataConfig, RunConfig, TrainConfig};
pub use data::{build_index, load_samples, normalize_image, DatasetIndex, Pair, Sample, Split};
pub use loss::{cross_entropy, one_hot, seg_loss, soft_dice};
pub use optim::{Adam, AdamConfig};
pub use predict::{argmax_masks, predict, predict_batch};
pub use synthetic::{synthetic_case, synthetic_set, write_dataset};
pub use train::{evaluate, read_metrics_log, train, EpochRecord, EvalMetrics, TrainOutcome};

//! Evaluation metrics for pubic-symphysis / fetal-head segmentation.
//!
//! Masks carry labels {0 background, 1 PS, 2 FH}. Region metrics are
//! computed per structure (FH, PS and their union ALL); distances use
//! 4-adjacency boundaries and are scaled by the mask's pixel spacing.

mod aop;
mod distance;
mod error;
mod mask;
mod overlap;
mod score;

pub use aop::{aop_from_mask, convex_hull, delta_aop, AopGeometry, Point};
pub use distance::{asd, boundary, hausdorff, squared_distance_map};
pub use error::{MetricsError, Result};
pub use mask::{SegMask, Structure, BACKGROUND, FH_LABEL, PS_LABEL};
pub use overlap::dsc;
pub use score::{
    challenge_score, evaluate_pair, CorpusSummary, ScoreComponents, ScoreReport, WORST_DELTA_AOP,
    WORST_DISTANCE,
};

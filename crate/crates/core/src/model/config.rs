use serde::{Deserialize, Serialize};

use crate::attention::{BraConfig, TopK};
use crate::error::{config_err, CoreError, Result};

/// Number of encoder stages.
pub const STAGES: usize = 4;

/// Architecture hyper-parameters. Every field is explicit in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `[height, width]` of input images.
    pub input_size: [usize; 2],
    pub in_channels: usize,
    pub num_classes: usize,
    /// Stage-1 channel width `C`; stage `i` uses `C·2^i`.
    pub base_width: usize,
    pub mlp_ratio: usize,
    pub stage_depths: [usize; STAGES],
    pub stage_heads: [usize; STAGES],
    /// Routed regions per stage; non-positive means all regions.
    pub stage_topks: [i64; STAGES],
    /// Regions per side `S` per stage.
    pub region_grids: [usize; STAGES],
    /// BiFormer blocks at the H/32 bottleneck (stage-4 heads/topk/grid).
    pub bottleneck_depth: usize,
}

impl ModelConfig {
    /// 224×224 grayscale-to-3-class configuration at full width.
    pub fn full() -> Self {
        Self {
            input_size: [224, 224],
            in_channels: 1,
            num_classes: 3,
            base_width: 96,
            mlp_ratio: 3,
            stage_depths: [4, 4, 8, 4],
            stage_heads: [2, 4, 8, 16],
            stage_topks: [4, 8, 16, -2],
            region_grids: [7, 7, 7, 7],
            bottleneck_depth: 2,
        }
    }

    /// 64×64 toy configuration used by tests and the smoke run.
    pub fn toy(base_width: usize) -> Self {
        Self {
            input_size: [64, 64],
            in_channels: 1,
            num_classes: 3,
            base_width,
            mlp_ratio: 3,
            stage_depths: [1, 1, 2, 1],
            stage_heads: [2, 4, 8, 16],
            stage_topks: [4, 8, 2, -2],
            region_grids: [4, 4, 2, 1],
            bottleneck_depth: 2,
        }
    }

    pub fn stage_width(&self, stage: usize) -> usize {
        self.base_width << stage
    }

    /// Feature side lengths `(h, w)` of encoder stage `stage`.
    pub fn stage_size(&self, stage: usize) -> (usize, usize) {
        let f = 4 << stage;
        (self.input_size[0] / f, self.input_size[1] / f)
    }

    pub fn bra(&self, stage: usize) -> BraConfig {
        BraConfig::new(
            self.region_grids[stage],
            TopK::from_signed(self.stage_topks[stage]),
            self.stage_heads[stage],
            self.stage_width(stage),
        )
    }

    /// Decoder depths mirror encoder stages 3, 2, 1.
    pub fn decoder_depths(&self) -> [usize; STAGES - 1] {
        [self.stage_depths[2], self.stage_depths[1], self.stage_depths[0]]
    }

    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.input_size;
        if h == 0 || w == 0 || h % 32 != 0 || w % 32 != 0 {
            return config_err(format!("input size {h}x{w} must be a positive multiple of 32"));
        }
        if self.in_channels == 0 || self.num_classes < 2 {
            return config_err("need at least one input channel and two classes");
        }
        if self.base_width < 2 || !self.base_width.is_multiple_of(2) {
            return config_err(format!("base width {} must be even and at least 2", self.base_width));
        }
        if self.mlp_ratio == 0 {
            return config_err("mlp ratio must be positive");
        }
        for stage in 0..STAGES {
            let (sh, sw) = self.stage_size(stage);
            if let Err(e) = self.bra(stage).validate(sh, sw) {
                let msg = match e {
                    CoreError::Config(m) => m,
                    other => other.to_string(),
                };
                return config_err(format!("stage {}: {msg}", stage + 1));
            }
        }
        Ok(())
    }
}

use std::path::Path;

use brau_tensor::{checkpoint, Real, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{BiformerBlock, FinalExpand, PatchEmbed, PatchExpand, PatchMerge, SkipFuse};
use super::config::{ModelConfig, STAGES};
use crate::error::{config_err, Result};
use crate::nn::{Ctx, Linear, ParamStore};

/// Decoder level: upsample, fuse the mirrored encoder output, refine.
#[derive(Clone, Debug)]
pub struct DecoderStage {
    pub expand: PatchExpand,
    pub fuse: SkipFuse,
    pub blocks: Vec<BiformerBlock>,
}

/// The U-shaped network with its parameters.
#[derive(Clone, Debug)]
pub struct BrauNet<T: Real> {
    pub cfg: ModelConfig,
    pub store: ParamStore<T>,
    pub embed: PatchEmbed,
    pub encoder: [Vec<BiformerBlock>; STAGES],
    pub merges: Vec<PatchMerge>,
    pub bottleneck: Vec<BiformerBlock>,
    pub decoder: Vec<DecoderStage>,
    pub final_expand: FinalExpand,
    pub head: Linear,
}

fn blocks<T: Real>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    name: &str,
    cfg: &ModelConfig,
    stage: usize,
    depth: usize,
) -> Result<Vec<BiformerBlock>> {
    (0..depth)
        .map(|i| BiformerBlock::new(store, rng, &format!("{name}.{i}"), cfg.bra(stage), cfg.mlp_ratio))
        .collect()
}

impl<T: Real> BrauNet<T> {
    /// Builds and initializes the network; `seed` fixes every initial value.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let s = &mut store;
        let r = &mut rng;
        let c = cfg.base_width;
        let embed = PatchEmbed::new(s, r, "embed", cfg.in_channels, c)?;
        let mut encoder: [Vec<BiformerBlock>; STAGES] = Default::default();
        let mut merges = Vec::new();
        for (stage, slot) in encoder.iter_mut().enumerate() {
            *slot = blocks(s, r, &format!("encoder.{stage}"), &cfg, stage, cfg.stage_depths[stage])?;
            if stage + 1 < STAGES {
                merges.push(PatchMerge::new(s, r, &format!("merge.{stage}"), cfg.stage_width(stage))?);
            }
        }
        let bottleneck = blocks(s, r, "bottleneck", &cfg, STAGES - 1, cfg.bottleneck_depth)?;
        let mut decoder = Vec::new();
        for (level, depth) in cfg.decoder_depths().into_iter().enumerate() {
            let stage = STAGES - 2 - level;
            let width = cfg.stage_width(stage);
            decoder.push(DecoderStage {
                expand: PatchExpand::new(s, r, &format!("decoder.{level}.expand"), 2 * width)?,
                fuse: SkipFuse::new(s, r, &format!("decoder.{level}.fuse"), width)?,
                blocks: blocks(s, r, &format!("decoder.{level}.blocks"), &cfg, stage, depth)?,
            });
        }
        let final_expand = FinalExpand::new(s, r, "final_expand", c)?;
        let head = Linear::new(s, r, "head", c, cfg.num_classes, true)?;
        Ok(Self { cfg, store, embed, encoder, merges, bottleneck, decoder, final_expand, head })
    }

    pub fn count_parameters(&self) -> usize {
        self.store.count_parameters()
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<U: Real>(&self) -> BrauNet<U> {
        BrauNet {
            cfg: self.cfg.clone(),
            store: self.store.cast(),
            embed: self.embed.clone(),
            encoder: self.encoder.clone(),
            merges: self.merges.clone(),
            bottleneck: self.bottleneck.clone(),
            decoder: self.decoder.clone(),
            final_expand: self.final_expand.clone(),
            head: self.head.clone(),
        }
    }

    /// `[B, in_ch, H, W]` image batch to `[B, classes, H, W]` logits.
    pub fn forward(&self, ctx: &mut Ctx<'_, '_, T>, img: Var) -> Result<Var> {
        let shape = ctx.tape.shape(img).to_vec();
        let [h, w] = self.cfg.input_size;
        if shape.len() != 4 || shape[1] != self.cfg.in_channels || shape[2] != h || shape[3] != w {
            if shape.len() == 4 && (!shape[2].is_multiple_of(32) || !shape[3].is_multiple_of(32)) {
                return config_err(format!(
                    "input {}x{} is not divisible by 32",
                    shape[2], shape[3]
                ));
            }
            return config_err(format!(
                "input {shape:?} does not match configured [B,{},{h},{w}]",
                self.cfg.in_channels
            ));
        }
        let mut x = self.embed.forward(ctx, img)?;
        let mut skips = Vec::with_capacity(STAGES - 1);
        for stage in 0..STAGES {
            for block in &self.encoder[stage] {
                x = block.forward(ctx, x)?;
            }
            if stage + 1 < STAGES {
                skips.push(x);
                x = self.merges[stage].forward(ctx, x)?;
            }
        }
        for block in &self.bottleneck {
            x = block.forward(ctx, x)?;
        }
        for stage in &self.decoder {
            x = stage.expand.forward(ctx, x)?;
            let skip = skips.pop().expect("one skip per decoder level");
            x = stage.fuse.forward(ctx, x, skip)?;
            for block in &stage.blocks {
                x = block.forward(ctx, x)?;
            }
        }
        x = self.final_expand.forward(ctx, x)?;
        let logits = self.head.forward(ctx, x)?;
        Ok(ctx.tape.permute(logits, &[0, 3, 1, 2])?)
    }

    /// Evaluation-mode logits without gradient bookkeeping.
    pub fn infer(&self, img: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::inference();
        let x = tape.constant(img.clone());
        let mut ctx = Ctx::new(&mut tape, &self.store, false);
        let out = self.forward(&mut ctx, x)?;
        Ok(tape.value(out).clone())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::save(path, &self.store.named())?)
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        checkpoint::encode(&self.store.named())
    }

    /// Replaces every parameter and buffer from a checkpoint file.
    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let entries = checkpoint::load::<T>(path)?;
        self.store.load_named(entries)
    }
}

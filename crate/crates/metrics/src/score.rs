use serde::{Deserialize, Serialize};

use crate::aop::aop_from_mask;
use crate::distance::{asd, hausdorff};
use crate::error::{MetricsError, Result};
use crate::mask::{SegMask, Structure};
use crate::overlap::dsc;

/// Distance recorded when a structure is missing from exactly one mask.
pub const WORST_DISTANCE: f64 = 100.0;
/// Angle error recorded when AoP can be measured on only one mask.
pub const WORST_DELTA_AOP: f64 = 180.0;

/// Inputs of the composite challenge score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub dsc_fh: f64,
    pub dsc_ps: f64,
    pub dsc_all: f64,
    pub hd_fh: f64,
    pub hd_ps: f64,
    pub hd_all: f64,
    pub asd_fh: f64,
    pub asd_ps: f64,
    pub asd_all: f64,
    pub delta_aop: f64,
}

impl ScoreComponents {
    pub fn perfect() -> Self {
        Self { dsc_fh: 1.0, dsc_ps: 1.0, dsc_all: 1.0, ..Self::default() }
    }

    pub fn worst() -> Self {
        Self {
            hd_fh: WORST_DISTANCE,
            hd_ps: WORST_DISTANCE,
            hd_all: WORST_DISTANCE,
            asd_fh: WORST_DISTANCE,
            asd_ps: WORST_DISTANCE,
            asd_all: WORST_DISTANCE,
            delta_aop: WORST_DELTA_AOP,
            ..Self::default()
        }
    }

    fn set(&mut self, s: Structure, d: f64, hd: f64, sd: f64) {
        let (a, b, c) = match s {
            Structure::Fh => (&mut self.dsc_fh, &mut self.hd_fh, &mut self.asd_fh),
            Structure::Ps => (&mut self.dsc_ps, &mut self.hd_ps, &mut self.asd_ps),
            Structure::All => (&mut self.dsc_all, &mut self.hd_all, &mut self.asd_all),
        };
        (*a, *b, *c) = (d, hd, sd);
    }
}

fn distance_term(d: f64) -> f64 {
    (1.0 - d / 100.0).clamp(0.0, 1.0)
}

/// Composite score in [0, 1]:
///
/// `0.25·mean(DSC) + 0.25·[0.5·mean(1 − HD/100) + 0.5·mean(1 − ASD/100)] + 0.5·(1 − ΔAOP/180)`
///
/// with each distance term clamped to [0, 1].
pub fn challenge_score(c: &ScoreComponents) -> Result<f64> {
    for (name, v) in [("dsc_fh", c.dsc_fh), ("dsc_ps", c.dsc_ps), ("dsc_all", c.dsc_all)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(MetricsError::Argument(format!("{name} = {v} outside [0, 1]")));
        }
    }
    for (name, v) in [
        ("hd_fh", c.hd_fh),
        ("hd_ps", c.hd_ps),
        ("hd_all", c.hd_all),
        ("asd_fh", c.asd_fh),
        ("asd_ps", c.asd_ps),
        ("asd_all", c.asd_all),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(MetricsError::Argument(format!("{name} = {v} must be a finite distance")));
        }
    }
    if !(0.0..=180.0).contains(&c.delta_aop) {
        return Err(MetricsError::Argument(format!("delta_aop = {} outside [0, 180]", c.delta_aop)));
    }
    let dsc = 0.25 * (c.dsc_fh + c.dsc_ps + c.dsc_all) / 3.0;
    let hd = 0.5 * (distance_term(c.hd_fh) + distance_term(c.hd_ps) + distance_term(c.hd_all)) / 3.0;
    let sd = 0.5 * (distance_term(c.asd_fh) + distance_term(c.asd_ps) + distance_term(c.asd_all)) / 3.0;
    let aop = 0.5 * (1.0 - c.delta_aop / 180.0);
    Ok(dsc + 0.25 * (hd + sd) + aop)
}

/// Every per-case metric plus the composite score. `flags` lists the
/// conventions applied to missing structures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(flatten)]
    pub components: ScoreComponents,
    pub score: f64,
    pub flags: Vec<String>,
}

impl ScoreReport {
    pub fn from_components(components: ScoreComponents, flags: Vec<String>) -> Result<Self> {
        let score = challenge_score(&components)?;
        Ok(Self { components, score, flags })
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Scores one prediction against its ground truth.
///
/// A structure present in only one mask gets DSC 0 and distances of
/// [`WORST_DISTANCE`]; absent from both, DSC 1 and distance 0. When AoP is
/// measurable on only one mask ΔAOP is [`WORST_DELTA_AOP`]; on neither, 0.
/// Each fallback adds a flag.
pub fn evaluate_pair(pred: &SegMask, gt: &SegMask) -> Result<ScoreReport> {
    pred.check_same_shape(gt)?;
    let mut c = ScoreComponents::default();
    let mut flags = Vec::new();
    for s in Structure::EACH {
        let d = dsc(pred, gt, s)?;
        let (hd, sd) = match (pred.count(s) > 0, gt.count(s) > 0) {
            (true, true) => (hausdorff(pred, gt, s)?, asd(pred, gt, s)?),
            (false, false) => (0.0, 0.0),
            (has_pred, _) => {
                let side = if has_pred { "gt" } else { "pred" };
                flags.push(format!("{}_empty_{side}", s.key()));
                (WORST_DISTANCE, WORST_DISTANCE)
            }
        };
        c.set(s, d, hd, sd);
    }
    c.delta_aop = match (aop_from_mask(pred), aop_from_mask(gt)) {
        (Ok(a), Ok(b)) => (a.aop - b.aop).abs().clamp(0.0, 180.0),
        (Err(_), Err(_)) => {
            flags.push("aop_undefined_both".into());
            0.0
        }
        (Err(_), Ok(_)) => {
            flags.push("aop_undefined_pred".into());
            WORST_DELTA_AOP
        }
        (Ok(_), Err(_)) => {
            flags.push("aop_undefined_gt".into());
            WORST_DELTA_AOP
        }
    };
    ScoreReport::from_components(c, flags)
}

/// Arithmetic means over a corpus, folded in case order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub cases: usize,
    pub flagged_cases: usize,
    #[serde(flatten)]
    pub mean: ScoreComponents,
    pub mean_score: f64,
}

impl CorpusSummary {
    pub fn from_reports(reports: &[ScoreReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mut m = ScoreComponents::default();
        let mut score = 0.0;
        for r in reports {
            let c = &r.components;
            m.dsc_fh += c.dsc_fh;
            m.dsc_ps += c.dsc_ps;
            m.dsc_all += c.dsc_all;
            m.hd_fh += c.hd_fh;
            m.hd_ps += c.hd_ps;
            m.hd_all += c.hd_all;
            m.asd_fh += c.asd_fh;
            m.asd_ps += c.asd_ps;
            m.asd_all += c.asd_all;
            m.delta_aop += c.delta_aop;
            score += r.score;
        }
        for v in [
            &mut m.dsc_fh,
            &mut m.dsc_ps,
            &mut m.dsc_all,
            &mut m.hd_fh,
            &mut m.hd_ps,
            &mut m.hd_all,
            &mut m.asd_fh,
            &mut m.asd_ps,
            &mut m.asd_all,
            &mut m.delta_aop,
        ] {
            *v /= n;
        }
        Self {
            cases: reports.len(),
            flagged_cases: reports.iter().filter(|r| r.is_flagged()).count(),
            mean: m,
            mean_score: score / n,
        }
    }
}

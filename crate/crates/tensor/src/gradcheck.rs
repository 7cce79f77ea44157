//! Central finite-difference verification of tape gradients (64-bit).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Check at most this many entries per input (sampled); `None` checks all.
    pub max_entries: Option<usize>,
    /// Lower bound on the relative-error denominator.
    pub rel_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_entries: None,
            rel_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradMismatch {
    pub input: usize,
    pub entry: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub entries_checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Entry with the largest relative error.
    pub worst: Option<GradMismatch>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.entries_checked > 0 && self.max_rel_err < tol
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the tape gradient of the scalar produced by `build` against
/// central differences, for every input tensor.
pub fn check_gradients<E, F>(inputs: &[Tensor<f64>], build: F, opts: &GradCheckOptions) -> Result<GradCheckReport, E>
where
    E: From<TensorError>,
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, E>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64, E> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).item()?)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &vars)?;
    if tape.value(out).numel() != 1 {
        return Err(TensorError::Shape(format!(
            "gradient check needs a scalar output, got {:?}",
            tape.shape(out)
        ))
        .into());
    }
    let grads = tape.backward(out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport::default();
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (input, t) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[input], t.shape());
        let entries: Vec<usize> = match opts.max_entries {
            Some(m) if m < t.numel() => {
                let mut picked = sample(&mut rng, t.numel(), m).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..t.numel()).collect(),
        };
        for entry in entries {
            let orig = t.data()[entry];
            work[input].data_mut()[entry] = orig + opts.step;
            let plus = eval(&work)?;
            work[input].data_mut()[entry] = orig - opts.step;
            let minus = eval(&work)?;
            work[input].data_mut()[entry] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.data()[entry];
            let rel = relative_error(a, numeric, opts.rel_floor);
            report.entries_checked += 1;
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                report.worst = Some(GradMismatch { input, entry, analytic: a, numeric });
            }
        }
    }
    Ok(report)
}

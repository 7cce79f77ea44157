use brau_tensor::{Real, Tensor};

use crate::error::{CoreError, Result};
use crate::nn::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments for each trainable parameter, plus the step
/// counter.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    pub cfg: AdamConfig,
    pub t: u64,
    ids: Vec<ParamId>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(store: &ParamStore<T>, cfg: AdamConfig) -> Self {
        let ids = store.trainable_ids();
        let zeros = |id: &ParamId| Tensor::zeros(store.get(*id).shape());
        Self {
            cfg,
            t: 0,
            m: ids.iter().map(zeros).collect(),
            v: ids.iter().map(zeros).collect(),
            ids,
        }
    }

    pub fn moments(&self, id: ParamId) -> Option<(&Tensor<T>, &Tensor<T>)> {
        let i = self.ids.iter().position(|&x| x == id)?;
        Some((&self.m[i], &self.v[i]))
    }

    /// One bias-corrected update. `grads` must list exactly the trainable
    /// parameters, in store order. A tensor whose gradient is entirely zero
    /// is left untouched together with its moments.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[(ParamId, Tensor<T>)]) -> Result<()> {
        if grads.len() != self.ids.len() || grads.iter().zip(&self.ids).any(|((g, _), id)| g != id) {
            return Err(CoreError::Optimizer(format!(
                "{} gradients for {} trainable parameters",
                grads.len(),
                self.ids.len()
            )));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let (b1, b2) = (T::of(beta1), T::of(beta2));
        let (ib1, ib2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
        let (c1, c2, lr, eps) = (T::of(c1), T::of(c2), T::of(lr), T::of(eps));
        for (i, (id, g)) in grads.iter().enumerate() {
            let p = store.get_mut(*id);
            if g.shape() != p.shape() {
                return Err(CoreError::Optimizer(format!(
                    "gradient {:?} for parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if g.data().iter().all(|x| *x == T::zero()) {
                continue;
            }
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (j, (pj, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = b1 * m[j] + ib1 * gj;
                v[j] = b2 * v[j] + ib2 * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *pj -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

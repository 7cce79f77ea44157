use std::collections::HashMap;

use brau_tensor::{Real, Tape, Tensor, Var};

use crate::error::{CoreError, Result};

/// Handle to one named tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Entry<T: Real> {
    name: String,
    value: Tensor<T>,
    trainable: bool,
}

/// Named model tensors in registration order. Trainable entries receive
/// gradients; the rest are buffers such as batch-norm running statistics.
#[derive(Clone, Debug)]
pub struct ParamStore<T: Real> {
    entries: Vec<Entry<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(CoreError::Param(format!("duplicate parameter name {name:?}")));
        }
        self.by_name.insert(name.clone(), self.entries.len());
        self.entries.push(Entry { name, value, trainable });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    /// Replaces a value; the shape must not change.
    pub fn set(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if entry.value.shape() != value.shape() {
            return Err(CoreError::Param(format!(
                "{}: shape {:?} cannot take {:?}",
                entry.name,
                entry.value.shape(),
                value.shape()
            )));
        }
        entry.value = value;
        Ok(())
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.ids().filter(|&id| self.is_trainable(id)).collect()
    }

    /// Total number of trainable scalars.
    pub fn count_parameters(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.value.numel()).sum()
    }

    /// `(name, tensor)` pairs in registration order, buffers included.
    pub fn named(&self) -> Vec<(&str, &Tensor<T>)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value)).collect()
    }

    /// Overwrites every entry from a name-keyed list; names and shapes must
    /// match this store exactly.
    pub fn load_named(&mut self, entries: Vec<(String, Tensor<T>)>) -> Result<()> {
        if entries.len() != self.entries.len() {
            return Err(CoreError::Param(format!(
                "checkpoint holds {} tensors, model expects {}",
                entries.len(),
                self.entries.len()
            )));
        }
        for (name, value) in entries {
            let id = self
                .id(&name)
                .ok_or_else(|| CoreError::Param(format!("unknown checkpoint entry {name:?}")))?;
            self.set(id, value)?;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                    trainable: e.trainable,
                })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}

/// Batch statistics observed by one batch-norm call in training mode.
#[derive(Clone, Debug)]
pub struct BatchStatUpdate<T: Real> {
    pub mean_id: ParamId,
    pub var_id: ParamId,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub momentum: f64,
}

impl<T: Real> BatchStatUpdate<T> {
    /// `running ← (1 − momentum)·running + momentum·batch`.
    pub fn apply(&self, store: &mut ParamStore<T>) {
        let m = T::of(self.momentum);
        let keep = T::one() - m;
        for (id, batch) in [(self.mean_id, &self.mean), (self.var_id, &self.var)] {
            for (r, &b) in store.get_mut(id).data_mut().iter_mut().zip(batch) {
                *r = keep * *r + m * b;
            }
        }
    }
}

/// One forward pass: the tape, the parameter bindings made so far, the mode
/// flag and any pending running-statistic updates.
pub struct Ctx<'t, 's, T: Real> {
    pub tape: &'t mut Tape<T>,
    store: &'s ParamStore<T>,
    bound: Vec<Option<Var>>,
    training: bool,
    updates: Vec<BatchStatUpdate<T>>,
}

impl<'t, 's, T: Real> Ctx<'t, 's, T> {
    pub fn new(tape: &'t mut Tape<T>, store: &'s ParamStore<T>, training: bool) -> Self {
        Self {
            tape,
            store,
            bound: vec![None; store.len()],
            training,
            updates: Vec::new(),
        }
    }

    pub fn training(&self) -> bool {
        self.training
    }

    pub fn store(&self) -> &'s ParamStore<T> {
        self.store
    }

    /// Uses `var` for parameter `id` instead of a fresh leaf.
    pub fn bind(&mut self, id: ParamId, var: Var) -> Result<()> {
        let want = self.store.get(id).shape();
        if self.tape.shape(var) != want {
            return Err(CoreError::Param(format!(
                "{}: bound value {:?}, expected {:?}",
                self.store.name(id),
                self.tape.shape(var),
                want
            )));
        }
        self.bound[id.0] = Some(var);
        Ok(())
    }

    /// Tape variable for a parameter, created on first use.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.tape.leaf(self.store.get(id).clone(), self.store.is_trainable(id));
        self.bound[id.0] = Some(v);
        v
    }

    /// Parameters touched by this pass together with their variables.
    pub fn bindings(&self) -> Vec<(ParamId, Var)> {
        self.bound
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (ParamId(i), v)))
            .collect()
    }

    pub(crate) fn record_stats(&mut self, update: BatchStatUpdate<T>) {
        self.updates.push(update);
    }

    pub fn take_stat_updates(&mut self) -> Vec<BatchStatUpdate<T>> {
        std::mem::take(&mut self.updates)
    }
}

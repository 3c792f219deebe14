//! Named parameter storage and the Adam optimizer.

use super::tape::Gradients;
use super::Tensor;
use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainFault {
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
}

/// Parameter tensors with accumulated gradients, keyed by name in insertion
/// order. Gradient shape always equals parameter shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: IndexMap<String, Tensor>,
    grads: IndexMap<String, Tensor>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        self.grads.insert(name.clone(), Tensor::zeros(tensor.shape()));
        self.params.insert(name, tensor);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn grad(&self, name: &str) -> &Tensor {
        &self.grads[name]
    }

    pub fn total_len(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    /// Add the matching entries of `grads` into this store's accumulators;
    /// names the store does not own are ignored.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (name, g) in &grads.by_name {
            if let Some(acc) = self.grads.get_mut(name) {
                assert_eq!(
                    acc.shape(),
                    g.shape(),
                    "gradient shape {:?} != parameter shape {:?} for {name}",
                    g.shape(),
                    acc.shape()
                );
                for (a, d) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += d;
                }
            }
        }
    }

    pub fn clear_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// `self <- tau * online + (1 - tau) * self`, elementwise, by name.
    pub fn soft_update_from(&mut self, online: &ParameterStore, tau: f64) {
        for (name, target) in self.params.iter_mut() {
            let src = online.get(name);
            assert_eq!(
                target.shape(),
                src.shape(),
                "soft update shape mismatch for {name}"
            );
            for (t, o) in target.data_mut().iter_mut().zip(src.data()) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
    }
}

/// Adam with bias correction. Moment state is keyed per parameter; the step
/// counter is shared across the store.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    m: IndexMap<String, Tensor>,
    v: IndexMap<String, Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            m: IndexMap::new(),
            v: IndexMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the store's accumulated gradients, then clear
    /// them. A non-finite gradient aborts before touching any parameter.
    pub fn step(&mut self, store: &mut ParameterStore) -> Result<(), TrainFault> {
        for (name, g) in store.grads.iter() {
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(TrainFault::NonFiniteGradient(name.clone()));
            }
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let names: Vec<String> = store.params.keys().cloned().collect();
        for name in names {
            let g = store.grads[&name].clone();
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape()));
            for (mi, gi) in m.data_mut().iter_mut().zip(g.data()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            }
            let m = m.clone();
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape()));
            for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            }
            let v = v.clone();
            let p = store.params.get_mut(&name).unwrap();
            for i in 0..p.len() {
                let mhat = m.data()[i] / bc1;
                let vhat = v.data()[i] / bc2;
                p.data_mut()[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        store.clear_grads();
        Ok(())
    }

    /// Moment tensors for checkpointing, prefixed `m.`/`v.`.
    pub fn state_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (k, t) in &self.m {
            out.push((format!("m.{k}"), t.clone()));
        }
        for (k, t) in &self.v {
            out.push((format!("v.{k}"), t.clone()));
        }
        out
    }

    pub fn restore_state(&mut self, step_count: u64, tensors: Vec<(String, Tensor)>) {
        self.step_count = step_count;
        self.m.clear();
        self.v.clear();
        for (name, t) in tensors {
            if let Some(rest) = name.strip_prefix("m.") {
                self.m.insert(rest.to_string(), t);
            } else if let Some(rest) = name.strip_prefix("v.") {
                self.v.insert(rest.to_string(), t);
            }
        }
    }
}

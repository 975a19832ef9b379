//! Named parameter storage, initialization, and the AdamW optimizer.

use std::collections::HashMap;

use ndarray::IxDyn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Arr;
use crate::error::{CoreError, Result};

pub struct ParamEntry {
    pub name: String,
    pub value: Arr,
    pub grad: Arr,
    pub trainable: bool,
    m: Arr,
    v: Arr,
}

/// Flat, insertion-ordered collection of named parameters and buffers.
/// Buffers (`trainable == false`) hold state like batch-norm running
/// statistics; the optimizer never touches them.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Arr, trainable: bool) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name}"
        );
        let grad = Arr::zeros(value.raw_dim());
        let m = Arr::zeros(value.raw_dim());
        let v = Arr::zeros(value.raw_dim());
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad,
            trainable,
            m,
            v,
        });
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> &Arr {
        &self.entries[self.expect(name)].value
    }

    pub fn set(&mut self, name: &str, value: Arr) {
        let i = self.expect(name);
        assert_eq!(
            self.entries[i].value.raw_dim(),
            value.raw_dim(),
            "shape mismatch setting {name}"
        );
        self.entries[i].value = value;
    }

    fn expect(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn try_get(&self, name: &str) -> Option<&Arr> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn num_trainable_scalars(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    pub fn add_grad(&mut self, name: &str, g: &Arr) {
        let i = self.expect(name);
        self.entries[i].grad += g;
    }

    pub fn scale_grads(&mut self, s: f64) {
        for e in &mut self.entries {
            e.grad *= s;
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.grad.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Order-sensitive FNV-1a digest over names, shapes and value bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for e in &self.entries {
            eat(e.name.as_bytes());
            for d in e.value.shape() {
                eat(&(*d as u64).to_le_bytes());
            }
            for v in e.value.iter() {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// Clone of all values, for best-checkpoint snapshots.
    pub fn snapshot(&self) -> Vec<(String, Arr)> {
        self.entries
            .iter()
            .map(|e| (e.name.clone(), e.value.clone()))
            .collect()
    }

    pub fn restore(&mut self, snapshot: &[(String, Arr)]) {
        for (name, value) in snapshot {
            self.set(name, value.clone());
        }
    }

    /// Load values by name; shapes must agree. Unknown names are an error,
    /// missing names are left at their initialized values.
    pub fn load_values(&mut self, values: Vec<(String, Arr)>) -> Result<()> {
        for (name, value) in values {
            let Some(&i) = self.index.get(&name) else {
                return Err(CoreError::Data(format!(
                    "checkpoint parameter {name} not present in model"
                )));
            };
            if self.entries[i].value.raw_dim() != value.raw_dim() {
                return Err(CoreError::Data(format!(
                    "checkpoint parameter {name} has shape {:?}, model expects {:?}",
                    value.shape(),
                    self.entries[i].value.shape()
                )));
            }
            self.entries[i].value = value;
        }
        Ok(())
    }
}

/// Initialization schemes for weight tensors.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform in `[-sqrt(1/fan_in), sqrt(1/fan_in)]`.
    KaimingUniform { fan_in: usize },
    Zeros,
    Constant(f64),
}

pub fn init_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scheme: Init) -> Arr {
    match scheme {
        Init::KaimingUniform { fan_in } => {
            let bound = (1.0 / fan_in as f64).sqrt();
            Arr::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-bound..bound))
        }
        Init::Zeros => Arr::zeros(IxDyn(shape)),
        Init::Constant(c) => Arr::from_elem(IxDyn(shape), c),
    }
}

/// AdamW with decoupled weight decay.
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
        }
    }

    /// One update using the gradients accumulated in `store`.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for e in &mut store.entries {
            if !e.trainable {
                continue;
            }
            ndarray::Zip::from(&mut e.m)
                .and(&e.grad)
                .for_each(|m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            ndarray::Zip::from(&mut e.v)
                .and(&e.grad)
                .for_each(|v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            ndarray::Zip::from(&mut e.value)
                .and(&e.m)
                .and(&e.v)
                .for_each(|p, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *p -= lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * *p);
                });
        }
    }
}

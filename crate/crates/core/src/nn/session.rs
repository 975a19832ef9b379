//! One forward/backward pass worth of state: the tape, the parameter->node
//! binding, the train/eval flag, and the dropout RNG.

use std::collections::HashMap;

use ndarray::IxDyn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::autodiff::{Arr, Gradients, Tape, Var};

pub struct Session {
    pub tape: Tape,
    bound: HashMap<String, Var>,
    pub train: bool,
    rng: ChaCha8Rng,
    buffer_updates: Vec<(String, Arr)>,
}

impl Session {
    pub fn new(train: bool, dropout_seed: u64) -> Self {
        Self {
            tape: Tape::new(),
            bound: HashMap::new(),
            train,
            rng: ChaCha8Rng::seed_from_u64(dropout_seed),
            buffer_updates: Vec::new(),
        }
    }

    /// Bind a named parameter onto the tape, reusing the node when the same
    /// parameter participates several times (weight sharing across a batch).
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Var {
        if let Some(v) = self.bound.get(name) {
            return *v;
        }
        let v = self.tape.leaf(store.get(name).clone());
        self.bound.insert(name.to_string(), v);
        v
    }

    /// Bind a named buffer as an untracked constant.
    pub fn buffer(&mut self, store: &ParamStore, name: &str) -> Var {
        self.tape.constant(store.get(name).clone())
    }

    pub fn constant(&mut self, a: Arr) -> Var {
        self.tape.constant(a)
    }

    /// Inverted dropout; identity in eval mode or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        if !self.train || p == 0.0 {
            return x;
        }
        let shape = self.tape.value(x).shape().to_vec();
        let keep = 1.0 - p;
        let mask = Arr::from_shape_fn(IxDyn(&shape), |_| {
            if self.rng.gen_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let m = self.tape.constant(mask);
        self.tape.mul(x, m)
    }

    /// Queue a buffer value to be written back after the step (e.g. batch-norm
    /// running statistics, which cannot be mutated mid-forward).
    pub fn push_buffer_update(&mut self, name: &str, value: Arr) {
        self.buffer_updates.push((name.to_string(), value));
    }

    pub fn take_buffer_updates(&mut self) -> Vec<(String, Arr)> {
        std::mem::take(&mut self.buffer_updates)
    }

    /// Extract per-parameter gradients after a backward sweep.
    pub fn param_grads(&self, grads: &mut Gradients) -> Vec<(String, Arr)> {
        let mut out = Vec::with_capacity(self.bound.len());
        for (name, var) in &self.bound {
            if let Some(g) = grads.take(*var) {
                out.push((name.clone(), g));
            }
        }
        out
    }

    pub fn bound_var(&self, name: &str) -> Option<Var> {
        self.bound.get(name).copied()
    }
}

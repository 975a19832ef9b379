//! Minimal reverse-mode automatic differentiation over `ndarray` tensors.
//!
//! A [`Tape`] records one forward pass as a flat list of nodes; [`Tape::backward`]
//! sweeps it in reverse and accumulates cotangents. Values are `f64` throughout
//! so gradient checks against central finite differences stay tight.

mod conv;
mod ops;
mod spectral;

pub use conv::{ConvSpec, DeconvSpec};

use std::rc::Rc;

use ndarray::ArrayD;

/// Dynamic-rank tensor used throughout the tape.
pub type Arr = ArrayD<f64>;

type BackwardFn = Box<dyn Fn(&Arr) -> Vec<Arr>>;

struct Node {
    value: Rc<Arr>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    tracked: bool,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tracked input: gradients will be available after `backward`.
    pub fn leaf(&mut self, value: Arr) -> Var {
        self.nodes.push(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            tracked: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Untracked input: treated as a constant, no gradient flows into it.
    pub fn constant(&mut self, value: Arr) -> Var {
        self.nodes.push(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            tracked: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Arr {
        &self.nodes[v.0].value
    }

    /// Scalar payload of a 0-d (or single-element) node.
    pub fn scalar(&self, v: Var) -> f64 {
        *self.nodes[v.0].value.iter().next().expect("non-empty value")
    }

    pub(crate) fn rc_value(&self, v: Var) -> Rc<Arr> {
        Rc::clone(&self.nodes[v.0].value)
    }

    pub(crate) fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub(crate) fn push(
        &mut self,
        value: Arr,
        parents: Vec<Var>,
        backward: BackwardFn,
    ) -> Var {
        let tracked = parents.iter().any(|p| self.nodes[p.0].tracked);
        self.nodes.push(Node {
            value: Rc::new(value),
            parents: parents.into_iter().map(|p| p.0).collect(),
            backward: if tracked { Some(backward) } else { None },
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reverse sweep from `root`, seeding its cotangent with ones.
    /// Gradients of interior nodes are dropped as soon as they are consumed;
    /// leaves keep theirs for retrieval.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Arr>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Arr::ones(self.nodes[root.0].value.raw_dim()));
        for i in (0..=root.0).rev() {
            let Some(back) = self.nodes[i].backward.as_ref() else {
                continue; // leaf or constant: keep any accumulated gradient
            };
            let Some(g) = grads[i].take() else {
                continue; // not on a path from the root
            };
            let parent_grads = back(&g);
            debug_assert_eq!(parent_grads.len(), self.nodes[i].parents.len());
            for (p, pg) in self.nodes[i].parents.iter().zip(parent_grads) {
                if !self.nodes[*p].tracked {
                    continue;
                }
                debug_assert_eq!(
                    pg.raw_dim(),
                    self.nodes[*p].value.raw_dim(),
                    "gradient shape mismatch for node {p}"
                );
                match grads[*p].as_mut() {
                    Some(acc) => *acc += &pg,
                    None => grads[*p] = Some(pg),
                }
            }
        }
        Gradients { grads }
    }
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Arr>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Arr> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Arr> {
        self.grads[v.0].take()
    }
}

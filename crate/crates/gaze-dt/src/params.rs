//! Named parameter tensors shared by the encoder and the transformer.

use crate::error::{GazeError, Result};
use crate::tape::{Tape, Var};
use indexmap::IndexMap;
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Ordered name → tensor map. Iteration order is insertion order, which
/// keeps optimizer updates and checkpoints deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    entries: IndexMap<String, ArrayD<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: ArrayD<f64>) {
        let name = name.into();
        assert!(
            self.entries.insert(name.clone(), value).is_none(),
            "duplicate parameter {name}"
        );
    }

    pub fn get(&self, name: &str) -> Result<&ArrayD<f64>> {
        self.entries
            .get(name)
            .ok_or_else(|| GazeError::Parameter(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ArrayD<f64>> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ArrayD<f64>)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut ArrayD<f64>)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .values()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Gaussian-initialized tensor.
    pub fn init_normal(&mut self, name: &str, shape: &[usize], std: f64, rng: &mut impl Rng) {
        let dist = Normal::new(0.0, std).unwrap();
        let v = ArrayD::from_shape_fn(IxDyn(shape), |_| dist.sample(rng));
        self.insert(name, v);
    }

    pub fn init_const(&mut self, name: &str, shape: &[usize], value: f64) {
        self.insert(name, ArrayD::from_elem(IxDyn(shape), value));
    }
}

/// Leaf every parameter onto a fresh tape; returns name → Var.
pub struct ParamVars {
    map: IndexMap<String, Var>,
}

impl ParamVars {
    pub fn leaf_all(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut map = IndexMap::new();
        for (name, value) in params.iter() {
            map.insert(name.clone(), tape.leaf(value.clone()));
        }
        ParamVars { map }
    }

    pub fn var(&self, name: &str) -> Var {
        *self
            .map
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter var {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.map.iter()
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a parameter is initialized by [`ParamStore::init`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Weight matrix drawn from the configured [`InitScheme`].
    Weight,
    Zeros,
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// uniform(±√(6 / (fan_in + fan_out))) with fan_in = cols, fan_out = rows
    #[default]
    GlorotUniform,
    /// uniform(±scale)
    Uniform(f64),
}

#[derive(Clone, Debug)]
pub struct Param {
    name: String,
    value: Matrix,
    init: Init,
    trainable: bool,
    frozen_rows: Vec<usize>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn frozen_rows(&self) -> &[usize] {
        &self.frozen_rows
    }

    /// Scalars an optimizer step is allowed to change.
    pub fn updatable_scalars(&self) -> usize {
        if !self.trainable {
            return 0;
        }
        (self.value.rows() - self.frozen_rows.len()) * self.value.cols()
    }

    fn is_frozen_row(&self, r: usize) -> bool {
        self.frozen_rows.contains(&r)
    }
}

/// Named parameters. One entry per logical parameter, so weights shared
/// across time steps live in exactly one matrix.
///
/// Every mutable access bumps a version counter that forward caches record,
/// which lets backward passes detect stale caches.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    version: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, init: Init) -> ParamId {
        let name = name.into();
        debug_assert!(self.id(&name).is_none(), "duplicate parameter {name}");
        self.params.push(Param {
            name,
            value: Matrix::zeros(rows, cols),
            init,
            trainable: true,
            frozen_rows: Vec::new(),
        });
        self.version += 1;
        ParamId(self.params.len() - 1)
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Pin `row` of `id` at zero: zeroed on init, never updated.
    pub fn freeze_row(&mut self, id: ParamId, row: usize) {
        let p = &mut self.params[id.0];
        if !p.frozen_rows.contains(&row) {
            p.frozen_rows.push(row);
        }
        p.value.row_mut(row).fill(0.0);
        self.version += 1;
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        self.version += 1;
        &mut self.params[id.0].value
    }

    /// Replace a parameter value, keeping frozen rows at zero.
    pub fn set(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::Shape {
                op: "ParamStore::set",
                left: p.value.shape(),
                right: value.shape(),
            });
        }
        p.value = value;
        for &r in &p.frozen_rows {
            p.value.row_mut(r).fill(0.0);
        }
        self.version += 1;
        Ok(())
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn total_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn updatable_scalars(&self) -> usize {
        self.params.iter().map(Param::updatable_scalars).sum()
    }

    /// Initialize every parameter from its [`Init`] rule. Deterministic in `seed`;
    /// parameters are drawn in insertion order.
    pub fn init(&mut self, scheme: InitScheme, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            let (rows, cols) = p.value.shape();
            match p.init {
                Init::Weight => {
                    let bound = match scheme {
                        InitScheme::GlorotUniform => (6.0 / (rows + cols) as f64).sqrt(),
                        InitScheme::Uniform(scale) => scale,
                    };
                    for v in p.value.as_mut_slice() {
                        *v = rng.gen_range(-bound..=bound);
                    }
                }
                Init::Zeros => p.value.fill(0.0),
                Init::Constant(c) => p.value.fill(c),
            }
            for &r in &p.frozen_rows {
                p.value.row_mut(r).fill(0.0);
            }
        }
        self.version += 1;
    }

    /// Apply `f(param, value, gradient)` to every trainable, non-frozen scalar.
    pub(crate) fn update_with(
        &mut self,
        grads: &Gradients,
        mut f: impl FnMut(usize, usize, &mut f64, f64),
    ) {
        for (pi, p) in self.params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let Some(g) = &grads.grads[pi] else { continue };
            let cols = p.value.cols();
            for r in 0..p.value.rows() {
                if p.is_frozen_row(r) {
                    continue;
                }
                let vals = p.value.row_mut(r);
                for (c, v) in vals.iter_mut().enumerate() {
                    f(pi, r * cols + c, v, g.get(r, c));
                }
            }
        }
        self.version += 1;
    }
}

/// Gradient accumulators aligned with a [`ParamStore`]. Frozen (non-trainable)
/// parameters get no accumulator at all, and frozen rows never accumulate.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    frozen_rows: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn zeros_for(store: &ParamStore) -> Self {
        Self {
            grads: store
                .params
                .iter()
                .map(|p| {
                    p.trainable
                        .then(|| Matrix::zeros(p.value.rows(), p.value.cols()))
                })
                .collect(),
            frozen_rows: store.params.iter().map(|p| p.frozen_rows.clone()).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut Matrix> {
        self.grads[id.0].as_mut()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// `grad[id] += a bᵀ`.
    pub fn add_outer(&mut self, id: ParamId, a: &[f64], b: &[f64]) -> Result<()> {
        match self.grads[id.0].as_mut() {
            Some(g) => g.add_outer(a, b, 1.0),
            None => Ok(()),
        }
    }

    /// Accumulate into a column-vector parameter.
    pub fn add_vec(&mut self, id: ParamId, v: &[f64]) -> Result<()> {
        match self.grads[id.0].as_mut() {
            Some(g) => {
                if g.len() != v.len() {
                    return Err(Error::Shape {
                        op: "Gradients::add_vec",
                        left: g.shape(),
                        right: (v.len(), 1),
                    });
                }
                crate::math::add_into(v, g.as_mut_slice());
                Ok(())
            }
            None => Ok(()),
        }
    }

    /// Accumulate into one row; frozen rows are skipped.
    pub fn add_row(&mut self, id: ParamId, row: usize, v: &[f64]) -> Result<()> {
        if self.frozen_rows[id.0].contains(&row) {
            return Ok(());
        }
        match self.grads[id.0].as_mut() {
            Some(g) => {
                if g.cols() != v.len() || row >= g.rows() {
                    return Err(Error::Shape {
                        op: "Gradients::add_row",
                        left: g.shape(),
                        right: (row, v.len()),
                    });
                }
                crate::math::add_into(v, g.row_mut(row));
                Ok(())
            }
            None => Ok(()),
        }
    }

    pub fn add(&mut self, other: &Gradients) -> Result<()> {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                a.add_assign(b)?;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.scale_assign(k);
        }
    }

    pub fn zero(&mut self) {
        for g in self.grads.iter_mut().flatten() {
            g.fill(0.0);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(|g| crate::math::dot(g.as_slice(), g.as_slice()))
            .sum::<f64>()
            .sqrt()
    }

    /// Scale gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (usize, Option<&Matrix>)> {
        self.grads.iter().enumerate().map(|(i, g)| (i, g.as_ref()))
    }
}

/// Models exposing their parameters to the optimizer and gradient checker.
pub trait HasParams {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
}

//! Convolutional text classifier: parallel convolution branches of different
//! region sizes over the document's word-vector matrix, k-max pooling, and a
//! softmax (or single sigmoid) head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Activation, Matrix};
use crate::text::{EmbeddingTable, EncodedDoc, PAD};
use crate::train::{Checkpoint, Gradients, HasParams, Init, InitScheme, ParamId, ParamStore};

pub const CHECKPOINT_KIND: &str = "cnn";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// `V`; the embedding table has `V + 1` rows.
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Encoded document length `s`.
    pub seq_len: usize,
    pub regions: Vec<usize>,
    /// Filters per region size.
    pub filters: usize,
    pub k: usize,
    pub stride: usize,
    pub activation: Activation,
    /// Output neurons; 1 selects a sigmoid head for binary labels.
    pub classes: usize,
    /// Literal `c = f(o) + b` instead of `c = f(o + b)`.
    pub bias_after_activation: bool,
    /// Static embeddings are never updated.
    pub static_embeddings: bool,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            embed_dim: 300,
            seq_len: 100,
            regions: vec![2, 3, 4],
            filters: 100,
            k: 1,
            stride: 1,
            activation: Activation::Relu,
            classes: 1,
            bias_after_activation: false,
            static_embeddings: false,
        }
    }
}

impl CnnConfig {
    pub fn feature_map_len(&self, h: usize) -> usize {
        feature_map_len(self.seq_len, h, self.stride)
    }

    pub fn pooled_len(&self) -> usize {
        self.k * self.filters * self.regions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.filters == 0 || self.stride == 0 {
            return Err(Error::config("vocab size, embedding dim, filters and stride must be positive"));
        }
        if self.regions.is_empty() || self.regions.contains(&0) {
            return Err(Error::config("need at least one region size, all ≥ 1"));
        }
        if self.classes == 0 {
            return Err(Error::config("need at least one output neuron"));
        }
        for &h in &self.regions {
            if h > self.seq_len {
                return Err(Error::config(format!(
                    "region size {h} exceeds document length {}",
                    self.seq_len
                )));
            }
            if self.k == 0 || self.k > self.feature_map_len(h) {
                return Err(Error::config(format!(
                    "k = {} must be in 1..={} for region size {h}",
                    self.k,
                    self.feature_map_len(h)
                )));
            }
        }
        Ok(())
    }
}

/// `⌊(s − h) / stride⌋ + 1` receptive fields.
pub fn feature_map_len(s: usize, h: usize, stride: usize) -> usize {
    (s - h) / stride + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub embedding: usize,
    pub conv: usize,
    pub head: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.embedding + self.conv + self.head
    }
}

/// Trainable parameter count: `(V+1)·d` for non-static embeddings (zero when
/// static), `Σ h·d·n_f + n_f` for the convolutions, `pooled·out + out` for the head.
pub fn param_count(config: &CnnConfig) -> ParamCount {
    let d = config.embed_dim;
    ParamCount {
        embedding: if config.static_embeddings {
            0
        } else {
            (config.vocab_size + 1) * d
        },
        conv: config
            .regions
            .iter()
            .map(|&h| h * d * config.filters + config.filters)
            .sum(),
        head: config.pooled_len() * config.classes + config.classes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvBranch {
    pub h: usize,
    pub filters: usize,
    /// `n_f × (h·d)`, one flattened `h × d` filter per row.
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Feature maps of one branch.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvOutput {
    /// `f(o)`, or `f(o + b)` when the bias sits inside the nonlinearity.
    pub activated: Matrix,
    /// The feature maps `c`, `n_f × L`.
    pub maps: Matrix,
}

/// Slide `weight` over `input` with the given stride.
///
/// Entry `(f, i)` is `f(⟨W_f, A[i·stride .. i·stride + h, :]⟩ + b_f)`, or
/// `f(⟨W_f, ·⟩) + b_f` with `bias_after_activation`.
pub fn conv_forward(
    input: &Matrix,
    weight: &Matrix,
    bias: &[f64],
    h: usize,
    stride: usize,
    activation: Activation,
    bias_after_activation: bool,
) -> Result<ConvOutput> {
    let (s, d) = input.shape();
    if s < h {
        return Err(Error::contract(format!(
            "branch with region size {h}: document has only {s} rows"
        )));
    }
    if weight.cols() != h * d || weight.rows() != bias.len() || stride == 0 {
        return Err(Error::Shape {
            op: "conv_forward",
            left: weight.shape(),
            right: (bias.len(), h * d),
        });
    }
    let n_f = weight.rows();
    let len = feature_map_len(s, h, stride);
    let mut activated = Matrix::zeros(n_f, len);
    let mut maps = Matrix::zeros(n_f, len);
    for i in 0..len {
        let window = input.row_block(i * stride, h);
        for f in 0..n_f {
            let o = math::dot(weight.row(f), window);
            let (a, c) = if bias_after_activation {
                let a = activation.apply(o);
                (a, a + bias[f])
            } else {
                let a = activation.apply(o + bias[f]);
                (a, a)
            };
            activated.set(f, i, a);
            maps.set(f, i, c);
        }
    }
    Ok(ConvOutput { activated, maps })
}

/// The `k` largest values of `values`, kept in their original order, with
/// their positions. Ties prefer earlier positions.
pub fn kmax(values: &[f64], k: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if k == 0 || k > values.len() {
        return Err(Error::contract(format!(
            "k-max pooling with k = {k} over a feature map of length {}",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    Ok((picked.iter().map(|&i| values[i]).collect(), picked))
}

/// k-max pool every row of every map; branches then filters are concatenated.
pub fn kmax_pool(maps: &[Matrix], k: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in maps {
        for f in 0..m.rows() {
            out.extend(kmax(m.row(f), k)?.0);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BranchCache {
    pub conv: ConvOutput,
    /// Selected positions per filter.
    pub selected: Vec<Vec<usize>>,
}

/// Everything the backward pass and the inspection tools need from a forward pass.
#[derive(Clone, Debug)]
pub struct CnnCache {
    version: u64,
    pub indices: Vec<usize>,
    pub original_length: usize,
    pub input: Matrix,
    pub branches: Vec<BranchCache>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    /// Class distribution; `[1 − σ(z), σ(z)]` for a sigmoid head.
    pub probs: Vec<f64>,
}

impl CnnCache {
    pub fn predicted(&self) -> usize {
        math::argmax(&self.probs)
    }

    pub fn feature_maps(&self) -> Vec<&Matrix> {
        self.branches.iter().map(|b| &b.conv.maps).collect()
    }
}

#[derive(Clone, Debug)]
pub struct CnnModel {
    config: CnnConfig,
    store: ParamStore,
    embedding: ParamId,
    branches: Vec<ConvBranch>,
    head_w: ParamId,
    head_b: ParamId,
}

impl HasParams for CnnModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

impl CnnModel {
    /// Randomly initialized model; `table` replaces the embedding when given.
    pub fn new(config: CnnConfig, table: Option<&EmbeddingTable>, scheme: InitScheme, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.embed_dim;
        let mut store = ParamStore::new();
        let embedding = store.add("cnn.embedding", config.vocab_size + 1, d, Init::Weight);
        store.freeze_row(embedding, PAD);
        let branches = config
            .regions
            .iter()
            .map(|&h| ConvBranch {
                h,
                filters: config.filters,
                weight: store.add(format!("cnn.conv{h}.W"), config.filters, h * d, Init::Weight),
                bias: store.add(format!("cnn.conv{h}.b"), config.filters, 1, Init::Zeros),
            })
            .collect();
        let head_w = store.add("cnn.head.W", config.classes, config.pooled_len(), Init::Weight);
        let head_b = store.add("cnn.head.b", config.classes, 1, Init::Zeros);
        store.init(scheme, seed);
        if let Some(t) = table {
            store.set(embedding, t.matrix.clone())?;
        }
        store.set_trainable(embedding, !config.static_embeddings);
        Ok(Self {
            config,
            store,
            embedding,
            branches,
            head_w,
            head_b,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn branches(&self) -> &[ConvBranch] {
        &self.branches
    }

    pub fn embedding(&self) -> ParamId {
        self.embedding
    }

    pub fn head(&self) -> (ParamId, ParamId) {
        (self.head_w, self.head_b)
    }

    pub fn embedding_table(&self) -> &Matrix {
        self.store.get(self.embedding)
    }

    pub fn param_count(&self) -> ParamCount {
        param_count(&self.config)
    }

    fn check_doc(&self, doc: &EncodedDoc) -> Result<()> {
        if doc.indices.len() != self.config.seq_len {
            return Err(Error::contract(format!(
                "document has {} positions, model expects s = {}",
                doc.indices.len(),
                self.config.seq_len
            )));
        }
        Ok(())
    }

    /// Embedding lookup, convolutions, pooling and head.
    pub fn forward(&self, doc: &EncodedDoc) -> Result<CnnCache> {
        self.check_doc(doc)?;
        let input = crate::text::lookup_rows(&doc.indices, self.store.get(self.embedding))?;
        self.forward_input(&doc.indices, doc.original_length, input)
    }

    /// Forward pass from an explicit document matrix (used for input gradients).
    pub fn forward_input(&self, indices: &[usize], original_length: usize, input: Matrix) -> Result<CnnCache> {
        let c = &self.config;
        let mut branches = Vec::with_capacity(self.branches.len());
        let mut pooled = Vec::with_capacity(c.pooled_len());
        for br in &self.branches {
            let conv = conv_forward(
                &input,
                self.store.get(br.weight),
                self.store.get(br.bias).as_slice(),
                br.h,
                c.stride,
                c.activation,
                c.bias_after_activation,
            )?;
            let mut selected = Vec::with_capacity(br.filters);
            for f in 0..br.filters {
                let (vals, pos) = kmax(conv.maps.row(f), c.k)?;
                pooled.extend(vals);
                selected.push(pos);
            }
            branches.push(BranchCache { conv, selected });
        }
        let mut logits = self.store.get(self.head_b).as_slice().to_vec();
        self.store.get(self.head_w).matvec_acc(&pooled, &mut logits)?;
        let probs = if c.classes == 1 {
            let p = math::sigmoid(logits[0]);
            vec![1.0 - p, p]
        } else {
            math::softmax(&logits)
        };
        Ok(CnnCache {
            version: self.store.version(),
            indices: indices.to_vec(),
            original_length,
            input,
            branches,
            pooled,
            logits,
            probs,
        })
    }

    /// Backpropagate `d_logits` through the cached forward pass.
    ///
    /// Parameter gradients go into `grads` when given (the padding row and
    /// static embeddings receive none). Returns the gradient with respect to
    /// the document matrix.
    pub fn backward(&self, cache: &CnnCache, d_logits: &[f64], mut grads: Option<&mut Gradients>) -> Result<Matrix> {
        if cache.version != self.store.version() {
            return Err(Error::StaleCache);
        }
        if d_logits.len() != self.config.classes {
            return Err(Error::Shape {
                op: "CnnModel::backward",
                left: (self.config.classes, 1),
                right: (d_logits.len(), 1),
            });
        }
        let c = &self.config;
        if let Some(g) = grads.as_deref_mut() {
            g.add_outer(self.head_w, d_logits, &cache.pooled)?;
            g.add_vec(self.head_b, d_logits)?;
        }
        let d_pooled = self.store.get(self.head_w).matvec_t(d_logits)?;

        let (s, d) = cache.input.shape();
        let mut d_input = Matrix::zeros(s, d);
        let mut offset = 0;
        for (br, bc) in self.branches.iter().zip(&cache.branches) {
            let w = self.store.get(br.weight);
            let mut d_w = Matrix::zeros(br.filters, br.h * d);
            let mut d_b = vec![0.0; br.filters];
            for f in 0..br.filters {
                for (j, &pos) in bc.selected[f].iter().enumerate() {
                    let d_c = d_pooled[offset + f * c.k + j];
                    if d_c == 0.0 {
                        continue;
                    }
                    let a = bc.conv.activated.get(f, pos);
                    let d_o = d_c * c.activation.derivative_from_output(a);
                    // bias outside f: ∂c/∂b = 1; inside: ∂c/∂b = f'(o + b)
                    d_b[f] += if c.bias_after_activation { d_c } else { d_o };
                    if d_o == 0.0 {
                        continue;
                    }
                    let start = pos * c.stride;
                    math::axpy(d_o, cache.input.row_block(start, br.h), d_w.row_mut(f));
                    let dst = &mut d_input.as_mut_slice()[start * d..(start + br.h) * d];
                    math::axpy(d_o, w.row(f), dst);
                }
            }
            offset += br.filters * c.k;
            if let Some(g) = grads.as_deref_mut() {
                if let Some(gw) = g.get_mut(br.weight) {
                    gw.add_assign(&d_w)?;
                }
                g.add_vec(br.bias, &d_b)?;
            }
        }
        if let Some(g) = grads {
            for (t, &idx) in cache.indices.iter().enumerate() {
                g.add_row(self.embedding, idx, d_input.row(t))?;
            }
        }
        Ok(d_input)
    }

    /// Loss of one labeled document and `∂loss/∂logits`.
    pub fn loss_from_cache(&self, cache: &CnnCache, label: usize) -> Result<(f64, Vec<f64>)> {
        if self.config.classes == 1 {
            if label > 1 {
                return Err(Error::contract(format!("binary head got label {label}")));
            }
            let z = cache.logits[0];
            // −log σ(z) = softplus(−z), −log(1 − σ(z)) = softplus(z)
            let loss = if label == 1 { softplus(-z) } else { softplus(z) };
            Ok((loss, vec![math::sigmoid(z) - label as f64]))
        } else {
            if label >= self.config.classes {
                return Err(Error::contract(format!("label {label} outside {} classes", self.config.classes)));
            }
            let logp = math::log_softmax(&cache.logits);
            let mut d = cache.probs.clone();
            d[label] -= 1.0;
            Ok((-logp[label], d))
        }
    }

    pub fn loss(&self, doc: &EncodedDoc) -> Result<f64> {
        let label = doc.label.ok_or_else(|| Error::contract("training document has no label"))?;
        let cache = self.forward(doc)?;
        Ok(self.loss_from_cache(&cache, label)?.0)
    }

    pub fn loss_and_grad(&self, doc: &EncodedDoc, grads: &mut Gradients) -> Result<f64> {
        let label = doc.label.ok_or_else(|| Error::contract("training document has no label"))?;
        let cache = self.forward(doc)?;
        let (loss, d_logits) = self.loss_from_cache(&cache, label)?;
        self.backward(&cache, &d_logits, Some(grads))?;
        Ok(loss)
    }

    pub fn predict(&self, doc: &EncodedDoc) -> Result<Vec<f64>> {
        Ok(self.forward(doc)?.probs)
    }

    pub fn to_checkpoint(&self, vocab_hash: Option<String>) -> Checkpoint {
        Checkpoint::from_store(
            CHECKPOINT_KIND,
            serde_json::to_value(&self.config).expect("config serializes"),
            vocab_hash,
            &self.store,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != CHECKPOINT_KIND {
            return Err(Error::Incompatible(format!("expected a cnn checkpoint, found `{}`", ckpt.kind)));
        }
        let config: CnnConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Error::Incompatible(format!("bad cnn config: {e}")))?;
        let mut model = Self::new(config, None, InitScheme::GlorotUniform, 0)?;
        ckpt.apply_to(&mut model.store)?;
        Ok(model)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::gradcheck::{grad_check, DEFAULT_EPS};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig1_config() -> CnnConfig {
        CnnConfig {
            vocab_size: 20,
            embed_dim: 5,
            seq_len: 7,
            regions: vec![2, 3, 4],
            filters: 2,
            k: 1,
            ..CnnConfig::default()
        }
    }

    fn random_doc(rng: &mut ChaCha8Rng, v: usize, s: usize, len: usize, label: usize) -> EncodedDoc {
        let mut indices: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=v)).collect();
        indices.resize(s, PAD);
        EncodedDoc {
            indices,
            label: Some(label),
            original_length: len,
        }
    }

    #[test]
    fn fig1_feature_map_lengths() {
        let m = CnnModel::new(fig1_config(), None, InitScheme::GlorotUniform, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cache = m.forward(&random_doc(&mut rng, 20, 7, 7, 1)).unwrap();
        let lens: Vec<usize> = cache.branches.iter().map(|b| b.conv.maps.cols()).collect();
        assert_eq!(lens, vec![6, 5, 4]);
        assert_eq!(cache.pooled.len(), 6);
        assert_abs_diff_eq!(cache.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conv_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Matrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let w = Matrix::from_fn(2, 6, |_, _| rng.gen_range(-1.0..1.0));
        let b = [0.1, -0.3];
        let out = conv_forward(&a, &w, &b, 2, 1, Activation::Tanh, false).unwrap();
        assert_eq!(out.maps.shape(), (2, 4));
        for f in 0..2 {
            for i in 0..4 {
                let mut o = 0.0;
                for r in 0..2 {
                    for c in 0..3 {
                        o += w.get(f, r * 3 + c) * a.get(i + r, c);
                    }
                }
                assert_abs_diff_eq!(out.maps.get(f, i), (o + b[f]).tanh(), epsilon = 1e-12);
            }
        }
        let zero = conv_forward(&a, &Matrix::zeros(2, 6), &[0.0, 0.0], 2, 1, Activation::Relu, false).unwrap();
        assert!(zero.maps.as_slice().iter().all(|&v| v == 0.0));
        assert!(conv_forward(&a, &Matrix::zeros(2, 18), &[0.0, 0.0], 6, 1, Activation::Relu, false).is_err());
    }

    #[test]
    fn stride_changes_map_length() {
        let a = Matrix::filled(9, 2, 0.5);
        let w = Matrix::filled(1, 6, 1.0);
        let out = conv_forward(&a, &w, &[0.0], 3, 2, Activation::Relu, false).unwrap();
        assert_eq!(out.maps.cols(), (9 - 3) / 2 + 1);
    }

    #[test]
    fn bias_placement_variants() {
        let a = Matrix::filled(3, 1, -1.0);
        let w = Matrix::filled(1, 1, 1.0);
        let inside = conv_forward(&a, &w, &[0.5], 1, 1, Activation::Relu, false).unwrap();
        let outside = conv_forward(&a, &w, &[0.5], 1, 1, Activation::Relu, true).unwrap();
        assert_eq!(inside.maps.get(0, 0), 0.0);
        assert_eq!(outside.maps.get(0, 0), 0.5);
    }

    #[test]
    fn kmax_cases() {
        assert_eq!(kmax(&[0.1, 0.9, 0.3], 1).unwrap().0, vec![0.9]);
        assert_eq!(kmax(&[0.5, 0.1, 0.9, 0.3], 2).unwrap(), (vec![0.5, 0.9], vec![0, 2]));
        assert!(kmax(&[1.0], 2).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let v: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
            let (got, _) = kmax(&v, 2).unwrap();
            let mut sorted = v.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let mut g = got.clone();
            g.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(g, sorted[..2].to_vec());
            // original order kept
            let p0 = v.iter().position(|&x| x == got[0]).unwrap();
            let p1 = v.iter().position(|&x| x == got[1]).unwrap();
            assert!(p0 < p1);
        }
    }

    #[test]
    fn param_count_examples() {
        let c = CnnConfig {
            vocab_size: 10,
            embed_dim: 5,
            seq_len: 7,
            regions: vec![3],
            filters: 2,
            k: 1,
            ..CnnConfig::default()
        };
        let n = param_count(&c);
        assert_eq!(n.embedding, 55);
        assert_eq!(n.conv, 32);
        assert_eq!(n.head, 3);
        let s = CnnConfig {
            static_embeddings: true,
            ..c
        };
        assert_eq!(param_count(&s).embedding, 0);
    }

    #[test]
    fn sigmoid_head_equals_frozen_logit_softmax() {
        let m = CnnModel::new(fig1_config(), None, InitScheme::GlorotUniform, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let cache = m.forward(&random_doc(&mut rng, 20, 7, 5, 0)).unwrap();
            let two = math::softmax(&[cache.logits[0], 0.0]);
            assert_abs_diff_eq!(cache.probs[1], two[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let m = CnnModel::new(fig1_config(), None, InitScheme::GlorotUniform, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cache = m.forward(&random_doc(&mut rng, 20, 7, 7, 0)).unwrap();
        let mut g = Gradients::zeros_for(m.params());
        m.backward(&cache, &[0.0], Some(&mut g)).unwrap();
        assert_eq!(g.global_norm(), 0.0);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = CnnModel::new(fig1_config(), None, InitScheme::GlorotUniform, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cache = m.forward(&random_doc(&mut rng, 20, 7, 7, 0)).unwrap();
        let (w, _) = m.head();
        m.params_mut().get_mut(w).set(0, 0, 1.0);
        assert!(matches!(m.backward(&cache, &[1.0], None), Err(Error::StaleCache)));
    }

    #[test]
    fn static_mode_has_no_embedding_gradient() {
        let c = CnnConfig {
            static_embeddings: true,
            ..fig1_config()
        };
        let m = CnnModel::new(c, None, InitScheme::GlorotUniform, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = Gradients::zeros_for(m.params());
        m.loss_and_grad(&random_doc(&mut rng, 20, 7, 6, 1), &mut g).unwrap();
        assert!(g.get(m.embedding()).is_none());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (activation, classes, bias_after) in [
            (Activation::Relu, 1, false),
            (Activation::Tanh, 3, false),
            (Activation::Tanh, 1, true),
        ] {
            let c = CnnConfig {
                activation,
                classes,
                bias_after_activation: bias_after,
                k: 2,
                ..fig1_config()
            };
            let mut m = CnnModel::new(c, None, InitScheme::GlorotUniform, 6).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let doc = random_doc(&mut rng, 20, 7, 6, 1);
            let report = grad_check(&mut m, DEFAULT_EPS, |m, g| m.loss_and_grad(&doc, g)).unwrap();
            assert!(report.passes(1e-4), "{activation:?}/{classes}: {report}");
        }
    }

    #[test]
    fn translation_robustness_with_one_max() {
        let c = CnnConfig {
            vocab_size: 20,
            embed_dim: 4,
            seq_len: 12,
            regions: vec![3],
            filters: 4,
            k: 1,
            ..CnnConfig::default()
        };
        let m = CnnModel::new(c, None, InitScheme::GlorotUniform, 8).unwrap();
        let pattern = [5, 9, 2];
        let pooled_at = |start: usize| {
            let mut indices = vec![PAD; 12];
            indices[start..start + 3].copy_from_slice(&pattern);
            let doc = EncodedDoc {
                indices,
                label: None,
                original_length: 12,
            };
            m.forward(&doc).unwrap().pooled
        };
        // every window overlapping the pattern must fit, so keep h − 1
        // padding positions on both sides
        let reference = pooled_at(2);
        for start in 3..=7 {
            assert_eq!(pooled_at(start), reference);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let m = CnnModel::new(fig1_config(), None, InitScheme::GlorotUniform, 9).unwrap();
        let ckpt = m.to_checkpoint(None);
        let text = ckpt.to_text();
        let back = CnnModel::from_checkpoint(&Checkpoint::parse(&text, std::path::Path::new("x")).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let doc = random_doc(&mut rng, 20, 7, 7, 0);
        assert_eq!(m.forward(&doc).unwrap().probs, back.forward(&doc).unwrap().probs);
        assert_eq!(ckpt.param_scalars(), m.param_count().total());
    }
}

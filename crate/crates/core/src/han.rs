//! Self-attention pooling and the hierarchical attention classifier.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::recurrent::{BiEncoder, CellKind, EncoderRun};
use crate::train::{Checkpoint, Gradients, HasParams, Init, InitScheme, ParamId, ParamStore};

pub const CHECKPOINT_KIND: &str = "han";

/// `u_t = tanh(W h_t + b)`, `α = softmax(u_tᵀ u)`, `s = Σ α_t h_t`.
#[derive(Clone, Copy, Debug)]
pub struct SelfAttention {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub u: ParamId,
}

#[derive(Clone, Debug)]
pub struct SelfAttendCache {
    pub hidden: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

impl SelfAttention {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, dim: usize, bias: bool) -> Self {
        Self {
            w: store.add(format!("{prefix}.W"), dim, input, Init::Weight),
            b: bias.then(|| store.add(format!("{prefix}.b"), dim, 1, Init::Zeros)),
            u: store.add(format!("{prefix}.u"), dim, 1, Init::Weight),
        }
    }

    /// Pool `annotations` into one vector; weights apply to the raw annotations.
    pub fn forward(&self, store: &ParamStore, annotations: &[Vec<f64>]) -> Result<(Vec<f64>, SelfAttendCache)> {
        if annotations.is_empty() {
            return Err(Error::contract("self-attention over an empty sequence"));
        }
        let w = store.get(self.w);
        let u = store.get(self.u).as_slice();
        let mut hidden = Vec::with_capacity(annotations.len());
        let mut scores = Vec::with_capacity(annotations.len());
        for h in annotations {
            let mut pre = match self.b {
                Some(b) => store.get(b).as_slice().to_vec(),
                None => vec![0.0; w.rows()],
            };
            w.matvec_acc(h, &mut pre)?;
            let ut: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
            scores.push(math::dot(&ut, u));
            hidden.push(ut);
        }
        let alpha = math::softmax(&scores);
        let mut s = vec![0.0; annotations[0].len()];
        for (a, h) in alpha.iter().zip(annotations) {
            math::axpy(*a, h, &mut s);
        }
        Ok((s, SelfAttendCache { hidden, alpha }))
    }

    /// Accumulate parameter gradients and return `∂/∂h_t`.
    pub fn backward(
        &self,
        store: &ParamStore,
        annotations: &[Vec<f64>],
        cache: &SelfAttendCache,
        ds: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<Vec<f64>>> {
        let d_alpha: Vec<f64> = annotations.iter().map(|h| math::dot(ds, h)).collect();
        let d_scores = math::softmax_backward(&cache.alpha, &d_alpha);
        let u = store.get(self.u).as_slice();
        let w = store.get(self.w);
        let mut du = vec![0.0; u.len()];
        let mut d_ann = Vec::with_capacity(annotations.len());
        for (t, h) in annotations.iter().enumerate() {
            let ut = &cache.hidden[t];
            math::axpy(d_scores[t], ut, &mut du);
            let d_pre: Vec<f64> = u.iter().zip(ut).map(|(uv, tv)| d_scores[t] * uv * (1.0 - tv * tv)).collect();
            grads.add_outer(self.w, &d_pre, h)?;
            if let Some(b) = self.b {
                grads.add_vec(b, &d_pre)?;
            }
            let mut dh: Vec<f64> = ds.iter().map(|d| cache.alpha[t] * d).collect();
            w.matvec_t_acc(&d_pre, &mut dh)?;
            d_ann.push(dh);
        }
        grads.add_vec(self.u, &du)?;
        Ok(d_ann)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HanConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub word_hidden: usize,
    pub sentence_hidden: usize,
    /// Attention width; defaults to the annotation width at each level.
    pub attention_dim: Option<usize>,
    pub classes: usize,
    pub attention_bias: bool,
    pub cell: CellKind,
    pub layers: usize,
}

impl Default for HanConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            embed_dim: 32,
            word_hidden: 25,
            sentence_hidden: 25,
            attention_dim: None,
            classes: 2,
            attention_bias: true,
            cell: CellKind::Gru,
            layers: 1,
        }
    }
}

impl HanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.word_hidden == 0 || self.sentence_hidden == 0 || self.layers == 0 {
            return Err(Error::config("vocabulary, widths and depth must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::config("a softmax head needs at least two classes"));
        }
        if self.attention_dim == Some(0) {
            return Err(Error::config("attention width must be positive"));
        }
        Ok(())
    }
}

/// Forward results with every alignment.
#[derive(Clone, Debug)]
pub struct HanOutput {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Word-level α for each kept sentence.
    pub word_alpha: Vec<Vec<f64>>,
    pub sentence_alpha: Vec<f64>,
    /// Original indices of the sentences that were encoded.
    pub kept: Vec<usize>,
}

impl HanOutput {
    pub fn predicted(&self) -> usize {
        math::argmax(&self.probs)
    }
}

/// One word's share of the document's attention.
#[derive(Clone, Debug, PartialEq)]
pub struct WordImportance {
    pub sentence: usize,
    pub position: usize,
    pub word_alpha: f64,
    pub sentence_alpha: f64,
    pub score: f64,
}

/// Word α scaled by its sentence's α; sums to 1 over the document.
pub fn reweighed_word_importance(out: &HanOutput) -> Vec<WordImportance> {
    let mut scores = Vec::new();
    for (k, alphas) in out.word_alpha.iter().enumerate() {
        let sa = out.sentence_alpha[k];
        for (position, wa) in alphas.iter().enumerate() {
            scores.push(WordImportance {
                sentence: out.kept[k],
                position,
                word_alpha: *wa,
                sentence_alpha: sa,
                score: wa * sa,
            });
        }
    }
    scores
}

/// CSV `sentence_idx,word_idx,token,word_alpha,sentence_alpha,product`.
pub fn write_attention_csv(
    mut w: impl Write,
    out: &HanOutput,
    token_text: impl Fn(usize, usize) -> String,
    header: bool,
) -> std::io::Result<()> {
    if header {
        writeln!(w, "sentence_idx,word_idx,token,word_alpha,sentence_alpha,product")?;
    }
    for r in reweighed_word_importance(out) {
        let tok = token_text(r.sentence, r.position).replace([',', '"', '\n'], " ");
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.sentence, r.position, tok, r.word_alpha, r.sentence_alpha, r.score
        )?;
    }
    Ok(())
}

struct SentenceCache {
    tokens: Vec<usize>,
    run: EncoderRun,
    attn: SelfAttendCache,
}

struct ForwardCache {
    sentences: Vec<SentenceCache>,
    sentence_vectors: Vec<Vec<f64>>,
    doc_run: EncoderRun,
    doc_attn: SelfAttendCache,
    doc_vector: Vec<f64>,
    output: HanOutput,
}

#[derive(Clone, Debug)]
pub struct HanModel {
    config: HanConfig,
    store: ParamStore,
    embedding: ParamId,
    word_encoder: BiEncoder,
    word_attention: SelfAttention,
    sentence_encoder: BiEncoder,
    sentence_attention: SelfAttention,
    head_w: ParamId,
    head_b: ParamId,
}

impl HasParams for HanModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

impl HanModel {
    pub fn new(config: HanConfig, scheme: InitScheme, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let embedding = store.add("han.embedding", config.vocab_size, config.embed_dim, Init::Weight);
        let word_encoder = BiEncoder::new(&mut store, "han.word", config.cell, config.embed_dim, config.word_hidden, config.layers, true);
        let wd = word_encoder.output_dim();
        let word_attention = SelfAttention::new(&mut store, "han.word_att", wd, config.attention_dim.unwrap_or(wd), config.attention_bias);
        let sentence_encoder = BiEncoder::new(&mut store, "han.sent", config.cell, wd, config.sentence_hidden, config.layers, true);
        let sd = sentence_encoder.output_dim();
        let sentence_attention =
            SelfAttention::new(&mut store, "han.sent_att", sd, config.attention_dim.unwrap_or(sd), config.attention_bias);
        let head_w = store.add("han.head.W", config.classes, sd, Init::Weight);
        let head_b = store.add("han.head.b", config.classes, 1, Init::Zeros);
        store.init(scheme, seed);
        Ok(Self {
            config,
            store,
            embedding,
            word_encoder,
            word_attention,
            sentence_encoder,
            sentence_attention,
            head_w,
            head_b,
        })
    }

    pub fn config(&self) -> &HanConfig {
        &self.config
    }

    pub fn word_attention(&self) -> SelfAttention {
        self.word_attention
    }

    pub fn sentence_attention(&self) -> SelfAttention {
        self.sentence_attention
    }

    fn embed(&self, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        let table = self.store.get(self.embedding);
        tokens
            .iter()
            .map(|&t| {
                if t >= table.rows() {
                    Err(Error::contract(format!("token {t} outside vocabulary of {}", table.rows())))
                } else {
                    Ok(table.row(t).to_vec())
                }
            })
            .collect()
    }

    fn run(&self, document: &[Vec<usize>]) -> Result<ForwardCache> {
        let mut sentences = Vec::new();
        let mut sentence_vectors = Vec::new();
        let mut kept = Vec::new();
        for (i, sentence) in document.iter().enumerate() {
            if sentence.is_empty() {
                log::warn!("skipping empty sentence {i}");
                continue;
            }
            let run = self.word_encoder.encode(&self.store, &self.embed(sentence)?)?;
            let (s, attn) = self.word_attention.forward(&self.store, &run.annotations)?;
            sentence_vectors.push(s);
            sentences.push(SentenceCache {
                tokens: sentence.clone(),
                run,
                attn,
            });
            kept.push(i);
        }
        if sentences.is_empty() {
            return Err(Error::contract("document has no non-empty sentence"));
        }
        let doc_run = self.sentence_encoder.encode(&self.store, &sentence_vectors)?;
        let (doc_vector, doc_attn) = self.sentence_attention.forward(&self.store, &doc_run.annotations)?;
        let mut logits = self.store.get(self.head_b).as_slice().to_vec();
        self.store.get(self.head_w).matvec_acc(&doc_vector, &mut logits)?;
        let log_probs = math::log_softmax(&logits);
        let output = HanOutput {
            probs: log_probs.iter().map(|v| v.exp()).collect(),
            log_probs,
            word_alpha: sentences.iter().map(|s| s.attn.alpha.clone()).collect(),
            sentence_alpha: doc_attn.alpha.clone(),
            kept,
        };
        Ok(ForwardCache {
            sentences,
            sentence_vectors,
            doc_run,
            doc_attn,
            doc_vector,
            output,
        })
    }

    /// Class distribution and attention traces for a sentence-segmented document.
    pub fn forward(&self, document: &[Vec<usize>]) -> Result<HanOutput> {
        Ok(self.run(document)?.output)
    }

    /// Pooled document vector fed to the classifier.
    pub fn document_vector(&self, document: &[Vec<usize>]) -> Result<Vec<f64>> {
        Ok(self.run(document)?.doc_vector)
    }

    /// Per-sentence vectors produced by word-level attention.
    pub fn sentence_vectors(&self, document: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.run(document)?.sentence_vectors)
    }

    pub fn predict(&self, document: &[Vec<usize>]) -> Result<usize> {
        Ok(self.forward(document)?.predicted())
    }

    pub fn loss(&self, document: &[Vec<usize>], label: usize) -> Result<f64> {
        let out = self.forward(document)?;
        self.check_label(label)?;
        Ok(-out.log_probs[label])
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.config.classes {
            return Err(Error::contract(format!("label {label} outside {} classes", self.config.classes)));
        }
        Ok(())
    }

    pub fn loss_and_grad(&self, document: &[Vec<usize>], label: usize, grads: &mut Gradients) -> Result<f64> {
        self.check_label(label)?;
        let cache = self.run(document)?;
        let mut d_logits = cache.output.probs.clone();
        d_logits[label] -= 1.0;
        grads.add_outer(self.head_w, &d_logits, &cache.doc_vector)?;
        grads.add_vec(self.head_b, &d_logits)?;
        let d_doc = self.store.get(self.head_w).matvec_t(&d_logits)?;
        let d_sent_ann =
            self.sentence_attention
                .backward(&self.store, &cache.doc_run.annotations, &cache.doc_attn, &d_doc, grads)?;
        let d_sent = self
            .sentence_encoder
            .backward_pass(&self.store, &cache.doc_run, &d_sent_ann, None, None, grads)?;
        for (s, ds) in cache.sentences.iter().zip(&d_sent) {
            let d_word_ann = self.word_attention.backward(&self.store, &s.run.annotations, &s.attn, ds, grads)?;
            let d_emb = self.word_encoder.backward_pass(&self.store, &s.run, &d_word_ann, None, None, grads)?;
            for (tok, d) in s.tokens.iter().zip(&d_emb) {
                grads.add_row(self.embedding, *tok, d)?;
            }
        }
        Ok(-cache.output.log_probs[label])
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
            return Err(Error::Incompatible(format!("expected a {CHECKPOINT_KIND} checkpoint, found `{}`", ckpt.kind)));
        }
        let config: HanConfig =
            serde_json::from_value(ckpt.config.clone()).map_err(|e| Error::Incompatible(format!("bad han config: {e}")))?;
        let mut model = Self::new(config, InitScheme::GlorotUniform, 0)?;
        ckpt.apply_to(&mut model.store)?;
        Ok(model)
    }
}

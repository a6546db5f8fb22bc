//! Attentional encoder-decoder: global and local attention, three score
//! functions, teacher-forced training, greedy and beam decoding.
//!
//! The decoder follows the "current state, then attend" ordering: `h_t` is
//! computed from the previous token only, then attention produces `c_t`, and
//! `h̃_t = tanh(W_c [c_t; h_t])` feeds `softmax(W_s h̃_t)`.
//!
//! In local mode the alignment weights are the windowed softmax multiplied by
//! the Gaussian factor, without renormalization, so they may sum to less than 1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, sigmoid};
use crate::recurrent::{BiEncoder, CellKind, EncoderRun, OutputHead, RecurrentStack, StackRun, StackState};
use crate::train::{Checkpoint, Gradients, HasParams, Init, InitScheme, ParamId, ParamStore};

pub const CHECKPOINT_KIND: &str = "seq2seq";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionMode {
    #[default]
    Global,
    LocalMonotonic,
    LocalPredictive,
}

impl std::str::FromStr for AttentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(AttentionMode::Global),
            "local-monotonic" | "local_monotonic" | "local-m" => Ok(AttentionMode::LocalMonotonic),
            "local-predictive" | "local_predictive" | "local-p" | "local" => Ok(AttentionMode::LocalPredictive),
            other => Err(Error::config(format!("unknown attention mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[default]
    Dot,
    General,
    Concat,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ScoreKind::Dot),
            "general" => Ok(ScoreKind::General),
            "concat" => Ok(ScoreKind::Concat),
            other => Err(Error::config(format!("unknown score function `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seq2SeqConfig {
    pub cell: CellKind,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embed_dim: usize,
    /// Hidden size of each encoder direction.
    pub hidden: usize,
    /// Defaults to the annotation width (`2·hidden` when bidirectional).
    pub decoder_hidden: Option<usize>,
    pub layers: usize,
    pub bidirectional: bool,
    pub attention: AttentionMode,
    pub score: ScoreKind,
    /// Half-width `D` of the local window.
    pub window: usize,
    /// Multiply local weights by the Gaussian factor.
    pub gaussian: bool,
    /// Width of the concat-score and position-predictor layers; defaults to the decoder width.
    pub attention_dim: Option<usize>,
    pub bos: usize,
    pub eos: usize,
    pub out_bias: bool,
    /// Beam score is `logprob / len^alpha`; 0 ranks by raw log-probability.
    pub length_penalty: f64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Self {
            cell: CellKind::Lstm,
            src_vocab: 0,
            tgt_vocab: 0,
            embed_dim: 32,
            hidden: 64,
            decoder_hidden: None,
            layers: 1,
            bidirectional: false,
            attention: AttentionMode::Global,
            score: ScoreKind::Dot,
            window: 10,
            gaussian: true,
            attention_dim: None,
            bos: 0,
            eos: 1,
            out_bias: false,
            length_penalty: 0.0,
        }
    }
}

impl Seq2SeqConfig {
    pub fn encoder_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    pub fn decoder_dim(&self) -> usize {
        self.decoder_hidden.unwrap_or_else(|| self.encoder_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.src_vocab == 0 || self.tgt_vocab == 0 || self.embed_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::config("vocabularies, embedding width, hidden size and depth must be positive"));
        }
        if self.decoder_dim() == 0 || self.attention_dim == Some(0) {
            return Err(Error::config("decoder and attention widths must be positive"));
        }
        if self.bos >= self.tgt_vocab || self.eos >= self.tgt_vocab {
            return Err(Error::config("bos/eos must be inside the target vocabulary"));
        }
        if self.score == ScoreKind::Dot && self.decoder_dim() != self.encoder_dim() {
            return Err(Error::config(format!(
                "dot score needs equal decoder and annotation widths, got {} and {}",
                self.decoder_dim(),
                self.encoder_dim()
            )));
        }
        if !(self.length_penalty >= 0.0) {
            return Err(Error::config("length penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Alignment of one decoding step.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStep {
    /// First source position (0-based) covered by `weights`.
    pub start: usize,
    pub weights: Vec<f64>,
    /// Aligned position `p_t` (1-based), local modes only.
    pub position: Option<f64>,
    softmax: Vec<f64>,
    gauss: Vec<f64>,
    predictor: Option<(Vec<f64>, f64)>,
}

impl AttentionStep {
    /// Weights expanded to all `source_len` positions.
    pub fn dense(&self, source_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; source_len];
        out[self.start..self.start + self.weights.len()].copy_from_slice(&self.weights);
        out
    }

    pub fn argmax(&self) -> usize {
        self.start + math::argmax(&self.weights)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttentionTrace {
    pub source_len: usize,
    pub steps: Vec<AttentionStep>,
}

impl AttentionTrace {
    /// `steps × source_len` weight matrix.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.dense(self.source_len)).collect()
    }

    /// Rows `step,source_position,weight` with 1-based indices.
    pub fn write_csv(&self, mut w: impl Write, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "step,source_position,weight")?;
        }
        for (t, row) in self.dense().iter().enumerate() {
            for (i, a) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", t + 1, i + 1, a)?;
            }
        }
        Ok(())
    }
}

/// Attention parameters and mechanics.
#[derive(Clone, Debug)]
pub struct Attention {
    pub mode: AttentionMode,
    pub score_kind: ScoreKind,
    pub window: usize,
    pub gaussian: bool,
    w_a: Option<ParamId>,
    v_a: Option<ParamId>,
    w_p: Option<ParamId>,
    v_p: Option<ParamId>,
}

impl Attention {
    fn new(store: &mut ParamStore, config: &Seq2SeqConfig) -> Self {
        let (enc, dec) = (config.encoder_dim(), config.decoder_dim());
        let a = config.attention_dim.unwrap_or(dec);
        let (w_a, v_a) = match config.score {
            ScoreKind::Dot => (None, None),
            ScoreKind::General => (Some(store.add("s2s.att.W_a", dec, enc, Init::Weight)), None),
            ScoreKind::Concat => (
                Some(store.add("s2s.att.W_a", a, dec + enc, Init::Weight)),
                Some(store.add("s2s.att.v_a", a, 1, Init::Weight)),
            ),
        };
        let (w_p, v_p) = if config.attention == AttentionMode::LocalPredictive {
            (
                Some(store.add("s2s.att.W_p", a, dec, Init::Weight)),
                Some(store.add("s2s.att.v_p", a, 1, Init::Weight)),
            )
        } else {
            (None, None)
        };
        Self {
            mode: config.attention,
            score_kind: config.score,
            window: config.window,
            gaussian: config.gaussian,
            w_a,
            v_a,
            w_p,
            v_p,
        }
    }

    /// `score(h_t, h̄_i)`.
    pub fn score(&self, store: &ParamStore, h: &[f64], hbar: &[f64]) -> Result<f64> {
        match self.score_kind {
            ScoreKind::Dot => {
                if h.len() != hbar.len() {
                    return Err(Error::Shape {
                        op: "dot score",
                        left: (h.len(), 1),
                        right: (hbar.len(), 1),
                    });
                }
                Ok(math::dot(h, hbar))
            }
            ScoreKind::General => {
                let wh = store.get(self.w_a.expect("general score")).matvec(hbar)?;
                Ok(math::dot(h, &wh))
            }
            ScoreKind::Concat => {
                let z = self.concat_hidden(store, h, hbar)?;
                Ok(math::dot(store.get(self.v_a.expect("concat score")).as_slice(), &z))
            }
        }
    }

    fn concat_hidden(&self, store: &ParamStore, h: &[f64], hbar: &[f64]) -> Result<Vec<f64>> {
        let joined: Vec<f64> = h.iter().chain(hbar).copied().collect();
        Ok(store.get(self.w_a.expect("concat score")).matvec(&joined)?.into_iter().map(f64::tanh).collect())
    }

    /// `T_x · sigmoid(v_pᵀ tanh(W_p h))`
    pub fn predict_position(&self, store: &ParamStore, h: &[f64], source_len: usize) -> Result<(f64, Vec<f64>, f64)> {
        let m: Vec<f64> = store.get(self.w_p.expect("predictive mode")).matvec(h)?.into_iter().map(f64::tanh).collect();
        let s = sigmoid(math::dot(store.get(self.v_p.expect("predictive mode")).as_slice(), &m));
        Ok((source_len as f64 * s, m, s))
    }

    /// Inclusive 1-based window `[lo, hi]` around `p`, clipped to the sentence.
    pub fn window_bounds(&self, p: f64, source_len: usize) -> (usize, usize) {
        let center = (p.round() as i64).clamp(1, source_len as i64);
        let d = self.window as i64;
        let lo = (center - d).max(1) as usize;
        let hi = (center + d).min(source_len as i64) as usize;
        (lo, hi)
    }

    fn gaussian_factor(&self, i: usize, p: f64) -> f64 {
        if self.window == 0 {
            return if i as f64 == p { 1.0 } else { 0.0 };
        }
        let sigma = self.window as f64 / 2.0;
        (-(i as f64 - p).powi(2) / (2.0 * sigma * sigma)).exp()
    }

    /// Context vector and alignment for decoding step `t` (1-based).
    pub fn context(&self, store: &ParamStore, h: &[f64], annotations: &[Vec<f64>], t: usize) -> Result<(Vec<f64>, AttentionStep)> {
        let tx = annotations.len();
        if tx == 0 {
            return Err(Error::contract("attention over an empty source"));
        }
        let (position, predictor) = match self.mode {
            AttentionMode::Global => (None, None),
            AttentionMode::LocalMonotonic => (Some(t.min(tx) as f64), None),
            AttentionMode::LocalPredictive => {
                let (p, m, s) = self.predict_position(store, h, tx)?;
                (Some(p), Some((m, s)))
            }
        };
        let (lo, hi) = match position {
            None => (1, tx),
            Some(p) => self.window_bounds(p, tx),
        };
        let scores = (lo..=hi)
            .map(|i| self.score(store, h, &annotations[i - 1]))
            .collect::<Result<Vec<f64>>>()?;
        let softmax = math::softmax(&scores);
        let (weights, gauss) = match position {
            Some(p) if self.gaussian => {
                let g: Vec<f64> = (lo..=hi).map(|i| self.gaussian_factor(i, p)).collect();
                (softmax.iter().zip(&g).map(|(a, b)| a * b).collect(), g)
            }
            _ => (softmax.clone(), Vec::new()),
        };
        let mut c = vec![0.0; annotations[0].len()];
        for (k, a) in weights.iter().enumerate() {
            math::axpy(*a, &annotations[lo - 1 + k], &mut c);
        }
        Ok((
            c,
            AttentionStep {
                start: lo - 1,
                weights,
                position,
                softmax,
                gauss,
                predictor,
            },
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        store: &ParamStore,
        h: &[f64],
        annotations: &[Vec<f64>],
        step: &AttentionStep,
        dc: &[f64],
        grads: &mut Gradients,
        dh: &mut [f64],
        d_ann: &mut [Vec<f64>],
    ) -> Result<()> {
        let n = step.weights.len();
        let mut d_soft = vec![0.0; n];
        let mut dp = 0.0;
        for k in 0..n {
            let i = step.start + k;
            let d_alpha = math::dot(dc, &annotations[i]);
            math::axpy(step.weights[k], dc, &mut d_ann[i]);
            if step.gauss.is_empty() {
                d_soft[k] = d_alpha;
            } else {
                d_soft[k] = d_alpha * step.gauss[k];
                if self.window > 0 {
                    let p = step.position.expect("local step");
                    let sigma2 = (self.window as f64 / 2.0).powi(2);
                    let pos = (i + 1) as f64;
                    dp += d_alpha * step.softmax[k] * step.gauss[k] * (pos - p) / sigma2;
                }
            }
        }
        let d_scores = math::softmax_backward(&step.softmax, &d_soft);
        for (k, &de) in d_scores.iter().enumerate() {
            let i = step.start + k;
            self.score_backward(store, h, &annotations[i], de, grads, dh, &mut d_ann[i])?;
        }
        if let Some((m, s)) = &step.predictor {
            let v_p = self.v_p.expect("predictive mode");
            let w_p = self.w_p.expect("predictive mode");
            let dq = dp * annotations.len() as f64 * s * (1.0 - s);
            grads.add_vec(v_p, &m.iter().map(|v| dq * v).collect::<Vec<_>>())?;
            let d_pre: Vec<f64> = store.get(v_p).as_slice().iter().zip(m).map(|(v, mv)| dq * v * (1.0 - mv * mv)).collect();
            grads.add_outer(w_p, &d_pre, h)?;
            store.get(w_p).matvec_t_acc(&d_pre, dh)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn score_backward(
        &self,
        store: &ParamStore,
        h: &[f64],
        hbar: &[f64],
        de: f64,
        grads: &mut Gradients,
        dh: &mut [f64],
        dhbar: &mut [f64],
    ) -> Result<()> {
        match self.score_kind {
            ScoreKind::Dot => {
                math::axpy(de, hbar, dh);
                math::axpy(de, h, dhbar);
            }
            ScoreKind::General => {
                let w = self.w_a.expect("general score");
                let wm = store.get(w);
                math::axpy(de, &wm.matvec(hbar)?, dh);
                math::axpy(de, &wm.matvec_t(h)?, dhbar);
                grads.add_outer(w, &h.iter().map(|v| de * v).collect::<Vec<_>>(), hbar)?;
            }
            ScoreKind::Concat => {
                let (w, v) = (self.w_a.expect("concat score"), self.v_a.expect("concat score"));
                let z = self.concat_hidden(store, h, hbar)?;
                grads.add_vec(v, &z.iter().map(|zv| de * zv).collect::<Vec<_>>())?;
                let dz: Vec<f64> = store.get(v).as_slice().iter().zip(&z).map(|(vv, zv)| de * vv * (1.0 - zv * zv)).collect();
                let joined: Vec<f64> = h.iter().chain(hbar).copied().collect();
                grads.add_outer(w, &dz, &joined)?;
                let d_joined = store.get(w).matvec_t(&dz)?;
                math::add_into(&d_joined[..h.len()], dh);
                math::add_into(&d_joined[h.len()..], dhbar);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Bridge {
    h: ParamId,
    c: Option<ParamId>,
}

/// Encoded source sentence.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub annotations: Vec<Vec<f64>>,
    /// Final encoder state per layer (directions concatenated).
    pub final_state: StackState,
    /// Decoder initial state derived from `final_state`.
    pub init: StackState,
    run: EncoderRun,
    source: Vec<usize>,
}

impl EncoderOutput {
    pub fn source_len(&self) -> usize {
        self.annotations.len()
    }
}

/// One decoding step's output.
#[derive(Clone, Debug)]
pub struct DecodeStep {
    pub log_probs: Vec<f64>,
    pub state: StackState,
    pub attention: AttentionStep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Translation {
    /// Output tokens without EOS.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
    pub trace: AttentionTrace,
}

#[derive(Clone, Debug)]
pub struct BeamHypothesis {
    /// Tokens without the EOS that finished the hypothesis.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// Ranking score (equals `log_prob` without length penalty).
    pub score: f64,
    pub finished: bool,
    pub state: StackState,
    pub trace: AttentionTrace,
}

struct ForcedStep {
    attention: AttentionStep,
    context: Vec<f64>,
    tilde: Vec<f64>,
    log_probs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Seq2SeqModel {
    config: Seq2SeqConfig,
    store: ParamStore,
    src_embedding: ParamId,
    tgt_embedding: ParamId,
    encoder: BiEncoder,
    decoder: RecurrentStack,
    bridge: Vec<Bridge>,
    attention: Attention,
    w_c: ParamId,
    head: OutputHead,
}

impl HasParams for Seq2SeqModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

impl Seq2SeqModel {
    pub fn new(config: Seq2SeqConfig, scheme: InitScheme, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let (e, enc, dec) = (config.embed_dim, config.encoder_dim(), config.decoder_dim());
        let src_embedding = store.add("s2s.src_embedding", config.src_vocab, e, Init::Weight);
        let tgt_embedding = store.add("s2s.tgt_embedding", config.tgt_vocab, e, Init::Weight);
        let encoder = BiEncoder::new(&mut store, "s2s.enc", config.cell, e, config.hidden, config.layers, config.bidirectional);
        let decoder = RecurrentStack::new(&mut store, "s2s.dec", config.cell, e, dec, config.layers);
        let bridge = if enc == dec {
            Vec::new()
        } else {
            (0..config.layers)
                .map(|l| Bridge {
                    h: store.add(format!("s2s.bridge.l{l}.h"), dec, enc, Init::Weight),
                    c: (config.cell == CellKind::Lstm).then(|| store.add(format!("s2s.bridge.l{l}.c"), dec, enc, Init::Weight)),
                })
                .collect()
        };
        let attention = Attention::new(&mut store, &config);
        let w_c = store.add("s2s.W_c", dec, enc + dec, Init::Weight);
        let head = OutputHead::new(&mut store, "s2s.W_s", config.tgt_vocab, dec, config.out_bias);
        store.init(scheme, seed);
        Ok(Self {
            config,
            store,
            src_embedding,
            tgt_embedding,
            encoder,
            decoder,
            bridge,
            attention,
            w_c,
            head,
        })
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        &self.config
    }

    pub fn attention(&self) -> &Attention {
        &self.attention
    }

    /// Swap the attention mechanics while keeping every parameter.
    pub fn set_attention_mode(&mut self, mode: AttentionMode, window: usize, gaussian: bool) -> Result<()> {
        if mode == AttentionMode::LocalPredictive && self.attention.w_p.is_none() {
            return Err(Error::config("model has no position predictor"));
        }
        self.attention.mode = mode;
        self.attention.window = window;
        self.attention.gaussian = gaussian;
        self.config.attention = mode;
        self.config.window = window;
        self.config.gaussian = gaussian;
        Ok(())
    }

    fn rows(&self, table: ParamId, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        let m = self.store.get(table);
        tokens
            .iter()
            .map(|&t| {
                if t >= m.rows() {
                    Err(Error::contract(format!("token {t} outside vocabulary of {}", m.rows())))
                } else {
                    Ok(m.row(t).to_vec())
                }
            })
            .collect()
    }

    pub fn encode(&self, source: &[usize]) -> Result<EncoderOutput> {
        if source.is_empty() {
            return Err(Error::contract("source sentence is empty"));
        }
        let inputs = self.rows(self.src_embedding, source)?;
        let run = self.encoder.encode(&self.store, &inputs)?;
        let mut final_state = run.forward.final_state();
        if let Some(b) = &run.backward {
            let bf = b.final_state();
            for l in 0..final_state.depth() {
                final_state.h[l].extend_from_slice(&bf.h[l]);
                final_state.c[l].extend_from_slice(&bf.c[l]);
            }
        }
        let init = if self.bridge.is_empty() {
            final_state.clone()
        } else {
            let mut init = self.decoder.zero_state();
            for (l, b) in self.bridge.iter().enumerate() {
                init.h[l] = self.store.get(b.h).matvec(&final_state.h[l])?;
                if let Some(c) = b.c {
                    init.c[l] = self.store.get(c).matvec(&final_state.c[l])?;
                }
            }
            init
        };
        Ok(EncoderOutput {
            annotations: run.annotations.clone(),
            final_state,
            init,
            run,
            source: source.to_vec(),
        })
    }

    fn output(&self, enc: &EncoderOutput, h: &[f64], t: usize) -> Result<ForcedStep> {
        let (context, attention) = self.attention.context(&self.store, h, &enc.annotations, t)?;
        let joined: Vec<f64> = context.iter().chain(h).copied().collect();
        let tilde: Vec<f64> = self.store.get(self.w_c).matvec(&joined)?.into_iter().map(f64::tanh).collect();
        let log_probs = math::log_softmax(&self.head.logits(&self.store, &tilde)?);
        Ok(ForcedStep {
            attention,
            context,
            tilde,
            log_probs,
        })
    }

    /// Consume `y_prev` at step `t` (1-based) and predict the next token.
    pub fn decode_step(&self, enc: &EncoderOutput, y_prev: usize, state: &StackState, t: usize) -> Result<DecodeStep> {
        let x = self.rows(self.tgt_embedding, &[y_prev])?.remove(0);
        let caches = self.decoder.step(&self.store, &x, state)?;
        let next = StackState {
            h: caches.iter().map(|c| c.h.clone()).collect(),
            c: caches.iter().map(|c| c.c.clone()).collect(),
        };
        let out = self.output(enc, next.top(), t)?;
        Ok(DecodeStep {
            log_probs: out.log_probs,
            state: next,
            attention: out.attention,
        })
    }

    fn teacher_forced(&self, source: &[usize], target: &[usize]) -> Result<(EncoderOutput, StackRun, Vec<usize>, Vec<ForcedStep>)> {
        if target.is_empty() {
            return Err(Error::contract("target sentence is empty"));
        }
        let enc = self.encode(source)?;
        let inputs: Vec<usize> = std::iter::once(self.config.bos).chain(target[..target.len() - 1].iter().copied()).collect();
        let run = self.decoder.run(&self.store, &self.rows(self.tgt_embedding, &inputs)?, enc.init.clone())?;
        let steps = (0..run.len())
            .map(|t| self.output(&enc, run.top(t), t + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok((enc, run, inputs, steps))
    }

    /// Teacher-forced per-token log-probabilities and the alignment trace.
    pub fn score_target(&self, source: &[usize], target: &[usize]) -> Result<(Vec<f64>, AttentionTrace)> {
        let (enc, _, _, steps) = self.teacher_forced(source, target)?;
        let lps = target.iter().zip(&steps).map(|(&y, s)| s.log_probs[y]).collect();
        let trace = AttentionTrace {
            source_len: enc.source_len(),
            steps: steps.into_iter().map(|s| s.attention).collect(),
        };
        Ok((lps, trace))
    }

    /// Mean negative log-likelihood of `target` under teacher forcing.
    pub fn loss(&self, source: &[usize], target: &[usize]) -> Result<f64> {
        let (lps, _) = self.score_target(source, target)?;
        Ok(-lps.iter().sum::<f64>() / target.len() as f64)
    }

    pub fn loss_and_grad(&self, source: &[usize], target: &[usize], grads: &mut Gradients) -> Result<f64> {
        let (enc, run, inputs, steps) = self.teacher_forced(source, target)?;
        let n = target.len() as f64;
        let mut loss = 0.0;
        let mut d_ann = vec![vec![0.0; self.config.encoder_dim()]; enc.source_len()];
        let mut d_top = Vec::with_capacity(steps.len());
        for (t, (step, &y)) in steps.iter().zip(target).enumerate() {
            loss -= step.log_probs[y];
            let mut dl: Vec<f64> = step.log_probs.iter().map(|v| v.exp() / n).collect();
            dl[y] -= 1.0 / n;
            let d_tilde = self.head.backward(&self.store, &step.tilde, &dl, grads)?;
            let d_pre: Vec<f64> = d_tilde.iter().zip(&step.tilde).map(|(d, v)| d * (1.0 - v * v)).collect();
            let h = run.top(t);
            let joined: Vec<f64> = step.context.iter().chain(h).copied().collect();
            grads.add_outer(self.w_c, &d_pre, &joined)?;
            let d_joined = self.store.get(self.w_c).matvec_t(&d_pre)?;
            let enc_dim = step.context.len();
            let mut dh = d_joined[enc_dim..].to_vec();
            self.attention
                .backward(&self.store, h, &enc.annotations, &step.attention, &d_joined[..enc_dim], grads, &mut dh, &mut d_ann)?;
            d_top.push(dh);
        }
        let back = self.decoder.backward(&self.store, &run, &d_top, None, grads)?;
        for (t, &tok) in inputs.iter().enumerate() {
            grads.add_row(self.tgt_embedding, tok, &back.d_inputs[t])?;
        }

        let mut d_final = back.d_init;
        if !self.bridge.is_empty() {
            let mut d_enc = StackState {
                h: Vec::new(),
                c: Vec::new(),
            };
            for (l, b) in self.bridge.iter().enumerate() {
                grads.add_outer(b.h, &d_final.h[l], &enc.final_state.h[l])?;
                d_enc.h.push(self.store.get(b.h).matvec_t(&d_final.h[l])?);
                match b.c {
                    Some(c) => {
                        grads.add_outer(c, &d_final.c[l], &enc.final_state.c[l])?;
                        d_enc.c.push(self.store.get(c).matvec_t(&d_final.c[l])?);
                    }
                    None => d_enc.c.push(Vec::new()),
                }
            }
            d_final = d_enc;
        }
        let hf = self.config.hidden;
        let split = |v: &Vec<f64>, fwd: bool| -> Vec<f64> {
            if v.is_empty() || !self.config.bidirectional {
                v.clone()
            } else if fwd {
                v[..hf].to_vec()
            } else {
                v[hf..].to_vec()
            }
        };
        let d_fwd = StackState {
            h: d_final.h.iter().map(|v| split(v, true)).collect(),
            c: d_final.c.iter().map(|v| split(v, true)).collect(),
        };
        let d_bwd = self.config.bidirectional.then(|| StackState {
            h: d_final.h.iter().map(|v| split(v, false)).collect(),
            c: d_final.c.iter().map(|v| split(v, false)).collect(),
        });
        let d_src = self
            .encoder
            .backward_pass(&self.store, &enc.run, &d_ann, Some(&d_fwd), d_bwd.as_ref(), grads)?;
        for (t, &tok) in enc.source.iter().enumerate() {
            grads.add_row(self.src_embedding, tok, &d_src[t])?;
        }
        Ok(loss / n)
    }

    /// Step-by-step argmax until EOS or `max_len` tokens.
    pub fn greedy(&self, source: &[usize], max_len: usize) -> Result<Translation> {
        let enc = self.encode(source)?;
        let mut state = enc.init.clone();
        let mut prev = self.config.bos;
        let mut out = Translation {
            tokens: Vec::new(),
            log_prob: 0.0,
            finished: false,
            trace: AttentionTrace {
                source_len: enc.source_len(),
                steps: Vec::new(),
            },
        };
        for t in 1..=max_len {
            let step = self.decode_step(&enc, prev, &state, t)?;
            let y = math::argmax(&step.log_probs);
            out.log_prob += step.log_probs[y];
            out.trace.steps.push(step.attention);
            state = step.state;
            if y == self.config.eos {
                out.finished = true;
                break;
            }
            out.tokens.push(y);
            prev = y;
        }
        Ok(out)
    }

    fn rank_score(&self, log_prob: f64, len: usize) -> f64 {
        if self.config.length_penalty == 0.0 {
            log_prob
        } else {
            log_prob / (len.max(1) as f64).powf(self.config.length_penalty)
        }
    }

    /// Width-`k` beam search. Every live hypothesis is expanded over the full
    /// target vocabulary and the `k` best candidates by accumulated
    /// log-probability survive; those ending in EOS retire to the result
    /// pool. Returns up to `k` hypotheses, best first.
    pub fn beam_search(&self, source: &[usize], k: usize, max_len: usize) -> Result<Vec<BeamHypothesis>> {
        if k == 0 {
            return Err(Error::contract("beam width must be at least 1"));
        }
        let enc = self.encode(source)?;
        let trace0 = AttentionTrace {
            source_len: enc.source_len(),
            steps: Vec::new(),
        };
        let mut live = vec![BeamHypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            score: 0.0,
            finished: false,
            state: enc.init.clone(),
            trace: trace0,
        }];
        let mut pool: Vec<BeamHypothesis> = Vec::new();
        for t in 1..=max_len {
            let mut candidates: Vec<(f64, usize, usize, f64)> = Vec::new();
            let mut expanded = Vec::with_capacity(live.len());
            for (hi, hyp) in live.iter().enumerate() {
                let prev = hyp.tokens.last().copied().unwrap_or(self.config.bos);
                let step = self.decode_step(&enc, prev, &hyp.state, t)?;
                for (y, lp) in step.log_probs.iter().enumerate() {
                    candidates.push((hyp.log_prob + lp, hi, y, *lp));
                }
                expanded.push(step);
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
            candidates.truncate(k);
            let mut next = Vec::new();
            for (total, hi, y, _) in candidates {
                let parent = &live[hi];
                let step = &expanded[hi];
                let mut trace = parent.trace.clone();
                trace.steps.push(step.attention.clone());
                let mut tokens = parent.tokens.clone();
                let finished = y == self.config.eos;
                if !finished {
                    tokens.push(y);
                }
                let len = tokens.len() + usize::from(finished);
                let hyp = BeamHypothesis {
                    tokens,
                    log_prob: total,
                    score: self.rank_score(total, len),
                    finished,
                    state: step.state.clone(),
                    trace,
                };
                if finished {
                    pool.push(hyp);
                } else {
                    next.push(hyp);
                }
            }
            live = next;
            if live.is_empty() {
                break;
            }
        }
        pool.extend(live);
        pool.sort_by(|a, b| b.score.total_cmp(&a.score));
        pool.truncate(k);
        Ok(pool)
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
        let config: Seq2SeqConfig =
            serde_json::from_value(ckpt.config.clone()).map_err(|e| Error::Incompatible(format!("bad seq2seq config: {e}")))?;
        let mut model = Self::new(config, InitScheme::GlorotUniform, 0)?;
        ckpt.apply_to(&mut model.store)?;
        Ok(model)
    }
}

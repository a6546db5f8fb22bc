//! Recurrent language model: next-token softmax over a stacked cell.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Matrix};
use crate::recurrent::cell::{CellKind, RecurrentStack, StackState};
use crate::train::{Checkpoint, Gradients, HasParams, Init, InitScheme, ParamId, ParamStore};

/// Temperatures below this decode greedily.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputEncoding {
    /// Trainable embedding table of width `embed_dim`.
    #[default]
    Embedded,
    /// Fixed identity table, so `d_in = vocab_size`.
    OneHot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub cell: CellKind,
    /// Input and output vocabulary size.
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub input: InputEncoding,
    /// Token fed before the first position.
    pub bos: usize,
    /// Sampling stops when this token is drawn.
    pub eos: Option<usize>,
    /// `y = softmax(V h + c)`; off gives the bias-free head.
    pub head_bias: bool,
    /// Chunk length for truncated BPTT; `None` backpropagates through the whole sequence.
    pub bptt_truncation: Option<usize>,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            cell: CellKind::Lstm,
            vocab_size: 0,
            embed_dim: 32,
            hidden: 100,
            layers: 1,
            input: InputEncoding::Embedded,
            bos: 0,
            eos: None,
            head_bias: true,
            bptt_truncation: None,
        }
    }
}

impl LmConfig {
    pub fn input_dim(&self) -> usize {
        match self.input {
            InputEncoding::Embedded => self.embed_dim,
            InputEncoding::OneHot => self.vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.hidden == 0 || self.layers == 0 || self.input_dim() == 0 {
            return Err(Error::config("vocabulary, hidden size, depth and input width must be positive"));
        }
        if self.bos >= self.vocab_size || self.eos.is_some_and(|e| e >= self.vocab_size) {
            return Err(Error::config("bos/eos must be inside the vocabulary"));
        }
        if self.bptt_truncation == Some(0) {
            return Err(Error::config("truncation length must be positive"));
        }
        Ok(())
    }
}

/// Output layer `softmax(V h (+ b))`.
#[derive(Clone, Copy, Debug)]
pub struct OutputHead {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl OutputHead {
    pub fn new(store: &mut ParamStore, prefix: &str, out: usize, hidden: usize, bias: bool) -> Self {
        Self {
            weight: store.add(format!("{prefix}.V"), out, hidden, Init::Weight),
            bias: bias.then(|| store.add(format!("{prefix}.b"), out, 1, Init::Zeros)),
        }
    }

    pub fn logits(&self, store: &ParamStore, h: &[f64]) -> Result<Vec<f64>> {
        let w = store.get(self.weight);
        let mut out = match self.bias {
            Some(b) => store.get(b).as_slice().to_vec(),
            None => vec![0.0; w.rows()],
        };
        w.matvec_acc(h, &mut out)?;
        Ok(out)
    }

    /// Accumulate head gradients and return `∂/∂h`.
    pub fn backward(&self, store: &ParamStore, h: &[f64], d_logits: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        grads.add_outer(self.weight, d_logits, h)?;
        if let Some(b) = self.bias {
            grads.add_vec(b, d_logits)?;
        }
        store.get(self.weight).matvec_t(d_logits)
    }
}

#[derive(Clone, Debug)]
pub struct LanguageModel {
    config: LmConfig,
    store: ParamStore,
    embedding: ParamId,
    stack: RecurrentStack,
    head: OutputHead,
}

impl HasParams for LanguageModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

/// Per-step next-token distributions from a teacher-forced pass.
#[derive(Clone, Debug)]
pub struct LmOutput {
    /// `log_probs[t]` is the distribution over token `t` given the tokens before it.
    pub log_probs: Vec<Vec<f64>>,
    pub final_state: StackState,
}

impl LanguageModel {
    pub fn new(config: LmConfig, scheme: InitScheme, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let prefix = config.cell.name();
        let embedding = match config.input {
            InputEncoding::Embedded => store.add(format!("{prefix}.embedding"), config.vocab_size, config.embed_dim, Init::Weight),
            InputEncoding::OneHot => store.add(format!("{prefix}.onehot"), config.vocab_size, config.vocab_size, Init::Zeros),
        };
        let stack = RecurrentStack::new(&mut store, prefix, config.cell, config.input_dim(), config.hidden, config.layers);
        let head = OutputHead::new(&mut store, &format!("{prefix}.head"), config.vocab_size, config.hidden, config.head_bias);
        store.init(scheme, seed);
        if config.input == InputEncoding::OneHot {
            store.set(embedding, Matrix::identity(config.vocab_size))?;
            store.set_trainable(embedding, false);
        }
        Ok(Self {
            config,
            store,
            embedding,
            stack,
            head,
        })
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn stack(&self) -> &RecurrentStack {
        &self.stack
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    fn embed(&self, token: usize) -> Result<Vec<f64>> {
        let table = self.store.get(self.embedding);
        if token >= table.rows() {
            return Err(Error::contract(format!("token {token} outside vocabulary of {}", table.rows())));
        }
        Ok(table.row(token).to_vec())
    }

    /// Model inputs for predicting `tokens`: `[bos, tokens[..T−1]]`.
    fn inputs(&self, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        std::iter::once(self.config.bos)
            .chain(tokens[..tokens.len().saturating_sub(1)].iter().copied())
            .map(|t| self.embed(t))
            .collect()
    }

    fn run_chunk(&self, tokens: &[usize], prev: usize, init: StackState) -> Result<(crate::recurrent::StackRun, Vec<Vec<f64>>)> {
        let inputs: Vec<Vec<f64>> = std::iter::once(prev)
            .chain(tokens[..tokens.len() - 1].iter().copied())
            .map(|t| self.embed(t))
            .collect::<Result<_>>()?;
        let run = self.stack.run(&self.store, &inputs, init)?;
        let logits = (0..run.len())
            .map(|t| self.head.logits(&self.store, run.top(t)))
            .collect::<Result<_>>()?;
        Ok((run, logits))
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<LmOutput> {
        if tokens.is_empty() {
            return Err(Error::contract("sequence must contain at least one token"));
        }
        let inputs = self.inputs(tokens)?;
        let run = self.stack.run(&self.store, &inputs, self.stack.zero_state())?;
        let log_probs = (0..run.len())
            .map(|t| Ok(math::log_softmax(&self.head.logits(&self.store, run.top(t))?)))
            .collect::<Result<_>>()?;
        Ok(LmOutput {
            log_probs,
            final_state: run.final_state(),
        })
    }

    /// `log P[x_1] + Σ_{t≥2} log P[x_t | x_{<t}]`.
    pub fn sequence_logprob(&self, tokens: &[usize]) -> Result<f64> {
        let out = self.forward(tokens)?;
        Ok(tokens.iter().zip(&out.log_probs).map(|(&t, lp)| lp[t]).sum())
    }

    /// Mean negative log-likelihood per token.
    pub fn loss(&self, tokens: &[usize]) -> Result<f64> {
        Ok(-self.sequence_logprob(tokens)? / tokens.len() as f64)
    }

    /// Mean negative log-likelihood and its gradient (BPTT, truncated to
    /// chunks when configured).
    pub fn loss_and_grad(&self, tokens: &[usize], grads: &mut Gradients) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::contract("sequence must contain at least one token"));
        }
        let n = tokens.len() as f64;
        let chunk = self.config.bptt_truncation.unwrap_or(tokens.len()).max(1);
        let mut state = self.stack.zero_state();
        let mut prev = self.config.bos;
        let mut total = 0.0;
        for piece in tokens.chunks(chunk) {
            let (run, logits) = self.run_chunk(piece, prev, state)?;
            let mut d_top = Vec::with_capacity(run.len());
            for (t, &target) in piece.iter().enumerate() {
                let lp = math::log_softmax(&logits[t]);
                total -= lp[target];
                let mut d: Vec<f64> = lp.iter().map(|v| v.exp() / n).collect();
                d[target] -= 1.0 / n;
                d_top.push(self.head.backward(&self.store, run.top(t), &d, grads)?);
            }
            let back = self.stack.backward(&self.store, &run, &d_top, None, grads)?;
            let inputs: Vec<usize> = std::iter::once(prev).chain(piece[..piece.len() - 1].iter().copied()).collect();
            for (t, &tok) in inputs.iter().enumerate() {
                grads.add_row(self.embedding, tok, &back.d_inputs[t])?;
            }
            state = run.final_state();
            prev = *piece.last().expect("non-empty chunk");
        }
        Ok(total / n)
    }

    /// Next-token logits after consuming `token` from `state`.
    pub fn step(&self, token: usize, state: &StackState) -> Result<(Vec<f64>, StackState)> {
        let caches = self.stack.step(&self.store, &self.embed(token)?, state)?;
        let next = StackState {
            h: caches.iter().map(|c| c.h.clone()).collect(),
            c: caches.iter().map(|c| c.c.clone()).collect(),
        };
        Ok((self.head.logits(&self.store, next.top())?, next))
    }

    /// Autoregressive sampling from `bos` until `eos` (excluded from the
    /// output) or `max_steps` tokens.
    pub fn sample(&self, max_steps: usize, temperature: f64, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if !(temperature > 0.0) {
            return Err(Error::contract(format!("temperature must be positive, got {temperature}")));
        }
        let mut state = self.stack.zero_state();
        let mut token = self.config.bos;
        let mut out = Vec::new();
        for _ in 0..max_steps {
            let (logits, next) = self.step(token, &state)?;
            state = next;
            token = if temperature < GREEDY_TEMPERATURE {
                math::argmax(&logits)
            } else {
                let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
                draw(&math::softmax(&scaled), rng)
            };
            if Some(token) == self.config.eos {
                break;
            }
            out.push(token);
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self, vocab_hash: Option<String>) -> Checkpoint {
        Checkpoint::from_store(
            format!("{}-lm", self.config.cell.name()),
            serde_json::to_value(&self.config).expect("config serializes"),
            vocab_hash,
            &self.store,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if !ckpt.kind.ends_with("-lm") {
            return Err(Error::Incompatible(format!("expected a language model checkpoint, found `{}`", ckpt.kind)));
        }
        let config: LmConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Error::Incompatible(format!("bad language model config: {e}")))?;
        let mut model = Self::new(config, InitScheme::GlorotUniform, 0)?;
        ckpt.apply_to(&mut model.store)?;
        Ok(model)
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn draw(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

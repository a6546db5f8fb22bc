use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, sigmoid};
use crate::train::{Gradients, Init, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Rnn,
    Lstm,
    Gru,
}

impl CellKind {
    /// Gate names in storage order.
    pub fn gate_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Rnn => &["h"],
            CellKind::Lstm => &["f", "i", "c", "o"],
            CellKind::Gru => &["r", "z", "h"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(CellKind::Rnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::config(format!("unknown cell `{other}`"))),
        }
    }
}

/// One `(U, W, b)` triple: `U x + W h + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub u: ParamId,
    pub w: ParamId,
    pub b: ParamId,
}

/// Intermediates of one cell step.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    /// Empty unless LSTM.
    pub c_prev: Vec<f64>,
    /// Activated gate outputs in [`CellKind::gate_names`] order.
    pub gates: Vec<Vec<f64>>,
    /// Empty unless LSTM.
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    /// `r ∘ h_prev` (GRU only).
    pub reset_h: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RecurrentLayer {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub gates: Vec<Gate>,
}

impl RecurrentLayer {
    /// Register parameters as `{prefix}.{gate}.{U|W|b}`. The LSTM forget-gate
    /// bias starts at +1, every other bias at 0.
    pub fn new(store: &mut ParamStore, prefix: &str, kind: CellKind, input_dim: usize, hidden: usize) -> Self {
        let gates = kind
            .gate_names()
            .iter()
            .map(|g| {
                let bias_init = if kind == CellKind::Lstm && *g == "f" {
                    Init::Constant(1.0)
                } else {
                    Init::Zeros
                };
                Gate {
                    u: store.add(format!("{prefix}.{g}.U"), hidden, input_dim, Init::Weight),
                    w: store.add(format!("{prefix}.{g}.W"), hidden, hidden, Init::Weight),
                    b: store.add(format!("{prefix}.{g}.b"), hidden, 1, bias_init),
                }
            })
            .collect();
        Self {
            kind,
            input_dim,
            hidden,
            gates,
        }
    }

    fn pre_activation(&self, store: &ParamStore, gate: &Gate, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let mut a = store.get(gate.b).as_slice().to_vec();
        store.get(gate.u).matvec_acc(x, &mut a)?;
        store.get(gate.w).matvec_acc(h, &mut a)?;
        Ok(a)
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        let c_ok = if self.kind == CellKind::Lstm {
            c.len() == self.hidden
        } else {
            true
        };
        if x.len() != self.input_dim || h.len() != self.hidden || !c_ok {
            return Err(Error::Shape {
                op: "RecurrentLayer::step",
                left: (self.input_dim, self.hidden),
                right: (x.len(), h.len()),
            });
        }
        Ok(())
    }

    /// One time step.
    ///
    /// * RNN: `h = tanh(U x + W h_prev + b)`
    /// * LSTM: `c = f∘c_prev + i∘c̃`, `h = tanh(c)∘o`
    /// * GRU: `h̃ = tanh(U_h x + W_h (r∘h_prev) + b_h)`, `h = z∘h_prev + (1 − z)∘h̃`
    pub fn step(&self, store: &ParamStore, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<StepCache> {
        self.check(x, h_prev, c_prev)?;
        let g = &self.gates;
        let mut cache = StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: Vec::new(),
            gates: Vec::with_capacity(g.len()),
            c: Vec::new(),
            h: Vec::new(),
            reset_h: Vec::new(),
        };
        match self.kind {
            CellKind::Rnn => {
                let h: Vec<f64> = self.pre_activation(store, &g[0], x, h_prev)?.into_iter().map(f64::tanh).collect();
                cache.gates.push(h.clone());
                cache.h = h;
            }
            CellKind::Lstm => {
                let f: Vec<f64> = self.pre_activation(store, &g[0], x, h_prev)?.into_iter().map(sigmoid).collect();
                let i: Vec<f64> = self.pre_activation(store, &g[1], x, h_prev)?.into_iter().map(sigmoid).collect();
                let cand: Vec<f64> = self.pre_activation(store, &g[2], x, h_prev)?.into_iter().map(f64::tanh).collect();
                let o: Vec<f64> = self.pre_activation(store, &g[3], x, h_prev)?.into_iter().map(sigmoid).collect();
                let c: Vec<f64> = (0..self.hidden).map(|k| f[k] * c_prev[k] + i[k] * cand[k]).collect();
                cache.h = (0..self.hidden).map(|k| c[k].tanh() * o[k]).collect();
                cache.c_prev = c_prev.to_vec();
                cache.c = c;
                cache.gates = vec![f, i, cand, o];
            }
            CellKind::Gru => {
                let r: Vec<f64> = self.pre_activation(store, &g[0], x, h_prev)?.into_iter().map(sigmoid).collect();
                let z: Vec<f64> = self.pre_activation(store, &g[1], x, h_prev)?.into_iter().map(sigmoid).collect();
                let reset_h: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
                let cand: Vec<f64> = self.pre_activation(store, &g[2], x, &reset_h)?.into_iter().map(f64::tanh).collect();
                cache.h = (0..self.hidden).map(|k| z[k] * h_prev[k] + (1.0 - z[k]) * cand[k]).collect();
                cache.reset_h = reset_h;
                cache.gates = vec![r, z, cand];
            }
        }
        Ok(cache)
    }

    fn gate_backward(
        &self,
        store: &ParamStore,
        gate: &Gate,
        d_pre: &[f64],
        x: &[f64],
        h_in: &[f64],
        grads: &mut Gradients,
        dx: &mut [f64],
        dh_in: &mut [f64],
    ) -> Result<()> {
        grads.add_outer(gate.u, d_pre, x)?;
        grads.add_outer(gate.w, d_pre, h_in)?;
        grads.add_vec(gate.b, d_pre)?;
        store.get(gate.u).matvec_t_acc(d_pre, dx)?;
        store.get(gate.w).matvec_t_acc(d_pre, dh_in)?;
        Ok(())
    }

    /// Backpropagate `dh` (and `dc` for LSTM) through one step.
    /// Returns `(dx, dh_prev, dc_prev)`; `dc_prev` is empty for non-LSTM cells.
    pub fn step_backward(
        &self,
        store: &ParamStore,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Gradients,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.hidden;
        let mut dx = vec![0.0; self.input_dim];
        let mut dh_prev = vec![0.0; n];
        let g = &self.gates;
        match self.kind {
            CellKind::Rnn => {
                let h = &cache.h;
                let d_pre: Vec<f64> = (0..n).map(|k| dh[k] * (1.0 - h[k] * h[k])).collect();
                self.gate_backward(store, &g[0], &d_pre, &cache.x, &cache.h_prev, grads, &mut dx, &mut dh_prev)?;
                Ok((dx, dh_prev, Vec::new()))
            }
            CellKind::Lstm => {
                let (f, i, cand, o) = (&cache.gates[0], &cache.gates[1], &cache.gates[2], &cache.gates[3]);
                let mut d_f = vec![0.0; n];
                let mut d_i = vec![0.0; n];
                let mut d_c = vec![0.0; n];
                let mut d_o = vec![0.0; n];
                let mut dc_prev = vec![0.0; n];
                for k in 0..n {
                    let tc = cache.c[k].tanh();
                    let dck = dc.get(k).copied().unwrap_or(0.0) + dh[k] * o[k] * (1.0 - tc * tc);
                    d_o[k] = dh[k] * tc * o[k] * (1.0 - o[k]);
                    d_f[k] = dck * cache.c_prev[k] * f[k] * (1.0 - f[k]);
                    d_i[k] = dck * cand[k] * i[k] * (1.0 - i[k]);
                    d_c[k] = dck * i[k] * (1.0 - cand[k] * cand[k]);
                    dc_prev[k] = dck * f[k];
                }
                for (gate, d) in g.iter().zip([&d_f, &d_i, &d_c, &d_o]) {
                    self.gate_backward(store, gate, d, &cache.x, &cache.h_prev, grads, &mut dx, &mut dh_prev)?;
                }
                Ok((dx, dh_prev, dc_prev))
            }
            CellKind::Gru => {
                let (r, z, cand) = (&cache.gates[0], &cache.gates[1], &cache.gates[2]);
                let hp = &cache.h_prev;
                let mut d_z = vec![0.0; n];
                let mut d_cand = vec![0.0; n];
                for k in 0..n {
                    d_z[k] = dh[k] * (hp[k] - cand[k]) * z[k] * (1.0 - z[k]);
                    d_cand[k] = dh[k] * (1.0 - z[k]) * (1.0 - cand[k] * cand[k]);
                    dh_prev[k] = dh[k] * z[k];
                }
                let mut d_reset_h = vec![0.0; n];
                self.gate_backward(store, &g[2], &d_cand, &cache.x, &cache.reset_h, grads, &mut dx, &mut d_reset_h)?;
                let d_r: Vec<f64> = (0..n).map(|k| d_reset_h[k] * hp[k] * r[k] * (1.0 - r[k])).collect();
                for k in 0..n {
                    dh_prev[k] += d_reset_h[k] * r[k];
                }
                self.gate_backward(store, &g[0], &d_r, &cache.x, hp, grads, &mut dx, &mut dh_prev)?;
                self.gate_backward(store, &g[1], &d_z, &cache.x, hp, grads, &mut dx, &mut dh_prev)?;
                Ok((dx, dh_prev, Vec::new()))
            }
        }
    }
}

/// Hidden (and, for LSTM, cell) state of every layer of a stack.
#[derive(Clone, Debug, PartialEq)]
pub struct StackState {
    pub h: Vec<Vec<f64>>,
    /// Empty vectors for non-LSTM layers.
    pub c: Vec<Vec<f64>>,
}

impl StackState {
    pub fn depth(&self) -> usize {
        self.h.len()
    }

    pub fn top(&self) -> &[f64] {
        self.h.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Recurrent layers stacked vertically: layer `l` reads layer `l − 1`'s
/// hidden state at the same step.
#[derive(Clone, Debug)]
pub struct RecurrentStack {
    pub layers: Vec<RecurrentLayer>,
}

/// Unrolled forward pass of a stack.
#[derive(Clone, Debug)]
pub struct StackRun {
    pub init: StackState,
    /// `steps[t][l]`
    pub steps: Vec<Vec<StepCache>>,
}

impl StackRun {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Top-layer hidden state at step `t`.
    pub fn top(&self, t: usize) -> &[f64] {
        &self.steps[t].last().expect("non-empty stack").h
    }

    pub fn state_at(&self, t: usize) -> StackState {
        StackState {
            h: self.steps[t].iter().map(|c| c.h.clone()).collect(),
            c: self.steps[t].iter().map(|c| c.c.clone()).collect(),
        }
    }

    pub fn final_state(&self) -> StackState {
        match self.steps.len() {
            0 => self.init.clone(),
            n => self.state_at(n - 1),
        }
    }
}

/// Gradients flowing out of a stack's backward pass.
#[derive(Clone, Debug)]
pub struct StackGrads {
    pub d_inputs: Vec<Vec<f64>>,
    pub d_init: StackState,
}

impl RecurrentStack {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden: usize,
        depth: usize,
    ) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let d_in = if l == 0 { input_dim } else { hidden };
                RecurrentLayer::new(store, &format!("{prefix}.l{l}"), kind, d_in, hidden)
            })
            .collect();
        Self { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden)
    }

    pub fn kind(&self) -> CellKind {
        self.layers[0].kind
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    /// All-zero initial state.
    pub fn zero_state(&self) -> StackState {
        StackState {
            h: self.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
            c: self
                .layers
                .iter()
                .map(|l| {
                    if l.kind == CellKind::Lstm {
                        vec![0.0; l.hidden]
                    } else {
                        Vec::new()
                    }
                })
                .collect(),
        }
    }

    pub fn step(&self, store: &ParamStore, x: &[f64], state: &StackState) -> Result<Vec<StepCache>> {
        if state.depth() != self.depth() {
            return Err(Error::contract(format!(
                "state has {} layers, stack has {}",
                state.depth(),
                self.depth()
            )));
        }
        let mut caches: Vec<StepCache> = Vec::with_capacity(self.depth());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x } else { caches[l - 1].h.as_slice() };
            let cache = layer.step(store, input, &state.h[l], &state.c[l])?;
            caches.push(cache);
        }
        Ok(caches)
    }

    pub fn run(&self, store: &ParamStore, inputs: &[Vec<f64>], init: StackState) -> Result<StackRun> {
        let mut steps: Vec<Vec<StepCache>> = Vec::with_capacity(inputs.len());
        for (t, x) in inputs.iter().enumerate() {
            let caches = if t == 0 {
                self.step(store, x, &init)?
            } else {
                let prev = &steps[t - 1];
                let state = StackState {
                    h: prev.iter().map(|c| c.h.clone()).collect(),
                    c: prev.iter().map(|c| c.c.clone()).collect(),
                };
                self.step(store, x, &state)?
            };
            steps.push(caches);
        }
        Ok(StackRun { init, steps })
    }

    /// Backpropagation through time.
    ///
    /// `d_top[t]` is the loss gradient with respect to the top hidden state at
    /// step `t`; `d_final` optionally adds gradient on the final state.
    pub fn backward(
        &self,
        store: &ParamStore,
        run: &StackRun,
        d_top: &[Vec<f64>],
        d_final: Option<&StackState>,
        grads: &mut Gradients,
    ) -> Result<StackGrads> {
        if d_top.len() != run.len() {
            return Err(Error::contract(format!(
                "{} top gradients for {} steps",
                d_top.len(),
                run.len()
            )));
        }
        let mut dh_next: Vec<Vec<f64>> = match d_final {
            Some(s) => s.h.clone(),
            None => self.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
        };
        let mut dc_next: Vec<Vec<f64>> = match d_final {
            Some(s) => s.c.clone(),
            None => self.zero_state().c,
        };
        let mut d_inputs = vec![Vec::new(); run.len()];
        for t in (0..run.len()).rev() {
            let mut d_above = d_top[t].clone();
            for (l, layer) in self.layers.iter().enumerate().rev() {
                let mut dh = std::mem::take(&mut dh_next[l]);
                math::add_into(&d_above, &mut dh);
                let (dx, dh_prev, dc_prev) = layer.step_backward(store, &run.steps[t][l], &dh, &dc_next[l], grads)?;
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                d_above = dx;
            }
            d_inputs[t] = d_above;
        }
        Ok(StackGrads {
            d_inputs,
            d_init: StackState {
                h: dh_next,
                c: dc_next,
            },
        })
    }
}

/// Unidirectional or bidirectional encoder. Bidirectional annotations are
/// `[→h_t; ←h_t]`; the two directions have separate parameters and share the
/// input embeddings.
#[derive(Clone, Debug)]
pub struct BiEncoder {
    pub forward: RecurrentStack,
    pub backward: Option<RecurrentStack>,
}

#[derive(Clone, Debug)]
pub struct EncoderRun {
    pub annotations: Vec<Vec<f64>>,
    pub forward: StackRun,
    /// Run over the reversed input.
    pub backward: Option<StackRun>,
}

impl EncoderRun {
    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

impl BiEncoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden: usize,
        depth: usize,
        bidirectional: bool,
    ) -> Self {
        let forward = RecurrentStack::new(store, &format!("{prefix}.fwd"), kind, input_dim, hidden, depth);
        let backward = bidirectional
            .then(|| RecurrentStack::new(store, &format!("{prefix}.bwd"), kind, input_dim, hidden, depth));
        Self { forward, backward }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden() + self.backward.as_ref().map_or(0, RecurrentStack::hidden)
    }

    pub fn is_bidirectional(&self) -> bool {
        self.backward.is_some()
    }

    pub fn encode(&self, store: &ParamStore, inputs: &[Vec<f64>]) -> Result<EncoderRun> {
        if inputs.is_empty() {
            return Err(Error::contract("cannot encode an empty sequence"));
        }
        let fwd = self.forward.run(store, inputs, self.forward.zero_state())?;
        let bwd = match &self.backward {
            Some(stack) => {
                let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
                Some(stack.run(store, &reversed, stack.zero_state())?)
            }
            None => None,
        };
        let n = inputs.len();
        let annotations = (0..n)
            .map(|t| {
                let mut a = fwd.top(t).to_vec();
                if let Some(b) = &bwd {
                    a.extend_from_slice(b.top(n - 1 - t));
                }
                a
            })
            .collect();
        Ok(EncoderRun {
            annotations,
            forward: fwd,
            backward: bwd,
        })
    }

    /// Returns gradients with respect to the inputs.
    pub fn backward_pass(
        &self,
        store: &ParamStore,
        run: &EncoderRun,
        d_annotations: &[Vec<f64>],
        d_final_fwd: Option<&StackState>,
        d_final_bwd: Option<&StackState>,
        grads: &mut Gradients,
    ) -> Result<Vec<Vec<f64>>> {
        let n = run.len();
        let hf = self.forward.hidden();
        let d_fwd: Vec<Vec<f64>> = d_annotations.iter().map(|d| d[..hf].to_vec()).collect();
        let mut d_inputs = self.forward.backward(store, &run.forward, &d_fwd, d_final_fwd, grads)?.d_inputs;
        if let (Some(stack), Some(bwd_run)) = (&self.backward, &run.backward) {
            let d_bwd: Vec<Vec<f64>> = (0..n).map(|s| d_annotations[n - 1 - s][hf..].to_vec()).collect();
            let back = stack.backward(store, bwd_run, &d_bwd, d_final_bwd, grads)?;
            for (s, dx) in back.d_inputs.iter().enumerate() {
                math::add_into(dx, &mut d_inputs[n - 1 - s]);
            }
        }
        Ok(d_inputs)
    }
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use neurotext::cnn::{param_count, CnnConfig, CnnModel};
use neurotext::han::{HanConfig, HanModel};
use neurotext::interpret::{doc_embeddings, predictive_regions, project_2d, saliency, silhouette, SaliencyReduction};
use neurotext::math::{self, Activation, Matrix};
use neurotext::recurrent::{CellKind, LanguageModel, LmConfig, RecurrentLayer};
use neurotext::seq2seq::{AttentionMode, EncoderOutput, ScoreKind, Seq2SeqConfig, Seq2SeqModel};
use neurotext::synth::{copy_task, sentiment_corpus, two_sentence_corpus, SentimentSpec};
use neurotext::text::{self, EncodedDoc, Specials, Truncation, Vocabulary};
use neurotext::train::{fit, grad_check, Gradients, HasParams, InitScheme, Optimizer, ParamStore, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("log-loss worked examples", c1_log_loss),
        ("figure 1 shapes", c2_figure_shapes),
        ("parameter counts", c3_param_counts),
        ("gradient checks", c4_gradcheck),
        ("degenerate cells and heads", c5_degenerations),
        ("attention invariants", c6_attention),
        ("beam search oracle", c7_beam),
        ("language model normalization", c8_lm_normalization),
        ("desk-scale learning", c9_learning),
        ("embedding silhouette", c10_silhouette),
        ("reproducible training", c11_reproducible),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {} ({name}): PASS [{d}] ({secs:.2}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{d}] ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c1_log_loss() -> Outcome {
    let cases = [(0.8, 0.22), (0.6, 0.51), (0.1, 2.3)];
    let mut parts = Vec::new();
    let mut ok = true;
    for (p, expected) in cases {
        let got = math::log_loss(&[1], &[p]).map_err(|e| e.to_string())?;
        ok &= (got - expected).abs() <= 0.005;
        parts.push(format!("p={p}: {got:.4} vs {expected}"));
    }
    check(ok, parts.join(", "))
}

fn c2_figure_shapes() -> Outcome {
    let config = CnnConfig {
        vocab_size: 7,
        embed_dim: 5,
        seq_len: 7,
        regions: vec![2, 3, 4],
        filters: 2,
        k: 1,
        ..CnnConfig::default()
    };
    let model = CnnModel::new(config, None, InitScheme::GlorotUniform, 0).map_err(|e| e.to_string())?;
    let doc = EncodedDoc {
        indices: vec![1, 2, 3, 4, 5, 6, 7],
        label: None,
        original_length: 7,
    };
    let cache = model.forward(&doc).map_err(|e| e.to_string())?;
    let lens: Vec<usize> = cache.branches.iter().map(|b| b.conv.maps.cols()).collect();
    let rows: Vec<usize> = cache.branches.iter().map(|b| b.conv.maps.rows()).collect();
    let pooled = cache.pooled.len();
    check(
        lens == [6, 5, 4] && rows == [2, 2, 2] && pooled == 6 && model.config().pooled_len() == 6,
        format!("map lengths {lens:?}, filters {rows:?}, pooled {pooled}"),
    )
}

/// Scalars that differ after one SGD step with every gradient entry set to 1.
fn mutated_scalars(model: &mut CnnModel) -> usize {
    let before: Vec<Matrix> = model.params().ids().map(|id| model.params().get(id).clone()).collect();
    let mut grads = Gradients::zeros_for(model.params());
    let ids: Vec<_> = model.params().ids().collect();
    for &id in &ids {
        if let Some(g) = grads.get_mut(id) {
            g.fill(1.0);
        }
    }
    let mut opt = Optimizer::sgd(0.1).expect("optimizer");
    opt.step(model.params_mut(), &mut grads).expect("step");
    ids.iter()
        .zip(&before)
        .map(|(&id, b)| {
            let after = model.params().get(id);
            after.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count()
        })
        .sum()
}

fn c3_param_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut parts = Vec::new();
    let mut ok = true;
    for trial in 0..5 {
        let mut regions: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=4)).collect();
        regions.sort_unstable();
        regions.dedup();
        let base = CnnConfig {
            vocab_size: rng.gen_range(5..30),
            embed_dim: rng.gen_range(2..8),
            seq_len: 8,
            regions,
            filters: rng.gen_range(1..6),
            k: rng.gen_range(1..3),
            classes: rng.gen_range(1..4),
            ..CnnConfig::default()
        };
        for static_embeddings in [false, true] {
            let config = CnnConfig {
                static_embeddings,
                ..base.clone()
            };
            let formula = param_count(&config).total();
            let mut model = CnnModel::new(config.clone(), None, InitScheme::GlorotUniform, trial).map_err(|e| e.to_string())?;
            let mutated = mutated_scalars(&mut model);
            let masked_padding = if static_embeddings { 0 } else { config.embed_dim };
            let this_ok = formula == mutated + masked_padding && model.params().updatable_scalars() == mutated;
            ok &= this_ok;
            parts.push(format!(
                "{}{}: formula {formula}, mutated {mutated}+pad {masked_padding}",
                trial + 1,
                if static_embeddings { "s" } else { "n" }
            ));
        }
    }
    check(ok, parts.join("; "))
}

fn c4_gradcheck() -> Outcome {
    let start = Instant::now();
    let eps = 1e-5;
    let tol = 1e-4;
    let mut results: Vec<(String, f64)> = Vec::new();

    let cnn_config = CnnConfig {
        vocab_size: 9,
        embed_dim: 4,
        seq_len: 5,
        regions: vec![2, 3],
        filters: 3,
        k: 2,
        activation: Activation::Tanh,
        classes: 3,
        ..CnnConfig::default()
    };
    let mut cnn = CnnModel::new(cnn_config, None, InitScheme::GlorotUniform, 3).map_err(|e| e.to_string())?;
    let doc = EncodedDoc {
        indices: vec![3, 1, 7, 9, 0],
        label: Some(2),
        original_length: 4,
    };
    let r = grad_check(&mut cnn, eps, |m, g| m.loss_and_grad(&doc, g)).map_err(|e| e.to_string())?;
    results.push(("cnn".into(), r.max_rel_error));

    for cell in [CellKind::Rnn, CellKind::Lstm, CellKind::Gru] {
        let config = LmConfig {
            cell,
            vocab_size: 5,
            embed_dim: 3,
            hidden: 4,
            layers: 2,
            bos: 3,
            eos: Some(4),
            ..LmConfig::default()
        };
        let mut lm = LanguageModel::new(config, InitScheme::Uniform(0.8), 3).map_err(|e| e.to_string())?;
        let tokens = [1, 2, 0, 2, 4];
        let r = grad_check(&mut lm, eps, |m, g| m.loss_and_grad(&tokens, g)).map_err(|e| e.to_string())?;
        results.push((cell.name().into(), r.max_rel_error));
    }

    for attention in [AttentionMode::Global, AttentionMode::LocalPredictive] {
        for score in [ScoreKind::Dot, ScoreKind::General, ScoreKind::Concat] {
            let config = Seq2SeqConfig {
                cell: CellKind::Lstm,
                src_vocab: 6,
                tgt_vocab: 5,
                embed_dim: 3,
                hidden: 3,
                bidirectional: true,
                attention,
                score,
                window: 2,
                attention_dim: Some(4),
                bos: 3,
                eos: 4,
                out_bias: true,
                ..Seq2SeqConfig::default()
            };
            let mut s2s = Seq2SeqModel::new(config, InitScheme::Uniform(1.0), 3).map_err(|e| e.to_string())?;
            let (src, tgt) = ([1, 5, 2, 3, 4], [2, 1, 0, 4]);
            let r = grad_check(&mut s2s, eps, |m, g| m.loss_and_grad(&src, &tgt, g)).map_err(|e| e.to_string())?;
            results.push((format!("seq2seq-{attention:?}-{score:?}"), r.max_rel_error));
        }
    }

    let han_config = HanConfig {
        vocab_size: 7,
        embed_dim: 3,
        word_hidden: 3,
        sentence_hidden: 2,
        classes: 3,
        ..HanConfig::default()
    };
    let mut han = HanModel::new(han_config, InitScheme::Uniform(1.0), 3).map_err(|e| e.to_string())?;
    let hdoc = vec![vec![1, 2, 3], vec![4, 5, 6]];
    let r = grad_check(&mut han, eps, |m, g| m.loss_and_grad(&hdoc, 2, g)).map_err(|e| e.to_string())?;
    results.push(("han".into(), r.max_rel_error));

    let secs = start.elapsed().as_secs_f64();
    let worst = results.iter().fold(0.0f64, |m, (_, e)| m.max(*e));
    let failing: Vec<String> = results.iter().filter(|(_, e)| *e >= tol).map(|(n, e)| format!("{n}={e:.2e}")).collect();
    check(
        failing.is_empty() && secs < 60.0,
        format!("{} instances, worst {worst:.2e}, {secs:.1}s, failing {failing:?}", results.len()),
    )
}

fn set_const(store: &mut ParamStore, id: neurotext::train::ParamId, v: f64) {
    store.get_mut(id).fill(v);
}

fn c5_degenerations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (input, hidden, steps) = (3, 4, 8);
    let xs: Vec<Vec<f64>> = (0..steps).map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    // LSTM with f=0, i=1, o=1 against a vanilla RNN sharing the candidate weights.
    let mut lstm_store = ParamStore::new();
    let lstm = RecurrentLayer::new(&mut lstm_store, "l", CellKind::Lstm, input, hidden);
    lstm_store.init(InitScheme::Uniform(0.7), 1);
    for (gate, bias) in [(0, -1000.0), (1, 1000.0), (3, 1000.0)] {
        let g = lstm.gates[gate];
        set_const(&mut lstm_store, g.u, 0.0);
        set_const(&mut lstm_store, g.w, 0.0);
        set_const(&mut lstm_store, g.b, bias);
    }
    let mut rnn_store = ParamStore::new();
    let rnn = RecurrentLayer::new(&mut rnn_store, "r", CellKind::Rnn, input, hidden);
    let (cand, plain) = (lstm.gates[2], rnn.gates[0]);
    for (from, to) in [(cand.u, plain.u), (cand.w, plain.w), (cand.b, plain.b)] {
        rnn_store.set(to, lstm_store.get(from).clone()).map_err(|e| e.to_string())?;
    }
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut lstm_gap = 0.0f64;
    for x in &xs {
        let l = lstm.step(&lstm_store, x, &h, &c).map_err(|e| e.to_string())?;
        let r = rnn.step(&rnn_store, x, &h, &[]).map_err(|e| e.to_string())?;
        for k in 0..hidden {
            lstm_gap = lstm_gap.max((l.h[k] - r.h[k].tanh()).abs()).max((l.c[k] - r.h[k]).abs());
        }
        h = l.h;
        c = l.c;
    }

    // GRU with z=1 keeps its state exactly.
    let mut gru_store = ParamStore::new();
    let gru = RecurrentLayer::new(&mut gru_store, "g", CellKind::Gru, input, hidden);
    gru_store.init(InitScheme::Uniform(0.7), 2);
    let z = gru.gates[1];
    set_const(&mut gru_store, z.u, 0.0);
    set_const(&mut gru_store, z.w, 0.0);
    set_const(&mut gru_store, z.b, 1000.0);
    let h0: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut gh = h0.clone();
    for x in &xs {
        gh = gru.step(&gru_store, x, &gh, &[]).map_err(|e| e.to_string())?.h;
    }
    let gru_exact = gh.iter().zip(&h0).all(|(a, b)| a.to_bits() == b.to_bits());

    // One sigmoid neuron against two softmax neurons whose first logit is frozen at 0.
    let base = CnnConfig {
        vocab_size: 10,
        embed_dim: 4,
        seq_len: 6,
        regions: vec![2, 3],
        filters: 3,
        classes: 1,
        ..CnnConfig::default()
    };
    let sig = CnnModel::new(base.clone(), None, InitScheme::Uniform(0.8), 4).map_err(|e| e.to_string())?;
    let mut soft = CnnModel::new(CnnConfig { classes: 2, ..base }, None, InitScheme::Uniform(0.8), 4).map_err(|e| e.to_string())?;
    let ids: Vec<_> = sig.params().ids().collect();
    let (hw, hb) = soft.head();
    for id in ids {
        let name = sig.params().param(id).name().to_string();
        let target = soft.params().id(&name).ok_or("missing parameter")?;
        if target == hw {
            let w = sig.params().get(id);
            let two = Matrix::from_rows(&[vec![0.0; w.cols()], w.row(0).to_vec()]).map_err(|e| e.to_string())?;
            soft.params_mut().set(target, two).map_err(|e| e.to_string())?;
        } else if target == hb {
            let b = sig.params().get(id).get(0, 0);
            soft.params_mut().set(target, Matrix::column(&[0.0, b])).map_err(|e| e.to_string())?;
        } else {
            let v = sig.params().get(id).clone();
            soft.params_mut().set(target, v).map_err(|e| e.to_string())?;
        }
    }
    let mut head_gap = 0.0f64;
    for _ in 0..50 {
        let len = rng.gen_range(2..=6);
        let mut indices: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=10)).collect();
        indices.resize(6, 0);
        let doc = EncodedDoc {
            indices,
            label: None,
            original_length: len,
        };
        let p1 = sig.forward(&doc).map_err(|e| e.to_string())?.probs;
        let p2 = soft.forward(&doc).map_err(|e| e.to_string())?.probs;
        head_gap = head_gap.max((p1[1] - p2[1]).abs()).max((p1[0] - p2[0]).abs());
    }

    check(
        lstm_gap <= 1e-12 && gru_exact && head_gap <= 1e-12,
        format!("lstm vs tanh(rnn) {lstm_gap:.1e}, gru state bit-exact {gru_exact}, sigmoid vs softmax {head_gap:.1e}"),
    )
}

fn attention_model(mode: AttentionMode, score: ScoreKind, seed: u64) -> Seq2SeqModel {
    let config = Seq2SeqConfig {
        src_vocab: 8,
        tgt_vocab: 6,
        embed_dim: 4,
        hidden: 4,
        bidirectional: true,
        attention: mode,
        score,
        window: 2,
        bos: 4,
        eos: 5,
        ..Seq2SeqConfig::default()
    };
    Seq2SeqModel::new(config, InitScheme::Uniform(1.0), seed).expect("model")
}

fn c6_attention() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sum_gap = 0.0f64;
    let mut bitwise = true;
    for seed in 0..10u64 {
        for score in [ScoreKind::Dot, ScoreKind::General, ScoreKind::Concat] {
            let global = attention_model(AttentionMode::Global, score, seed);
            let len = rng.gen_range(1..=7);
            let src: Vec<usize> = (0..len).map(|_| rng.gen_range(1..8)).collect();
            let tgt: Vec<usize> = (0..rng.gen_range(1..=5)).map(|_| rng.gen_range(0..6)).collect();
            let (lp_g, trace_g) = global.score_target(&src, &tgt).map_err(|e| e.to_string())?;
            for step in &trace_g.steps {
                sum_gap = sum_gap.max((step.weights.iter().sum::<f64>() - 1.0).abs());
            }
            let mut local = global.clone();
            local
                .set_attention_mode(AttentionMode::LocalMonotonic, len, false)
                .map_err(|e| e.to_string())?;
            let (lp_l, trace_l) = local.score_target(&src, &tgt).map_err(|e| e.to_string())?;
            let same_lp = lp_g.iter().zip(&lp_l).all(|(a, b)| a.to_bits() == b.to_bits());
            let same_w = trace_g
                .dense()
                .iter()
                .flatten()
                .zip(trace_l.dense().iter().flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            bitwise &= same_lp && same_w && lp_g.len() == lp_l.len();
        }
    }

    let mut inside = 0;
    let mut total = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..10u64 {
        let model = attention_model(AttentionMode::LocalPredictive, ScoreKind::General, 100 + seed);
        let width = model.config().decoder_dim();
        for _ in 0..1000 {
            let h: Vec<f64> = (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tx = rng.gen_range(1..=50);
            let (p, _, _) = model.attention().predict_position(model.params(), &h, tx).map_err(|e| e.to_string())?;
            total += 1;
            if p > 0.0 && p < tx as f64 {
                inside += 1;
            }
            lo = lo.min(p / tx as f64);
            hi = hi.max(p / tx as f64);
        }
    }
    check(
        sum_gap <= 1e-9 && inside == total && bitwise,
        format!(
            "max |sum alpha - 1| {sum_gap:.1e}, p_t inside (0, T_x) {inside}/{total} (p/T_x in [{lo:.3}, {hi:.3}]), local window [1, T_x] == global bitwise {bitwise}"
        ),
    )
}

fn chained_logprob(m: &Seq2SeqModel, enc: &EncoderOutput, target: &[usize]) -> f64 {
    let mut state = enc.init.clone();
    let mut prev = m.config().bos;
    let mut total = 0.0;
    for (t, &y) in target.iter().enumerate() {
        let step = m.decode_step(enc, prev, &state, t + 1).expect("step");
        total += step.log_probs[y];
        state = step.state;
        prev = y;
    }
    total
}

/// Best complete sequence by enumeration: ends in EOS or reaches `max_len`.
fn exhaustive(m: &Seq2SeqModel, src: &[usize], max_len: usize) -> (Vec<usize>, f64) {
    let enc = m.encode(src).expect("encode");
    let (v, eos) = (m.config().tgt_vocab, m.config().eos);
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        for y in 0..v {
            let mut seq: Vec<usize> = prefix.clone();
            seq.push(y);
            if y == eos || seq.len() == max_len {
                let lp = chained_logprob(m, &enc, &seq);
                if lp > best.1 {
                    if y == eos {
                        seq.pop();
                    }
                    best = (seq, lp);
                }
            } else {
                stack.push(seq);
            }
        }
    }
    best
}

fn c7_beam() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut oracle_hits, mut greedy_hits) = (0, 0);
    for seed in 0..20u64 {
        let config = Seq2SeqConfig {
            cell: CellKind::Lstm,
            src_vocab: 5,
            tgt_vocab: 3,
            embed_dim: 2,
            hidden: 3,
            bos: 0,
            eos: 2,
            ..Seq2SeqConfig::default()
        };
        let m = Seq2SeqModel::new(config, InitScheme::Uniform(2.0), seed).map_err(|e| e.to_string())?;
        let src: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..5)).collect();
        let (tokens, lp) = exhaustive(&m, &src, 3);
        let wide = m.beam_search(&src, 27, 3).map_err(|e| e.to_string())?;
        if wide[0].tokens == tokens && (wide[0].log_prob - lp).abs() < 1e-12 {
            oracle_hits += 1;
        }
        let greedy = m.greedy(&src, 3).map_err(|e| e.to_string())?;
        let narrow = m.beam_search(&src, 1, 3).map_err(|e| e.to_string())?;
        if narrow[0].tokens == greedy.tokens && (narrow[0].log_prob - greedy.log_prob).abs() < 1e-12 {
            greedy_hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        oracle_hits == 20 && greedy_hits == 20 && secs < 10.0,
        format!("K=27 matches exhaustive {oracle_hits}/20, K=1 matches greedy {greedy_hits}/20, {secs:.2}s"),
    )
}

fn c8_lm_normalization() -> Outcome {
    let mut worst = 0.0f64;
    let mut models = 0;
    for cell in [CellKind::Rnn, CellKind::Lstm, CellKind::Gru] {
        for v in 2..=3 {
            for seed in 0..3u64 {
                let config = LmConfig {
                    cell,
                    vocab_size: v,
                    embed_dim: 2,
                    hidden: 3,
                    bos: 0,
                    ..LmConfig::default()
                };
                let lm = LanguageModel::new(config, InitScheme::Uniform(1.5), seed).map_err(|e| e.to_string())?;
                models += 1;
                for t in 1..=3u32 {
                    let mut mass = 0.0;
                    for code in 0..v.pow(t) {
                        let seq: Vec<usize> = (0..t).map(|k| (code / v.pow(k)) % v).collect();
                        mass += lm.sequence_logprob(&seq).map_err(|e| e.to_string())?.exp();
                    }
                    worst = worst.max((mass - 1.0).abs());
                }
            }
        }
    }
    check(worst <= 1e-6, format!("{models} models, T=1..3, max |mass - 1| {worst:.1e}"))
}

struct SentimentRun {
    vocab: Vocabulary,
    untrained: CnnModel,
    trained: CnnModel,
    train: Vec<EncodedDoc>,
    train_accuracy: f64,
    epochs: usize,
    seconds: f64,
}

const SEQ_LEN: usize = 16;

fn sentiment_run() -> SentimentRun {
    let docs = sentiment_corpus(&SentimentSpec::default());
    let vocab = Vocabulary::build(docs.iter().map(|d| &d.tokens), None, Specials::default()).expect("vocab");
    let train: Vec<EncodedDoc> = docs
        .iter()
        .map(|d| {
            let mut e = text::encode(&d.tokens, &vocab, SEQ_LEN, Truncation::Head);
            e.label = Some(d.label);
            e
        })
        .collect();
    let config = CnnConfig {
        vocab_size: vocab.size(),
        embed_dim: 50,
        seq_len: SEQ_LEN,
        ..CnnConfig::default()
    };
    let untrained = CnnModel::new(config, None, InitScheme::GlorotUniform, 0).expect("model");
    let mut trained = untrained.clone();
    let tc = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let log = fit(&mut trained, &train, &[], &tc, |m, e, g| m.loss_and_grad(e, g), |m, e| m.loss(e), |_, _, _| {}).expect("fit");
    let seconds = start.elapsed().as_secs_f64();
    let correct = train
        .iter()
        .filter(|e| trained.forward(e).expect("forward").predicted() == e.label.unwrap())
        .count();
    SentimentRun {
        vocab,
        untrained,
        trained,
        train_accuracy: correct as f64 / train.len() as f64,
        epochs: log.rows.len(),
        seconds,
        train,
    }
}

thread_local! {
    static SENTIMENT: std::cell::OnceCell<SentimentRun> = const { std::cell::OnceCell::new() };
}

fn with_sentiment<R>(f: impl FnOnce(&SentimentRun) -> R) -> R {
    SENTIMENT.with(|cell| f(cell.get_or_init(sentiment_run)))
}

fn c9a_cnn() -> Outcome {
    with_sentiment(|run| {
        let test = sentiment_corpus(&SentimentSpec {
            docs: 200,
            seed: 1,
            ..SentimentSpec::default()
        });
        let (mut sal_hits, mut region_hits) = (0, 0);
        for (i, d) in test.iter().enumerate() {
            let enc = text::encode(&d.tokens, &run.vocab, SEQ_LEN, Truncation::Head);
            let map = saliency(&run.trained, &enc, i, SaliencyReduction::L2).map_err(|e| e.to_string())?;
            if map.argmax() == Some(d.planted) {
                sal_hits += 1;
            }
            let top = predictive_regions(&run.trained, &enc, i, &run.vocab, 1).map_err(|e| e.to_string())?;
            if top.first().is_some_and(|r| r.start <= d.planted && d.planted < r.start + r.h) {
                region_hits += 1;
            }
        }
        let n = test.len() as f64;
        let (sal, reg) = (sal_hits as f64 / n, region_hits as f64 / n);
        check(
            run.train_accuracy >= 0.95 && run.epochs <= 20 && run.seconds < 60.0 && sal >= 0.9 && reg >= 0.9,
            format!(
                "9a: train acc {:.3} after {} epochs in {:.1}s, saliency on planted {sal:.3}, top region on planted {reg:.3}",
                run.train_accuracy, run.epochs, run.seconds
            ),
        )
    })
}

fn c9b_copy() -> Outcome {
    let start = Instant::now();
    let pairs = copy_task(3000, 20, 10, 0);
    let held_out = copy_task(200, 20, 10, 1);
    let symbols: Vec<String> = (0..20).map(|i| format!("t{i}")).collect();
    let src_vocab = Vocabulary::from_tokens(symbols.clone(), Specials::default());
    let tgt_vocab = Vocabulary::from_tokens(symbols, Specials { bos_eos: true });
    let eos = tgt_vocab.eos().expect("eos");
    let encode = |(s, t): &(Vec<String>, Vec<String>)| {
        let mut tgt = text::encode_unpadded(t, &tgt_vocab);
        tgt.push(eos);
        (text::encode_unpadded(s, &src_vocab), tgt)
    };
    let train: Vec<(Vec<usize>, Vec<usize>)> = pairs.iter().map(encode).collect();
    let test: Vec<(Vec<usize>, Vec<usize>)> = held_out.iter().map(encode).collect();
    let config = Seq2SeqConfig {
        cell: CellKind::Lstm,
        src_vocab: src_vocab.rows(),
        tgt_vocab: tgt_vocab.rows(),
        embed_dim: 16,
        hidden: 32,
        bidirectional: true,
        attention: AttentionMode::Global,
        score: ScoreKind::Dot,
        bos: tgt_vocab.bos().expect("bos"),
        eos,
        ..Seq2SeqConfig::default()
    };
    let mut model = Seq2SeqModel::new(config, InitScheme::GlorotUniform, 0).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        learning_rate: 0.005,
        epochs: 4,
        ..TrainConfig::default()
    };
    fit(&mut model, &train, &[], &tc, |m, (s, t), g| m.loss_and_grad(s, t, g), |m, (s, t)| m.loss(s, t), |_, _, _| {})
        .map_err(|e| e.to_string())?;
    let (mut correct, mut tokens, mut diagonal, mut steps) = (0, 0, 0, 0);
    for (src, tgt) in &test {
        let out = model.greedy(src, tgt.len() + 2).map_err(|e| e.to_string())?;
        let mut produced = out.tokens.clone();
        if out.finished {
            produced.push(eos);
        }
        for (i, y) in tgt.iter().enumerate() {
            tokens += 1;
            if produced.get(i) == Some(y) {
                correct += 1;
            }
        }
        for (t, step) in out.trace.steps.iter().enumerate().take(src.len()) {
            steps += 1;
            if step.argmax() == t {
                diagonal += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let acc = correct as f64 / tokens as f64;
    let diag = diagonal as f64 / steps.max(1) as f64;
    check(
        acc >= 0.95 && diag >= 0.9 && secs < 300.0,
        format!("9b: held-out greedy token acc {acc:.3}, diagonal argmax {diag:.3}, {secs:.1}s"),
    )
}

fn c9c_han() -> Outcome {
    let encode_docs = |docs: &[neurotext::synth::TwoSentenceDoc], vocab: &Vocabulary| -> Vec<(Vec<Vec<usize>>, usize, usize)> {
        docs.iter()
            .map(|d| {
                let sents = text::split_sentences(&d.text()).iter().map(|s| text::encode_unpadded(s, vocab)).collect();
                (sents, d.label, d.signal)
            })
            .collect()
    };
    let docs = two_sentence_corpus(400, 30, 6, 0);
    let sentences: Vec<Vec<String>> = docs.iter().flat_map(|d| text::split_sentences(&d.text())).collect();
    let vocab = Vocabulary::build(&sentences, None, Specials::default()).map_err(|e| e.to_string())?;
    let train = encode_docs(&docs, &vocab);
    let test = encode_docs(&two_sentence_corpus(200, 30, 6, 1), &vocab);
    let config = HanConfig {
        vocab_size: vocab.rows(),
        ..HanConfig::default()
    };
    let mut model = HanModel::new(config, InitScheme::GlorotUniform, 0).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        learning_rate: 0.01,
        epochs: 40,
        ..TrainConfig::default()
    };
    fit(&mut model, &train, &[], &tc, |m, (d, y, _), g| m.loss_and_grad(d, *y, g), |m, (d, y, _)| m.loss(d, *y), |_, _, _| {})
        .map_err(|e| e.to_string())?;
    let mut alphas = Vec::new();
    let mut correct = 0;
    for (doc, y, signal) in &test {
        let out = model.forward(doc).map_err(|e| e.to_string())?;
        let k = out.kept.iter().position(|&s| s == *signal).ok_or("signal sentence dropped")?;
        alphas.push(out.sentence_alpha[k]);
        correct += usize::from(out.predicted() == *y);
    }
    let above = alphas.iter().filter(|a| **a > 0.7).count();
    let min = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
    check(
        above == alphas.len(),
        format!(
            "9c: signal-sentence alpha > 0.7 on {above}/{} held-out docs (mean {mean:.3}, min {min:.3}), accuracy {:.3}",
            alphas.len(),
            correct as f64 / test.len() as f64
        ),
    )
}

fn c9_learning() -> Outcome {
    let parts = [c9a_cnn(), c9b_copy(), c9c_han()];
    let ok = parts.iter().all(Result::is_ok);
    let text: Vec<String> = parts.into_iter().map(|p| p.unwrap_or_else(|e| format!("FAILED {e}"))).collect();
    check(ok, text.join("; "))
}

fn c10_silhouette() -> Outcome {
    with_sentiment(|run| {
        let labels: Vec<usize> = run.train.iter().map(|d| d.label.unwrap()).collect();
        let score = |m: &CnnModel| -> Result<f64, String> {
            let emb = doc_embeddings(m, &run.train).map_err(|e| e.to_string())?;
            let proj = project_2d(&emb).map_err(|e| e.to_string())?;
            silhouette(&proj.coords, &labels).map_err(|e| e.to_string())
        };
        let (before, after) = (score(&run.untrained)?, score(&run.trained)?);
        check(after > before, format!("untrained {before:.3} -> trained {after:.3}"))
    })
}

fn neurotext(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_neurotext"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`neurotext {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn c11_reproducible() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    neurotext(&["synth", "sentiment", "--out", &p("sent.tsv"), "--n", "80"])?;
    neurotext(&["synth", "copy", "--out", &p("copy.tsv"), "--n", "40", "--vocab", "8", "--max-len", "5"])?;
    neurotext(&["synth", "two-sentence", "--out", &p("two.tsv"), "--n", "40"])?;
    let lines: String = sentiment_corpus(&SentimentSpec {
        docs: 40,
        ..SentimentSpec::default()
    })
    .iter()
    .map(|d| d.tokens.join(" ") + "\n")
    .collect();
    std::fs::write(dir.path().join("lm.txt"), lines).map_err(|e| e.to_string())?;

    let runs: [(&str, String, &[&str]); 6] = [
        ("cnn", p("sent.tsv"), &["--d", "8", "--nf", "4", "--s", "16"]),
        ("rnn-lm", p("lm.txt"), &["--hidden", "8"]),
        ("lstm-lm", p("lm.txt"), &["--hidden", "8"]),
        ("gru-lm", p("lm.txt"), &["--hidden", "8", "--char-level"]),
        ("seq2seq", p("copy.tsv"), &["--hidden", "8", "--attention", "local-predictive", "--score", "concat"]),
        ("han", p("two.tsv"), &["--word-hidden", "6", "--sentence-hidden", "6"]),
    ];
    let mut identical = Vec::new();
    let mut ok = true;
    for (model, corpus, extra) in &runs {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let out = p(&format!("{model}-{rep}"));
            let mut args = vec!["train", "--model", model, "--corpus", corpus, "--out", &out, "--epochs", "2", "--seed", "7"];
            args.extend_from_slice(extra);
            neurotext(&args)?;
            bytes.push(std::fs::read(Path::new(&out).join("model.ckpt")).map_err(|e| e.to_string())?);
        }
        let same = bytes[0] == bytes[1];
        ok &= same;
        identical.push(format!("{model} {}", if same { "identical" } else { "DIFFERENT" }));
    }
    check(ok, identical.join(", "))
}

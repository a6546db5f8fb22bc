use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::Result;
use neurotext::han::write_attention_csv;
use neurotext::math;
use neurotext::text::{read_labeled_corpus, read_lines, read_parallel_corpus};
use neurotext::Error;

use crate::args::EvalArgs;
use crate::runs::{self, indexed_path, Model};
use crate::{config, data, require_file, UsageError};

pub fn run(args: EvalArgs) -> Result<()> {
    let corpus = args.corpus.clone().ok_or_else(|| UsageError("--corpus is required".into()))?;
    require_file(&corpus, "corpus")?;
    let loaded = runs::load(&args.paths)?;
    let model = Model::from_checkpoint(&loaded.checkpoint)?;
    if args.dump_han_attention.is_some() && !matches!(model, Model::Han(_)) {
        return Err(Error::Incompatible(format!("--dump-han-attention needs a han model, not {}", model.kind())).into());
    }
    let workers = args.eval_workers;

    let metrics: Vec<(&str, f64)> = match &model {
        Model::Cnn(m) => {
            let docs = read_labeled_corpus(&corpus)?;
            let encoded = data::encode_labeled(&docs, loaded.vocab(), m.config().seq_len, loaded.truncation);
            let scored = data::par_map(&encoded, workers, |d| {
                let cache = m.forward(d)?;
                let label = d.label.expect("labeled corpus");
                let (loss, _) = m.loss_from_cache(&cache, label)?;
                Ok((loss, cache.predicted() == label))
            })?;
            classification(&scored)
        }
        Model::Han(m) => {
            let docs = data::encode_hierarchical(&read_labeled_corpus(&corpus)?, loaded.vocab());
            let outputs = data::par_map(&docs, workers, |(doc, _)| Ok(m.forward(doc)?))?;
            let scored: Vec<(f64, bool)> = outputs
                .iter()
                .zip(&docs)
                .map(|(o, (_, y))| {
                    let lp = o.log_probs.get(*y).copied().ok_or_else(|| Error::Contract(format!("label {y} outside the model's classes")))?;
                    Ok((-lp, o.predicted() == *y))
                })
                .collect::<Result<_>>()?;
            if let Some(path) = &args.dump_han_attention {
                let vocab = loaded.vocab();
                for (i, (out, (doc, _))) in outputs.iter().zip(&docs).enumerate() {
                    let file = File::create(indexed_path(path, i, docs.len()))?;
                    write_attention_csv(BufWriter::new(file), out, |s, w| vocab.token(doc[s][w]).unwrap_or("").to_string(), true)?;
                }
            }
            classification(&scored)
        }
        Model::Lm(m) => {
            let seqs = data::encode_sequences(&read_lines(&corpus)?, loaded.vocab(), loaded.char_level);
            let scored = data::par_map(&seqs, workers, |s| Ok(m.sequence_logprob(s)?))?;
            let tokens: usize = seqs.iter().map(Vec::len).sum();
            let nll = -scored.iter().sum::<f64>() / tokens.max(1) as f64;
            vec![
                ("sequences", seqs.len() as f64),
                ("tokens", tokens as f64),
                ("mean_nll", nll),
                ("perplexity", nll.exp()),
            ]
        }
        Model::Seq2seq(m) => {
            let pairs = data::encode_pairs(&read_parallel_corpus(&corpus)?, loaded.src_vocab(), loaded.tgt_vocab());
            let scored = data::par_map(&pairs, workers, |(src, tgt)| {
                let enc = m.encode(src)?;
                let mut state = enc.init.clone();
                let mut prev = m.config().bos;
                let (mut lp, mut hits) = (0.0, 0usize);
                for (t, &y) in tgt.iter().enumerate() {
                    let step = m.decode_step(&enc, prev, &state, t + 1)?;
                    lp += step.log_probs[y];
                    hits += (math::argmax(&step.log_probs) == y) as usize;
                    state = step.state;
                    prev = y;
                }
                Ok((lp, hits, tgt.len()))
            })?;
            let tokens: usize = scored.iter().map(|s| s.2).sum();
            let nll = -scored.iter().map(|s| s.0).sum::<f64>() / tokens.max(1) as f64;
            let hits: usize = scored.iter().map(|s| s.1).sum();
            vec![
                ("pairs", pairs.len() as f64),
                ("tokens", tokens as f64),
                ("token_accuracy", hits as f64 / tokens.max(1) as f64),
                ("mean_nll", nll),
                ("perplexity", nll.exp()),
            ]
        }
    };

    for (name, value) in &metrics {
        say!("{name}: {value}");
    }
    if let Some(out) = &args.out {
        runs::create_dir(out)?;
        let mut w = BufWriter::new(File::create(out.join("metrics.csv"))?);
        writeln!(w, "metric,value")?;
        for (name, value) in &metrics {
            writeln!(w, "{name},{value}")?;
        }
        config::write_resolved(&args, &out.join("eval.toml"))?;
    }
    Ok(())
}

fn classification(scored: &[(f64, bool)]) -> Vec<(&'static str, f64)> {
    let n = scored.len().max(1) as f64;
    vec![
        ("documents", scored.len() as f64),
        ("accuracy", scored.iter().filter(|s| s.1).count() as f64 / n),
        ("log_loss", scored.iter().map(|s| s.0).sum::<f64>() / n),
    ]
}

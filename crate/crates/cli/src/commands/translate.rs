use std::fs::{self, File};
use std::io::BufWriter;

use anyhow::Result;
use neurotext::plot::attention_heatmap_svg;
use neurotext::seq2seq::{AttentionTrace, Seq2SeqModel};
use neurotext::text::{self, encode_unpadded, read_lines, Vocabulary};
use neurotext::Error;

use crate::args::TranslateArgs;
use crate::runs::{self, indexed_path};
use crate::{require_file, UsageError};

pub fn run(args: TranslateArgs) -> Result<()> {
    let input = args.input.clone().ok_or_else(|| UsageError("--input is required".into()))?;
    require_file(&input, "input")?;
    if args.beam == 0 {
        return Err(UsageError("--beam must be at least 1".into()).into());
    }
    let mut loaded = runs::load(&args.paths)?;
    if loaded.checkpoint.kind != neurotext::seq2seq::CHECKPOINT_KIND {
        return Err(Error::Incompatible(format!("translate needs a seq2seq model, found `{}`", loaded.checkpoint.kind)).into());
    }
    loaded.checkpoint.config["length_penalty"] = args.length_penalty.into();
    let model = Seq2SeqModel::from_checkpoint(&loaded.checkpoint)?;
    let (src_vocab, tgt_vocab) = (loaded.src_vocab(), loaded.tgt_vocab());

    let lines = read_lines(&input)?;
    let mut outputs = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let source_text = line.split('\t').next().unwrap_or("");
        let source_tokens = text::tokenize(source_text);
        if source_tokens.is_empty() {
            log::warn!("line {}: empty source sentence", i + 1);
            outputs.push(String::new());
            continue;
        }
        let source = encode_unpadded(&source_tokens, src_vocab);
        let (tokens, finished, trace) = if args.greedy {
            let t = model.greedy(&source, args.max_len)?;
            (t.tokens, t.finished, t.trace)
        } else {
            let best = model.beam_search(&source, args.beam, args.max_len)?.into_iter().next().expect("beam keeps a hypothesis");
            (best.tokens, best.finished, best.trace)
        };
        let words = words(&tokens, tgt_vocab);
        if let Some(path) = &args.dump_attention {
            let mut labels = words.clone();
            if finished {
                labels.push(text::EOS_TOKEN.to_string());
            }
            dump(&trace, &source_tokens, &labels, &indexed_path(path, i, lines.len()))?;
        }
        outputs.push(words.join(" "));
    }

    for line in &outputs {
        say!("{line}");
    }
    if let Some(path) = &args.output {
        let mut text = outputs.join("\n");
        text.push('\n');
        fs::write(path, text)?;
    }
    Ok(())
}

fn words(tokens: &[usize], vocab: &Vocabulary) -> Vec<String> {
    tokens.iter().filter_map(|&t| vocab.token(t)).map(str::to_string).collect()
}

/// Alignment CSV at `path` and its heatmap next to it.
pub fn dump(trace: &AttentionTrace, source: &[String], target: &[String], path: &std::path::Path) -> Result<()> {
    trace.write_csv(BufWriter::new(File::create(path)?), true)?;
    fs::write(path.with_extension("svg"), attention_heatmap_svg(&trace.dense(), source, target))?;
    Ok(())
}

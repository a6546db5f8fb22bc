use std::fs;

use anyhow::Result;
use neurotext::synth::{copy_task, sentiment_corpus, two_sentence_corpus, SentimentSpec};

use crate::args::{SynthArgs, SynthTask};
use crate::UsageError;

pub fn run(args: SynthArgs) -> Result<()> {
    if args.task == SynthTask::Sentiment && (args.min_len == 0 || args.min_len > args.max_len) {
        return Err(UsageError(format!("need 1 ≤ min-len ≤ max-len, got {}..{}", args.min_len, args.max_len)).into());
    }
    let lines: Vec<String> = match args.task {
        SynthTask::Sentiment => sentiment_corpus(&SentimentSpec {
            docs: args.n,
            fillers: args.vocab,
            min_len: args.min_len,
            max_len: args.max_len,
            seed: args.seed,
        })
        .iter()
        .map(|d| format!("{}\t{}", d.label, d.tokens.join(" ")))
        .collect(),
        SynthTask::Copy => copy_task(args.n, args.vocab, args.max_len, args.seed)
            .iter()
            .map(|(s, t)| format!("{}\t{}", s.join(" "), t.join(" ")))
            .collect(),
        SynthTask::TwoSentence => two_sentence_corpus(args.n, args.vocab, args.max_len, args.seed)
            .iter()
            .map(|d| format!("{}\t{}", d.label, d.text()))
            .collect(),
    };
    let mut text = lines.join("\n");
    text.push('\n');
    match &args.out {
        Some(path) => {
            fs::write(path, text)?;
            say!("wrote {} lines to {}", lines.len(), path.display());
        }
        None => {
            use std::io::Write as _;
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(())
}

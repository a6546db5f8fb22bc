use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use neurotext::cnn::{CnnConfig, CnnModel};
use neurotext::han::{HanConfig, HanModel};
use neurotext::recurrent::{CellKind, InputEncoding, LanguageModel, LmConfig};
use neurotext::seq2seq::{Seq2SeqConfig, Seq2SeqModel};
use neurotext::text::{self, load_pretrained, read_labeled_corpus, read_lines, read_parallel_corpus, Specials, Vocabulary};
use neurotext::train::{fit, Checkpoint, HasParams, TrainConfig, TrainLog};

use crate::args::{ModelKind, TrainArgs};
use crate::runs::{self, pair_hash, CHECKPOINT_FILE, CONFIG_FILE, LOG_FILE, SRC_VOCAB_FILE, TGT_VOCAB_FILE, VOCAB_FILE};
use crate::{config, data, require_file, UsageError};

pub fn run(args: TrainArgs) -> Result<()> {
    let kind = args.model.ok_or_else(|| UsageError("--model is required".into()))?;
    let corpus = args.corpus.clone().ok_or_else(|| UsageError("--corpus is required".into()))?;
    require_file(&corpus, "corpus")?;
    if let Some(v) = &args.val_corpus {
        require_file(v, "validation corpus")?;
    }
    if let Some(e) = &args.embeddings {
        require_file(e, "embeddings file")?;
    }
    let train_config = TrainConfig {
        optimizer: args.optimizer,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        epochs: args.epochs,
        clip_norm: (args.clip_norm > 0.0).then_some(args.clip_norm),
        seed: args.seed,
        init: args.init,
        patience: args.patience,
    };
    train_config.validate()?;
    runs::create_dir(&args.out)?;

    let (checkpoint, log) = match kind {
        ModelKind::Cnn => train_cnn(&args, &corpus, &train_config)?,
        ModelKind::Han => train_han(&args, &corpus, &train_config)?,
        ModelKind::Seq2seq => train_seq2seq(&args, &corpus, &train_config)?,
        lm => train_lm(&args, lm.lm_cell().expect("language model"), &corpus, &train_config)?,
    };

    let out = &args.out;
    checkpoint.save(&out.join(CHECKPOINT_FILE))?;
    log.write_csv(BufWriter::new(File::create(out.join(LOG_FILE))?))?;
    config::write_resolved(&args, &out.join(CONFIG_FILE))?;
    if let Some(last) = log.last() {
        match last.val_loss {
            Some(v) => say!("epoch {}: train loss {:.6}, val loss {v:.6}", last.epoch, last.train_loss),
            None => say!("epoch {}: train loss {:.6}", last.epoch, last.train_loss),
        }
    }
    say!("parameters: {}", checkpoint.param_scalars());
    say!("wrote {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn labeled(args: &TrainArgs, corpus: &Path) -> Result<(Vec<text::LabeledText>, Vec<text::LabeledText>)> {
    let docs = read_labeled_corpus(corpus)?;
    match &args.val_corpus {
        Some(v) => Ok((docs, read_labeled_corpus(v)?)),
        None => data::split(docs, args.val_fraction, args.seed),
    }
}

fn train_cnn(args: &TrainArgs, corpus: &Path, tc: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let (train_docs, val_docs) = labeled(args, corpus)?;
    let tokenized: Vec<Vec<String>> = train_docs.iter().map(|d| text::tokenize(&d.text)).collect();
    let vocab = Vocabulary::build(&tokenized, args.max_vocab, Specials::default())?;
    let max_label = train_docs.iter().chain(&val_docs).map(|d| d.label).max().unwrap_or(0);
    let classes = if max_label <= 1 && !args.softmax { 1 } else { (max_label + 1).max(2) };
    let d = args.d.unwrap_or(CnnConfig::default().embed_dim);
    let cnn_config = CnnConfig {
        vocab_size: vocab.size(),
        embed_dim: d,
        seq_len: args.s,
        regions: args.regions.clone(),
        filters: args.nf,
        k: args.k,
        stride: args.stride,
        activation: args.activation,
        classes,
        bias_after_activation: args.bias_after_activation,
        static_embeddings: args.static_embeddings,
    };
    cnn_config.validate()?;
    let table = match &args.embeddings {
        Some(path) => {
            let (table, found) = load_pretrained(path, &vocab, d, !args.static_embeddings, args.seed)?;
            log::info!("{found} of {} vocabulary rows taken from {}", vocab.size(), path.display());
            Some(table)
        }
        None => None,
    };
    let mut model = CnnModel::new(cnn_config, table.as_ref(), tc.init, args.seed)?;
    for b in model.branches() {
        say!("region {}: {} filters, feature map length {}", b.h, b.filters, model.config().feature_map_len(b.h));
    }
    say!("pooled vector length: {}", model.config().pooled_len());

    let train = data::encode_labeled(&train_docs, &vocab, args.s, args.truncation);
    let val = data::encode_labeled(&val_docs, &vocab, args.s, args.truncation);
    let log = fit(&mut model, &train, &val, tc, |m, e, g| m.loss_and_grad(e, g), |m, e| m.loss(e), |_, _, _| {})?;
    let correct = train
        .iter()
        .map(|e| Ok((model.forward(e)?.predicted() == e.label.unwrap_or(usize::MAX)) as usize))
        .sum::<Result<usize>>()?;
    say!("train accuracy: {:.4}", correct as f64 / train.len() as f64);
    vocab.save(&args.out.join(VOCAB_FILE))?;
    Ok((model.to_checkpoint(Some(vocab.hash())), log))
}

fn train_han(args: &TrainArgs, corpus: &Path, tc: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let (train_docs, val_docs) = labeled(args, corpus)?;
    let sentences: Vec<Vec<String>> = train_docs.iter().flat_map(|d| text::split_sentences(&d.text)).collect();
    let vocab = Vocabulary::build(&sentences, args.max_vocab, Specials::default())?;
    let max_label = train_docs.iter().chain(&val_docs).map(|d| d.label).max().unwrap_or(0);
    let defaults = HanConfig::default();
    let han_config = HanConfig {
        vocab_size: vocab.rows(),
        embed_dim: args.d.unwrap_or(defaults.embed_dim),
        word_hidden: args.word_hidden,
        sentence_hidden: args.sentence_hidden,
        attention_dim: args.attention_dim,
        classes: (max_label + 1).max(2),
        attention_bias: !args.no_attention_bias,
        cell: args.cell.unwrap_or(defaults.cell),
        layers: args.layers,
    };
    let mut model = HanModel::new(han_config, tc.init, args.seed)?;
    let train = data::encode_hierarchical(&train_docs, &vocab);
    let val = data::encode_hierarchical(&val_docs, &vocab);
    let log = fit(
        &mut model,
        &train,
        &val,
        tc,
        |m, (doc, y), g| m.loss_and_grad(doc, *y, g),
        |m, (doc, y)| m.loss(doc, *y),
        |_, _, _| {},
    )?;
    let correct = train
        .iter()
        .map(|(doc, y)| Ok((model.predict(doc)? == *y) as usize))
        .sum::<Result<usize>>()?;
    say!("train accuracy: {:.4}", correct as f64 / train.len() as f64);
    vocab.save(&args.out.join(VOCAB_FILE))?;
    Ok((model.to_checkpoint(Some(vocab.hash())), log))
}

fn train_lm(args: &TrainArgs, cell: CellKind, corpus: &Path, tc: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let lines = read_lines(corpus)?;
    let (train_lines, val_lines) = match &args.val_corpus {
        Some(v) => (lines, read_lines(v)?),
        None => data::split(lines, args.val_fraction, args.seed)?,
    };
    let tokenized: Vec<Vec<String>> = train_lines.iter().map(|l| data::tokens(l, args.char_level)).collect();
    let vocab = Vocabulary::build(&tokenized, args.max_vocab, Specials { bos_eos: true })?;
    let defaults = LmConfig::default();
    let lm_config = LmConfig {
        cell,
        vocab_size: vocab.rows(),
        embed_dim: args.d.unwrap_or(defaults.embed_dim),
        hidden: args.hidden.unwrap_or(defaults.hidden),
        layers: args.layers,
        input: if args.one_hot { InputEncoding::OneHot } else { InputEncoding::Embedded },
        bos: vocab.bos().expect("bos reserved"),
        eos: vocab.eos(),
        head_bias: !args.no_head_bias,
        bptt_truncation: args.bptt,
    };
    let mut model = LanguageModel::new(lm_config, tc.init, args.seed)?;
    let train = data::encode_sequences(&train_lines, &vocab, args.char_level);
    let val = data::encode_sequences(&val_lines, &vocab, args.char_level);
    let log = fit(&mut model, &train, &val, tc, |m, s, g| m.loss_and_grad(s, g), |m, s| m.loss(s), |_, _, _| {})?;
    vocab.save(&args.out.join(VOCAB_FILE))?;
    Ok((model.to_checkpoint(Some(vocab.hash())), log))
}

fn train_seq2seq(args: &TrainArgs, corpus: &Path, tc: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let pairs = read_parallel_corpus(corpus)?;
    let (train_pairs, val_pairs) = match &args.val_corpus {
        Some(v) => (pairs, read_parallel_corpus(v)?),
        None => data::split(pairs, args.val_fraction, args.seed)?,
    };
    let src_tokens: Vec<Vec<String>> = train_pairs.iter().map(|(s, _)| text::tokenize(s)).collect();
    let tgt_tokens: Vec<Vec<String>> = train_pairs.iter().map(|(_, t)| text::tokenize(t)).collect();
    let src_vocab = Vocabulary::build(&src_tokens, args.max_vocab, Specials::default())?;
    let tgt_vocab = Vocabulary::build(&tgt_tokens, args.max_vocab, Specials { bos_eos: true })?;
    let defaults = Seq2SeqConfig::default();
    let s2s_config = Seq2SeqConfig {
        cell: args.cell.unwrap_or(defaults.cell),
        src_vocab: src_vocab.rows(),
        tgt_vocab: tgt_vocab.rows(),
        embed_dim: args.d.unwrap_or(defaults.embed_dim),
        hidden: args.hidden.unwrap_or(defaults.hidden),
        decoder_hidden: args.decoder_hidden,
        layers: args.layers,
        bidirectional: args.bidirectional,
        attention: args.attention,
        score: args.score,
        window: args.window,
        gaussian: !args.no_gaussian,
        attention_dim: args.attention_dim,
        bos: tgt_vocab.bos().expect("bos reserved"),
        eos: tgt_vocab.eos().expect("eos reserved"),
        out_bias: args.out_bias,
        length_penalty: 0.0,
    };
    let mut model = Seq2SeqModel::new(s2s_config, tc.init, args.seed)?;
    let train = data::encode_pairs(&train_pairs, &src_vocab, &tgt_vocab);
    let val = data::encode_pairs(&val_pairs, &src_vocab, &tgt_vocab);
    let log = fit(
        &mut model,
        &train,
        &val,
        tc,
        |m, (s, t), g| m.loss_and_grad(s, t, g),
        |m, (s, t)| m.loss(s, t),
        |_, _, _| {},
    )
    .context("training seq2seq")?;
    log::debug!("{} trainable scalars", model.params().updatable_scalars());
    src_vocab.save(&args.out.join(SRC_VOCAB_FILE))?;
    tgt_vocab.save(&args.out.join(TGT_VOCAB_FILE))?;
    Ok((model.to_checkpoint(Some(pair_hash(&src_vocab, &tgt_vocab))), log))
}

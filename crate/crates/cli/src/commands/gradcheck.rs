//! Desk-scale gradient checks of every model family.

use anyhow::{bail, Result};
use neurotext::cnn::{CnnConfig, CnnModel};
use neurotext::han::{HanConfig, HanModel};
use neurotext::math::Activation;
use neurotext::recurrent::{CellKind, LanguageModel, LmConfig};
use neurotext::seq2seq::{Seq2SeqConfig, Seq2SeqModel};
use neurotext::text::EncodedDoc;
use neurotext::train::{grad_check, GradCheckReport, InitScheme};

use crate::args::{GradcheckArgs, ModelKind};
use crate::UsageError;

pub fn run(args: GradcheckArgs) -> Result<()> {
    let kind = args.model.ok_or_else(|| UsageError("--model is required".into()))?;
    let report = check(kind, &args)?;
    say!("{report}");
    if report.passes(args.tolerance) {
        say!("PASS: max relative error {:.3e} < {:.1e}", report.max_rel_error, args.tolerance);
        Ok(())
    } else {
        bail!("max relative error {:.3e} exceeds {:.1e}", report.max_rel_error, args.tolerance)
    }
}

pub fn check(kind: ModelKind, args: &GradcheckArgs) -> Result<GradCheckReport> {
    let (seed, eps) = (args.seed, args.eps);
    Ok(match kind {
        ModelKind::Cnn => {
            let config = CnnConfig {
                vocab_size: 9,
                embed_dim: 4,
                seq_len: 6,
                regions: vec![2, 3],
                filters: 2,
                k: 2,
                activation: Activation::Tanh,
                classes: 3,
                ..CnnConfig::default()
            };
            let mut model = CnnModel::new(config, None, InitScheme::GlorotUniform, seed)?;
            let doc = EncodedDoc {
                indices: vec![3, 1, 7, 9, 2, 0],
                label: Some(2),
                original_length: 5,
            };
            grad_check(&mut model, eps, |m, g| m.loss_and_grad(&doc, g))?
        }
        ModelKind::Han => {
            let config = HanConfig {
                vocab_size: 7,
                embed_dim: 3,
                word_hidden: 3,
                sentence_hidden: 2,
                classes: 3,
                cell: args.cell.unwrap_or(CellKind::Gru),
                ..HanConfig::default()
            };
            let mut model = HanModel::new(config, InitScheme::Uniform(1.0), seed)?;
            let doc = vec![vec![1, 2, 3], vec![4, 5, 6]];
            grad_check(&mut model, eps, |m, g| m.loss_and_grad(&doc, 2, g))?
        }
        ModelKind::Seq2seq => {
            let config = Seq2SeqConfig {
                cell: args.cell.unwrap_or(CellKind::Lstm),
                src_vocab: 6,
                tgt_vocab: 5,
                embed_dim: 3,
                hidden: 3,
                bidirectional: true,
                attention: args.attention,
                score: args.score,
                window: 2,
                attention_dim: Some(4),
                bos: 3,
                eos: 4,
                out_bias: true,
                ..Seq2SeqConfig::default()
            };
            let mut model = Seq2SeqModel::new(config, InitScheme::Uniform(1.0), seed)?;
            let (src, tgt) = (vec![1, 5, 2, 3, 4], vec![2, 1, 0, 4]);
            grad_check(&mut model, eps, |m, g| m.loss_and_grad(&src, &tgt, g))?
        }
        lm => {
            let config = LmConfig {
                cell: lm.lm_cell().expect("language model"),
                vocab_size: 5,
                embed_dim: 3,
                hidden: 4,
                layers: 2,
                bos: 3,
                eos: Some(4),
                ..LmConfig::default()
            };
            let mut model = LanguageModel::new(config, InitScheme::Uniform(0.8), seed)?;
            let tokens = vec![1, 2, 0, 2, 4];
            grad_check(&mut model, eps, |m, g| m.loss_and_grad(&tokens, g))?
        }
    })
}

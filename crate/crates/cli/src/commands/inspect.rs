use std::fs::{self, File};
use std::io::{BufWriter, Write};

use anyhow::Result;
use neurotext::han::write_attention_csv;
use neurotext::interpret::{doc_embeddings, predictive_regions, project_2d, saliency, silhouette, write_regions_csv, write_saliency_csv};
use neurotext::math::Matrix;
use neurotext::plot::{scatter_svg, token_heatmap_svg};
use neurotext::text::{self, encode_unpadded, read_labeled_corpus, read_lines, EncodedDoc, LabeledText, Vocabulary, PAD_TOKEN};
use neurotext::Error;

use crate::args::{InspectArgs, InspectKind};
use crate::commands::translate;
use crate::runs::{self, Loaded, Model};
use crate::{config, data, require_file, UsageError};

pub fn run(args: InspectArgs) -> Result<()> {
    let corpus = args.corpus.clone().ok_or_else(|| UsageError("--corpus is required".into()))?;
    require_file(&corpus, "corpus")?;
    let loaded = runs::load(&args.paths)?;
    let model = Model::from_checkpoint(&loaded.checkpoint)?;
    runs::create_dir(&args.out)?;
    let limit = args.docs.unwrap_or(usize::MAX);

    match (args.kind, &model) {
        (InspectKind::Saliency | InspectKind::Regions, Model::Cnn(m)) => {
            let docs = labeled(&corpus, limit)?;
            let encoded = data::encode_labeled(&docs, loaded.vocab(), m.config().seq_len, loaded.truncation);
            if args.kind == InspectKind::Saliency {
                let mut w = BufWriter::new(File::create(args.out.join("saliency.csv"))?);
                for (i, doc) in encoded.iter().enumerate() {
                    let map = saliency(m, doc, i, args.reduction)?;
                    let tokens = words(doc, loaded.vocab());
                    write_saliency_csv(&mut w, &map, &tokens, i == 0)?;
                    if i < args.max_plots {
                        fs::write(args.out.join(format!("saliency_{i}.svg")), token_heatmap_svg(&tokens, &map.scores))?;
                    }
                }
                w.flush()?;
            } else {
                let mut w = BufWriter::new(File::create(args.out.join("regions.csv"))?);
                for (i, doc) in encoded.iter().enumerate() {
                    let regions = predictive_regions(m, doc, i, loaded.vocab(), args.top_n)?;
                    write_regions_csv(&mut w, &regions, i == 0)?;
                }
                w.flush()?;
            }
        }
        (InspectKind::Embed, Model::Cnn(_) | Model::Han(_)) => {
            let docs = labeled(&corpus, limit)?;
            let (embeddings, labels) = embed(&model, &loaded, &docs)?;
            let projection = project_2d(&embeddings)?;
            let mut w = BufWriter::new(File::create(args.out.join("embed.csv"))?);
            writeln!(w, "doc_id,label,x,y")?;
            for (i, label) in labels.iter().enumerate() {
                writeln!(w, "{i},{label},{},{}", projection.coords.get(i, 0), projection.coords.get(i, 1))?;
            }
            w.flush()?;
            fs::write(args.out.join("embed.svg"), scatter_svg(&projection.coords, &labels, "document embeddings (PCA)"))?;
            let score = silhouette(&projection.coords, &labels)?;
            let mut w = BufWriter::new(File::create(args.out.join("embed_metrics.csv"))?);
            writeln!(w, "metric,value")?;
            writeln!(w, "silhouette,{score}")?;
            writeln!(w, "variance_pc1,{}", projection.variances[0])?;
            writeln!(w, "variance_pc2,{}", projection.variances[1])?;
            w.flush()?;
            say!("silhouette: {score}");
        }
        (InspectKind::Attention, Model::Seq2seq(m)) => {
            let lines: Vec<String> = read_lines(&corpus)?.into_iter().take(limit).collect();
            let (src_vocab, tgt_vocab) = (loaded.src_vocab(), loaded.tgt_vocab());
            for (i, line) in lines.iter().enumerate() {
                let (src_text, tgt_text) = line.split_once('\t').map_or((line.as_str(), None), |(s, t)| (s, Some(t)));
                let source_tokens = text::tokenize(src_text);
                if source_tokens.is_empty() {
                    continue;
                }
                let source = encode_unpadded(&source_tokens, src_vocab);
                let (trace, mut labels) = match tgt_text {
                    Some(t) => {
                        let target_tokens = text::tokenize(t);
                        let mut target = encode_unpadded(&target_tokens, tgt_vocab);
                        target.push(m.config().eos);
                        (m.score_target(&source, &target)?.1, target_tokens)
                    }
                    None => {
                        let t = m.greedy(&source, 2 * source.len() + 10)?;
                        let words = t.tokens.iter().filter_map(|&y| tgt_vocab.token(y)).map(str::to_string).collect();
                        (t.trace, words)
                    }
                };
                labels.push(text::EOS_TOKEN.to_string());
                translate::dump(&trace, &source_tokens, &labels, &args.out.join(format!("attention_{i}.csv")))?;
            }
        }
        (InspectKind::Attention, Model::Han(m)) => {
            let docs = labeled(&corpus, limit)?;
            let vocab = loaded.vocab();
            for (i, (doc, _)) in data::encode_hierarchical(&docs, vocab).iter().enumerate() {
                let out = m.forward(doc)?;
                let file = File::create(args.out.join(format!("han_attention_{i}.csv")))?;
                write_attention_csv(BufWriter::new(file), &out, |s, w| vocab.token(doc[s][w]).unwrap_or("").to_string(), true)?;
                if i < args.max_plots {
                    let importance = neurotext::han::reweighed_word_importance(&out);
                    let tokens: Vec<String> = importance
                        .iter()
                        .map(|r| vocab.token(doc[r.sentence][r.position]).unwrap_or("").to_string())
                        .collect();
                    let scores: Vec<f64> = importance.iter().map(|r| r.score).collect();
                    fs::write(args.out.join(format!("han_attention_{i}.svg")), token_heatmap_svg(&tokens, &scores))?;
                }
            }
        }
        (kind, model) => {
            return Err(Error::Incompatible(format!("inspect {kind:?} is not available for a {} model", model.kind())).into());
        }
    }
    config::write_resolved(&args, &args.out.join("inspect.toml"))?;
    say!("wrote {}", args.out.display());
    Ok(())
}

fn labeled(path: &std::path::Path, limit: usize) -> Result<Vec<LabeledText>> {
    Ok(read_labeled_corpus(path)?.into_iter().take(limit).collect())
}

/// Token strings of the real (non-padding) positions.
fn words(doc: &EncodedDoc, vocab: &Vocabulary) -> Vec<String> {
    doc.indices[..doc.len()]
        .iter()
        .map(|&t| vocab.token(t).unwrap_or(PAD_TOKEN).to_string())
        .collect()
}

fn embed(model: &Model, loaded: &Loaded, docs: &[LabeledText]) -> Result<(Matrix, Vec<usize>)> {
    match model {
        Model::Cnn(m) => {
            let encoded = data::encode_labeled(docs, loaded.vocab(), m.config().seq_len, loaded.truncation);
            Ok((doc_embeddings(m, &encoded)?, docs.iter().map(|d| d.label).collect()))
        }
        Model::Han(m) => {
            let encoded = data::encode_hierarchical(docs, loaded.vocab());
            let rows = encoded.iter().map(|(d, _)| Ok(m.document_vector(d)?)).collect::<Result<Vec<_>>>()?;
            Ok((Matrix::from_rows(&rows)?, encoded.iter().map(|(_, y)| *y).collect()))
        }
        _ => unreachable!("checked by caller"),
    }
}

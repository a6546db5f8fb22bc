//! Corpus loading and encoding shared by the commands.

use anyhow::Result;
use neurotext::text::{self, encode, encode_unpadded, EncodedDoc, LabeledText, Truncation, Vocabulary};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::UsageError;

pub fn tokens(line: &str, char_level: bool) -> Vec<String> {
    if char_level {
        text::tokenize_chars(line)
    } else {
        text::tokenize(line)
    }
}

/// Seeded shuffle, then the last `fraction` of items become validation data.
pub fn split<T: Clone>(items: Vec<T>, fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(UsageError(format!("validation fraction must be in [0, 1), got {fraction}")).into());
    }
    let n_val = (items.len() as f64 * fraction).floor() as usize;
    if n_val == 0 {
        return Ok((items, Vec::new()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x7a11_da7a));
    let (train, val) = order.split_at(items.len() - n_val);
    Ok((
        train.iter().map(|&i| items[i].clone()).collect(),
        val.iter().map(|&i| items[i].clone()).collect(),
    ))
}

pub fn encode_labeled(docs: &[LabeledText], vocab: &Vocabulary, s: usize, truncation: Truncation) -> Vec<EncodedDoc> {
    docs.iter()
        .map(|d| {
            let mut e = encode(&text::tokenize(&d.text), vocab, s, truncation);
            e.label = Some(d.label);
            e
        })
        .collect()
}

/// Sentences of word indices; documents without any words are dropped.
pub fn encode_hierarchical(docs: &[LabeledText], vocab: &Vocabulary) -> Vec<(Vec<Vec<usize>>, usize)> {
    docs.iter()
        .filter_map(|d| {
            let sentences: Vec<Vec<usize>> = text::split_sentences(&d.text)
                .iter()
                .map(|s| encode_unpadded(s, vocab))
                .collect();
            if sentences.is_empty() {
                log::warn!("skipping document without words: {:?}", d.text);
                None
            } else {
                Some((sentences, d.label))
            }
        })
        .collect()
}

/// Token sequences terminated by EOS; empty lines are dropped.
pub fn encode_sequences(lines: &[String], vocab: &Vocabulary, char_level: bool) -> Vec<Vec<usize>> {
    let eos = vocab.eos().expect("language-model vocabulary has <eos>");
    lines
        .iter()
        .map(|l| tokens(l, char_level))
        .filter(|t| !t.is_empty())
        .map(|t| {
            let mut seq = encode_unpadded(&t, vocab);
            seq.push(eos);
            seq
        })
        .collect()
}

/// Source indices and EOS-terminated target indices.
pub fn encode_pairs(pairs: &[(String, String)], src: &Vocabulary, tgt: &Vocabulary) -> Vec<(Vec<usize>, Vec<usize>)> {
    let eos = tgt.eos().expect("target vocabulary has <eos>");
    pairs
        .iter()
        .filter_map(|(s, t)| {
            let (s, t) = (text::tokenize(s), text::tokenize(t));
            if s.is_empty() {
                log::warn!("skipping pair with empty source");
                return None;
            }
            let mut target = encode_unpadded(&t, tgt);
            target.push(eos);
            Some((encode_unpadded(&s, src), target))
        })
        .collect()
}

/// Order-preserving parallel map over contiguous chunks.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("evaluation worker panicked")?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let items: Vec<usize> = (0..50).collect();
        let (a, b) = split(items.clone(), 0.2, 3).unwrap();
        assert_eq!((a.len(), b.len()), (40, 10));
        let (a2, b2) = split(items, 0.2, 3).unwrap();
        assert_eq!((a.clone(), b.clone()), (a2, b2));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        let out = par_map(&items, 4, |x| Ok(x * x)).unwrap();
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}

//! Synthetic corpora with known answers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::text::LabeledText;

pub const POSITIVE_TOKEN: &str = "great";
pub const NEGATIVE_TOKEN: &str = "awful";

/// Label-neutral filler words.
pub fn filler_words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlantedDoc {
    pub label: usize,
    pub tokens: Vec<String>,
    /// Position of the class token.
    pub planted: usize,
}

impl PlantedDoc {
    pub fn to_labeled(&self) -> LabeledText {
        LabeledText {
            label: self.label,
            text: self.tokens.join(" "),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SentimentSpec {
    pub docs: usize,
    pub fillers: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SentimentSpec {
    fn default() -> Self {
        Self {
            docs: 500,
            fillers: 40,
            min_len: 8,
            max_len: 16,
            seed: 0,
        }
    }
}

/// Balanced binary corpus: every document is filler words plus exactly one
/// class token (`great` for 1, `awful` for 0) at a random position.
pub fn sentiment_corpus(spec: &SentimentSpec) -> Vec<PlantedDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fillers = filler_words(spec.fillers.max(1));
    (0..spec.docs)
        .map(|i| {
            let label = i % 2;
            let len = rng.gen_range(spec.min_len.max(1)..=spec.max_len.max(spec.min_len.max(1)));
            let mut tokens: Vec<String> = (0..len - 1).map(|_| fillers.choose(&mut rng).expect("fillers").clone()).collect();
            let planted = rng.gen_range(0..len);
            let word = if label == 1 { POSITIVE_TOKEN } else { NEGATIVE_TOKEN };
            tokens.insert(planted, word.to_string());
            PlantedDoc { label, tokens, planted }
        })
        .collect()
}

/// Source/target pairs where the target repeats the source. Symbols are
/// `t0 .. t{vocab−1}`, lengths uniform in `1..=max_len`.
pub fn copy_task(pairs: usize, vocab: usize, max_len: usize, seed: u64) -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|_| {
            let len = rng.gen_range(1..=max_len.max(1));
            let src: Vec<String> = (0..len).map(|_| format!("t{}", rng.gen_range(0..vocab.max(1)))).collect();
            (src.clone(), src)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoSentenceDoc {
    pub label: usize,
    pub sentences: Vec<Vec<String>>,
    /// Index of the sentence holding the class token.
    pub signal: usize,
}

impl TwoSentenceDoc {
    pub fn text(&self) -> String {
        self.sentences.iter().map(|s| format!("{}.", s.join(" "))).collect::<Vec<_>>().join(" ")
    }

    pub fn to_labeled(&self) -> LabeledText {
        LabeledText {
            label: self.label,
            text: self.text(),
        }
    }
}

/// Two-sentence documents where only one sentence, chosen at random, carries
/// the class token; the other is pure filler.
pub fn two_sentence_corpus(docs: usize, fillers: usize, sentence_len: usize, seed: u64) -> Vec<TwoSentenceDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = filler_words(fillers.max(1));
    let len = sentence_len.max(2);
    (0..docs)
        .map(|i| {
            let label = i % 2;
            let signal = rng.gen_range(0..2);
            let sentences = (0..2)
                .map(|s| {
                    let mut sent: Vec<String> = (0..len).map(|_| words.choose(&mut rng).expect("fillers").clone()).collect();
                    if s == signal {
                        let pos = rng.gen_range(0..len);
                        sent[pos] = if label == 1 { POSITIVE_TOKEN } else { NEGATIVE_TOKEN }.to_string();
                    }
                    sent
                })
                .collect();
            TwoSentenceDoc { label, sentences, signal }
        })
        .collect()
}

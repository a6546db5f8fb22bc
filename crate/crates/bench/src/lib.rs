//! Fixed-size model and input fixtures shared by the benchmarks.

use neurotext::cnn::{CnnConfig, CnnModel};
use neurotext::recurrent::{CellKind, RecurrentLayer};
use neurotext::seq2seq::{Seq2SeqConfig, Seq2SeqModel};
use neurotext::text::EncodedDoc;
use neurotext::train::{InitScheme, ParamStore};

pub const SEED: u64 = 42;

/// Default-width CNN (`n_f = 100`, regions 2,3,4) over a 5k vocabulary.
pub fn cnn(seq_len: usize, embed_dim: usize) -> CnnModel {
    let config = CnnConfig {
        vocab_size: 5000,
        embed_dim,
        seq_len,
        ..CnnConfig::default()
    };
    CnnModel::new(config, None, InitScheme::GlorotUniform, SEED).expect("valid config")
}

/// Document filling every position with a deterministic index pattern.
pub fn doc(seq_len: usize, vocab: usize) -> EncodedDoc {
    EncodedDoc {
        indices: (0..seq_len).map(|i| 1 + (i * 7919) % vocab).collect(),
        label: Some(1),
        original_length: seq_len,
    }
}

pub fn recurrent_layer(kind: CellKind, input: usize, hidden: usize) -> (ParamStore, RecurrentLayer) {
    let mut store = ParamStore::new();
    let layer = RecurrentLayer::new(&mut store, "bench", kind, input, hidden);
    store.init(InitScheme::GlorotUniform, SEED);
    (store, layer)
}

pub fn seq2seq(config: Seq2SeqConfig) -> Seq2SeqModel {
    Seq2SeqModel::new(config, InitScheme::GlorotUniform, SEED).expect("valid config")
}

/// Source and target index sequences over `1..vocab−2`, avoiding BOS/EOS at the top.
pub fn pair(len: usize, vocab: usize) -> (Vec<usize>, Vec<usize>) {
    let src: Vec<usize> = (0..len).map(|i| 1 + (i * 31) % (vocab - 3)).collect();
    (src.clone(), src)
}

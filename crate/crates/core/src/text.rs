//! Tokenization, vocabularies, fixed-length index encoding and embedding lookup.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Index of the padding pseudo-token. It maps to no real token.
pub const PAD: usize = 0;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";

/// Lowercase, split on Unicode whitespace, trim non-alphanumeric characters
/// from both ends of each piece and drop pieces left empty.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// One token per character, whitespace included (for character-level models).
pub fn tokenize_chars(text: &str) -> Vec<String> {
    text.chars().map(|c| c.to_string()).collect()
}

/// Split on `.`, `!` and `?`, tokenize each piece, drop empty sentences.
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?'])
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specials {
    /// Reserve `<bos>` and `<eos>` (language models and seq2seq).
    pub bos_eos: bool,
}

/// Bijective token ↔ index map over `1..=V`.
///
/// Real tokens occupy `1..=n` by descending frequency (ties lexicographic),
/// then `<bos>`/`<eos>` when requested, and `<unk>` always takes the last
/// index `V`. Index 0 is padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    token_to_index: HashMap<String, usize>,
    unk: usize,
    bos: Option<usize>,
    eos: Option<usize>,
}

impl Vocabulary {
    /// Rank tokens by frequency over `docs` and keep at most `max_size` real tokens.
    pub fn build<'a, I, D>(docs: I, max_size: Option<usize>, specials: Specials) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            for tok in doc {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        if n_docs == 0 || counts.is_empty() {
            return Err(Error::Ingest("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(max) = max_size {
            ranked.truncate(max);
        }
        Ok(Self::from_tokens(
            ranked.into_iter().map(|(t, _)| t.to_string()),
            specials,
        ))
    }

    /// Assign indices `1..` to `tokens` in the given order, then append specials.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>, specials: Specials) -> Self {
        let mut index_to_token = vec![PAD_TOKEN.to_string()];
        index_to_token.extend(tokens);
        let (bos, eos) = if specials.bos_eos {
            index_to_token.push(BOS_TOKEN.to_string());
            index_to_token.push(EOS_TOKEN.to_string());
            (Some(index_to_token.len() - 2), Some(index_to_token.len() - 1))
        } else {
            (None, None)
        };
        index_to_token.push(UNK_TOKEN.to_string());
        let unk = index_to_token.len() - 1;
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            index_to_token,
            token_to_index,
            unk,
            bos,
            eos,
        }
    }

    /// `V`: the largest valid index (= the `<unk>` index).
    pub fn size(&self) -> usize {
        self.index_to_token.len() - 1
    }

    /// Number of embedding rows needed, `V + 1`.
    pub fn rows(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn unk(&self) -> usize {
        self.unk
    }

    pub fn bos(&self) -> Option<usize> {
        self.bos
    }

    pub fn eos(&self) -> Option<usize> {
        self.eos
    }

    pub fn index(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(self.unk)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        if index == PAD {
            return None;
        }
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn is_special(&self, index: usize) -> bool {
        index == PAD || index == self.unk || Some(index) == self.bos || Some(index) == self.eos
    }

    /// `token<TAB>index` lines, index-sorted, padding omitted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.index_to_token.iter().enumerate().skip(1) {
            out.push_str(t);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let (tok, idx) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err(n + 1, "expected `token<TAB>index`".into()))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(n + 1, format!("bad index `{idx}`")))?;
            if idx != n + 1 {
                return Err(parse_err(n + 1, format!("index {idx} out of order, expected {}", n + 1)));
            }
            tokens.push(tok.to_string());
        }
        if tokens.last().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(parse_err(tokens.len(), "last entry must be <unk>".into()));
        }
        tokens.pop();
        let bos_eos = tokens.len() >= 2
            && tokens[tokens.len() - 2] == BOS_TOKEN
            && tokens[tokens.len() - 1] == EOS_TOKEN;
        if bos_eos {
            tokens.truncate(tokens.len() - 2);
        }
        let vocab = Self::from_tokens(tokens, Specials { bos_eos });
        if vocab.token_to_index.len() != vocab.size() {
            return Err(parse_err(0, "duplicate tokens in vocabulary".into()));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&fs::read_to_string(path)?, path)
    }

    /// Stable content hash used to tie checkpoints to their vocabulary.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_tsv().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// Keep the first `s` tokens.
    #[default]
    Head,
    /// Keep the last `s` tokens.
    Tail,
}

/// A document as exactly `s` indices, right-padded with [`PAD`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedDoc {
    pub indices: Vec<usize>,
    pub label: Option<usize>,
    /// Token count of the document before padding or truncation.
    pub original_length: usize,
}

impl EncodedDoc {
    /// Number of real (non-padding) positions.
    pub fn len(&self) -> usize {
        self.original_length.min(self.indices.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seq_len(&self) -> usize {
        self.indices.len()
    }
}

pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, s: usize, truncation: Truncation) -> EncodedDoc {
    let kept = match truncation {
        Truncation::Head => &tokens[..tokens.len().min(s)],
        Truncation::Tail => &tokens[tokens.len().saturating_sub(s)..],
    };
    let mut indices: Vec<usize> = kept.iter().map(|t| vocab.index(t.as_ref())).collect();
    indices.resize(s, PAD);
    EncodedDoc {
        indices,
        label: None,
        original_length: tokens.len(),
    }
}

/// Unpadded index sequence (used by recurrent models).
pub fn encode_unpadded<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<usize> {
    tokens.iter().map(|t| vocab.index(t.as_ref())).collect()
}

/// Tokens of the real positions of `doc`.
pub fn decode(doc: &EncodedDoc, vocab: &Vocabulary) -> Vec<String> {
    doc.indices[..doc.len()]
        .iter()
        .filter_map(|&i| vocab.token(i))
        .map(str::to_string)
        .collect()
}

/// Word-vector table with `V + 1` rows; row 0 is the zero padding vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub matrix: Matrix,
    /// Non-static (fine-tuned) when true, static when false.
    pub trainable: bool,
}

impl EmbeddingTable {
    /// Uniform Glorot initialization with the padding row zeroed.
    pub fn random(rows: usize, dim: usize, trainable: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (6.0 / (rows + dim) as f64).sqrt();
        let mut matrix = Matrix::from_fn(rows, dim, |_, _| rng.gen_range(-bound..=bound));
        matrix.row_mut(PAD).fill(0.0);
        Self { matrix, trainable }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }
}

/// Stack the embedding rows of `indices` into an `indices.len() × d` matrix.
pub fn lookup_rows(indices: &[usize], table: &Matrix) -> Result<Matrix> {
    let d = table.cols();
    let mut data = Vec::with_capacity(indices.len() * d);
    for &i in indices {
        if i >= table.rows() {
            return Err(Error::contract(format!(
                "index {i} outside embedding table of {} rows",
                table.rows()
            )));
        }
        data.extend_from_slice(table.row(i));
    }
    Matrix::new(indices.len(), d, data)
}

pub fn lookup(doc: &EncodedDoc, table: &EmbeddingTable) -> Result<Matrix> {
    lookup_rows(&doc.indices, &table.matrix)
}

/// Load word2vec text vectors (`count dim` header, then `token v1 .. vd`).
/// Tokens missing from the file keep their random initialization.
/// Returns the table and the number of rows taken from the file.
pub fn load_pretrained(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    trainable: bool,
    seed: u64,
) -> Result<(EmbeddingTable, usize)> {
    let text = fs::read_to_string(path)?;
    parse_pretrained(&text, path, vocab, dim, trainable, seed)
}

pub fn parse_pretrained(
    text: &str,
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    trainable: bool,
    seed: u64,
) -> Result<(EmbeddingTable, usize)> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut table = EmbeddingTable::random(vocab.rows(), dim, trainable, seed);
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty embedding file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [count, file_dim] = fields[..] else {
        return Err(err(1, "header must be `count dim`".into()));
    };
    let count: usize = count.parse().map_err(|_| err(1, format!("bad count `{count}`")))?;
    let file_dim: usize = file_dim
        .parse()
        .map_err(|_| err(1, format!("bad dimension `{file_dim}`")))?;
    if file_dim != dim {
        return Err(err(1, format!("file dimension {file_dim} does not match requested {dim}")));
    }
    let mut seen = 0;
    let mut loaded = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|v| v.parse::<f64>().map_err(|_| err(n + 1, format!("bad float `{v}`"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(err(n + 1, format!("expected {dim} values, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err(n + 1, "non-finite value".into()));
        }
        seen += 1;
        if let Some(i) = vocab.get(token) {
            table.matrix.row_mut(i).copy_from_slice(&values);
            loaded += 1;
        }
    }
    if seen != count {
        return Err(err(0, format!("header announces {count} vectors, file has {seen}")));
    }
    table.matrix.row_mut(PAD).fill(0.0);
    Ok((table, loaded))
}

/// One labeled document from a `<label>\t<text>` corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledText {
    pub label: usize,
    pub text: String,
}

pub fn parse_labeled_corpus(text: &str, path: &Path) -> Result<Vec<LabeledText>> {
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: "expected `<label>\\t<text>`".into(),
        })?;
        let label = label.trim().parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: format!("bad label `{label}`"),
        })?;
        docs.push(LabeledText {
            label,
            text: body.to_string(),
        });
    }
    if docs.is_empty() {
        return Err(Error::Ingest(format!("{} contains no documents", path.display())));
    }
    Ok(docs)
}

pub fn read_labeled_corpus(path: &Path) -> Result<Vec<LabeledText>> {
    parse_labeled_corpus(&fs::read_to_string(path)?, path)
}

pub fn parse_parallel_corpus(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: "expected `<source>\\t<target>`".into(),
        })?;
        pairs.push((src.to_string(), tgt.to_string()));
    }
    if pairs.is_empty() {
        return Err(Error::Ingest(format!("{} contains no sentence pairs", path.display())));
    }
    Ok(pairs)
}

pub fn read_parallel_corpus(path: &Path) -> Result<Vec<(String, String)>> {
    parse_parallel_corpus(&fs::read_to_string(path)?, path)
}

/// Plain text corpus, one sequence per line (blank lines skipped).
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let lines: Vec<String> = fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect();
    if lines.is_empty() {
        return Err(Error::Ingest(format!("{} is empty", path.display())));
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn frequency_order_and_truncation() {
        let v = Vocabulary::build([&toks("a b a")], None, Specials::default()).unwrap();
        assert_eq!(v.get("a"), Some(1));
        assert_eq!(v.get("b"), Some(2));
        assert_eq!(v.unk(), 3);
        assert_eq!(v.size(), 3);

        let v = Vocabulary::build([&toks("x y y")], Some(1), Specials::default()).unwrap();
        assert_eq!(v.get("y"), Some(1));
        assert_eq!(v.get("x"), None);
        assert_eq!(v.index("x"), v.unk());
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = Vocabulary::build([&toks("d c b a")], None, Specials::default()).unwrap();
        assert_eq!(v.get("a"), Some(1));
        assert_eq!(v.get("d"), Some(4));
    }

    #[test]
    fn empty_corpus_rejected() {
        let docs: Vec<Vec<String>> = vec![];
        assert!(matches!(
            Vocabulary::build(&docs, None, Specials::default()),
            Err(Error::Ingest(_))
        ));
    }

    #[test]
    fn synthetic_corpus_matches_count_and_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let docs: Vec<Vec<String>> = (0..100)
            .map(|_| {
                (0..rng.gen_range(3..20))
                    .map(|_| {
                        // skewed draw so frequencies differ
                        let k = (rng.gen::<f64>().powi(3) * 40.0) as usize;
                        words[k.min(39)].clone()
                    })
                    .collect()
            })
            .collect();
        let vocab = Vocabulary::build(&docs, Some(25), Specials { bos_eos: true }).unwrap();

        let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
        for d in &docs {
            for w in d {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        let mut oracle: Vec<(&str, usize)> = counts.into_iter().collect();
        oracle.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (rank, (w, _)) in oracle.iter().take(25).enumerate() {
            assert_eq!(vocab.get(w), Some(rank + 1));
        }
        assert_eq!(vocab.bos(), Some(26));
        assert_eq!(vocab.eos(), Some(27));
        assert_eq!(vocab.unk(), 28);
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Hello, World!  it's\tFINE..."), vec!["hello", "world", "it's", "fine"]);
        assert_eq!(tokenize(" -- "), Vec::<String>::new());
        assert_eq!(split_sentences("Good film. Bad end! Why?").len(), 3);
    }

    #[test]
    fn encode_pads_truncates_and_absorbs_unknowns() {
        let v = Vocabulary::build([&toks("a b a")], None, Specials::default()).unwrap();
        let e = encode(&["a", "b"], &v, 4, Truncation::Head);
        assert_eq!(e.indices, vec![1, 2, 0, 0]);
        assert_eq!(e.len(), 2);

        let long: Vec<String> = (0..10).map(|i| if i % 2 == 0 { "a".into() } else { "b".into() }).collect();
        let e = encode(&long, &v, 7, Truncation::Head);
        assert_eq!(e.indices, vec![1, 2, 1, 2, 1, 2, 1]);
        assert_eq!(e.original_length, 10);
        let e = encode(&long, &v, 3, Truncation::Tail);
        assert_eq!(e.indices, vec![2, 1, 2]);

        let e = encode(&["zz", "qq"], &v, 2, Truncation::Head);
        assert_eq!(e.indices, vec![v.unk(), v.unk()]);
    }

    #[test]
    fn lookup_rows_match_table() {
        let table = EmbeddingTable::random(6, 5, true, 2);
        let doc = EncodedDoc {
            indices: vec![3, 1, 5, 0, 0, 0, 0],
            label: None,
            original_length: 3,
        };
        let a = lookup(&doc, &table).unwrap();
        assert_eq!(a.shape(), (7, 5));
        for (t, &i) in doc.indices.iter().enumerate() {
            assert_eq!(a.row(t), table.matrix.row(i));
        }
        for t in 3..7 {
            assert!(a.row(t).iter().all(|&v| v == 0.0));
        }
        let pad = EncodedDoc {
            indices: vec![0; 4],
            label: None,
            original_length: 0,
        };
        assert!(lookup(&pad, &table).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let bad = EncodedDoc {
            indices: vec![6],
            label: None,
            original_length: 1,
        };
        assert!(lookup(&bad, &table).is_err());
    }

    #[test]
    fn pretrained_single_token() {
        let v = Vocabulary::build([&toks("the cat the dog")], None, Specials::default()).unwrap();
        let text = "1 3\nthe 0.5 -0.25 1e-3\n";
        let (table, loaded) = parse_pretrained(text, Path::new("v.txt"), &v, 3, true, 8).unwrap();
        assert_eq!(loaded, 1);
        let random = EmbeddingTable::random(v.rows(), 3, true, 8);
        let the = v.get("the").unwrap();
        let mut differing = 0;
        for r in 0..v.rows() {
            if table.matrix.row(r) != random.matrix.row(r) {
                differing += 1;
                assert_eq!(r, the);
            }
        }
        assert_eq!(differing, 1);
        assert_eq!(table.matrix.row(the), &[0.5, -0.25, 1e-3]);
        assert!(table.matrix.row(PAD).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pretrained_rows_bit_equal_to_parsed_floats() {
        let v = Vocabulary::build([&toks("x y z")], None, Specials::default()).unwrap();
        let text = "3 2\nx 0.1 0.2\ny -3.14159265358979 2.718281828459045\nz 1e-300 -0\n";
        let (table, loaded) = parse_pretrained(text, Path::new("v"), &v, 2, false, 0).unwrap();
        assert_eq!(loaded, 3);
        // independent parse of the same lines
        for line in text.lines().skip(1) {
            let mut it = line.split(' ');
            let tok = it.next().unwrap();
            let vals: Vec<u64> = it.map(|s| s.parse::<f64>().unwrap().to_bits()).collect();
            let row: Vec<u64> = table.matrix.row(v.get(tok).unwrap()).iter().map(|x| x.to_bits()).collect();
            assert_eq!(row, vals);
        }
    }

    #[test]
    fn pretrained_errors_carry_line_numbers() {
        let v = Vocabulary::build([&toks("x")], None, Specials::default()).unwrap();
        let err = parse_pretrained("1 4\nx 1 2 3 4\n", Path::new("p"), &v, 3, true, 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_pretrained("1 2\nx 1 oops\n", Path::new("p"), &v, 2, true, 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let v = Vocabulary::build([&toks("b a c a")], None, Specials { bos_eos: true }).unwrap();
        let back = Vocabulary::from_tsv(&v.to_tsv(), Path::new("v")).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        assert!(Vocabulary::from_tsv("a\t2\n", Path::new("v")).is_err());
    }

    #[test]
    fn corpus_parsing() {
        let docs = parse_labeled_corpus("1\tgreat film\n\n0\tawful\n", Path::new("c")).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].label, 0);
        assert!(parse_labeled_corpus("x\tfoo\n", Path::new("c")).is_err());
        assert!(parse_labeled_corpus("", Path::new("c")).is_err());
        let pairs = parse_parallel_corpus("a b\tb a\n", Path::new("p")).unwrap();
        assert_eq!(pairs[0].1, "b a");
    }

    proptest! {
        #[test]
        fn encoding_is_idempotent(words in proptest::collection::vec("[a-e]{1,2}", 0..15), s in 1usize..12) {
            let v = Vocabulary::build([&vec!["a".to_string(), "b".into(), "cc".into()]], None, Specials::default()).unwrap();
            let e = encode(&words, &v, s, Truncation::Head);
            let again = encode(&decode(&e, &v), &v, s, Truncation::Head);
            prop_assert_eq!(&again.indices, &e.indices);
            for (t, &i) in e.indices.iter().enumerate() {
                prop_assert_eq!(i == PAD, t >= words.len());
            }
        }
    }
}

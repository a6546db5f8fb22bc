//! Layout of a training run directory and loading of trained models.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use neurotext::cnn::{self, CnnModel};
use neurotext::han::{self, HanModel};
use neurotext::recurrent::LanguageModel;
use neurotext::seq2seq::{self, Seq2SeqModel};
use neurotext::text::{Truncation, Vocabulary};
use neurotext::train::Checkpoint;
use neurotext::Error;

use crate::args::{ModelPaths, TrainArgs};
use crate::{require_file, UsageError};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const SRC_VOCAB_FILE: &str = "src_vocab.tsv";
pub const TGT_VOCAB_FILE: &str = "tgt_vocab.tsv";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "train_log.csv";

/// Hash recorded in seq2seq checkpoints, covering both vocabularies.
pub fn pair_hash(src: &Vocabulary, tgt: &Vocabulary) -> String {
    format!("{}+{}", src.hash(), tgt.hash())
}

pub enum Model {
    Cnn(CnnModel),
    Lm(LanguageModel),
    Seq2seq(Seq2SeqModel),
    Han(HanModel),
}

impl Model {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(match ckpt.kind.as_str() {
            cnn::CHECKPOINT_KIND => Model::Cnn(CnnModel::from_checkpoint(ckpt)?),
            seq2seq::CHECKPOINT_KIND => Model::Seq2seq(Seq2SeqModel::from_checkpoint(ckpt)?),
            han::CHECKPOINT_KIND => Model::Han(HanModel::from_checkpoint(ckpt)?),
            k if k.ends_with("-lm") => Model::Lm(LanguageModel::from_checkpoint(ckpt)?),
            other => return Err(Error::Incompatible(format!("unknown model kind `{other}`")).into()),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Cnn(_) => "cnn",
            Model::Lm(_) => "language model",
            Model::Seq2seq(_) => "seq2seq",
            Model::Han(_) => "han",
        }
    }
}

/// Checkpoint plus the vocabularies and tokenization it was trained with.
pub struct Loaded {
    pub checkpoint: Checkpoint,
    pub vocab: Option<Vocabulary>,
    pub src_vocab: Option<Vocabulary>,
    pub tgt_vocab: Option<Vocabulary>,
    pub char_level: bool,
    pub truncation: Truncation,
}

impl Loaded {
    pub fn vocab(&self) -> &Vocabulary {
        self.vocab.as_ref().expect("single-vocabulary model")
    }

    pub fn src_vocab(&self) -> &Vocabulary {
        self.src_vocab.as_ref().expect("seq2seq model")
    }

    pub fn tgt_vocab(&self) -> &Vocabulary {
        self.tgt_vocab.as_ref().expect("seq2seq model")
    }
}

fn locate(explicit: &Option<PathBuf>, run: &Option<PathBuf>, file: &str, what: &str) -> Result<PathBuf> {
    let path = match (explicit, run) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join(file),
        (None, None) => return Err(UsageError(format!("give --run or --{what}")).into()),
    };
    require_file(&path, what)?;
    Ok(path)
}

fn check_hash(ckpt: &Checkpoint, found: String) -> Result<()> {
    match &ckpt.vocab_hash {
        Some(expected) if *expected != found => Err(Error::VocabMismatch {
            expected: expected.clone(),
            found,
        }
        .into()),
        _ => Ok(()),
    }
}

pub fn load(paths: &ModelPaths) -> Result<Loaded> {
    let ckpt_path = locate(&paths.checkpoint, &paths.run, CHECKPOINT_FILE, "checkpoint")?;
    let checkpoint = Checkpoint::load(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;

    let mut char_level = paths.char_level;
    let mut truncation = Truncation::Head;
    if let Some(run_config) = paths.run.as_ref().map(|d| d.join(CONFIG_FILE)).filter(|p| p.is_file()) {
        let train: TrainArgs = toml::from_str(&fs::read_to_string(&run_config)?)
            .with_context(|| format!("reading {}", run_config.display()))?;
        char_level |= train.char_level;
        truncation = train.truncation;
    }

    let mut loaded = Loaded {
        checkpoint,
        vocab: None,
        src_vocab: None,
        tgt_vocab: None,
        char_level,
        truncation,
    };
    if loaded.checkpoint.kind == seq2seq::CHECKPOINT_KIND {
        let src = Vocabulary::load(&locate(&paths.src_vocab, &paths.run, SRC_VOCAB_FILE, "src-vocab")?)?;
        let tgt = Vocabulary::load(&locate(&paths.tgt_vocab, &paths.run, TGT_VOCAB_FILE, "tgt-vocab")?)?;
        check_hash(&loaded.checkpoint, pair_hash(&src, &tgt))?;
        loaded.src_vocab = Some(src);
        loaded.tgt_vocab = Some(tgt);
    } else {
        let vocab = Vocabulary::load(&locate(&paths.vocab, &paths.run, VOCAB_FILE, "vocab")?)?;
        check_hash(&loaded.checkpoint, vocab.hash())?;
        loaded.vocab = Some(vocab);
    }
    Ok(loaded)
}

/// `path` itself for a single item, otherwise `stem.<i>.ext` with `i` from 1.
pub fn indexed_path(path: &Path, i: usize, count: usize) -> PathBuf {
    if count <= 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{}.{}", i + 1, ext.to_string_lossy()),
        None => format!("{stem}.{}", i + 1),
    };
    path.with_file_name(name)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

use std::fs;

use anyhow::Result;
use neurotext::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::GenerateArgs;
use crate::runs::{self, Model};

pub fn run(args: GenerateArgs) -> Result<()> {
    let loaded = runs::load(&args.paths)?;
    let Model::Lm(model) = Model::from_checkpoint(&loaded.checkpoint)? else {
        return Err(Error::Incompatible(format!("generate needs a language model, found `{}`", loaded.checkpoint.kind)).into());
    };
    let vocab = loaded.vocab();
    let sep = if loaded.char_level { "" } else { " " };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut lines = Vec::with_capacity(args.samples);
    for _ in 0..args.samples {
        let tokens = model.sample(args.max_steps, args.temperature, &mut rng)?;
        let words: Vec<&str> = tokens.iter().filter(|&&t| !vocab.is_special(t) || t == vocab.unk()).filter_map(|&t| vocab.token(t)).collect();
        lines.push(words.join(sep));
    }
    for line in &lines {
        say!("{line}");
    }
    if let Some(path) = &args.output {
        let mut text = lines.join("\n");
        text.push('\n');
        fs::write(path, text)?;
    }
    Ok(())
}

//! Versioned plain-text checkpoints.
//!
//! ```text
//! NEUROTEXT-CKPT v1
//! model cnn
//! config {"embed_dim":5,...}
//! vocab-hash 3f2a...            ("-" when the model has no vocabulary)
//! params 7
//! cnn.embedding 21 5
//! <rows of 17-significant-digit floats>
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::train::params::ParamStore;

pub const MAGIC: &str = "NEUROTEXT-CKPT";
pub const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab_hash: Option<String>,
    pub params: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn from_store(
        kind: impl Into<String>,
        config: serde_json::Value,
        vocab_hash: Option<String>,
        store: &ParamStore,
    ) -> Self {
        Self {
            kind: kind.into(),
            config,
            vocab_hash,
            params: store
                .iter()
                .map(|(_, p)| (p.name().to_string(), p.value().clone()))
                .collect(),
        }
    }

    /// Copy every stored matrix into `store`, matching by name and shape.
    pub fn apply_to(&self, store: &mut ParamStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} parameters, model expects {}",
                self.params.len(),
                store.len()
            )));
        }
        for (name, value) in &self.params {
            let id = store
                .id(name)
                .ok_or_else(|| Error::Incompatible(format!("unknown parameter `{name}`")))?;
            store.set(id, value.clone())?;
        }
        Ok(())
    }

    pub fn param_scalars(&self) -> usize {
        self.params.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "model {}", self.kind);
        let _ = writeln!(out, "config {}", self.config);
        let _ = writeln!(out, "vocab-hash {}", self.vocab_hash.as_deref().unwrap_or("-"));
        let _ = writeln!(out, "params {}", self.params.len());
        for (name, m) in &self.params {
            let _ = writeln!(out, "{} {} {}", name, m.rows(), m.cols());
            for r in 0..m.rows() {
                let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = Lines::new(text, path);

        let header = lines.next("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(lines.error("missing NEUROTEXT-CKPT header"));
        }
        match parts.next() {
            Some(VERSION) => {}
            found => {
                return Err(Error::Version {
                    found: found.unwrap_or("").to_string(),
                    expected: VERSION,
                })
            }
        }

        let kind = lines.keyed("model")?.to_string();
        let config_text = lines.keyed("config")?;
        let config = serde_json::from_str(config_text)
            .map_err(|e| lines.error(&format!("bad config json: {e}")))?;
        let hash = lines.keyed("vocab-hash")?;
        let vocab_hash = (hash != "-").then(|| hash.to_string());
        let count: usize = lines
            .keyed("params")?
            .parse()
            .map_err(|_| lines.error("bad parameter count"))?;

        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let head = lines.next("parameter header")?;
            let fields: Vec<&str> = head.split_whitespace().collect();
            let [name, rows, cols] = fields[..] else {
                return Err(lines.error("expected `name rows cols`"));
            };
            let rows: usize = rows.parse().map_err(|_| lines.error("bad row count"))?;
            let cols: usize = cols.parse().map_err(|_| lines.error("bad column count"))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines.next("parameter row")?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| lines.error(&format!("bad float `{tok}`")))?;
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(lines.error(&format!(
                        "expected {cols} values, found {}",
                        data.len() - before
                    )));
                }
            }
            params.push((name.to_string(), Matrix::new(rows, cols, data)?));
        }
        if lines.next("end marker")? != "end" {
            return Err(lines.error("expected `end`"));
        }
        Ok(Self {
            kind,
            config,
            vocab_hash,
            params,
        })
    }
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line: usize,
    path: PathBuf,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &Path) -> Self {
        Self {
            iter: text.lines(),
            line: 0,
            path: path.to_path_buf(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.line += 1;
        self.iter
            .next()
            .ok_or_else(|| self.error(&format!("unexpected end of file, expected {what}")))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next(key)?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.error(&format!("expected `{key} ...`")))
    }

    fn error(&self, message: &str) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::params::{Init, InitScheme};
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        let mut store = ParamStore::new();
        store.add("a.w", 3, 2, Init::Weight);
        store.add("a.b", 2, 1, Init::Constant(0.1));
        store.init(InitScheme::GlorotUniform, 9);
        Checkpoint::from_store(
            "toy",
            serde_json::json!({"hidden": 2}),
            Some("abc".into()),
            &store,
        )
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::parse(&c.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let text = sample().to_text();
        for cut in [10, text.len() / 2, text.len() - 5] {
            let err = Checkpoint::parse(&text[..cut], Path::new("t")).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{err}");
        }
    }

    #[test]
    fn version_mismatch_refused() {
        let text = sample().to_text().replacen("v1", "v2", 1);
        let err = Checkpoint::parse(&text, Path::new("t")).unwrap_err();
        assert!(matches!(err, Error::Version { .. }));
    }

    #[test]
    fn apply_checks_names_and_shapes() {
        let c = sample();
        let mut store = ParamStore::new();
        store.add("a.w", 3, 2, Init::Zeros);
        store.add("a.b", 2, 1, Init::Zeros);
        c.apply_to(&mut store).unwrap();
        assert_eq!(store.get(store.id("a.b").unwrap()).as_slice(), &[0.1, 0.1]);

        let mut wrong = ParamStore::new();
        wrong.add("a.w", 2, 3, Init::Zeros);
        wrong.add("a.b", 2, 1, Init::Zeros);
        assert!(c.apply_to(&mut wrong).is_err());
    }

    proptest! {
        #[test]
        fn floats_survive_text(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
            let n = values.len();
            let c = Checkpoint {
                kind: "x".into(),
                config: serde_json::Value::Null,
                vocab_hash: None,
                params: vec![("p".into(), Matrix::new(1, n, values).unwrap())],
            };
            let back = Checkpoint::parse(&c.to_text(), Path::new("p")).unwrap();
            for (a, b) in back.params[0].1.as_slice().iter().zip(c.params[0].1.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

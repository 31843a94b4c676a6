use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const VERSION: &str = env!("QCRYSTAL_VERSION");

/// Provenance block embedded in every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub model_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(model_hash: &str, seed: u64) -> Self {
        Self {
            tool: "qcrystal".into(),
            version: VERSION.into(),
            model_hash: model_hash.into(),
            seed,
        }
    }
}

/// `{"meta": ..., "data": ...}` as written by [`write_json`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub meta: Meta,
    pub data: T,
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, data: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &Envelope { meta: meta.clone(), data })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Envelope<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

/// One JSON line on stderr: `{"event": name, ...fields}`.
pub fn event(name: &str, fields: Value) {
    let mut obj = json!({ "event": name });
    if let (Some(o), Value::Object(f)) = (obj.as_object_mut(), fields) {
        o.extend(f);
    }
    eprintln!("{obj}");
}

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use toml::{Table, Value};

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "parallelism",
    "paths.corpus",
    "paths.corpus_kind",
    "paths.dataset",
    "paths.index",
    "paths.traces",
    "paths.report",
    "paths.labels",
    "endpoints.lm_url",
    "endpoints.verifier_url",
    "endpoints.embed_url",
    "endpoints.api_key_env",
    "endpoints.retries",
    "endpoints.timeout_secs",
    "retrieval.kind",
    "retrieval.k1",
    "retrieval.b",
    "retrieval.embedder",
    "retrieval.hashing_dim",
    "retrieval.bundle_top_n",
    "pipeline.mode",
    "pipeline.max_rectify_steps",
    "pipeline.confidence_threshold",
    "pipeline.kf1_threshold",
    "pipeline.template_ids",
    "pipeline.max_new_tokens",
    "pipeline.top_k",
    "pipeline.temperature",
    "pipeline.record_timing",
    "labeler.rule",
    "labeler.split",
];

/// A parsed config file that remembers which keys were looked up.
#[derive(Debug, Default)]
pub struct Settings {
    table: Table,
    reads: RefCell<BTreeSet<&'static str>>,
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push(key),
        }
    }
}

impl Settings {
    pub fn parse(content: &str) -> Result<Self> {
        let table: Table = toml::from_str(content)?;
        let mut keys = Vec::new();
        flatten("", &table, &mut keys);
        if let Some(unknown) = keys.iter().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            bail!("unknown config key `{unknown}`");
        }
        Ok(Self { table, reads: RefCell::default() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&content).with_context(|| format!("in config {}", path.display()))
    }

    /// Keys looked up so far, whether or not the file set them.
    #[cfg(test)]
    pub fn reads(&self) -> BTreeSet<&'static str> {
        self.reads.borrow().clone()
    }

    fn get(&self, key: &'static str) -> Option<&Value> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key} missing from KNOWN_KEYS");
        self.reads.borrow_mut().insert(key);
        let mut parts = key.split('.');
        let mut value = self.table.get(parts.next()?)?;
        for p in parts {
            value = value.as_table()?.get(p)?;
        }
        Some(value)
    }

    pub fn string(&self, key: &'static str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => bail!("config key `{key}` must be a string, got {}", other.type_str()),
        }
    }

    pub fn path(&self, key: &'static str) -> Result<Option<PathBuf>> {
        Ok(self.string(key)?.map(PathBuf::from))
    }

    pub fn integer(&self, key: &'static str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => bail!("config key `{key}` must be a non-negative integer, got {other}"),
        }
    }

    pub fn float(&self, key: &'static str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => bail!("config key `{key}` must be a number, got {}", other.type_str()),
        }
    }

    pub fn boolean(&self, key: &'static str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => bail!("config key `{key}` must be a boolean, got {}", other.type_str()),
        }
    }

    pub fn integer_list(&self, key: &'static str) -> Result<Option<Vec<u64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                    other => bail!("config key `{key}` must list non-negative integers, got {other}"),
                })
                .collect::<Result<_>>()
                .map(Some),
            Some(other) => bail!("config key `{key}` must be an array, got {}", other.type_str()),
        }
    }
}

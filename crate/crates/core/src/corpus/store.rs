use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorpusError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Self { subject: subject.into(), relation: relation.into(), object: object.into() }
    }

    /// Stable identifier: `t:` followed by the first 16 hex digits of SHA-256("s|r|o").
    pub fn item_id(&self) -> String {
        let digest = Sha256::digest(format!("{}|{}|{}", self.subject, self.relation, self.object).as_bytes());
        format!("t:{}", &hex::encode(digest)[..16])
    }
}

/// Surface form used for retrieval and prompting: `"<subject> <relation> <object>."`.
pub fn verbalize_triple(t: &Triple) -> String {
    let object = t.object.trim();
    let object = object.strip_suffix('.').unwrap_or(object);
    format!("{} {} {}.", t.subject.trim(), t.relation.trim(), object)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Passage,
    Triple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Passages,
    Triples,
}

impl std::str::FromStr for CorpusKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passages" => Ok(Self::Passages),
            "triples" => Ok(Self::Triples),
            other => Err(format!("unknown corpus kind `{other}` (expected passages or triples)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub item_id: String,
    pub source_kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

impl KnowledgeItem {
    pub fn from_passage(p: Passage) -> Self {
        Self {
            item_id: p.doc_id,
            source_kind: SourceKind::Passage,
            title: (!p.title.is_empty()).then_some(p.title),
            text: p.body,
        }
    }

    pub fn from_triple(t: &Triple) -> Self {
        Self { item_id: t.item_id(), source_kind: SourceKind::Triple, title: None, text: verbalize_triple(t) }
    }
}

/// Build-once, read-only collection of knowledge items in insertion order.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    items: Vec<KnowledgeItem>,
    by_id: HashMap<String, usize>,
}

impl KnowledgeStore {
    /// Fails on an empty id, empty text or a repeated id. `position` in the
    /// error is the 1-based index of the offending item.
    pub fn from_items(items: Vec<KnowledgeItem>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(items.len());
        for (idx, item) in items.iter().enumerate() {
            if item.item_id.trim().is_empty() {
                return Err(CorpusError::invalid(idx + 1, "doc_id", "must be non-empty"));
            }
            if item.text.trim().is_empty() {
                return Err(CorpusError::invalid(idx + 1, "text", "must be non-empty"));
            }
            if by_id.insert(item.item_id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicateId { line: idx + 1, id: item.item_id.clone() });
            }
        }
        Ok(Self { items, by_id })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[KnowledgeItem] {
        &self.items
    }

    pub fn get(&self, item_id: &str) -> Option<&KnowledgeItem> {
        self.by_id.get(item_id).map(|&i| &self.items[i])
    }

    pub fn position(&self, item_id: &str) -> Option<usize> {
        self.by_id.get(item_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &KnowledgeItem> {
        self.items.iter()
    }
}

#[derive(Deserialize)]
struct RawPassage {
    doc_id: Option<String>,
    title: Option<String>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct RawTriple {
    subject: Option<String>,
    relation: Option<String>,
    object: Option<String>,
}

fn required(value: Option<String>, line: usize, field: &'static str) -> Result<String, CorpusError> {
    match value {
        None => Err(CorpusError::invalid(line, field, "missing")),
        Some(v) if v.trim().is_empty() => Err(CorpusError::invalid(line, field, "must be non-empty")),
        Some(v) => Ok(v),
    }
}

/// Non-empty lines of a JSON-lines file, paired with their 1-based line number.
pub(crate) fn jsonl_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_corpus(content: &str, kind: CorpusKind) -> Result<KnowledgeStore, CorpusError> {
    let mut items = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, raw) in jsonl_lines(content) {
        let item = match kind {
            CorpusKind::Passages => {
                let p: RawPassage = serde_json::from_str(raw).map_err(|e| CorpusError::Json { line, source: e })?;
                let passage = Passage {
                    doc_id: required(p.doc_id, line, "doc_id")?,
                    title: p.title.unwrap_or_default(),
                    body: required(p.text, line, "text")?,
                };
                KnowledgeItem::from_passage(passage)
            }
            CorpusKind::Triples => {
                let t: RawTriple = serde_json::from_str(raw).map_err(|e| CorpusError::Json { line, source: e })?;
                let triple = Triple {
                    subject: required(t.subject, line, "subject")?,
                    relation: required(t.relation, line, "relation")?,
                    object: required(t.object, line, "object")?,
                };
                KnowledgeItem::from_triple(&triple)
            }
        };
        if seen.insert(item.item_id.clone(), line).is_some() {
            return Err(CorpusError::DuplicateId { line, id: item.item_id });
        }
        items.push(item);
    }
    KnowledgeStore::from_items(items)
}

pub fn load_corpus(path: &Path, kind: CorpusKind) -> Result<KnowledgeStore, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::Io { path: path.to_path_buf(), source: e })?;
    parse_corpus(&content, kind)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::jsonl_lines;
use super::CorpusError;

/// Gold answers plus optional alternative surface forms for each of them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSet {
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, Vec<String>>,
}

impl AnswerSet {
    pub fn new<I, S>(gold: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { gold: gold.into_iter().map(Into::into).collect(), aliases: BTreeMap::new() }
    }

    pub fn with_aliases<I, S>(mut self, gold: &str, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases.entry(gold.to_owned()).or_default().extend(aliases.into_iter().map(Into::into));
        self
    }

    /// Every gold answer followed by its aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        self.gold.iter().flat_map(move |g| {
            std::iter::once(g.as_str()).chain(self.aliases.get(g).into_iter().flatten().map(String::as_str))
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.gold.is_empty() {
            return Err("gold answers must be non-empty".into());
        }
        if let Some(key) = self.aliases.keys().find(|k| !self.gold.contains(k)) {
            return Err(format!("alias key `{key}` is not a gold answer"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub example_id: String,
    pub question: String,
    pub answers: AnswerSet,
}

impl QAExample {
    pub fn new(example_id: impl Into<String>, question: impl Into<String>, answers: AnswerSet) -> Self {
        Self { example_id: example_id.into(), question: question.into(), answers }
    }
}

#[derive(Deserialize)]
struct RawExample {
    id: Option<String>,
    question: Option<String>,
    answers: Option<Vec<String>>,
    #[serde(default)]
    aliases: Option<Vec<Vec<String>>>,
}

pub fn parse_dataset(content: &str) -> Result<Vec<QAExample>, CorpusError> {
    let mut out = Vec::new();
    for (line, raw) in jsonl_lines(content) {
        let r: RawExample = serde_json::from_str(raw).map_err(|e| CorpusError::Json { line, source: e })?;
        let id = r.id.filter(|s| !s.trim().is_empty()).ok_or_else(|| CorpusError::invalid(line, "id", "missing or empty"))?;
        let question = r
            .question
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| CorpusError::invalid(line, "question", "missing or empty"))?;
        let gold = r.answers.filter(|a| !a.is_empty()).ok_or_else(|| CorpusError::invalid(line, "answers", "missing or empty"))?;
        let mut answers = AnswerSet::new(gold);
        if let Some(aliases) = r.aliases {
            if aliases.len() != answers.gold.len() {
                return Err(CorpusError::invalid(line, "aliases", "must be parallel to answers"));
            }
            for (g, a) in answers.gold.clone().iter().zip(aliases) {
                if !a.is_empty() {
                    answers.aliases.entry(g.clone()).or_default().extend(a);
                }
            }
        }
        out.push(QAExample { example_id: id, question, answers });
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<QAExample>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::Io { path: path.to_path_buf(), source: e })?;
    parse_dataset(&content)
}

//! Comment corpora: ingestion, anonymization, diacritic folding, keyword
//! subcorpora and summary statistics.

mod anonymize;
mod fold;
mod ingest;
mod subcorpus;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use anonymize::{contains_raw_username, Anonymizer, USERNAME_PLACEHOLDER};
pub use fold::{fold_char, fold_diacritics, match_key};
pub use ingest::{ingest, InputFormat, IngestReport, MalformedRecord};
pub use subcorpus::{corpus_stats, keyword_filter, word_count, CorpusStats, SubcorpusSpec, SubcorpusTally};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("unreadable input stream: {0}")]
    Io(#[from] std::io::Error),
    #[error("unreadable CSV stream: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV header lacks required column `{0}`")]
    MissingColumn(&'static str),
    #[error("anonymization salt must not be empty")]
    EmptySalt,
    #[error("invalid subcorpus spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Mt,
    Mixed,
    Unknown,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Mt => "mt",
            Language::Mixed => "mixed",
            Language::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "mt" => Ok(Language::Mt),
            "mixed" => Ok(Language::Mixed),
            "unknown" | "" => Ok(Language::Unknown),
            other => Err(format!("unsupported language tag `{other}`")),
        }
    }
}

/// A comment as read from input, still carrying the raw author name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub source: String,
    pub article_id: String,
    pub author: String,
    pub created_at: Option<DateTime<Utc>>,
    pub text: String,
    pub deleted: bool,
    pub language: Language,
    pub subcorpus: Option<String>,
}

/// One anonymized user comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub source: String,
    pub article_id: String,
    pub author_pseudonym: String,
    pub created_at: Option<DateTime<Utc>>,
    pub text: String,
    pub deleted: bool,
    pub language: Language,
    #[serde(default)]
    pub subcorpus: Option<String>,
    #[serde(default)]
    pub matched_keywords: BTreeSet<String>,
}

/// Writes comments as JSON lines.
pub fn write_jsonl<W: Write>(mut out: W, comments: &[Comment]) -> std::io::Result<()> {
    for c in comments {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads anonymized comments previously written by [`write_jsonl`].
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Comment>, CorpusError> {
    let mut comments = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let comment = serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        comments.push(comment);
    }
    Ok(comments)
}

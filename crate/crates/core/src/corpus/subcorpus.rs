use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{fold_diacritics, Comment, CorpusError, Language};

/// Keyword-defined subcorpus with a per-keyword word budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcorpusSpec {
    pub name: String,
    /// Keywords in priority order; a comment matching several is charged to
    /// the first.
    pub keywords: Vec<String>,
    pub word_budget_per_keyword: usize,
    #[serde(default = "default_fold")]
    pub fold_diacritics: bool,
}

fn default_fold() -> bool {
    true
}

impl SubcorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.keywords.is_empty() {
            return Err(CorpusError::InvalidSpec(format!("subcorpus `{}` has no keywords", self.name)));
        }
        if self.keywords.iter().any(|k| k.trim().is_empty()) {
            return Err(CorpusError::InvalidSpec(format!("subcorpus `{}` has an empty keyword", self.name)));
        }
        let distinct: BTreeSet<_> = self.keywords.iter().collect();
        if distinct.len() != self.keywords.len() {
            return Err(CorpusError::InvalidSpec(format!("subcorpus `{}` repeats a keyword", self.name)));
        }
        if self.word_budget_per_keyword == 0 {
            return Err(CorpusError::InvalidSpec(format!("subcorpus `{}` has a zero word budget", self.name)));
        }
        Ok(())
    }

    fn normalize(&self, text: &str) -> String {
        if self.fold_diacritics {
            fold_diacritics(text).to_lowercase()
        } else {
            text.to_lowercase()
        }
    }
}

/// Number of maximal runs of non-whitespace characters.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Selects comments for a keyword subcorpus.
///
/// Walks the corpus in order. Each matching comment is charged to its first
/// matching keyword and kept while that keyword's running word total is still
/// below the budget, so a keyword stops at the first comment that reaches or
/// exceeds it.
pub fn keyword_filter(comments: &[Comment], spec: &SubcorpusSpec) -> Result<Vec<Comment>, CorpusError> {
    spec.validate()?;
    let keys: Vec<String> = spec.keywords.iter().map(|k| spec.normalize(k.trim())).collect();
    let mut spent = vec![0usize; keys.len()];
    let mut out = Vec::new();
    for comment in comments {
        let text = spec.normalize(&comment.text);
        let matched: Vec<usize> = keys.iter().enumerate().filter(|(_, k)| text.contains(k.as_str())).map(|(i, _)| i).collect();
        let Some(&first) = matched.first() else { continue };
        if spent[first] >= spec.word_budget_per_keyword {
            continue;
        }
        spent[first] += word_count(&comment.text);
        let mut selected = comment.clone();
        selected.subcorpus = Some(spec.name.clone());
        selected.matched_keywords = matched.iter().map(|&i| spec.keywords[i].clone()).collect();
        out.push(selected);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcorpusTally {
    pub comments: usize,
    pub words: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub comment_count: usize,
    pub word_count: usize,
    pub deleted_count: usize,
    pub per_language: BTreeMap<Language, usize>,
    pub per_subcorpus: BTreeMap<String, SubcorpusTally>,
}

pub fn corpus_stats(comments: &[Comment]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for c in comments {
        let words = word_count(&c.text);
        stats.comment_count += 1;
        stats.word_count += words;
        stats.deleted_count += usize::from(c.deleted);
        *stats.per_language.entry(c.language).or_default() += 1;
        if let Some(tag) = &c.subcorpus {
            let tally = stats.per_subcorpus.entry(tag.clone()).or_default();
            tally.comments += 1;
            tally.words += words;
        }
    }
    stats
}

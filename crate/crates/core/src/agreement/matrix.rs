use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AgreementError;
use crate::scheme::{derive_binary, AnnotationRecord, BinaryLabel, ProtectedGroupRegistry};

/// Category label per (item, rater).
pub type Labels = BTreeMap<(String, String), String>;

/// Items × categories count table with a constant number of raters per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingMatrix {
    items: Vec<String>,
    categories: Vec<String>,
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(items: Vec<String>, categories: Vec<String>, counts: Vec<Vec<u32>>) -> Result<Self, AgreementError> {
        if counts.is_empty() {
            return Err(AgreementError::NoItems);
        }
        if categories.len() < 2 {
            return Err(AgreementError::TooFewCategories(categories.len()));
        }
        assert_eq!(items.len(), counts.len(), "one item label per row");
        let raters: u32 = counts[0].iter().sum();
        for (row, r) in counts.iter().enumerate() {
            if r.len() != categories.len() {
                return Err(AgreementError::RowWidth { row, got: r.len(), expected: categories.len() });
            }
            let sum = r.iter().sum();
            if sum != raters {
                return Err(AgreementError::RowSum { row, sum, expected: raters });
            }
        }
        if raters < 2 {
            return Err(AgreementError::TooFewRaters(raters));
        }
        Ok(RatingMatrix { items, categories, counts, raters })
    }

    /// Matrix with items named by row index.
    pub fn from_counts(categories: Vec<String>, counts: Vec<Vec<u32>>) -> Result<Self, AgreementError> {
        let items = (0..counts.len()).map(|i| i.to_string()).collect();
        Self::new(items, categories, counts)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn column_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.categories.len()];
        for row in &self.counts {
            for (t, &c) in totals.iter_mut().zip(row) {
                *t += c as u64;
            }
        }
        totals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixPolicy {
    #[default]
    Strict,
    DropIncomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedItem {
    pub item: String,
    pub raters: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltMatrix {
    pub matrix: RatingMatrix,
    pub excluded: Vec<ExcludedItem>,
}

/// Tabulates labels per item. Categories are the declared ones in order,
/// followed by any other observed labels in sorted order.
///
/// The modal number of raters per item (largest on ties) defines a complete
/// item. `Strict` fails on any other count; `DropIncomplete` excludes those
/// items and reports them.
pub fn build_matrix(labels: &Labels, declared: &[String], policy: MatrixPolicy) -> Result<BuiltMatrix, AgreementError> {
    let mut categories: Vec<String> = Vec::new();
    for c in declared {
        if !categories.contains(c) {
            categories.push(c.clone());
        }
    }
    let observed: BTreeSet<&String> = labels.values().collect();
    for c in observed {
        if !categories.contains(c) {
            categories.push(c.clone());
        }
    }

    let mut per_item: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for ((item, _rater), label) in labels {
        let j = categories.iter().position(|c| c == label).expect("category collected above");
        per_item.entry(item).or_insert_with(|| vec![0; categories.len()])[j] += 1;
    }
    if per_item.is_empty() {
        return Err(AgreementError::NoItems);
    }

    let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
    for row in per_item.values() {
        *freq.entry(row.iter().sum()).or_default() += 1;
    }
    let modal = freq.iter().max_by_key(|(&n, &f)| (f, n)).map(|(&n, _)| n).expect("non-empty");

    let mut items = Vec::new();
    let mut counts = Vec::new();
    let mut excluded = Vec::new();
    for (item, row) in per_item {
        let raters = row.iter().sum();
        if raters == modal {
            items.push(item.to_string());
            counts.push(row);
        } else {
            excluded.push(ExcludedItem { item: item.to_string(), raters });
        }
    }
    if policy == MatrixPolicy::Strict && !excluded.is_empty() {
        return Err(AgreementError::IncompleteItems { modal, items: excluded.into_iter().map(|e| e.item).collect() });
    }
    Ok(BuiltMatrix { matrix: RatingMatrix::new(items, categories, counts)?, excluded })
}

/// Binary label per (comment, annotator) derived from multi-level records.
pub fn binary_projection(
    records: &[AnnotationRecord],
    registry: &ProtectedGroupRegistry,
) -> Result<BTreeMap<(String, String), BinaryLabel>, AgreementError> {
    records
        .iter()
        .map(|r| Ok(((r.comment_id.clone(), r.annotator_id.clone()), derive_binary(r, registry)?)))
        .collect()
}

/// String-labelled view of binary labels for [`build_matrix`].
pub fn binary_labels(labels: &BTreeMap<(String, String), BinaryLabel>) -> Labels {
    labels.iter().map(|(k, v)| (k.clone(), v.as_str().to_string())).collect()
}

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attitude {
    Positive,
    Negative,
    Neutral,
}

impl Attitude {
    pub const ALL: [Attitude; 3] = [Attitude::Positive, Attitude::Negative, Attitude::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Attitude::Positive => "Positive",
            Attitude::Negative => "Negative",
            Attitude::Neutral => "Neutral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TargetKind {
    Individual { via_group_affiliation: bool },
    Group,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Individual { .. } => "Individual",
            TargetKind::Group => "Group",
        }
    }

    /// Whether this target opens the "name the group" question.
    pub fn names_group(self) -> bool {
        matches!(self, TargetKind::Group | TargetKind::Individual { via_group_affiliation: true })
    }
}

/// The seven closed-set ways an attitude towards a group can be expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    DerogatoryTerm,
    Generalisation,
    Insult,
    /// Includes jokes and trolling.
    Sarcasm,
    Stereotyping,
    Suggestion,
    Threat,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::DerogatoryTerm,
        Strategy::Generalisation,
        Strategy::Insult,
        Strategy::Sarcasm,
        Strategy::Stereotyping,
        Strategy::Suggestion,
        Strategy::Threat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::DerogatoryTerm => "DerogatoryTerm",
            Strategy::Generalisation => "Generalisation",
            Strategy::Insult => "Insult",
            Strategy::Sarcasm => "Sarcasm",
            Strategy::Stereotyping => "Stereotyping",
            Strategy::Suggestion => "Suggestion",
            Strategy::Threat => "Threat",
        }
    }

    /// All 128 subsets of the strategy set, indexed by bitmask.
    pub fn subsets() -> impl Iterator<Item = BTreeSet<Strategy>> {
        (0u8..128).map(|mask| Strategy::ALL.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| *s).collect())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.iter().copied().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// One annotator's multi-level judgment of one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub comment_id: String,
    pub annotator_id: String,
    pub attitude: Attitude,
    #[serde(default)]
    pub target: Option<TargetKind>,
    #[serde(default)]
    pub group_name: Option<String>,
    #[serde(default)]
    pub strategies: BTreeSet<Strategy>,
    #[serde(default)]
    pub violence_call: Option<bool>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GatingViolation {
    TargetWithoutNegative,
    TargetMissing,
    /// Affiliation answered although the target is not an individual.
    AffiliationNotOpen,
    GroupNameNotOpen,
    GroupNameMissing,
    GroupNameEmpty,
    StrategiesNotOpen,
    StrategiesMissing,
    ViolenceCallNotOpen,
    ViolenceCallMissing,
}

impl GatingViolation {
    /// Name of the offending record field.
    pub fn field(self) -> &'static str {
        use GatingViolation::*;
        match self {
            TargetWithoutNegative | TargetMissing => "target",
            AffiliationNotOpen => "target.via_group_affiliation",
            GroupNameNotOpen | GroupNameMissing | GroupNameEmpty => "group_name",
            StrategiesNotOpen | StrategiesMissing => "strategies",
            ViolenceCallNotOpen | ViolenceCallMissing => "violence_call",
        }
    }
}

impl fmt::Display for GatingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use GatingViolation::*;
        let msg = match self {
            TargetWithoutNegative => "target present but attitude ≠ Negative",
            TargetMissing => "target required when attitude = Negative",
            AffiliationNotOpen => "via_group_affiliation present but target is not an individual",
            GroupNameNotOpen => "group_name present but no group is targeted",
            GroupNameMissing => "group_name required when a group is targeted",
            GroupNameEmpty => "group_name is blank",
            StrategiesNotOpen => "strategies present but no group is named",
            StrategiesMissing => "strategies required (at least one) when a group is named",
            ViolenceCallNotOpen => "violence_call present but Suggestion not selected",
            ViolenceCallMissing => "violence_call required when Suggestion is selected",
        };
        f.write_str(msg)
    }
}

/// Checks the four gating rules; returns every violation found.
pub fn validate(record: &AnnotationRecord) -> Result<(), Vec<GatingViolation>> {
    use GatingViolation::*;
    let mut v = Vec::new();
    let negative = record.attitude == Attitude::Negative;
    match (negative, record.target) {
        (false, Some(_)) => v.push(TargetWithoutNegative),
        (true, None) => v.push(TargetMissing),
        _ => {}
    }
    let group_open = record.target.is_some_and(TargetKind::names_group);
    match (&record.group_name, group_open) {
        (Some(_), false) => v.push(GroupNameNotOpen),
        (None, true) => v.push(GroupNameMissing),
        (Some(name), true) if name.trim().is_empty() => v.push(GroupNameEmpty),
        _ => {}
    }
    let named = record.group_name.is_some();
    match (record.strategies.is_empty(), named) {
        (false, false) => v.push(StrategiesNotOpen),
        (true, true) => v.push(StrategiesMissing),
        _ => {}
    }
    let suggestion = record.strategies.contains(&Strategy::Suggestion);
    match (record.violence_call.is_some(), suggestion) {
        (true, false) => v.push(ViolenceCallNotOpen),
        (false, true) => v.push(ViolenceCallMissing),
        _ => {}
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

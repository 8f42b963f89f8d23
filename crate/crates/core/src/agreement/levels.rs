use serde::{Deserialize, Serialize};

use super::{agreement_report, build_matrix, AgreementError, AgreementReport, ExcludedItem, Labels, MatrixPolicy};
use crate::scheme::{AnnotationRecord, Attitude, Strategy};

/// One question level of the multi-level scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementLevel {
    /// Q1, three categories, every rater.
    Attitude,
    /// Q2 individual vs group, raters who judged the comment negative.
    TargetKind,
    /// Q3 presence of one strategy, raters who named a group.
    Strategy(Strategy),
}

impl AgreementLevel {
    pub fn all() -> Vec<AgreementLevel> {
        let mut v = vec![AgreementLevel::Attitude, AgreementLevel::TargetKind];
        v.extend(Strategy::ALL.map(AgreementLevel::Strategy));
        v
    }

    pub fn name(self) -> String {
        match self {
            AgreementLevel::Attitude => "Q1 attitude".into(),
            AgreementLevel::TargetKind => "Q2 target".into(),
            AgreementLevel::Strategy(s) => format!("Q3 {}", s.as_str()),
        }
    }

    fn declared(self) -> Vec<String> {
        match self {
            AgreementLevel::Attitude => Attitude::ALL.iter().map(|a| a.as_str().to_string()).collect(),
            AgreementLevel::TargetKind => vec!["Individual".into(), "Group".into()],
            AgreementLevel::Strategy(_) => vec!["present".into(), "absent".into()],
        }
    }

    fn label(self, r: &AnnotationRecord) -> Option<String> {
        match self {
            AgreementLevel::Attitude => Some(r.attitude.as_str().to_string()),
            AgreementLevel::TargetKind => r.target.map(|t| t.as_str().to_string()),
            AgreementLevel::Strategy(s) => (!r.strategies.is_empty())
                .then(|| if r.strategies.contains(&s) { "present" } else { "absent" }.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LevelOutcome {
    Computed { report: AgreementReport, excluded: Vec<ExcludedItem> },
    NotComputable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: AgreementLevel,
    pub name: String,
    #[serde(flatten)]
    pub outcome: LevelOutcome,
}

/// Agreement at each question level. Gated levels only see raters who reached
/// them, so items are tabulated with `DropIncomplete`; a level keeping fewer
/// than 2 items or 2 raters is marked not computable.
pub fn per_level_agreement(records: &[AnnotationRecord]) -> Vec<LevelReport> {
    AgreementLevel::all()
        .into_iter()
        .map(|level| {
            let labels: Labels = records
                .iter()
                .filter_map(|r| level.label(r).map(|l| ((r.comment_id.clone(), r.annotator_id.clone()), l)))
                .collect();
            let outcome = match build_matrix(&labels, &level.declared(), MatrixPolicy::DropIncomplete) {
                Ok(built) if built.matrix.items().len() < 2 => LevelOutcome::NotComputable {
                    reason: format!("only {} item(s) retained", built.matrix.items().len()),
                },
                Ok(built) => LevelOutcome::Computed { report: agreement_report(&built.matrix), excluded: built.excluded },
                Err(AgreementError::NoItems) => LevelOutcome::NotComputable { reason: "no rater reached this level".into() },
                Err(e) => LevelOutcome::NotComputable { reason: e.to_string() },
            };
            LevelReport { level, name: level.name(), outcome }
        })
        .collect()
}

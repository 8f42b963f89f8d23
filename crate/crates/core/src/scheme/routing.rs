use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::record::{validate, AnnotationRecord, Attitude, GatingViolation, Strategy, TargetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionId {
    #[serde(rename = "Q1_Attitude")]
    Q1Attitude,
    #[serde(rename = "Q2_Target")]
    Q2Target,
    #[serde(rename = "Q2a_Affiliation")]
    Q2aAffiliation,
    #[serde(rename = "Q2x_NameGroup")]
    Q2xNameGroup,
    #[serde(rename = "Q3_Strategies")]
    Q3Strategies,
    #[serde(rename = "Q3a_Violence")]
    Q3aViolence,
    Complete,
}

impl QuestionId {
    /// Question nodes in asking order (excludes `Complete`).
    pub const ORDER: [QuestionId; 6] = [
        QuestionId::Q1Attitude,
        QuestionId::Q2Target,
        QuestionId::Q2aAffiliation,
        QuestionId::Q2xNameGroup,
        QuestionId::Q3Strategies,
        QuestionId::Q3aViolence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionId::Q1Attitude => "Q1_Attitude",
            QuestionId::Q2Target => "Q2_Target",
            QuestionId::Q2aAffiliation => "Q2a_Affiliation",
            QuestionId::Q2xNameGroup => "Q2x_NameGroup",
            QuestionId::Q3Strategies => "Q3_Strategies",
            QuestionId::Q3aViolence => "Q3a_Violence",
            QuestionId::Complete => "Complete",
        }
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetChoice {
    Individual,
    Group,
}

/// One answer, tagged with the question it answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "question", content = "value")]
pub enum Answer {
    #[serde(rename = "Q1_Attitude")]
    Attitude(Attitude),
    #[serde(rename = "Q2_Target")]
    Target(TargetChoice),
    #[serde(rename = "Q2a_Affiliation")]
    Affiliation(bool),
    #[serde(rename = "Q2x_NameGroup")]
    GroupName(String),
    #[serde(rename = "Q3_Strategies")]
    Strategies(BTreeSet<Strategy>),
    #[serde(rename = "Q3a_Violence")]
    ViolenceCall(bool),
}

impl Answer {
    pub fn question(&self) -> QuestionId {
        match self {
            Answer::Attitude(_) => QuestionId::Q1Attitude,
            Answer::Target(_) => QuestionId::Q2Target,
            Answer::Affiliation(_) => QuestionId::Q2aAffiliation,
            Answer::GroupName(_) => QuestionId::Q2xNameGroup,
            Answer::Strategies(_) => QuestionId::Q3Strategies,
            Answer::ViolenceCall(_) => QuestionId::Q3aViolence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum RoutingError {
    #[error("answered prefix violates gating: {}", join(.0))]
    Gating(Vec<GatingViolation>),
    #[error("{0} answered before earlier questions")]
    AnsweredOutOfOrder(QuestionId),
    #[error("expected an answer to {expected}, got {got}")]
    UnexpectedAnswer { expected: QuestionId, got: QuestionId },
    #[error("record is not complete; next question is {0}")]
    Incomplete(QuestionId),
}

fn join(v: &[GatingViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A partially answered record: whatever prefix of the questionnaire the
/// annotator has completed so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answers {
    pub attitude: Option<Attitude>,
    pub target: Option<TargetChoice>,
    pub via_group_affiliation: Option<bool>,
    pub group_name: Option<String>,
    pub strategies: Option<BTreeSet<Strategy>>,
    pub violence_call: Option<bool>,
}

impl Answers {
    fn answered(&self, q: QuestionId) -> bool {
        match q {
            QuestionId::Q1Attitude => self.attitude.is_some(),
            QuestionId::Q2Target => self.target.is_some(),
            QuestionId::Q2aAffiliation => self.via_group_affiliation.is_some(),
            QuestionId::Q2xNameGroup => self.group_name.is_some(),
            QuestionId::Q3Strategies => self.strategies.is_some(),
            QuestionId::Q3aViolence => self.violence_call.is_some(),
            QuestionId::Complete => true,
        }
    }

    /// Whether the gate in front of `q` is open given the earlier answers.
    fn open(&self, q: QuestionId) -> bool {
        match q {
            QuestionId::Q1Attitude => true,
            QuestionId::Q2Target => self.attitude == Some(Attitude::Negative),
            QuestionId::Q2aAffiliation => self.target == Some(TargetChoice::Individual),
            QuestionId::Q2xNameGroup => {
                self.target == Some(TargetChoice::Group)
                    || (self.target == Some(TargetChoice::Individual) && self.via_group_affiliation == Some(true))
            }
            QuestionId::Q3Strategies => self.group_name.is_some(),
            QuestionId::Q3aViolence => self.strategies.as_ref().is_some_and(|s| s.contains(&Strategy::Suggestion)),
            QuestionId::Complete => true,
        }
    }

    fn not_open_violation(q: QuestionId) -> GatingViolation {
        match q {
            QuestionId::Q2Target => GatingViolation::TargetWithoutNegative,
            QuestionId::Q2aAffiliation => GatingViolation::AffiliationNotOpen,
            QuestionId::Q2xNameGroup => GatingViolation::GroupNameNotOpen,
            QuestionId::Q3Strategies => GatingViolation::StrategiesNotOpen,
            QuestionId::Q3aViolence => GatingViolation::ViolenceCallNotOpen,
            QuestionId::Q1Attitude | QuestionId::Complete => unreachable!("always open"),
        }
    }

    /// Next question to ask, or the reason the prefix is inconsistent.
    pub fn next_question(&self) -> Result<QuestionId, RoutingError> {
        let mut next = None;
        let mut violations = Vec::new();
        for q in QuestionId::ORDER {
            let answered = self.answered(q);
            if next.is_some() {
                if answered {
                    return Err(RoutingError::AnsweredOutOfOrder(q));
                }
                continue;
            }
            match (self.open(q), answered) {
                (true, false) => next = Some(q),
                (false, true) => violations.push(Self::not_open_violation(q)),
                _ => {}
            }
        }
        if self.group_name.as_ref().is_some_and(|g| g.trim().is_empty()) {
            violations.push(GatingViolation::GroupNameEmpty);
        }
        if self.strategies.as_ref().is_some_and(BTreeSet::is_empty) {
            violations.push(GatingViolation::StrategiesMissing);
        }
        if !violations.is_empty() {
            violations.dedup();
            return Err(RoutingError::Gating(violations));
        }
        Ok(next.unwrap_or(QuestionId::Complete))
    }

    /// Records an answer to the current question. On any error the answers
    /// are left unchanged.
    pub fn apply(&mut self, answer: Answer) -> Result<QuestionId, RoutingError> {
        let expected = self.next_question()?;
        if expected != answer.question() {
            return Err(RoutingError::UnexpectedAnswer { expected, got: answer.question() });
        }
        let mut updated = self.clone();
        match answer {
            Answer::Attitude(a) => updated.attitude = Some(a),
            Answer::Target(t) => updated.target = Some(t),
            Answer::Affiliation(b) => updated.via_group_affiliation = Some(b),
            Answer::GroupName(g) => updated.group_name = Some(g.trim().to_string()),
            Answer::Strategies(s) => updated.strategies = Some(s),
            Answer::ViolenceCall(b) => updated.violence_call = Some(b),
        }
        let next = updated.next_question()?;
        *self = updated;
        Ok(next)
    }

    /// Builds the finished record once routing reaches `Complete`.
    pub fn finish(
        &self,
        comment_id: &str,
        annotator_id: &str,
        submitted_at: DateTime<Utc>,
    ) -> Result<AnnotationRecord, RoutingError> {
        match self.next_question()? {
            QuestionId::Complete => {}
            q => return Err(RoutingError::Incomplete(q)),
        }
        let attitude = self.attitude.expect("Complete implies Q1 answered");
        let target = match self.target {
            Some(TargetChoice::Group) => Some(TargetKind::Group),
            Some(TargetChoice::Individual) => Some(TargetKind::Individual {
                via_group_affiliation: self.via_group_affiliation.expect("Complete implies Q2a answered"),
            }),
            None => None,
        };
        let record = AnnotationRecord {
            comment_id: comment_id.to_string(),
            annotator_id: annotator_id.to_string(),
            attitude,
            target,
            group_name: self.group_name.clone(),
            strategies: self.strategies.clone().unwrap_or_default(),
            violence_call: self.violence_call,
            submitted_at,
        };
        validate(&record).map_err(RoutingError::Gating)?;
        Ok(record)
    }

    /// The answers that produce `record`.
    pub fn from_record(record: &AnnotationRecord) -> Answers {
        let (target, via) = match record.target {
            Some(TargetKind::Group) => (Some(TargetChoice::Group), None),
            Some(TargetKind::Individual { via_group_affiliation }) => {
                (Some(TargetChoice::Individual), Some(via_group_affiliation))
            }
            None => (None, None),
        };
        Answers {
            attitude: Some(record.attitude),
            target,
            via_group_affiliation: via,
            group_name: record.group_name.clone(),
            strategies: (!record.strategies.is_empty()).then(|| record.strategies.clone()),
            violence_call: record.violence_call,
        }
    }

    /// Answer sequence that reproduces these answers from scratch.
    pub fn to_answer_sequence(&self) -> Vec<Answer> {
        let mut seq = Vec::new();
        seq.extend(self.attitude.map(Answer::Attitude));
        seq.extend(self.target.map(Answer::Target));
        seq.extend(self.via_group_affiliation.map(Answer::Affiliation));
        seq.extend(self.group_name.clone().map(Answer::GroupName));
        seq.extend(self.strategies.clone().map(Answer::Strategies));
        seq.extend(self.violence_call.map(Answer::ViolenceCall));
        seq
    }
}

/// Routing over a partial record: the first open, unanswered question.
pub fn next_question(partial: &Answers) -> Result<QuestionId, RoutingError> {
    partial.next_question()
}

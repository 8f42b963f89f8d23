//! The hierarchical annotation scheme.
//!
//! Q1 attitude → Q2 target (individual or group) → Q2a affiliation → name the
//! group → Q3 strategies → Q3a call for violence. Later questions open only
//! when earlier answers allow it; [`validate`] checks the gating on finished
//! records and [`Answers`] routes partially answered ones.

mod derive;
mod record;
mod registry;
mod routing;

use serde::{Deserialize, Serialize};

pub use derive::{
    aggregate_binary, classify_conscious, derive_binary, derive_cortese, majority_vote, ConsciousClass, CorteseCategory,
    Fraction, GoldLabel, TieBreak,
};
pub use record::{validate, AnnotationRecord, Attitude, GatingViolation, Strategy, TargetKind};
pub use registry::{ProtectedGroupRegistry, RegistryEntry};
pub use routing::{next_question, Answer, Answers, QuestionId, RoutingError, TargetChoice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    HateSpeech,
    NotHateSpeech,
}

impl BinaryLabel {
    pub const ALL: [BinaryLabel; 2] = [BinaryLabel::HateSpeech, BinaryLabel::NotHateSpeech];

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::HateSpeech => "HateSpeech",
            BinaryLabel::NotHateSpeech => "NotHateSpeech",
        }
    }
}

impl std::fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BinaryLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "HateSpeech" => Ok(BinaryLabel::HateSpeech),
            "NotHateSpeech" => Ok(BinaryLabel::NotHateSpeech),
            other => Err(format!("unknown binary label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemeError {
    #[error("group `{0}` is not in the registry; resolve it before deriving labels")]
    UnknownGroup(String),
    #[error("at least {needed} records required, got {got}")]
    InsufficientRaters { needed: usize, got: usize },
    #[error("records belong to different comments: {0:?}")]
    MixedComments(Vec<String>),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(String),
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
}

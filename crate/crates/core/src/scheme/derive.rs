use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::{AnnotationRecord, Attitude, Strategy};
use super::registry::ProtectedGroupRegistry;
use super::{BinaryLabel, SchemeError};

/// Four-point discrimination severity scale. The first two points
/// (unintentional and conscious discrimination) share one per-record value;
/// they are told apart only across raters by [`classify_conscious`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CorteseCategory {
    NotApplicable,
    Discrimination12,
    IncitementHatred,
    IncitementViolence,
}

impl CorteseCategory {
    pub const ALL: [CorteseCategory; 4] = [
        CorteseCategory::NotApplicable,
        CorteseCategory::Discrimination12,
        CorteseCategory::IncitementHatred,
        CorteseCategory::IncitementViolence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorteseCategory::NotApplicable => "NotApplicable",
            CorteseCategory::Discrimination12 => "Discrimination12",
            CorteseCategory::IncitementHatred => "IncitementHatred",
            CorteseCategory::IncitementViolence => "IncitementViolence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConsciousClass {
    Conscious,
    Unintentional,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TieBreak {
    NotHateSpeech,
    #[default]
    Escalate,
}

impl FromStr for TieBreak {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NotHateSpeech" | "not-hate-speech" => Ok(TieBreak::NotHateSpeech),
            "Escalate" | "escalate" => Ok(TieBreak::Escalate),
            other => Err(format!("unknown tie-break rule `{other}`")),
        }
    }
}

/// Aggregated label for one comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoldLabel {
    HateSpeech,
    NotHateSpeech,
    /// Exact tie left for expert adjudication.
    Escalated,
}

impl From<BinaryLabel> for GoldLabel {
    fn from(l: BinaryLabel) -> Self {
        match l {
            BinaryLabel::HateSpeech => GoldLabel::HateSpeech,
            BinaryLabel::NotHateSpeech => GoldLabel::NotHateSpeech,
        }
    }
}

/// Exact rational threshold in (0, 1], written `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u32,
    den: u32,
}

impl Fraction {
    pub fn new(num: u32, den: u32) -> Result<Self, SchemeError> {
        if den == 0 || num == 0 || num > den {
            return Err(SchemeError::InvalidThreshold(format!("{num}/{den}")));
        }
        Ok(Fraction { num, den })
    }

    pub const TWO_THIRDS: Fraction = Fraction { num: 2, den: 3 };

    /// `count / total >= self`, compared without rounding.
    pub fn reached_by(self, count: usize, total: usize) -> bool {
        count as u128 * self.den as u128 >= self.num as u128 * total as u128
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Fraction {
    fn default() -> Self {
        Fraction::TWO_THIRDS
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fraction {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SchemeError::InvalidThreshold(s.to_string());
        let (num, den) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Fraction::new(num, den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hate speech iff negative, aimed at a named group the registry protects,
/// and expressed through a suggestion or a threat.
///
/// Expects a record that passes validation. A named group missing from the
/// registry is an error.
pub fn derive_binary(record: &AnnotationRecord, registry: &ProtectedGroupRegistry) -> Result<BinaryLabel, SchemeError> {
    let Some(group) = &record.group_name else {
        return Ok(BinaryLabel::NotHateSpeech);
    };
    let protected = registry.is_protected(group)?;
    let inciting = record.strategies.contains(&Strategy::Suggestion) || record.strategies.contains(&Strategy::Threat);
    Ok(if record.attitude == Attitude::Negative && protected && inciting {
        BinaryLabel::HateSpeech
    } else {
        BinaryLabel::NotHateSpeech
    })
}

/// Places a validated record on the severity scale. Priority is fixed:
/// violence over hatred over discrimination.
pub fn derive_cortese(record: &AnnotationRecord) -> CorteseCategory {
    if record.group_name.is_none() || record.strategies.is_empty() {
        return CorteseCategory::NotApplicable;
    }
    let suggestion = record.strategies.contains(&Strategy::Suggestion);
    if record.strategies.contains(&Strategy::Threat) || (suggestion && record.violence_call == Some(true)) {
        CorteseCategory::IncitementViolence
    } else if suggestion {
        CorteseCategory::IncitementHatred
    } else {
        CorteseCategory::Discrimination12
    }
}

/// The more raters place a comment in the discrimination band, the closer it
/// is to conscious discrimination.
pub fn classify_conscious(records: &[AnnotationRecord], threshold: Fraction) -> Result<ConsciousClass, SchemeError> {
    if records.len() < 2 {
        return Err(SchemeError::InsufficientRaters { needed: 2, got: records.len() });
    }
    let discriminatory = records.iter().filter(|r| derive_cortese(r) == CorteseCategory::Discrimination12).count();
    Ok(if discriminatory == 0 {
        ConsciousClass::NotApplicable
    } else if threshold.reached_by(discriminatory, records.len()) {
        ConsciousClass::Conscious
    } else {
        ConsciousClass::Unintentional
    })
}

/// Majority over binary labels; exact ties go to `tie_break`.
pub fn majority_vote(labels: &[BinaryLabel], tie_break: TieBreak) -> Result<GoldLabel, SchemeError> {
    if labels.is_empty() {
        return Err(SchemeError::InsufficientRaters { needed: 1, got: 0 });
    }
    let hs = labels.iter().filter(|&&l| l == BinaryLabel::HateSpeech).count();
    let nhs = labels.len() - hs;
    Ok(match hs.cmp(&nhs) {
        std::cmp::Ordering::Greater => GoldLabel::HateSpeech,
        std::cmp::Ordering::Less => GoldLabel::NotHateSpeech,
        std::cmp::Ordering::Equal => match tie_break {
            TieBreak::NotHateSpeech => GoldLabel::NotHateSpeech,
            TieBreak::Escalate => GoldLabel::Escalated,
        },
    })
}

/// Gold binary label for one comment from all its multi-level records.
pub fn aggregate_binary(
    records: &[AnnotationRecord],
    registry: &ProtectedGroupRegistry,
    tie_break: TieBreak,
) -> Result<GoldLabel, SchemeError> {
    let mut ids: Vec<String> = records.iter().map(|r| r.comment_id.clone()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() > 1 {
        return Err(SchemeError::MixedComments(ids));
    }
    let labels = records.iter().map(|r| derive_binary(r, registry)).collect::<Result<Vec<_>, _>>()?;
    majority_vote(&labels, tie_break)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::record::TargetKind;
    use chrono::DateTime;
    use std::collections::BTreeSet;

    fn group_record(group: &str, strategies: &[Strategy], violence: Option<bool>) -> AnnotationRecord {
        AnnotationRecord {
            comment_id: "c1".into(),
            annotator_id: "r".into(),
            attitude: Attitude::Negative,
            target: Some(TargetKind::Group),
            group_name: Some(group.into()),
            strategies: strategies.iter().copied().collect(),
            violence_call: violence,
            submitted_at: DateTime::UNIX_EPOCH,
        }
    }

    fn positive() -> AnnotationRecord {
        AnnotationRecord {
            comment_id: "c1".into(),
            annotator_id: "r".into(),
            attitude: Attitude::Positive,
            target: None,
            group_name: None,
            strategies: BTreeSet::new(),
            violence_call: None,
            submitted_at: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn binary_examples() {
        let reg = ProtectedGroupRegistry::default_malta();
        let r = group_record("migrants", &[Strategy::Suggestion], Some(false));
        assert_eq!(derive_binary(&r, &reg), Ok(BinaryLabel::HateSpeech));
        let r = group_record("politicians", &[Strategy::Insult, Strategy::Threat], None);
        assert_eq!(derive_binary(&r, &reg), Ok(BinaryLabel::NotHateSpeech));
        assert_eq!(derive_binary(&positive(), &reg), Ok(BinaryLabel::NotHateSpeech));
        let r = group_record("zombies", &[Strategy::Threat], None);
        assert_eq!(derive_binary(&r, &reg), Err(SchemeError::UnknownGroup("zombies".into())));
    }

    #[test]
    fn cortese_examples() {
        assert_eq!(derive_cortese(&group_record("m", &[Strategy::Threat], None)), CorteseCategory::IncitementViolence);
        assert_eq!(
            derive_cortese(&group_record("m", &[Strategy::Suggestion], Some(false))),
            CorteseCategory::IncitementHatred
        );
        assert_eq!(
            derive_cortese(&group_record("m", &[Strategy::Suggestion], Some(true))),
            CorteseCategory::IncitementViolence
        );
        assert_eq!(
            derive_cortese(&group_record("m", &[Strategy::Insult, Strategy::Sarcasm], None)),
            CorteseCategory::Discrimination12
        );
        assert_eq!(derive_cortese(&positive()), CorteseCategory::NotApplicable);
    }

    fn panel(discriminatory: usize, total: usize) -> Vec<AnnotationRecord> {
        (0..total)
            .map(|i| {
                if i < discriminatory {
                    group_record("migrants", &[Strategy::Stereotyping], None)
                } else {
                    positive()
                }
            })
            .collect()
    }

    #[test]
    fn conscious_classification() {
        let t = Fraction::TWO_THIRDS;
        assert_eq!(classify_conscious(&panel(8, 12), t), Ok(ConsciousClass::Conscious));
        assert_eq!(classify_conscious(&panel(0, 12), t), Ok(ConsciousClass::NotApplicable));
        assert_eq!(classify_conscious(&panel(4, 12), t), Ok(ConsciousClass::Unintentional));
        assert_eq!(classify_conscious(&panel(7, 12), t), Ok(ConsciousClass::Unintentional));
        assert_eq!(
            classify_conscious(&panel(1, 1), t),
            Err(SchemeError::InsufficientRaters { needed: 2, got: 1 })
        );
        let mut shuffled = panel(8, 12);
        shuffled.reverse();
        assert_eq!(classify_conscious(&shuffled, t), Ok(ConsciousClass::Conscious));
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!("2/3".parse::<Fraction>().unwrap(), Fraction::TWO_THIRDS);
        assert_eq!("1".parse::<Fraction>().unwrap(), Fraction::new(1, 1).unwrap());
        assert!("0/3".parse::<Fraction>().is_err());
        assert!("4/3".parse::<Fraction>().is_err());
        assert!("x".parse::<Fraction>().is_err());
        assert_eq!(serde_json::to_string(&Fraction::TWO_THIRDS).unwrap(), r#""2/3""#);
    }

    #[test]
    fn majority_and_ties() {
        use BinaryLabel::*;
        assert_eq!(majority_vote(&[HateSpeech, HateSpeech, NotHateSpeech], TieBreak::Escalate), Ok(GoldLabel::HateSpeech));
        assert_eq!(majority_vote(&[HateSpeech, NotHateSpeech], TieBreak::NotHateSpeech), Ok(GoldLabel::NotHateSpeech));
        assert_eq!(majority_vote(&[HateSpeech, NotHateSpeech], TieBreak::Escalate), Ok(GoldLabel::Escalated));
        assert!(majority_vote(&[], TieBreak::Escalate).is_err());
    }

    #[test]
    fn aggregate_rejects_mixed_comments() {
        let reg = ProtectedGroupRegistry::default_malta();
        let mut other = positive();
        other.comment_id = "c2".into();
        assert!(matches!(aggregate_binary(&[positive(), other], &reg, TieBreak::Escalate), Err(SchemeError::MixedComments(_))));
        let hs = group_record("migrants", &[Strategy::Threat], None);
        assert_eq!(aggregate_binary(&[hs.clone(), hs, positive()], &reg, TieBreak::Escalate), Ok(GoldLabel::HateSpeech));
    }
}

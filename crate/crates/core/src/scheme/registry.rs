use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SchemeError;
use crate::corpus::match_key;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub canonical: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    pub protected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RegistryDoc {
    #[serde(default)]
    jurisdiction: Option<String>,
    entries: Vec<RegistryEntry>,
}

/// Group categories and whether anti-discrimination law protects them.
///
/// Names and aliases are matched after trimming, whitespace collapsing,
/// Maltese diacritic folding and lowercasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RegistryDoc", into = "RegistryDoc")]
pub struct ProtectedGroupRegistry {
    jurisdiction: Option<String>,
    entries: Vec<RegistryEntry>,
    index: HashMap<String, usize>,
}

impl TryFrom<RegistryDoc> for ProtectedGroupRegistry {
    type Error = SchemeError;

    fn try_from(doc: RegistryDoc) -> Result<Self, Self::Error> {
        ProtectedGroupRegistry::new(doc.jurisdiction, doc.entries)
    }
}

impl From<ProtectedGroupRegistry> for RegistryDoc {
    fn from(r: ProtectedGroupRegistry) -> Self {
        RegistryDoc { jurisdiction: r.jurisdiction, entries: r.entries }
    }
}

impl ProtectedGroupRegistry {
    /// Fails when two canonical names or aliases collide after folding.
    pub fn new(jurisdiction: Option<String>, entries: Vec<RegistryEntry>) -> Result<Self, SchemeError> {
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            for name in std::iter::once(&e.canonical).chain(&e.aliases) {
                let key = match_key(name);
                if key.is_empty() {
                    return Err(SchemeError::InvalidRegistry(format!("blank name in entry `{}`", e.canonical)));
                }
                if let Some(j) = index.insert(key.clone(), i).filter(|&j| j != i) {
                    return Err(SchemeError::InvalidRegistry(format!(
                        "`{name}` (folded `{key}`) names both `{}` and `{}`",
                        entries[j].canonical, e.canonical
                    )));
                }
            }
        }
        Ok(ProtectedGroupRegistry { jurisdiction, entries, index })
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn jurisdiction(&self) -> Option<&str> {
        self.jurisdiction.as_deref()
    }

    pub fn resolve(&self, group_name: &str) -> Option<&RegistryEntry> {
        self.index.get(&match_key(group_name)).map(|&i| &self.entries[i])
    }

    /// Protection flag of the matching entry; unmatched names are an error,
    /// never a silent `false`.
    pub fn is_protected(&self, group_name: &str) -> Result<bool, SchemeError> {
        self.resolve(group_name)
            .map(|e| e.protected)
            .ok_or_else(|| SchemeError::UnknownGroup(group_name.trim().to_string()))
    }

    /// SHA-256 over the registry's JSON serialization, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("registry serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Shipped default for Malta: migrants, refugees, asylum seekers, LGBTIQ+
    /// people, religious and ethnic minorities are protected; politicians,
    /// church officials, "the Maltese" and employers are not.
    pub fn default_malta() -> Self {
        fn entry(canonical: &str, aliases: &[&str], protected: bool) -> RegistryEntry {
            RegistryEntry {
                canonical: canonical.to_string(),
                aliases: aliases.iter().map(|s| s.to_string()).collect(),
                protected,
            }
        }
        let entries = vec![
            entry(
                "migrants",
                &["migrant", "immigrants", "immigrant", "illegal immigrants", "irregular migrants", "immigranti", "klandestini"],
                true,
            ),
            entry("refugees", &["refugee", "refuġjati", "refuġjat"], true),
            entry("asylum seekers", &["asylum seeker", "asylum-seekers"], true),
            entry(
                "LGBTIQ+",
                &["lgbt", "lgbtq", "lgbtiq", "lgbtiq+ community", "gay people", "gays", "homosexuals", "omosesswali", "transgender people"],
                true,
            ),
            entry("religious minorities", &["muslims", "muslim", "jews", "musulmani"], true),
            entry("ethnic minorities", &["africans", "black people", "racial minorities", "afrikani"], true),
            entry("politicians", &["politician", "government", "politiċi", "ministers"], false),
            entry("church officials", &["priests", "clergy", "bishops", "qassisin"], false),
            entry("the Maltese", &["maltese", "maltin", "il-maltin"], false),
            entry("employers", &["employer", "businesses", "bosses"], false),
        ];
        Self::new(Some("MT".into()), entries).expect("default registry is consistent")
    }
}

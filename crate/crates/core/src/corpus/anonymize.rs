use std::collections::BTreeSet;

use hmac::{Hmac, Mac};
use regex::{Regex, RegexBuilder};
use sha2::Sha256;

use super::{Comment, CorpusError, RawComment};

/// Literal token substituted for inline username mentions.
pub const USERNAME_PLACEHOLDER: &str = "[username]";

/// Pseudonym length in bytes before hex rendering.
const PSEUDONYM_BYTES: usize = 16;

/// Replaces author names by keyed digests and scrubs inline mentions of any
/// username in the inventory.
///
/// Pseudonyms are HMAC-SHA256(salt, raw author) truncated to 16 bytes and
/// hex-encoded, so independent runs with the same salt agree.
pub struct Anonymizer {
    mac: Hmac<Sha256>,
    inventory: BTreeSet<String>,
    mentions: Option<Regex>,
}

impl Anonymizer {
    /// Builds an anonymizer over an explicit username inventory. Empty names
    /// are ignored.
    pub fn new<I, S>(salt: &[u8], usernames: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if salt.is_empty() {
            return Err(CorpusError::EmptySalt);
        }
        let mac = Hmac::<Sha256>::new_from_slice(salt).expect("HMAC accepts keys of any length");
        let inventory: BTreeSet<String> = usernames
            .into_iter()
            .map(Into::into)
            .filter(|u| !u.trim().is_empty())
            .collect();
        let mentions = if inventory.is_empty() {
            None
        } else {
            // Longest names first so that "alice_b" wins over "alice".
            let mut names: Vec<&String> = inventory.iter().collect();
            names.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
            let alternation = names.iter().map(|n| regex::escape(n)).collect::<Vec<_>>().join("|");
            Some(
                RegexBuilder::new(&format!("@?(?:{alternation})"))
                    .case_insensitive(true)
                    .build()
                    .expect("escaped alternation is a valid pattern"),
            )
        };
        Ok(Anonymizer { mac, inventory, mentions })
    }

    /// Inventory taken from the authors of the given comments.
    pub fn for_corpus(salt: &[u8], comments: &[RawComment]) -> Result<Self, CorpusError> {
        Self::new(salt, comments.iter().map(|c| c.author.clone()))
    }

    pub fn inventory(&self) -> &BTreeSet<String> {
        &self.inventory
    }

    pub fn pseudonym(&self, author: &str) -> String {
        let mut mac = self.mac.clone();
        mac.update(author.as_bytes());
        let digest = mac.finalize().into_bytes();
        hex::encode(&digest[..PSEUDONYM_BYTES])
    }

    pub fn scrub(&self, text: &str) -> String {
        match &self.mentions {
            Some(re) => re.replace_all(text, USERNAME_PLACEHOLDER).into_owned(),
            None => text.to_string(),
        }
    }

    pub fn anonymize(&self, raw: &RawComment) -> Comment {
        Comment {
            id: raw.id.clone(),
            source: raw.source.clone(),
            article_id: raw.article_id.clone(),
            author_pseudonym: self.pseudonym(&raw.author),
            created_at: raw.created_at,
            text: self.scrub(&raw.text),
            deleted: raw.deleted,
            language: raw.language,
            subcorpus: raw.subcorpus.clone(),
            matched_keywords: BTreeSet::new(),
        }
    }

    pub fn anonymize_all(&self, raws: &[RawComment]) -> Vec<Comment> {
        raws.iter().map(|r| self.anonymize(r)).collect()
    }

    /// Raw usernames still visible in an anonymized comment.
    pub fn leaks(&self, comment: &Comment) -> Vec<String> {
        self.inventory
            .iter()
            .filter(|u| comment.author_pseudonym == **u || contains_raw_username(&comment.text, u))
            .cloned()
            .collect()
    }
}

/// Case-insensitive containment check that ignores placeholder tokens, so a
/// username such as "user" is not reported inside "[username]".
pub fn contains_raw_username(text: &str, username: &str) -> bool {
    let haystack = text.replace(USERNAME_PLACEHOLDER, "\u{0}").to_lowercase();
    haystack.contains(&username.to_lowercase())
}

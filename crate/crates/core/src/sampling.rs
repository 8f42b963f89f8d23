//! Seeded stratified sampling of pilot items and per-annotator presentation
//! orders.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). A generator
//! for a given purpose is seeded with SHA-256(seed as little-endian u64 ‖ key),
//! so results depend only on the seed and the key string, never on platform
//! or thread scheduling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("stratum `{label}` asks for {take} items but has only {available}")]
    InfeasibleStratum { label: String, take: usize, available: usize },
    #[error("stratum label `{0}` used more than once")]
    DuplicateLabel(String),
    #[error("comment `{id}` belongs to both `{first}` and `{second}`")]
    OverlappingStrata { id: String, first: String, second: String },
    #[error("manifest selects no items")]
    EmptyManifest,
    #[error("no author known for selected comment `{0}`")]
    UnknownItem(String),
    #[error("strata CSV: {0}")]
    Csv(String),
}

/// Generator for one named purpose under a run seed.
pub fn keyed_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub label: String,
    pub member_ids: BTreeSet<String>,
    pub take: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumSelection {
    pub label: String,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationOrder {
    pub ids: Vec<String>,
    /// True when no arrangement separates same-author items, in which case
    /// `ids` is the plain seeded shuffle.
    pub author_adjacent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub seed: u64,
    pub strata: Vec<StratumSelection>,
    #[serde(default)]
    pub item_order_by_annotator: BTreeMap<String, PresentationOrder>,
}

impl SampleManifest {
    /// All selected ids, stratum by stratum.
    pub fn selected_ids(&self) -> Vec<String> {
        self.strata.iter().flat_map(|s| s.ids.iter().cloned()).collect()
    }

    pub fn stratum_of(&self, id: &str) -> Option<&str> {
        self.strata.iter().find(|s| s.ids.iter().any(|i| i == id)).map(|s| s.label.as_str())
    }
}

/// Draws `take` ids from each stratum, uniformly without replacement.
pub fn stratified_sample(strata: &[StratumSpec], seed: u64) -> Result<SampleManifest, SamplingError> {
    let mut owner: HashMap<&str, &str> = HashMap::new();
    let mut labels = BTreeSet::new();
    for s in strata {
        if !labels.insert(s.label.as_str()) {
            return Err(SamplingError::DuplicateLabel(s.label.clone()));
        }
        if s.take > s.member_ids.len() {
            return Err(SamplingError::InfeasibleStratum {
                label: s.label.clone(),
                take: s.take,
                available: s.member_ids.len(),
            });
        }
        for id in &s.member_ids {
            if let Some(first) = owner.insert(id, &s.label) {
                return Err(SamplingError::OverlappingStrata {
                    id: id.clone(),
                    first: first.to_string(),
                    second: s.label.clone(),
                });
            }
        }
    }

    let mut rng = keyed_rng(seed, "stratified-sample");
    let selections = strata
        .iter()
        .map(|s| {
            let members: Vec<&String> = s.member_ids.iter().collect();
            let ids = index::sample(&mut rng, members.len(), s.take)
                .into_iter()
                .map(|i| members[i].clone())
                .collect();
            StratumSelection { label: s.label.clone(), ids }
        })
        .collect();
    Ok(SampleManifest { seed, strata: selections, item_order_by_annotator: BTreeMap::new() })
}

/// Reads `label,comment_id` rows (header required) into strata that each
/// take `take` items. Strata keep the order of first appearance.
pub fn strata_from_csv<R: Read>(input: R, take: usize) -> Result<Vec<StratumSpec>, SamplingError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| SamplingError::Csv(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| SamplingError::Csv(format!("missing column `{name}`")))
    };
    let (label_col, id_col) = (col("label")?, col("comment_id")?);
    let mut strata: Vec<StratumSpec> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| SamplingError::Csv(e.to_string()))?;
        let (label, id) = match (row.get(label_col), row.get(id_col)) {
            (Some(l), Some(i)) => (l.trim(), i.trim()),
            _ => return Err(SamplingError::Csv(format!("short row {:?}", row.position()))),
        };
        match strata.iter_mut().find(|s| s.label == label) {
            Some(s) => {
                s.member_ids.insert(id.to_string());
            }
            None => strata.push(StratumSpec {
                label: label.to_string(),
                member_ids: BTreeSet::from([id.to_string()]),
                take,
            }),
        }
    }
    Ok(strata)
}

/// Seeded presentation order for one annotator.
///
/// Starts from a plain seeded shuffle, then rebuilds the sequence author by
/// author so that no two consecutive items share a pseudonym. At each step the
/// next author is drawn uniformly among those that keep the remainder
/// arrangeable. When no separating arrangement exists the plain shuffle is
/// returned with `author_adjacent` set.
pub fn presentation_order(
    manifest: &SampleManifest,
    annotator_id: &str,
    author_of: &HashMap<String, String>,
    seed: u64,
) -> Result<PresentationOrder, SamplingError> {
    let mut ids = manifest.selected_ids();
    if ids.is_empty() {
        return Err(SamplingError::EmptyManifest);
    }
    for id in &ids {
        if !author_of.contains_key(id) {
            return Err(SamplingError::UnknownItem(id.clone()));
        }
    }
    let mut rng = keyed_rng(seed, &format!("presentation-order/{annotator_id}"));
    ids.shuffle(&mut rng);

    // Per-author queues in order of first appearance in the shuffle.
    let mut authors: Vec<&str> = Vec::new();
    let mut queues: HashMap<&str, Vec<String>> = HashMap::new();
    for id in &ids {
        let a = author_of[id].as_str();
        let q = queues.entry(a).or_insert_with(|| {
            authors.push(a);
            Vec::new()
        });
        q.push(id.clone());
    }
    let total = ids.len();
    let largest = queues.values().map(Vec::len).max().unwrap_or(0);
    if largest > total.div_ceil(2) {
        return Ok(PresentationOrder { ids, author_adjacent: true });
    }
    for q in queues.values_mut() {
        q.reverse();
    }

    let mut order = Vec::with_capacity(total);
    let mut prev: Option<&str> = None;
    while order.len() < total {
        let remaining_after = total - order.len() - 1;
        let candidates: Vec<&str> = authors
            .iter()
            .copied()
            .filter(|&a| Some(a) != prev && !queues[a].is_empty())
            .filter(|&a| arrangeable_after(&queues, a, remaining_after))
            .collect();
        let pick = candidates[rng.random_range(0..candidates.len())];
        order.push(queues.get_mut(pick).and_then(Vec::pop).expect("candidate queue non-empty"));
        prev = Some(pick);
    }
    Ok(PresentationOrder { ids: order, author_adjacent: false })
}

/// Whether, after taking one item from `picked`, the remaining `rest` items can
/// be laid out without adjacent repeats and without starting with `picked`.
fn arrangeable_after(queues: &HashMap<&str, Vec<String>>, picked: &str, rest: usize) -> bool {
    queues.iter().all(|(&a, q)| {
        let left = if a == picked { q.len() - 1 } else { q.len() };
        if a == picked {
            left <= rest / 2
        } else {
            left <= rest.div_ceil(2)
        }
    })
}

/// Orders for every annotator. With `shared`, all annotators receive the
/// order generated for the key `*shared*`.
pub fn assign_orders(
    manifest: &mut SampleManifest,
    annotators: &[String],
    author_of: &HashMap<String, String>,
    seed: u64,
    shared: bool,
) -> Result<(), SamplingError> {
    let shared_order = if shared { Some(presentation_order(manifest, "*shared*", author_of, seed)?) } else { None };
    for a in annotators {
        let order = match &shared_order {
            Some(o) => o.clone(),
            None => presentation_order(manifest, a, author_of, seed)?,
        };
        manifest.item_order_by_annotator.insert(a.clone(), order);
    }
    Ok(())
}

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hsa_core::corpus::{read_jsonl, Comment};
use hsa_core::sampling::SampleManifest;
use hsa_core::scheme::{Fraction, ProtectedGroupRegistry, TieBreak};

pub const DEFAULT_BINARY_INSTRUCTION: &str =
    "Does this comment constitute hate speech under the definition provided in your instructions?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCapacity {
    pub binary: usize,
    pub multilevel: usize,
}

impl Default for ArmCapacity {
    fn default() -> Self {
        ArmCapacity { binary: 12, multilevel: 12 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Coin used to break assignment ties.
    pub assignment: u64,
    /// Presentation orders.
    pub order: u64,
}

/// A two-arm pilot: who may join, what they annotate and how results are
/// derived. Carries the manifest, items and registry inline so a running
/// experiment never depends on files that might change underneath it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(default)]
    pub capacity: ArmCapacity,
    pub genders: Vec<String>,
    pub age_bands: Vec<String>,
    pub manifest: SampleManifest,
    /// The comments behind the manifest's selected ids.
    pub items: Vec<Comment>,
    #[serde(default = "ProtectedGroupRegistry::default_malta")]
    pub registry: ProtectedGroupRegistry,
    #[serde(default)]
    pub conscious_threshold: Fraction,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub seeds: Seeds,
    /// One presentation order for everybody instead of one per annotator.
    #[serde(default)]
    pub share_order: bool,
    #[serde(default = "default_instruction")]
    pub binary_instruction: String,
}

fn default_instruction() -> String {
    DEFAULT_BINARY_INSTRUCTION.to_string()
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn distinct(name: &str, values: &[String]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError(format!("{name} must not be empty")));
    }
    if values.iter().any(|v| v.trim().is_empty()) {
        return Err(ConfigError(format!("{name} contains an empty value")));
    }
    if values.iter().collect::<BTreeSet<_>>().len() != values.len() {
        return Err(ConfigError(format!("{name} contains duplicates")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.id.trim().is_empty() {
            return Err(ConfigError("experiment id must not be empty".into()));
        }
        if self.capacity.binary == 0 || self.capacity.multilevel == 0 {
            return Err(ConfigError("each arm needs room for at least one annotator".into()));
        }
        distinct("genders", &self.genders)?;
        distinct("age_bands", &self.age_bands)?;
        let selected = self.manifest.selected_ids();
        if selected.is_empty() {
            return Err(ConfigError("the sample manifest selects no items".into()));
        }
        let have: BTreeSet<&str> = self.items.iter().map(|c| c.id.as_str()).collect();
        let missing: Vec<&str> = selected.iter().map(String::as_str).filter(|id| !have.contains(id)).collect();
        if !missing.is_empty() {
            return Err(ConfigError(format!("items missing for selected ids {missing:?}")));
        }
        Ok(())
    }

    pub fn item(&self, id: &str) -> Option<&Comment> {
        self.items.iter().find(|c| c.id == id)
    }

    pub fn author_of(&self) -> HashMap<String, String> {
        self.items.iter().map(|c| (c.id.clone(), c.author_pseudonym.clone())).collect()
    }

    pub fn seed_map(&self) -> BTreeMap<String, u64> {
        BTreeMap::from([
            ("sample".to_string(), self.manifest.seed),
            ("assignment".to_string(), self.seeds.assignment),
            ("order".to_string(), self.seeds.order),
        ])
    }
}

/// On-disk form of [`ExperimentConfig`] that points at files instead of
/// embedding them. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentFile {
    pub id: String,
    #[serde(default)]
    pub capacity: ArmCapacity,
    pub genders: Vec<String>,
    pub age_bands: Vec<String>,
    pub manifest: PathBuf,
    pub comments: PathBuf,
    pub registry: Option<PathBuf>,
    #[serde(default)]
    pub conscious_threshold: Fraction,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub share_order: bool,
    pub binary_instruction: Option<String>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl ExperimentFile {
    /// Parses TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = read(path)?;
        let file: ExperimentFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        };
        file.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(self, base: &Path) -> Result<ExperimentConfig, ConfigError> {
        let at = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let manifest_path = at(&self.manifest);
        let manifest: SampleManifest = serde_json::from_str(&read(&manifest_path)?)
            .map_err(|e| ConfigError(format!("{}: {e}", manifest_path.display())))?;
        let comments_path = at(&self.comments);
        let file = File::open(&comments_path).map_err(|e| ConfigError(format!("{}: {e}", comments_path.display())))?;
        let selected: BTreeSet<String> = manifest.selected_ids().into_iter().collect();
        let items = read_jsonl(BufReader::new(file))
            .map_err(|e| ConfigError(format!("{}: {e}", comments_path.display())))?
            .into_iter()
            .filter(|c| selected.contains(&c.id))
            .collect();
        let registry = match &self.registry {
            Some(p) => {
                let p = at(p);
                serde_json::from_str(&read(&p)?).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
            }
            None => ProtectedGroupRegistry::default_malta(),
        };
        let config = ExperimentConfig {
            id: self.id,
            capacity: self.capacity,
            genders: self.genders,
            age_bands: self.age_bands,
            manifest,
            items,
            registry,
            conscious_threshold: self.conscious_threshold,
            tie_break: self.tie_break,
            seeds: self.seeds,
            share_order: self.share_order,
            binary_instruction: self.binary_instruction.unwrap_or_else(default_instruction),
        };
        config.validate()?;
        Ok(config)
    }
}

//! Experiment state machine behind both the HTTP API and the CLI.
//!
//! Experiments, annotator registrations and half-answered items live in a
//! small JSON state file next to the event store. Finished annotations only
//! ever go to the store.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use hsa_core::agreement::{
    agreement_report, binary_labels, binary_projection, build_matrix, per_level_agreement, render_table,
    AgreementError, AgreementReport, ExcludedItem, Labels, LevelReport, MatrixPolicy,
};
use hsa_core::corpus::Comment;
use hsa_core::sampling::{assign_orders, keyed_rng, SamplingError};
use hsa_core::scheme::{
    classify_conscious, derive_cortese, majority_vote, Answer, Answers, AnnotationRecord, BinaryLabel,
    ConsciousClass, CorteseCategory, GatingViolation, GoldLabel, QuestionId, RoutingError,
};
use hsa_core::store::{
    build_export, Arm, BinaryJudgment, DatasetExport, EventStore, ExportContext, ExportFormat, IdempotencyKey,
    Payload, StoreError,
};

use crate::config::{ConfigError, ExperimentConfig};

pub const STATE_FILE: &str = "service-state.json";

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

/// Clock that starts at `start` and advances one second per reading.
pub fn stepping_clock(start: DateTime<Utc>) -> Clock {
    let tick = std::sync::atomic::AtomicI64::new(0);
    Arc::new(move || start + chrono::Duration::seconds(tick.fetch_add(1, std::sync::atomic::Ordering::SeqCst)))
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("experiment `{0}` already exists")]
    ExperimentExists(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(#[from] ConfigError),
    #[error("annotator `{0}` is not assigned to any experiment")]
    Unassigned(String),
    #[error("annotator `{0}` has not given consent")]
    ConsentRequired(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("annotator `{0}` is already registered with a different profile or experiment")]
    ProfileConflict(String),
    #[error("both arms of experiment `{0}` are full")]
    Capacity(String),
    #[error("comment `{comment}` is not the open task for `{annotator}`")]
    TaskNotOpen { annotator: String, comment: String, open: Option<String> },
    #[error("{0}")]
    WrongArm(String),
    #[error("gating violations: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Gating(Vec<GatingViolation>),
    #[error("{error}")]
    Routing { error: RoutingError, next: QuestionId },
    #[error("annotators still working: {0:?}")]
    Pending(Vec<String>),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("{path}: {message}")]
    State { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub annotator_id: String,
    pub gender: String,
    pub age_band: String,
    pub consent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub profile: AnnotatorProfile,
    pub experiment: String,
    pub arm: Arm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Partial {
    comment_id: String,
    answers: Answers,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct State {
    experiments: BTreeMap<String, ExperimentConfig>,
    annotators: BTreeMap<String, Registration>,
    partial: BTreeMap<String, Partial>,
}

/// Arm totals for one attribute value.
type Counts = BTreeMap<String, [usize; 2]>;

fn arm_index(arm: Arm) -> usize {
    match arm {
        Arm::Binary => 0,
        Arm::Multilevel => 1,
    }
}

/// Imbalance after hypothetically adding `profile` to `arm`:
/// (Σ per-gender |difference|, Σ per-age-band |difference|, |size difference|).
fn imbalance(
    genders: &Counts,
    ages: &Counts,
    sizes: [usize; 2],
    profile: &AnnotatorProfile,
    arm: Arm,
) -> (usize, usize, usize) {
    let i = arm_index(arm);
    let spread = |counts: &Counts, value: &str| -> usize {
        counts
            .iter()
            .map(|(k, c)| {
                let mut c = *c;
                if k == value {
                    c[i] += 1;
                }
                c[0].abs_diff(c[1])
            })
            .sum()
    };
    let mut sizes = sizes;
    sizes[i] += 1;
    (spread(genders, &profile.gender), spread(ages, &profile.age_band), sizes[0].abs_diff(sizes[1]))
}

/// Greedy balanced assignment. Picks the arm with spare capacity whose
/// post-assignment imbalance vector is lexicographically smallest; an exact
/// tie is settled by a coin keyed on the annotator id.
pub fn assign_annotator(
    profile: &AnnotatorProfile,
    config: &ExperimentConfig,
    current: &[(AnnotatorProfile, Arm)],
) -> Result<Arm, ServiceError> {
    if !config.genders.contains(&profile.gender) {
        return Err(ServiceError::InvalidProfile(format!("gender `{}` is not one of {:?}", profile.gender, config.genders)));
    }
    if !config.age_bands.contains(&profile.age_band) {
        return Err(ServiceError::InvalidProfile(format!(
            "age band `{}` is not one of {:?}",
            profile.age_band, config.age_bands
        )));
    }
    let mut genders: Counts = config.genders.iter().map(|g| (g.clone(), [0, 0])).collect();
    let mut ages: Counts = config.age_bands.iter().map(|a| (a.clone(), [0, 0])).collect();
    let mut sizes = [0usize; 2];
    for (p, arm) in current {
        let i = arm_index(*arm);
        sizes[i] += 1;
        if let Some(c) = genders.get_mut(&p.gender) {
            c[i] += 1;
        }
        if let Some(c) = ages.get_mut(&p.age_band) {
            c[i] += 1;
        }
    }
    let capacity = [config.capacity.binary, config.capacity.multilevel];
    let open: Vec<Arm> = [Arm::Binary, Arm::Multilevel].into_iter().filter(|a| sizes[arm_index(*a)] < capacity[arm_index(*a)]).collect();
    let scored: Vec<(Arm, (usize, usize, usize))> =
        open.iter().map(|&a| (a, imbalance(&genders, &ages, sizes, profile, a))).collect();
    let best = scored.iter().map(|(_, s)| *s).min().ok_or_else(|| ServiceError::Capacity(config.id.clone()))?;
    let tied: Vec<Arm> = scored.iter().filter(|(_, s)| *s == best).map(|(a, _)| *a).collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    let mut coin = keyed_rng(config.seeds.assignment, &format!("assign/{}/{}", config.id, profile.annotator_id));
    Ok(tied[coin.random_range(0..tied.len())])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskComment {
    pub id: String,
    pub text: String,
}

/// What an annotator sees next. Only ever contains the caller's own answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Task {
    Open {
        experiment: String,
        arm: Arm,
        comment: TaskComment,
        /// 1-based position in the annotator's order.
        position: usize,
        total: usize,
        /// Next scheme question; absent for the binary arm.
        question: Option<QuestionId>,
        /// Binary-arm question copy.
        instruction: Option<String>,
        answers: Option<Answers>,
    },
    Done {
        experiment: String,
        total: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub annotator_id: String,
    pub comment_id: String,
    #[serde(default)]
    pub answer: Option<Answer>,
    #[serde(default)]
    pub label: Option<BinaryLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: bool,
    /// Next question for this item; `Complete` once it is stored.
    pub next: Option<QuestionId>,
    pub sequence_number: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmColumn {
    pub annotators: usize,
    pub labels: usize,
    pub report: AgreementReport,
    pub excluded: Vec<ExcludedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentSummary {
    pub comment_id: String,
    pub binary_gold: Option<GoldLabel>,
    pub multilevel_gold: Option<GoldLabel>,
    pub conscious: Option<ConsciousClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub forced: bool,
    /// Annotators who had not finished when a forced report was taken.
    pub pending: Vec<String>,
    pub binary: Option<ArmColumn>,
    pub multilevel: Option<ArmColumn>,
    pub notes: Vec<String>,
    pub per_level: Vec<LevelReport>,
    pub cortese_distribution: BTreeMap<CorteseCategory, usize>,
    pub comments: Vec<CommentSummary>,
    pub table: String,
}

pub struct Service {
    dir: PathBuf,
    state: State,
    store: EventStore,
    /// Completed (annotator, comment) pairs, mirrored from the store.
    done: HashSet<(String, String)>,
    clock: Clock,
    persist: bool,
}

impl Service {
    /// Opens the store in `dir` together with its service state.
    pub fn open(dir: impl AsRef<Path>, clock: Clock) -> Result<Service, ServiceError> {
        let dir = dir.as_ref().to_path_buf();
        let store = EventStore::open(&dir)?;
        let path = dir.join(STATE_FILE);
        let state = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| ServiceError::State { path: path.clone(), message: e.to_string() })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => State::default(),
            Err(e) => return Err(ServiceError::State { path, message: e.to_string() }),
        };
        let done = store
            .latest()
            .into_iter()
            .map(|e| (e.idempotency_key.annotator_id, e.idempotency_key.comment_id))
            .collect();
        Ok(Service { dir, state, store, done, clock, persist: true })
    }

    pub fn store(&self) -> &EventStore {
        &self.store
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn save(&self) -> Result<(), ServiceError> {
        if !self.persist {
            return Ok(());
        }
        let path = self.dir.join(STATE_FILE);
        let tmp = self.dir.join(format!("{STATE_FILE}.tmp"));
        let fail = |e: std::io::Error| ServiceError::State { path: path.clone(), message: e.to_string() };
        let mut f = fs::File::create(&tmp).map_err(fail)?;
        f.write_all(&serde_json::to_vec(&self.state).expect("state serializes")).map_err(fail)?;
        drop(f);
        fs::rename(&tmp, &path).map_err(fail)
    }

    /// Keeps state in memory only; the event store stays durable.
    pub fn set_persist_state(&mut self, persist: bool) {
        self.persist = persist;
    }

    pub fn experiment(&self, id: &str) -> Result<&ExperimentConfig, ServiceError> {
        self.state.experiments.get(id).ok_or_else(|| ServiceError::UnknownExperiment(id.to_string()))
    }

    pub fn experiments(&self) -> impl Iterator<Item = &ExperimentConfig> {
        self.state.experiments.values()
    }

    pub fn registration(&self, annotator_id: &str) -> Option<&Registration> {
        self.state.annotators.get(annotator_id)
    }

    pub fn create_experiment(&mut self, mut config: ExperimentConfig) -> Result<(), ServiceError> {
        config.validate()?;
        if self.state.experiments.contains_key(&config.id) {
            return Err(ServiceError::ExperimentExists(config.id));
        }
        config.manifest.item_order_by_annotator.clear();
        self.state.experiments.insert(config.id.clone(), config);
        self.save()
    }

    /// Registers an annotator and assigns an arm. Re-registering with the
    /// same profile is a no-op apart from updating consent.
    pub fn register(&mut self, experiment: &str, profile: AnnotatorProfile) -> Result<Registration, ServiceError> {
        if profile.annotator_id.trim().is_empty() {
            return Err(ServiceError::InvalidProfile("annotator_id must not be empty".into()));
        }
        if let Some(existing) = self.state.annotators.get_mut(&profile.annotator_id) {
            let same = existing.experiment == experiment
                && existing.profile.gender == profile.gender
                && existing.profile.age_band == profile.age_band;
            if !same {
                return Err(ServiceError::ProfileConflict(profile.annotator_id));
            }
            existing.profile.consent = profile.consent;
            let reg = existing.clone();
            self.save()?;
            return Ok(reg);
        }
        let config = self.experiment(experiment)?;
        let current: Vec<(AnnotatorProfile, Arm)> = self
            .state
            .annotators
            .values()
            .filter(|r| r.experiment == experiment)
            .map(|r| (r.profile.clone(), r.arm))
            .collect();
        let arm = assign_annotator(&profile, config, &current)?;
        let config = self.state.experiments.get_mut(experiment).expect("checked above");
        let author_of = config.author_of();
        let id = profile.annotator_id.clone();
        assign_orders(&mut config.manifest, std::slice::from_ref(&id), &author_of, config.seeds.order, config.share_order)?;
        let reg = Registration { profile, experiment: experiment.to_string(), arm };
        self.state.annotators.insert(id, reg.clone());
        self.save()?;
        Ok(reg)
    }

    fn consented(&self, annotator_id: &str) -> Result<&Registration, ServiceError> {
        let reg = self.state.annotators.get(annotator_id).ok_or_else(|| ServiceError::Unassigned(annotator_id.to_string()))?;
        if !reg.profile.consent {
            return Err(ServiceError::ConsentRequired(annotator_id.to_string()));
        }
        Ok(reg)
    }

    fn order(&self, reg: &Registration) -> Result<&[String], ServiceError> {
        let config = self.experiment(&reg.experiment)?;
        Ok(config
            .manifest
            .item_order_by_annotator
            .get(&reg.profile.annotator_id)
            .map(|o| o.ids.as_slice())
            .unwrap_or_default())
    }

    /// First item in the annotator's order without a stored annotation.
    fn open_item(&self, reg: &Registration) -> Result<Option<(usize, String)>, ServiceError> {
        let id = &reg.profile.annotator_id;
        Ok(self
            .order(reg)?
            .iter()
            .enumerate()
            .find(|(_, c)| !self.done.contains(&(id.clone(), c.to_string())))
            .map(|(i, c)| (i, c.clone())))
    }

    pub fn is_done(&self, annotator_id: &str) -> Result<bool, ServiceError> {
        let reg = self.state.annotators.get(annotator_id).ok_or_else(|| ServiceError::Unassigned(annotator_id.to_string()))?;
        Ok(self.open_item(reg)?.is_none())
    }

    pub fn next_task(&self, annotator_id: &str) -> Result<Task, ServiceError> {
        let reg = self.consented(annotator_id)?;
        let config = self.experiment(&reg.experiment)?;
        let total = self.order(reg)?.len();
        let Some((index, comment_id)) = self.open_item(reg)? else {
            return Ok(Task::Done { experiment: reg.experiment.clone(), total });
        };
        let item = config.item(&comment_id).expect("validated config holds every selected item");
        let comment = TaskComment { id: item.id.clone(), text: item.text.clone() };
        let (question, instruction, answers) = match reg.arm {
            Arm::Binary => (None, Some(config.binary_instruction.clone()), None),
            Arm::Multilevel => {
                let answers = self.partial_for(annotator_id, &comment_id);
                let q = answers.next_question().unwrap_or(QuestionId::Q1Attitude);
                (Some(q), None, Some(answers))
            }
        };
        Ok(Task::Open {
            experiment: reg.experiment.clone(),
            arm: reg.arm,
            comment,
            position: index + 1,
            total,
            question,
            instruction,
            answers,
        })
    }

    fn partial_for(&self, annotator_id: &str, comment_id: &str) -> Answers {
        match self.state.partial.get(annotator_id) {
            Some(p) if p.comment_id == comment_id => p.answers.clone(),
            _ => Answers::default(),
        }
    }

    /// Applies one submission. Validation happens here whatever the client
    /// did; nothing reaches the store unless it passes the scheme's gating.
    pub fn submit(&mut self, sub: Submission) -> Result<SubmitOutcome, ServiceError> {
        let reg = self.consented(&sub.annotator_id)?.clone();
        let open = self.open_item(&reg)?.map(|(_, c)| c);
        if open.as_deref() != Some(sub.comment_id.as_str()) {
            return Err(ServiceError::TaskNotOpen { annotator: sub.annotator_id, comment: sub.comment_id, open });
        }
        let key = IdempotencyKey { annotator_id: sub.annotator_id.clone(), comment_id: sub.comment_id.clone(), revision: 1 };
        match (reg.arm, sub.answer, sub.label) {
            (Arm::Binary, None, Some(label)) => {
                let now = (self.clock)();
                let payload = Payload::Binary(BinaryJudgment {
                    comment_id: sub.comment_id.clone(),
                    annotator_id: sub.annotator_id.clone(),
                    label,
                    submitted_at: now,
                });
                let appended = self.store.append(key, payload, now)?;
                self.done.insert((sub.annotator_id, sub.comment_id));
                Ok(SubmitOutcome { accepted: true, next: None, sequence_number: Some(appended.sequence_number) })
            }
            (Arm::Binary, ..) => Err(ServiceError::WrongArm("the binary arm takes exactly one `label` per item".into())),
            (Arm::Multilevel, Some(answer), None) => {
                let mut answers = self.partial_for(&sub.annotator_id, &sub.comment_id);
                let next = match answers.apply(answer) {
                    Ok(next) => next,
                    Err(RoutingError::Gating(v)) => return Err(ServiceError::Gating(v)),
                    Err(error) => {
                        let next = answers.next_question().unwrap_or(QuestionId::Q1Attitude);
                        return Err(ServiceError::Routing { error, next });
                    }
                };
                if next != QuestionId::Complete {
                    self.state.partial.insert(sub.annotator_id, Partial { comment_id: sub.comment_id, answers });
                    self.save()?;
                    return Ok(SubmitOutcome { accepted: true, next: Some(next), sequence_number: None });
                }
                let now = (self.clock)();
                let record = answers.finish(&sub.comment_id, &sub.annotator_id, now).map_err(|e| match e {
                    RoutingError::Gating(v) => ServiceError::Gating(v),
                    error => ServiceError::Routing { error, next },
                })?;
                let appended = self.store.append(key, Payload::Multilevel(record), now)?;
                self.done.insert((sub.annotator_id.clone(), sub.comment_id));
                if self.state.partial.remove(&sub.annotator_id).is_some() {
                    self.save()?;
                }
                Ok(SubmitOutcome { accepted: true, next: Some(QuestionId::Complete), sequence_number: Some(appended.sequence_number) })
            }
            (Arm::Multilevel, ..) => {
                Err(ServiceError::WrongArm("the multi-level arm takes exactly one scheme `answer` per submission".into()))
            }
        }
    }

    /// Agreement bundle for one experiment. Without `force`, every assigned
    /// annotator must be done; with it, incomplete items are dropped and the
    /// retained counts are reported.
    pub fn report(&self, experiment: &str, force: bool) -> Result<ExperimentReport, ServiceError> {
        let config = self.experiment(experiment)?;
        let members: BTreeMap<&str, Arm> = self
            .state
            .annotators
            .values()
            .filter(|r| r.experiment == experiment)
            .map(|r| (r.profile.annotator_id.as_str(), r.arm))
            .collect();
        let mut pending = Vec::new();
        for id in members.keys() {
            if !self.is_done(id)? {
                pending.push(id.to_string());
            }
        }
        if !force && !pending.is_empty() {
            return Err(ServiceError::Pending(pending));
        }
        let selected: BTreeSet<String> = config.manifest.selected_ids().into_iter().collect();
        let mut binary: BTreeMap<(String, String), BinaryLabel> = BTreeMap::new();
        let mut records: Vec<AnnotationRecord> = Vec::new();
        for e in self.store.latest() {
            if !members.contains_key(e.idempotency_key.annotator_id.as_str()) || !selected.contains(&e.idempotency_key.comment_id) {
                continue;
            }
            match e.payload {
                Payload::Binary(b) => {
                    binary.insert((b.comment_id, b.annotator_id), b.label);
                }
                Payload::Multilevel(r) => records.push(r),
            }
        }
        let policy = if force { MatrixPolicy::DropIncomplete } else { MatrixPolicy::Strict };
        let declared: Vec<String> = BinaryLabel::ALL.iter().map(|l| l.as_str().to_string()).collect();
        let mut notes = Vec::new();
        let column = |name: &str, labels: &Labels, arm: Arm, notes: &mut Vec<String>| -> Result<Option<ArmColumn>, ServiceError> {
            if labels.is_empty() {
                notes.push(format!("{name}: no labels, column absent"));
                return Ok(None);
            }
            match build_matrix(labels, &declared, policy) {
                Ok(built) => {
                    if !built.excluded.is_empty() {
                        notes.push(format!(
                            "{name}: retained {} of {} items",
                            built.matrix.items().len(),
                            built.matrix.items().len() + built.excluded.len()
                        ));
                    }
                    Ok(Some(ArmColumn {
                        annotators: members.values().filter(|a| **a == arm).count(),
                        labels: labels.len(),
                        report: agreement_report(&built.matrix),
                        excluded: built.excluded,
                    }))
                }
                // With nobody pending, a failure here is structural (one rater, say).
                Err(e) => {
                    notes.push(format!("{name}: not computable ({e})"));
                    Ok(None)
                }
            }
        };
        let binary_column = column("binary", &binary_labels(&binary), Arm::Binary, &mut notes)?;
        let projected = binary_projection(&records, &config.registry)?;
        let multilevel_column = column("multi-level", &binary_labels(&projected), Arm::Multilevel, &mut notes)?;

        let mut cortese_distribution: BTreeMap<CorteseCategory, usize> = CorteseCategory::ALL.iter().map(|c| (*c, 0)).collect();
        let mut by_comment: BTreeMap<&str, Vec<AnnotationRecord>> = BTreeMap::new();
        for r in &records {
            *cortese_distribution.entry(derive_cortese(r)).or_default() += 1;
            by_comment.entry(r.comment_id.as_str()).or_default().push(r.clone());
        }
        let gold = |labels: &BTreeMap<(String, String), BinaryLabel>, comment: &str| -> Option<GoldLabel> {
            let votes: Vec<BinaryLabel> = labels.iter().filter(|((c, _), _)| c == comment).map(|(_, l)| *l).collect();
            majority_vote(&votes, config.tie_break).ok()
        };
        let comments = selected
            .iter()
            .map(|c| CommentSummary {
                comment_id: c.clone(),
                binary_gold: gold(&binary, c),
                multilevel_gold: gold(&projected, c),
                conscious: by_comment.get(c.as_str()).and_then(|rs| classify_conscious(rs, config.conscious_threshold).ok()),
            })
            .collect();
        let table = render_table(&[
            ("binary", binary_column.as_ref().map(|c| &c.report)),
            ("multi-level", multilevel_column.as_ref().map(|c| &c.report)),
        ]);
        Ok(ExperimentReport {
            experiment: experiment.to_string(),
            forced: force,
            pending: if force { pending } else { Vec::new() },
            binary: binary_column,
            multilevel: multilevel_column,
            notes,
            per_level: per_level_agreement(&records),
            cortese_distribution,
            comments,
            table,
        })
    }

    /// Comments behind an experiment, for exports.
    pub fn export_context<'a>(&self, config: &'a ExperimentConfig) -> ExportContext<'a> {
        ExportContext {
            comments: &config.items,
            registry: &config.registry,
            conscious_threshold: config.conscious_threshold,
            tie_break: config.tie_break,
            seeds: config.seed_map(),
        }
    }

    pub fn dataset(&self, experiment: &str) -> Result<DatasetExport, ServiceError> {
        let config = self.experiment(experiment)?;
        Ok(build_export(&self.store, &self.export_context(config), ExportFormat::Jsonl)?)
    }

    /// Annotators of `experiment` by arm.
    pub fn roster(&self, experiment: &str) -> BTreeMap<String, Arm> {
        self.state
            .annotators
            .values()
            .filter(|r| r.experiment == experiment)
            .map(|r| (r.profile.annotator_id.clone(), r.arm))
            .collect()
    }
}

/// Author pseudonyms of `comments` keyed by id.
pub fn authors(comments: &[Comment]) -> HashMap<String, String> {
    comments.iter().map(|c| (c.id.clone(), c.author_pseudonym.clone())).collect()
}

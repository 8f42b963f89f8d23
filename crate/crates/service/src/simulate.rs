//! Seeded end-to-end run of the two-arm pilot with synthetic raters.
//!
//! A synthetic corpus of five categories goes through ingest, anonymization,
//! stratified sampling (three per category), balanced assignment of 24
//! annotators and annotation through the same service calls the HTTP API
//! uses. Every random choice is keyed on the seed and on what it decides, so
//! the run is reproducible byte for byte regardless of interleaving.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::json;

use hsa_core::corpus::{ingest, Anonymizer, Comment, IngestReport, InputFormat};
use hsa_core::sampling::{keyed_rng, stratified_sample, SampleManifest, StratumSpec};
use hsa_core::scheme::{
    derive_binary, Answer, AnnotationRecord, Attitude, BinaryLabel, ProtectedGroupRegistry, QuestionId,
    Strategy, TargetChoice, TargetKind,
};
use hsa_core::store::Arm;

use crate::config::{ArmCapacity, ExperimentConfig, Seeds};
use crate::service::{stepping_clock, AnnotatorProfile, ExperimentReport, Service, ServiceError, Submission, Task};

pub const STRATA: [&str; 5] =
    ["incitement-violence", "discriminatory-no-incitement", "negative-other-target", "positive", "ambiguous"];
pub const GENDERS: [&str; 2] = ["female", "male"];
pub const AGE_BANDS: [&str; 4] = ["21-30", "31-40", "41-50", "51-60"];
pub const EXPERIMENT_ID: &str = "pilot";

const USERNAMES: [&str; 8] = ["kelinu", "Ġorġ_B", "sunny_side", "anon42", "PeterPan", "ta_Xbiex", "marija.m", "Għawdxi"];

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub seed: u64,
    pub salt: String,
    pub members_per_stratum: usize,
    pub take: usize,
    pub annotators_per_arm: usize,
    /// Chance that a multi-level rater answers a question as the latent truth.
    pub multilevel_fidelity: f64,
    /// Same, for the ambiguous category.
    pub ambiguous_fidelity: f64,
    /// Chance that a binary rater gives the latent label.
    pub binary_fidelity: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 2021,
            salt: "pilot-salt".into(),
            members_per_stratum: 8,
            take: 3,
            annotators_per_arm: 12,
            multilevel_fidelity: 0.88,
            ambiguous_fidelity: 0.6,
            binary_fidelity: 0.8,
        }
    }
}

pub struct SimulationOutcome {
    pub ingest: IngestReport,
    /// Raw usernames seen at ingest.
    pub usernames: BTreeSet<String>,
    pub comments: Vec<Comment>,
    pub manifest: SampleManifest,
    pub experiment: ExperimentConfig,
    pub roster: BTreeMap<String, Arm>,
    pub profiles: Vec<AnnotatorProfile>,
    pub submissions: usize,
    pub report: ExperimentReport,
}

fn truth_for(stratum: usize, j: usize) -> AnnotationRecord {
    let mut r = AnnotationRecord {
        comment_id: String::new(),
        annotator_id: String::new(),
        attitude: Attitude::Negative,
        target: Some(TargetKind::Group),
        group_name: None,
        strategies: BTreeSet::new(),
        violence_call: None,
        submitted_at: DateTime::UNIX_EPOCH,
    };
    match stratum {
        0 => {
            r.group_name = Some("migrants".into());
            if j.is_multiple_of(2) {
                r.strategies = [Strategy::Threat, Strategy::Generalisation].into();
            } else {
                r.strategies = [Strategy::Suggestion].into();
                r.violence_call = Some(true);
            }
        }
        1 => {
            r.group_name = Some("refugees".into());
            r.strategies = [Strategy::Insult, Strategy::Stereotyping].into();
        }
        2 => {
            if j.is_multiple_of(2) {
                r.group_name = Some("politicians".into());
                r.strategies = [Strategy::Insult, Strategy::Sarcasm].into();
            } else {
                r.target = Some(TargetKind::Individual { via_group_affiliation: false });
            }
        }
        3 => {
            r.attitude = Attitude::Positive;
            r.target = None;
        }
        _ => {
            r.target = Some(TargetKind::Individual { via_group_affiliation: true });
            r.group_name = Some("migrants".into());
            r.strategies = [Strategy::Sarcasm].into();
        }
    }
    r
}

const TEMPLATES: [&[&str]; 5] = [
    &["they should all be sent back by force", "ħa jitilqu jew inkeccuhom aħna", "burn the boats before they land"],
    &["dawn kollha parassiti", "typical of them, lazy and dirty", "refuġjati ta' xejn"],
    &["il-politiċi kollha l-istess", "this minister is a clown", "@{u} you have no idea what you're saying"],
    &["welcome, we need more workers", "grazzi talli ġejtu", "they work harder than us"],
    &["sure, send them to Għarb then", "lovely neighbours, said no one", "@{u} haha good one"],
];

/// Raw JSONL corpus plus the latent judgment of every comment. Includes one
/// exact duplicate and one empty comment so ingest has work to do.
pub fn synthetic_corpus(config: &SimulationConfig) -> (String, BTreeMap<String, (usize, AnnotationRecord)>) {
    let mut rng = keyed_rng(config.seed, "corpus");
    let mut lines = Vec::new();
    let mut truth = BTreeMap::new();
    for (s, templates) in TEMPLATES.iter().enumerate() {
        for j in 0..config.members_per_stratum {
            let id = format!("sim-{s}-{j:02}");
            let author = USERNAMES.choose(&mut rng).unwrap();
            let mention = USERNAMES.choose(&mut rng).unwrap();
            let text = format!("{} #{j}", templates[j % templates.len()].replace("{u}", mention));
            let language = ["en", "mt", "mixed"][(s + j) % 3];
            let line = json!({
                "id": id,
                "source": if s % 2 == 0 { "timesofmalta" } else { "maltatoday" },
                "article_id": format!("art-{}", j % 3),
                "author": author,
                "created_at": format!("2016-03-{:02}T{:02}:00:00Z", j + 1, s + 8),
                "text": text,
                "language": language,
                "deleted": j == 7,
            });
            lines.push(line.to_string());
            let mut t = truth_for(s, j);
            t.comment_id = id.clone();
            truth.insert(id, (s, t));
        }
    }
    lines.push(lines[0].clone());
    lines.push(json!({"id": "sim-empty", "author": "kelinu", "text": "   "}).to_string());
    (lines.join("\n") + "\n", truth)
}

pub fn profiles(per_arm: usize) -> Vec<AnnotatorProfile> {
    (0..2 * per_arm)
        .map(|i| AnnotatorProfile {
            annotator_id: format!("ann-{:02}", i + 1),
            gender: GENDERS[i % 2].into(),
            age_band: AGE_BANDS[(i / 2) % AGE_BANDS.len()].into(),
            consent: true,
        })
        .collect()
}

fn group_variant(name: &str, rng: &mut impl Rng) -> String {
    match rng.random_range(0..3) {
        0 => name.to_string(),
        1 => name.to_uppercase(),
        _ => format!("  {name} "),
    }
}

fn random_strategies(rng: &mut impl Rng) -> BTreeSet<Strategy> {
    let mut s: BTreeSet<Strategy> = Strategy::ALL.iter().copied().filter(|_| rng.random_bool(0.25)).collect();
    if s.is_empty() {
        s.insert(*Strategy::ALL.choose(rng).unwrap());
    }
    s
}

/// A synthetic rater's answer to `q`: the latent truth with probability
/// `fidelity` when the truth covers `q`, otherwise a random valid answer.
fn answer_for(
    q: QuestionId,
    truth: &AnnotationRecord,
    fidelity: f64,
    registry: &ProtectedGroupRegistry,
    rng: &mut impl Rng,
) -> Answer {
    let faithful = rng.random_bool(fidelity);
    match q {
        QuestionId::Q1Attitude => Answer::Attitude(if faithful {
            truth.attitude
        } else {
            *Attitude::ALL.iter().filter(|a| **a != truth.attitude).collect::<Vec<_>>().choose(rng).unwrap().to_owned()
        }),
        QuestionId::Q2Target => {
            let t = match truth.target {
                Some(TargetKind::Group) => Some(TargetChoice::Group),
                Some(TargetKind::Individual { .. }) => Some(TargetChoice::Individual),
                None => None,
            };
            Answer::Target(match (faithful, t) {
                (true, Some(t)) => t,
                _ => *[TargetChoice::Group, TargetChoice::Individual].choose(rng).unwrap(),
            })
        }
        QuestionId::Q2aAffiliation => Answer::Affiliation(match (faithful, truth.target) {
            (true, Some(TargetKind::Individual { via_group_affiliation })) => via_group_affiliation,
            _ => rng.random(),
        }),
        QuestionId::Q2xNameGroup => {
            let name = match (faithful, &truth.group_name) {
                (true, Some(g)) => g.clone(),
                _ => registry.entries().choose(rng).unwrap().canonical.clone(),
            };
            Answer::GroupName(group_variant(&name, rng))
        }
        QuestionId::Q3Strategies => Answer::Strategies(if faithful && !truth.strategies.is_empty() {
            truth.strategies.clone()
        } else {
            random_strategies(rng)
        }),
        QuestionId::Q3aViolence => Answer::ViolenceCall(match (faithful, truth.violence_call) {
            (true, Some(v)) => v,
            _ => rng.random(),
        }),
        QuestionId::Complete => unreachable!("no answer is asked for at Complete"),
    }
}

/// Runs the whole pilot against a fresh store in `store_dir`.
pub fn run(config: &SimulationConfig, store_dir: &Path) -> Result<SimulationOutcome, ServiceError> {
    let (raw, truth) = synthetic_corpus(config);
    let (raws, ingest_report) = ingest(raw.as_bytes(), InputFormat::Jsonl).expect("in-memory corpus is readable");
    let anonymizer = Anonymizer::for_corpus(config.salt.as_bytes(), &raws).expect("salt is non-empty");
    let comments = anonymizer.anonymize_all(&raws);

    let strata: Vec<StratumSpec> = STRATA
        .iter()
        .enumerate()
        .map(|(s, label)| StratumSpec {
            label: label.to_string(),
            member_ids: truth.iter().filter(|(_, (t, _))| *t == s).map(|(id, _)| id.clone()).collect(),
            take: config.take,
        })
        .collect();
    let manifest = stratified_sample(&strata, config.seed)?;
    let selected: BTreeSet<String> = manifest.selected_ids().into_iter().collect();
    let registry = ProtectedGroupRegistry::default_malta();
    let experiment = ExperimentConfig {
        id: EXPERIMENT_ID.into(),
        capacity: ArmCapacity { binary: config.annotators_per_arm, multilevel: config.annotators_per_arm },
        genders: GENDERS.map(String::from).to_vec(),
        age_bands: AGE_BANDS.map(String::from).to_vec(),
        manifest: manifest.clone(),
        items: comments.iter().filter(|c| selected.contains(&c.id)).cloned().collect(),
        registry: registry.clone(),
        conscious_threshold: Default::default(),
        tie_break: Default::default(),
        seeds: Seeds { assignment: config.seed, order: config.seed },
        share_order: false,
        binary_instruction: crate::config::DEFAULT_BINARY_INSTRUCTION.into(),
    };

    let start: DateTime<Utc> = "2016-05-02T09:00:00Z".parse().expect("constant timestamp");
    let mut service = Service::open(store_dir, stepping_clock(start))?;
    service.create_experiment(experiment)?;

    let mut people = profiles(config.annotators_per_arm);
    people.shuffle(&mut keyed_rng(config.seed, "arrival"));
    for p in &people {
        service.register(EXPERIMENT_ID, p.clone())?;
    }
    let roster = service.roster(EXPERIMENT_ID);

    // Round-robin, one answer per annotator per pass, like a room of people
    // working at once.
    let mut submissions = 0;
    loop {
        let mut progressed = false;
        for p in &people {
            let id = &p.annotator_id;
            let Task::Open { arm, comment, question, .. } = service.next_task(id)? else { continue };
            let (stratum, latent) = &truth[&comment.id];
            let sub = match arm {
                Arm::Binary => {
                    let mut rng = keyed_rng(config.seed, &format!("rater/{id}/{}", comment.id));
                    let label = derive_binary(latent, &registry).expect("latent groups are registered");
                    let flipped = match label {
                        BinaryLabel::HateSpeech => BinaryLabel::NotHateSpeech,
                        BinaryLabel::NotHateSpeech => BinaryLabel::HateSpeech,
                    };
                    let label = if rng.random_bool(config.binary_fidelity) { label } else { flipped };
                    Submission { annotator_id: id.clone(), comment_id: comment.id, answer: None, label: Some(label) }
                }
                Arm::Multilevel => {
                    let q = question.expect("multi-level tasks carry a question");
                    let mut rng = keyed_rng(config.seed, &format!("rater/{id}/{}/{}", comment.id, q.as_str()));
                    let fidelity = if STRATA[*stratum] == "ambiguous" { config.ambiguous_fidelity } else { config.multilevel_fidelity };
                    let answer = answer_for(q, latent, fidelity, &registry, &mut rng);
                    Submission { annotator_id: id.clone(), comment_id: comment.id, answer: Some(answer), label: None }
                }
            };
            service.submit(sub)?;
            submissions += 1;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }

    let report = service.report(EXPERIMENT_ID, false)?;
    let experiment = service.experiment(EXPERIMENT_ID)?.clone();
    Ok(SimulationOutcome {
        ingest: ingest_report,
        usernames: anonymizer.inventory().clone(),
        comments,
        manifest,
        experiment,
        roster,
        profiles: people,
        submissions,
        report,
    })
}

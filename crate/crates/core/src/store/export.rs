use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{io_err, AnnotationEvent, Arm, BinaryJudgment, EventFilter, EventStore, IdempotencyKey, Payload, StoreError};
use crate::corpus::Comment;
use crate::scheme::{
    classify_conscious, derive_binary, derive_cortese, majority_vote, AnnotationRecord, Attitude, BinaryLabel,
    ConsciousClass, CorteseCategory, Fraction, GoldLabel, ProtectedGroupRegistry, Strategy, TargetKind, TieBreak,
};

pub const EXPORT_FORMAT: &str = "hsa-export/1";

/// Column order of `events.csv`.
pub const EVENT_CSV_COLUMNS: [&str; 14] = [
    "sequence_number",
    "annotator_id",
    "comment_id",
    "revision",
    "arm",
    "attitude",
    "target",
    "via_group_affiliation",
    "group_name",
    "strategies",
    "violence_call",
    "binary_label",
    "submitted_at",
    "received_at",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

impl ExportFormat {
    fn ext(self) -> &'static str {
        match self {
            ExportFormat::Jsonl => "jsonl",
            ExportFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ExportFormat::Jsonl),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

/// Inputs that derivations depend on, recorded in the export manifest.
pub struct ExportContext<'a> {
    pub comments: &'a [Comment],
    pub registry: &'a ProtectedGroupRegistry,
    pub conscious_threshold: Fraction,
    pub tie_break: TieBreak,
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub format: String,
    pub data_format: ExportFormat,
    pub registry_digest: String,
    pub conscious_threshold: Fraction,
    pub tie_break: TieBreak,
    pub seeds: BTreeMap<String, u64>,
    pub event_count: usize,
    pub comment_count: usize,
    pub files: Vec<String>,
}

/// Labels derived from one latest-revision event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedRow {
    pub comment_id: String,
    pub annotator_id: String,
    pub arm: Arm,
    pub binary_label: BinaryLabel,
    pub cortese: Option<CorteseCategory>,
}

/// Per-comment, per-arm aggregation of latest-revision events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub comment_id: String,
    pub arm: Arm,
    pub raters: usize,
    pub gold_label: GoldLabel,
    pub cortese_counts: BTreeMap<CorteseCategory, usize>,
    pub conscious: Option<ConsciousClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetExport {
    pub manifest: ExportManifest,
    pub registry: ProtectedGroupRegistry,
    pub comments: Vec<Comment>,
    pub events: Vec<AnnotationEvent>,
    pub derived: Vec<DerivedRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn derive_rows(
    latest: &[AnnotationEvent],
    registry: &ProtectedGroupRegistry,
    threshold: Fraction,
    tie_break: TieBreak,
) -> Result<(Vec<DerivedRow>, Vec<AggregateRow>), StoreError> {
    let mut derived = Vec::new();
    let mut groups: BTreeMap<(String, Arm), (Vec<BinaryLabel>, Vec<AnnotationRecord>)> = BTreeMap::new();
    for e in latest {
        let (label, cortese) = match &e.payload {
            Payload::Binary(b) => (b.label, None),
            Payload::Multilevel(r) => {
                let label = derive_binary(r, registry).map_err(crate::agreement::AgreementError::from)?;
                (label, Some(derive_cortese(r)))
            }
        };
        derived.push(DerivedRow {
            comment_id: e.payload.comment_id().to_string(),
            annotator_id: e.payload.annotator_id().to_string(),
            arm: e.arm(),
            binary_label: label,
            cortese,
        });
        let slot = groups.entry((e.payload.comment_id().to_string(), e.arm())).or_default();
        slot.0.push(label);
        if let Payload::Multilevel(r) = &e.payload {
            slot.1.push(r.clone());
        }
    }
    let mut aggregates = Vec::new();
    for ((comment_id, arm), (labels, records)) in groups {
        let gold_label = majority_vote(&labels, tie_break).map_err(crate::agreement::AgreementError::from)?;
        let mut cortese_counts = BTreeMap::new();
        if arm == Arm::Multilevel {
            for c in CorteseCategory::ALL {
                cortese_counts.insert(c, 0);
            }
            for r in &records {
                *cortese_counts.entry(derive_cortese(r)).or_default() += 1;
            }
        }
        let conscious = if records.len() >= 2 { classify_conscious(&records, threshold).ok() } else { None };
        aggregates.push(AggregateRow { comment_id, arm, raters: labels.len(), gold_label, cortese_counts, conscious });
    }
    Ok((derived, aggregates))
}

/// In-memory export: all events, derived labels and aggregates over the
/// latest revisions, plus the manifest that makes them reproducible.
pub fn build_export(store: &EventStore, ctx: &ExportContext<'_>, format: ExportFormat) -> Result<DatasetExport, StoreError> {
    let events = store.load(&EventFilter::default())?;
    let (derived, aggregates) = derive_rows(&store.latest(), ctx.registry, ctx.conscious_threshold, ctx.tie_break)?;
    let ext = format.ext();
    let manifest = ExportManifest {
        format: EXPORT_FORMAT.to_string(),
        data_format: format,
        registry_digest: ctx.registry.digest(),
        conscious_threshold: ctx.conscious_threshold,
        tie_break: ctx.tie_break,
        seeds: ctx.seeds.clone(),
        event_count: events.len(),
        comment_count: ctx.comments.len(),
        files: vec![
            "manifest.json".into(),
            "registry.json".into(),
            "comments.jsonl".into(),
            format!("events.{ext}"),
            format!("derived.{ext}"),
            format!("aggregates.{ext}"),
        ],
    };
    Ok(DatasetExport {
        manifest,
        registry: ctx.registry.clone(),
        comments: ctx.comments.to_vec(),
        events,
        derived,
        aggregates,
    })
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn event_csv_row(e: &AnnotationEvent) -> Vec<String> {
    let k = &e.idempotency_key;
    let mut row = vec![e.sequence_number.to_string(), k.annotator_id.clone(), k.comment_id.clone(), k.revision.to_string(), e.arm().as_str().to_string()];
    match &e.payload {
        Payload::Multilevel(r) => {
            let via = match r.target {
                Some(TargetKind::Individual { via_group_affiliation }) => Some(via_group_affiliation),
                _ => None,
            };
            let strategies = r.strategies.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("|");
            row.extend([
                r.attitude.as_str().to_string(),
                opt(r.target.map(TargetKind::as_str)),
                opt(via),
                r.group_name.clone().unwrap_or_default(),
                strategies,
                opt(r.violence_call),
                String::new(),
                ts(&r.submitted_at),
            ]);
        }
        Payload::Binary(b) => {
            row.extend(["", "", "", "", "", ""].map(String::from));
            row.extend([b.label.as_str().to_string(), ts(&b.submitted_at)]);
        }
    }
    row.push(ts(&e.received_at));
    row
}

fn parse_event_csv_row(row: &csv::StringRecord) -> Result<AnnotationEvent, String> {
    let get = |i: usize| row.get(i).unwrap_or("").to_string();
    let none_if_empty = |i: usize| Some(get(i)).filter(|s| !s.is_empty());
    let parse_ts = |i: usize| {
        DateTime::parse_from_rfc3339(&get(i)).map(|t| t.with_timezone(&Utc)).map_err(|e| format!("column {}: {e}", EVENT_CSV_COLUMNS[i]))
    };
    let parse_bool = |i: usize| -> Result<Option<bool>, String> {
        none_if_empty(i).map(|s| s.parse::<bool>().map_err(|e| format!("column {}: {e}", EVENT_CSV_COLUMNS[i]))).transpose()
    };
    let sequence_number = get(0).parse::<u64>().map_err(|e| format!("sequence_number: {e}"))?;
    let key = IdempotencyKey {
        annotator_id: get(1),
        comment_id: get(2),
        revision: get(3).parse().map_err(|e| format!("revision: {e}"))?,
    };
    let arm: Arm = get(4).parse()?;
    let payload = match arm {
        Arm::Binary => Payload::Binary(BinaryJudgment {
            comment_id: key.comment_id.clone(),
            annotator_id: key.annotator_id.clone(),
            label: get(11).parse()?,
            submitted_at: parse_ts(12)?,
        }),
        Arm::Multilevel => {
            let attitude = Attitude::ALL.into_iter().find(|a| a.as_str() == get(5)).ok_or_else(|| format!("bad attitude `{}`", get(5)))?;
            let target = match get(6).as_str() {
                "" => None,
                "Group" => Some(TargetKind::Group),
                "Individual" => Some(TargetKind::Individual {
                    via_group_affiliation: parse_bool(7)?.ok_or("Individual target without via_group_affiliation")?,
                }),
                other => return Err(format!("bad target `{other}`")),
            };
            let strategies = get(9)
                .split('|')
                .filter(|s| !s.is_empty())
                .map(str::parse::<Strategy>)
                .collect::<Result<BTreeSet<_>, _>>()?;
            Payload::Multilevel(AnnotationRecord {
                comment_id: key.comment_id.clone(),
                annotator_id: key.annotator_id.clone(),
                attitude,
                target,
                group_name: none_if_empty(8),
                strategies,
                violence_call: parse_bool(10)?,
                submitted_at: parse_ts(12)?,
            })
        }
    };
    Ok(AnnotationEvent { sequence_number, idempotency_key: key, payload, received_at: parse_ts(13)? })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), StoreError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in rows {
        serde_json::to_writer(&mut w, r).expect("rows serialize");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| StoreError::Parse { path: path.to_path_buf(), line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), StoreError> {
    let csv_err = |e: csv::Error| StoreError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), StoreError> {
    let bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    fs::write(path, bytes).map_err(io_err(path))
}

/// Writes a self-describing export into `dir`: `manifest.json`,
/// `registry.json`, `comments.jsonl` and `events`, `derived`, `aggregates` in
/// the chosen format.
pub fn export(store: &EventStore, ctx: &ExportContext<'_>, dir: &Path, format: ExportFormat) -> Result<ExportManifest, StoreError> {
    let data = build_export(store, ctx, format)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("manifest.json"), &data.manifest)?;
    write_json(&dir.join("registry.json"), &data.registry)?;
    write_jsonl(&dir.join("comments.jsonl"), &data.comments)?;
    match format {
        ExportFormat::Jsonl => {
            write_jsonl(&dir.join("events.jsonl"), &data.events)?;
            write_jsonl(&dir.join("derived.jsonl"), &data.derived)?;
            write_jsonl(&dir.join("aggregates.jsonl"), &data.aggregates)?;
        }
        ExportFormat::Csv => {
            write_csv(&dir.join("events.csv"), &EVENT_CSV_COLUMNS, data.events.iter().map(event_csv_row))?;
            write_csv(
                &dir.join("derived.csv"),
                &["comment_id", "annotator_id", "arm", "binary_label", "cortese"],
                data.derived.iter().map(|d| {
                    vec![d.comment_id.clone(), d.annotator_id.clone(), d.arm.as_str().into(), d.binary_label.as_str().into(), opt(d.cortese.map(CorteseCategory::as_str))]
                }),
            )?;
            let mut header = vec!["comment_id", "arm", "raters", "gold_label"];
            header.extend(CorteseCategory::ALL.map(CorteseCategory::as_str));
            header.push("conscious");
            write_csv(
                &dir.join("aggregates.csv"),
                &header,
                data.aggregates.iter().map(|a| {
                    let mut row = vec![a.comment_id.clone(), a.arm.as_str().into(), a.raters.to_string(), format!("{:?}", a.gold_label)];
                    row.extend(CorteseCategory::ALL.map(|c| a.cortese_counts.get(&c).map(ToString::to_string).unwrap_or_default()));
                    row.push(opt(a.conscious.map(|c| format!("{c:?}"))));
                    row
                }),
            )?;
        }
    }
    Ok(data.manifest)
}

#[derive(Debug)]
pub struct ImportReport {
    pub manifest: ExportManifest,
    pub registry: ProtectedGroupRegistry,
    pub comments: Vec<Comment>,
    pub events: usize,
    pub warnings: Vec<String>,
}

fn read_events_csv(path: &Path) -> Result<Vec<AnnotationEvent>, StoreError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| StoreError::Parse { path: path.to_path_buf(), line: 1, message: e.to_string() })?
        .iter()
        .map(String::from)
        .collect();
    if header != EVENT_CSV_COLUMNS {
        return Err(StoreError::Parse { path: path.to_path_buf(), line: 1, message: format!("unexpected columns {header:?}") });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let parse = |message: String| StoreError::Parse { path: path.to_path_buf(), line: i + 2, message };
        let row = row.map_err(|e| parse(e.to_string()))?;
        out.push(parse_event_csv_row(&row).map_err(parse)?);
    }
    Ok(out)
}

/// Rebuilds a store in `store_dir` from an export directory. Mismatches
/// between the manifest and the shipped registry, or between exported and
/// re-derived labels, are reported as warnings.
pub fn import(export_dir: &Path, store_dir: &Path) -> Result<(EventStore, ImportReport), StoreError> {
    let manifest_path = export_dir.join("manifest.json");
    let manifest: ExportManifest = serde_json::from_slice(&fs::read(&manifest_path).map_err(io_err(&manifest_path))?)
        .map_err(|e| StoreError::Parse { path: manifest_path.clone(), line: 1, message: e.to_string() })?;
    let registry_path = export_dir.join("registry.json");
    let registry: ProtectedGroupRegistry = serde_json::from_slice(&fs::read(&registry_path).map_err(io_err(&registry_path))?)
        .map_err(|e| StoreError::Parse { path: registry_path.clone(), line: 1, message: e.to_string() })?;
    let comments: Vec<Comment> = read_jsonl(&export_dir.join("comments.jsonl"))?;

    let mut warnings = Vec::new();
    if manifest.format != EXPORT_FORMAT {
        warnings.push(format!("export format `{}` differs from `{EXPORT_FORMAT}`", manifest.format));
    }
    if registry.digest() != manifest.registry_digest {
        warnings.push(format!(
            "registry digest {} does not match manifest {}; derived labels may not reproduce",
            registry.digest(),
            manifest.registry_digest
        ));
    }

    let (events, derived): (Vec<AnnotationEvent>, Option<Vec<DerivedRow>>) = match manifest.data_format {
        ExportFormat::Jsonl => (read_jsonl(&export_dir.join("events.jsonl"))?, Some(read_jsonl(&export_dir.join("derived.jsonl"))?)),
        ExportFormat::Csv => (read_events_csv(&export_dir.join("events.csv"))?, None),
    };
    if events.len() != manifest.event_count {
        warnings.push(format!("manifest lists {} events, found {}", manifest.event_count, events.len()));
    }

    let mut store = EventStore::open(store_dir)?;
    let count = events.len();
    for e in events {
        store.append_imported(e)?;
    }

    if let Some(exported) = derived {
        match derive_rows(&store.latest(), &registry, manifest.conscious_threshold, manifest.tie_break) {
            Ok((rederived, _)) if rederived != exported => {
                warnings.push("re-derived labels differ from the exported derived labels".into())
            }
            Ok(_) => {}
            Err(e) => warnings.push(format!("could not re-derive labels: {e}")),
        }
    }
    Ok((store, ImportReport { manifest, registry, comments, events: count, warnings }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::tests::record;

    fn fill(store: &mut EventStore) {
        let now = DateTime::parse_from_rfc3339("2016-01-02T03:04:05.123456789Z").unwrap().with_timezone(&Utc);
        let mut r = record("A", "c1", Attitude::Negative);
        r.target = Some(TargetKind::Group);
        r.group_name = Some("Refuġjati".into());
        r.strategies = [Strategy::Suggestion, Strategy::Insult].into();
        r.violence_call = Some(true);
        let k = |a: &str, c: &str, rev| IdempotencyKey { annotator_id: a.into(), comment_id: c.into(), revision: rev };
        store.append(k("A", "c1", 1), Payload::Multilevel(record("A", "c1", Attitude::Neutral)), now).unwrap();
        store.append(k("A", "c1", 2), Payload::Multilevel(r.clone()), now).unwrap();
        let mut ind = record("B", "c1", Attitude::Negative);
        ind.target = Some(TargetKind::Individual { via_group_affiliation: false });
        store.append(k("B", "c1", 1), Payload::Multilevel(ind), now).unwrap();
        let b = BinaryJudgment { comment_id: "c1".into(), annotator_id: "C".into(), label: BinaryLabel::HateSpeech, submitted_at: now };
        store.append(k("C", "c1", 1), Payload::Binary(b), now).unwrap();
    }

    fn ctx<'a>(registry: &'a ProtectedGroupRegistry) -> ExportContext<'a> {
        ExportContext {
            comments: &[],
            registry,
            conscious_threshold: Fraction::TWO_THIRDS,
            tie_break: TieBreak::Escalate,
            seeds: BTreeMap::from([("sample".into(), 7)]),
        }
    }

    #[test]
    fn round_trip_both_formats() {
        let registry = ProtectedGroupRegistry::default_malta();
        for format in [ExportFormat::Jsonl, ExportFormat::Csv] {
            let src = tempfile::tempdir().unwrap();
            let out = tempfile::tempdir().unwrap();
            let dst = tempfile::tempdir().unwrap();
            let mut store = EventStore::open(src.path()).unwrap();
            fill(&mut store);
            let manifest = export(&store, &ctx(&registry), out.path(), format).unwrap();
            assert_eq!(manifest.event_count, 4);
            let (imported, report) = import(out.path(), dst.path()).unwrap();
            assert!(report.warnings.is_empty(), "{:?}", report.warnings);
            assert_eq!(imported.latest(), store.latest());
            assert_eq!(imported.load(&EventFilter::default()).unwrap(), store.load(&EventFilter::default()).unwrap());
        }
    }

    #[test]
    fn csv_columns_fixed() {
        let registry = ProtectedGroupRegistry::default_malta();
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let mut store = EventStore::open(src.path()).unwrap();
        fill(&mut store);
        export(&store, &ctx(&registry), out.path(), ExportFormat::Csv).unwrap();
        let text = fs::read_to_string(out.path().join("events.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), EVENT_CSV_COLUMNS.join(","));
    }

    #[test]
    fn tampered_registry_warns() {
        let registry = ProtectedGroupRegistry::default_malta();
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let dst = tempfile::tempdir().unwrap();
        let mut store = EventStore::open(src.path()).unwrap();
        fill(&mut store);
        export(&store, &ctx(&registry), out.path(), ExportFormat::Jsonl).unwrap();
        let path = out.path().join("registry.json");
        let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        for entry in doc["entries"].as_array_mut().unwrap() {
            entry["protected"] = false.into();
        }
        fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
        let (_, report) = import(out.path(), dst.path()).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("registry digest")));
        assert!(report.warnings.iter().any(|w| w.contains("re-derived")));
    }

    #[test]
    fn derived_labels_follow_latest_revision() {
        let registry = ProtectedGroupRegistry::default_malta();
        let dir = tempfile::tempdir().unwrap();
        let mut store = EventStore::open(dir.path()).unwrap();
        fill(&mut store);
        let data = build_export(&store, &ctx(&registry), ExportFormat::Jsonl).unwrap();
        assert_eq!(data.derived.len(), 3);
        let a = data.derived.iter().find(|d| d.annotator_id == "A").unwrap();
        assert_eq!(a.binary_label, BinaryLabel::HateSpeech);
        assert_eq!(a.cortese, Some(CorteseCategory::IncitementViolence));
        let ml = data.aggregates.iter().find(|a| a.arm == Arm::Multilevel).unwrap();
        assert_eq!(ml.raters, 2);
        assert_eq!(ml.gold_label, GoldLabel::Escalated);
        assert_eq!(ml.conscious, Some(ConsciousClass::NotApplicable));
    }
}

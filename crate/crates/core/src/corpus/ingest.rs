use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{CorpusError, Language, RawComment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format `{other}` (expected jsonl or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedRecord {
    /// 1-based record number (JSONL line or CSV data row).
    pub record: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates: usize,
    pub malformed: usize,
    pub malformed_records: Vec<MalformedRecord>,
}

/// Loosely typed field bag shared by both input formats.
#[derive(Default)]
struct Fields {
    id: Option<String>,
    source: Option<String>,
    article_id: Option<String>,
    author: Option<String>,
    created_at: Option<String>,
    text: Option<String>,
    deleted: Option<String>,
    language: Option<String>,
    subcorpus: Option<String>,
}

impl Fields {
    fn set(&mut self, name: &str, value: String) {
        let slot = match name {
            "id" => &mut self.id,
            "source" => &mut self.source,
            "article_id" => &mut self.article_id,
            "author" => &mut self.author,
            "created_at" => &mut self.created_at,
            "text" => &mut self.text,
            "deleted" => &mut self.deleted,
            "language" => &mut self.language,
            "subcorpus" => &mut self.subcorpus,
            _ => return,
        };
        *slot = Some(value);
    }

    fn from_json(line: &str) -> Result<Fields, String> {
        let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
        let Value::Object(map) = value else {
            return Err("record is not a JSON object".into());
        };
        let mut fields = Fields::default();
        for (key, v) in map {
            let s = match v {
                Value::Null => continue,
                Value::String(s) => s,
                Value::Bool(b) => b.to_string(),
                Value::Number(n) => n.to_string(),
                other => return Err(format!("field `{key}` has unsupported value {other}")),
            };
            fields.set(&key, s);
        }
        Ok(fields)
    }

    fn into_raw(self) -> Result<RawComment, String> {
        let text = self.text.ok_or("missing field `text`")?;
        if text.trim().is_empty() {
            return Err("empty text".into());
        }
        let source = self.source.unwrap_or_default();
        let article_id = self.article_id.unwrap_or_default();
        let author = self.author.unwrap_or_default();
        let id = match self.id.filter(|s| !s.trim().is_empty()) {
            Some(id) => id.trim().to_string(),
            None => derived_id(&source, &article_id, &author, &text),
        };
        let created_at = match self.created_at.filter(|s| !s.trim().is_empty()) {
            Some(ts) => Some(
                DateTime::parse_from_rfc3339(ts.trim())
                    .map_err(|e| format!("bad created_at `{ts}`: {e}"))?
                    .with_timezone(&Utc),
            ),
            None => None,
        };
        let deleted = match self.deleted.as_deref().map(str::trim) {
            None | Some("") => false,
            Some(v) => parse_bool(v).ok_or_else(|| format!("bad deleted flag `{v}`"))?,
        };
        let language = match self.language {
            Some(l) => l.parse::<Language>()?,
            None => Language::Unknown,
        };
        Ok(RawComment {
            id,
            source,
            article_id,
            author,
            created_at,
            text,
            deleted,
            language,
            subcorpus: self.subcorpus.filter(|s| !s.is_empty()),
        })
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn derived_id(source: &str, article_id: &str, author: &str, text: &str) -> String {
    let mut h = Sha256::new();
    for part in [source, article_id, author, text] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    format!("c-{}", &hex::encode(h.finalize())[..16])
}

/// Collects accepted records, dropping exact duplicates of
/// (source, article_id, raw author, text).
#[derive(Default)]
struct Collector {
    out: Vec<RawComment>,
    report: IngestReport,
    seen: HashSet<(String, String, String, String)>,
    ids: HashMap<String, usize>,
}

impl Collector {
    fn push(&mut self, record: usize, parsed: Result<Fields, String>) {
        let raw = match parsed.and_then(Fields::into_raw) {
            Ok(raw) => raw,
            Err(reason) => return self.malformed(record, reason),
        };
        let key = (raw.source.clone(), raw.article_id.clone(), raw.author.clone(), raw.text.clone());
        if self.seen.contains(&key) {
            self.report.duplicates += 1;
            return;
        }
        if self.ids.contains_key(&raw.id) {
            return self.malformed(record, format!("id `{}` already used by a different comment", raw.id));
        }
        self.seen.insert(key);
        self.ids.insert(raw.id.clone(), self.out.len());
        self.out.push(raw);
        self.report.accepted += 1;
    }

    fn malformed(&mut self, record: usize, reason: String) {
        self.report.malformed += 1;
        self.report.malformed_records.push(MalformedRecord { record, reason });
    }
}

/// Reads raw comment records. Malformed records are skipped and listed in the
/// report; only an unreadable stream (or a CSV header without `text`) fails.
pub fn ingest<R: BufRead>(input: R, format: InputFormat) -> Result<(Vec<RawComment>, IngestReport), CorpusError> {
    let mut collector = Collector::default();
    match format {
        InputFormat::Jsonl => {
            let mut record = 0;
            for line in input.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                record += 1;
                collector.push(record, Fields::from_json(&line));
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
            let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
            if !headers.iter().any(|h| h == "text") {
                return Err(CorpusError::MissingColumn("text"));
            }
            for (i, row) in reader.records().enumerate() {
                let parsed = match row {
                    Ok(row) if row.len() != headers.len() => {
                        Err(format!("expected {} columns, found {}", headers.len(), row.len()))
                    }
                    Ok(row) => {
                        let mut fields = Fields::default();
                        for (name, value) in headers.iter().zip(row.iter()) {
                            fields.set(name, value.to_string());
                        }
                        Ok(fields)
                    }
                    Err(e) if e.is_io_error() => return Err(e.into()),
                    Err(e) => Err(format!("unparsable CSV row: {e}")),
                };
                collector.push(i + 1, parsed);
            }
        }
    }
    Ok((collector.out, collector.report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jsonl(lines: &[&str]) -> Vec<u8> {
        lines.join("\n").into_bytes()
    }

    #[test]
    fn collapses_exact_duplicates() {
        let input = jsonl(&[
            r#"{"id":"1","source":"tom","article_id":"a1","author":"alice","text":"first"}"#,
            r#"{"id":"2","source":"tom","article_id":"a1","author":"bob","text":"second"}"#,
            r#"{"id":"3","source":"tom","article_id":"a1","author":"alice","text":"first"}"#,
        ]);
        let (comments, report) = ingest(&input[..], InputFormat::Jsonl).unwrap();
        assert_eq!(comments.len(), 2);
        assert_eq!((report.accepted, report.duplicates, report.malformed), (2, 1, 0));
    }

    #[test]
    fn empty_text_is_malformed() {
        let input = jsonl(&[r#"{"id":"1","author":"a","text":"   "}"#, r#"{"id":"2","text":"ok"}"#]);
        let (comments, report) = ingest(&input[..], InputFormat::Jsonl).unwrap();
        assert_eq!(comments.len(), 1);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.malformed_records[0].record, 1);
    }

    #[test]
    fn bad_json_line_does_not_abort() {
        let input = jsonl(&[r#"{"id":"1","text":"x"#, r#"[1,2]"#, r#"{"id":"2","text":"fine","language":"mt"}"#]);
        let (comments, report) = ingest(&input[..], InputFormat::Jsonl).unwrap();
        assert_eq!(comments.len(), 1);
        assert_eq!(comments[0].language, Language::Mt);
        assert_eq!(report.malformed, 2);
    }

    #[test]
    fn missing_id_is_derived_and_stable() {
        let input = jsonl(&[r#"{"source":"s","article_id":"a","author":"u","text":"hello"}"#]);
        let (a, _) = ingest(&input[..], InputFormat::Jsonl).unwrap();
        let (b, _) = ingest(&input[..], InputFormat::Jsonl).unwrap();
        assert!(a[0].id.starts_with("c-"));
        assert_eq!(a[0].id, b[0].id);
    }

    #[test]
    fn reused_id_with_other_content_is_malformed() {
        let input = jsonl(&[r#"{"id":"1","text":"a"}"#, r#"{"id":"1","text":"b"}"#]);
        let (comments, report) = ingest(&input[..], InputFormat::Jsonl).unwrap();
        assert_eq!(comments.len(), 1);
        assert_eq!(report.malformed, 1);
    }

    #[test]
    fn csv_with_header() {
        let input = "id,source,article_id,author,created_at,text,deleted,language\n\
                     1,tom,a1,alice,2015-04-02T10:00:00Z,\"il-bieb, miftuħ\",true,mt\n\
                     2,tom,a1,bob,,second one,0,en\n\
                     3,tom,a1,bob,,,0,en\n";
        let (comments, report) = ingest(input.as_bytes(), InputFormat::Csv).unwrap();
        assert_eq!(comments.len(), 2);
        assert_eq!(report.malformed, 1);
        assert!(comments[0].deleted);
        assert_eq!(comments[0].text, "il-bieb, miftuħ");
        assert!(comments[0].created_at.is_some());
        assert!(!comments[1].deleted);
    }

    #[test]
    fn csv_without_text_column_fails() {
        let input = "id,author\n1,alice\n";
        assert!(matches!(ingest(input.as_bytes(), InputFormat::Csv), Err(CorpusError::MissingColumn("text"))));
    }

    #[test]
    fn unreadable_stream_fails() {
        struct Broken;
        impl std::io::Read for Broken {
            fn read(&mut self, _: &mut [u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("disk gone"))
            }
        }
        let r = std::io::BufReader::new(Broken);
        assert!(matches!(ingest(r, InputFormat::Jsonl), Err(CorpusError::Io(_))));
    }
}

//! Acceptance suite: one PASS/FAIL line per primary criterion. Run with
//! `cargo test -p hsa-service --test acceptance`. Tolerances are pinned here.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chrono::DateTime;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsa_core::agreement::{fleiss_kappa, percent_agreement, randolph_kappa, RatingMatrix};
use hsa_core::corpus::{
    contains_raw_username, fold_diacritics, ingest, keyword_filter, Anonymizer, InputFormat, RawComment, SubcorpusSpec,
};
use hsa_core::sampling::{presentation_order, stratified_sample, SampleManifest, StratumSpec};
use hsa_core::scheme::{
    derive_binary, derive_cortese, next_question, validate, Answer, Answers, AnnotationRecord, Attitude, BinaryLabel,
    CorteseCategory, ProtectedGroupRegistry, QuestionId, Strategy, TargetChoice, TargetKind,
};
use hsa_core::store::{export, import, Arm, EventFilter, EventStore, ExportFormat};
use hsa_service::simulate::{self, SimulationConfig};
use hsa_service::{system_clock, Service};

const KAPPA_TOL: f64 = 1e-12;
const TRUTH_TABLE_BUDGET: Duration = Duration::from_secs(1);
const SIMULATION_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn base(attitude: Attitude) -> AnnotationRecord {
    AnnotationRecord {
        comment_id: "c".into(),
        annotator_id: "a".into(),
        attitude,
        target: None,
        group_name: None,
        strategies: BTreeSet::new(),
        violence_call: None,
        submitted_at: DateTime::UNIX_EPOCH,
    }
}

/// Every valid record shape, one per group name, built by nested loops.
fn enumerate(groups: &[&str]) -> Vec<AnnotationRecord> {
    let mut out = vec![base(Attitude::Positive), base(Attitude::Neutral)];
    let mut lone = base(Attitude::Negative);
    lone.target = Some(TargetKind::Individual { via_group_affiliation: false });
    out.push(lone);
    for target in [TargetKind::Group, TargetKind::Individual { via_group_affiliation: true }] {
        for group in groups {
            for mask in 1u32..128 {
                let strategies: BTreeSet<Strategy> =
                    Strategy::ALL.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| *s).collect();
                let calls: &[Option<bool>] =
                    if strategies.contains(&Strategy::Suggestion) { &[Some(false), Some(true)] } else { &[None] };
                for &violence_call in calls {
                    let mut r = base(Attitude::Negative);
                    r.target = Some(target);
                    r.group_name = Some(group.to_string());
                    r.strategies = strategies.clone();
                    r.violence_call = violence_call;
                    out.push(r);
                }
            }
        }
    }
    out
}

fn scheme_truth_table() -> Outcome {
    let registry = ProtectedGroupRegistry::default_malta();
    // Protected, listed but unprotected, and missing from the registry.
    let groups = [("migrants", Some(true)), ("politicians", Some(false)), ("zombies", None)];
    let records = enumerate(&groups.map(|(g, _)| g));
    check(records.len() == 3 + 2 * 3 * 191, || format!("enumerated {} records", records.len()))?;
    let started = Instant::now();
    let mut cases = 0;
    for r in &records {
        validate(r).map_err(|v| format!("enumerated record invalid: {v:?}"))?;
        let protected = r.group_name.as_deref().map(|g| groups.iter().find(|(n, _)| *n == g).unwrap().1);
        let inciting = r.strategies.contains(&Strategy::Suggestion) || r.strategies.contains(&Strategy::Threat);
        let got = derive_binary(r, &registry);
        match protected {
            Some(None) => check(got.is_err(), || format!("unknown group accepted: {r:?}"))?,
            Some(Some(p)) => {
                let want = r.attitude == Attitude::Negative && p && inciting;
                check(got == Ok(if want { BinaryLabel::HateSpeech } else { BinaryLabel::NotHateSpeech }), || {
                    format!("{r:?} gave {got:?}")
                })?
            }
            None => check(got == Ok(BinaryLabel::NotHateSpeech), || format!("{r:?} gave {got:?}"))?,
        }
        cases += 1;
    }
    let elapsed = started.elapsed();
    check(elapsed < TRUTH_TABLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} records, 100% match, {elapsed:.2?}"))
}

fn cortese_golden_table() -> Outcome {
    use CorteseCategory::*;
    use Strategy::*;
    let rec = |attitude, target: Option<TargetKind>, group: Option<&str>, strategies: &[Strategy], call| {
        let mut r = base(attitude);
        r.target = target;
        r.group_name = group.map(String::from);
        r.strategies = strategies.iter().copied().collect();
        r.violence_call = call;
        r
    };
    let group = Some(TargetKind::Group);
    let member = Some(TargetKind::Individual { via_group_affiliation: true });
    let lone = Some(TargetKind::Individual { via_group_affiliation: false });
    let table = [
        // "kill all [members of a minority group]"
        (rec(Attitude::Negative, group, Some("migrants"), &[Suggestion], Some(true)), IncitementViolence),
        // A threat aimed at one member because of the group.
        (rec(Attitude::Negative, member, Some("LGBTIQ+"), &[Threat], None), IncitementViolence),
        (rec(Attitude::Negative, group, Some("Muslims"), &[Threat, Insult, Generalisation], None), IncitementViolence),
        // "migrants bring contagious diseases from their countries"
        (rec(Attitude::Negative, group, Some("migrants"), &[Suggestion, Stereotyping], Some(false)), IncitementHatred),
        // "let's make sure that all [...] do not feel welcome"
        (rec(Attitude::Negative, group, Some("refugees"), &[Suggestion, Generalisation], Some(false)), IncitementHatred),
        // Members of the LGBTIQ+ community described as sick.
        (rec(Attitude::Negative, member, Some("LGBTIQ+"), &[Suggestion, DerogatoryTerm], Some(false)), IncitementHatred),
        // Migrants as "invaders".
        (rec(Attitude::Negative, group, Some("migrants"), &[DerogatoryTerm], None), Discrimination12),
        // "faggot"
        (rec(Attitude::Negative, member, Some("LGBTIQ+"), &[Insult], None), Discrimination12),
        // Asylum seekers as "immigrants", with a sarcastic generalisation.
        (rec(Attitude::Negative, group, Some("asylum seekers"), &[Sarcasm, Generalisation], None), Discrimination12),
        (rec(Attitude::Positive, None, None, &[], None), NotApplicable),
        (rec(Attitude::Neutral, None, None, &[], None), NotApplicable),
        (rec(Attitude::Negative, lone, None, &[], None), NotApplicable),
    ];
    for (r, want) in &table {
        validate(r).map_err(|v| format!("golden record invalid: {v:?}"))?;
        let got = derive_cortese(r);
        check(got == *want, || format!("{r:?}: got {got:?}, want {want:?}"))?;
    }
    for c in CorteseCategory::ALL {
        let n = table.iter().filter(|(_, w)| *w == c).count();
        check(n == 3, || format!("{c:?} has {n} cases"))?;
    }
    Ok(format!("{}/{} cases match", table.len(), table.len()))
}

fn matrix(rows: Vec<Vec<u32>>) -> RatingMatrix {
    let k = rows[0].len();
    RatingMatrix::from_counts((0..k).map(|j| format!("c{j}")).collect(), rows).unwrap()
}

fn agreement_fixture() -> Outcome {
    // Items AAA and AAB. P_1 = 1, P_2 = (2*1 + 0)/(3*2) = 1/3, so P-bar = 2/3.
    // Shares A = 5/6, B = 1/6, P_e = 25/36 + 1/36 = 13/18.
    // Fleiss = (2/3 - 13/18) / (1 - 13/18) = (-1/18) / (5/18) = -1/5.
    // Randolph = (2/3 - 1/2) / (1/2) = 1/3.
    let m = matrix(vec![vec![3, 0], vec![2, 1]]);
    let (p, f, r) = (percent_agreement(&m), fleiss_kappa(&m), randolph_kappa(&m));
    check((p - 2.0 / 3.0).abs() < KAPPA_TOL, || format!("percent {p}"))?;
    check(f.is_some_and(|f| (f + 0.2).abs() < KAPPA_TOL), || format!("fleiss {f:?}"))?;
    check((r - 1.0 / 3.0).abs() < KAPPA_TOL, || format!("randolph {r}"))?;

    for rows in [vec![vec![3, 0], vec![0, 3]], vec![vec![0, 4, 0], vec![4, 0, 0], vec![0, 0, 4]]] {
        let m = matrix(rows);
        let all = [Some(percent_agreement(&m)), fleiss_kappa(&m), Some(randolph_kappa(&m))];
        check(all.iter().all(|v| *v == Some(1.0)), || format!("perfect agreement gave {all:?}"))?;
    }
    let single = matrix(vec![vec![3, 0], vec![3, 0]]);
    check(fleiss_kappa(&single).is_none(), || "single category gave a Fleiss value".into())?;
    Ok(format!("percent {p:.6}, fleiss {:.6}, randolph {r:.6}; perfect = 1.0; single category undefined", f.unwrap()))
}

fn metric_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut checked = 0;
    while checked < 1000 {
        let items = rng.random_range(1..=20);
        let raters = rng.random_range(2..=12);
        let k = rng.random_range(2..=5);
        let rows: Vec<Vec<u32>> = (0..items)
            .map(|_| {
                let mut row = vec![0u32; k];
                for _ in 0..raters {
                    row[rng.random_range(0..k)] += 1;
                }
                row
            })
            .collect();
        let m = matrix(rows.clone());
        if percent_agreement(&m) >= 1.0 {
            continue;
        }
        let (p, f, r) = (percent_agreement(&m), fleiss_kappa(&m), randolph_kappa(&m));
        let f = f.ok_or_else(|| format!("fleiss undefined with P-bar < 1: {rows:?}"))?;
        check(r >= f - KAPPA_TOL, || format!("randolph {r} < fleiss {f}: {rows:?}"))?;

        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let permuted = matrix(rows.iter().map(|row| perm.iter().map(|&j| row[j]).collect()).collect());
        check((percent_agreement(&permuted) - p).abs() < KAPPA_TOL, || "percent changed under permutation".into())?;
        check(fleiss_kappa(&permuted).is_some_and(|x| (x - f).abs() < KAPPA_TOL), || "fleiss changed under permutation".into())?;
        check((randolph_kappa(&permuted) - r).abs() < KAPPA_TOL, || "randolph changed under permutation".into())?;

        let doubled = matrix(rows.iter().chain(rows.iter()).cloned().collect());
        check((percent_agreement(&doubled) - p).abs() < KAPPA_TOL, || "percent changed under duplication".into())?;
        check(fleiss_kappa(&doubled).is_some_and(|x| (x - f).abs() < KAPPA_TOL), || "fleiss changed under duplication".into())?;
        check((randolph_kappa(&doubled) - r).abs() < KAPPA_TOL, || "randolph changed under duplication".into())?;
        checked += 1;
    }
    Ok(format!("{checked} matrices: randolph >= fleiss, permutation and duplication invariant"))
}

fn table_layout(table: &str) -> Result<(), String> {
    let lines: Vec<&str> = table.lines().collect();
    check(lines.len() == 4, || format!("{} lines", lines.len()))?;
    let header: Vec<&str> = lines[0].split_whitespace().collect();
    check(header == ["Metric", "binary", "multi-level"], || format!("header {header:?}"))?;
    for (line, label, percent) in
        [(lines[1], "Percent agr.", true), (lines[2], "Fleiss' k", false), (lines[3], "Randolph's k", false)]
    {
        let cells: Vec<&str> =
            line.strip_prefix(label).ok_or_else(|| format!("row {line:?}"))?.split_whitespace().collect();
        check(cells.len() == 2, || format!("row {line:?}"))?;
        for c in cells {
            let number = if percent { c.strip_suffix('%').unwrap_or("x") } else { c };
            let decimals = if percent { 1 } else { 2 };
            let ok = number.parse::<f64>().is_ok() && number.split_once('.').is_some_and(|(_, d)| d.len() == decimals);
            check(ok, || format!("cell {c:?} in {line:?}"))?;
        }
    }
    Ok(())
}

fn simulated_pilot(work: &Path) -> Outcome {
    let config = SimulationConfig::default();
    let started = Instant::now();
    let first = simulate::run(&config, &work.join("pilot-a")).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let second = simulate::run(&config, &work.join("pilot-b")).map_err(|e| e.to_string())?;
    check(elapsed < SIMULATION_BUDGET, || format!("took {elapsed:?}"))?;

    let arms = |a: Arm| first.roster.values().filter(|x| **x == a).count();
    check(first.roster.len() == 24 && arms(Arm::Binary) == 12 && arms(Arm::Multilevel) == 12, || {
        format!("roster {:?}", first.roster)
    })?;
    check(first.manifest.strata.len() == 5 && first.manifest.strata.iter().all(|s| s.ids.len() == 3), || {
        "manifest is not 5 strata of 3".into()
    })?;
    check(first.report.pending.is_empty() && !first.report.forced, || "report has pending annotators".into())?;
    table_layout(&first.report.table)?;
    check(first.report.table == second.report.table, || "tables differ between runs".into())?;
    let json = |o: &simulate::SimulationOutcome| serde_json::to_string(&o.report).unwrap();
    check(json(&first) == json(&second), || "reports differ between runs".into())?;
    let log = |d: &str| fs::read(work.join(d).join("events.jsonl")).unwrap_or_default();
    check(log("pilot-a") == log("pilot-b"), || "event logs differ between runs".into())?;
    let mut summary = String::new();
    for line in first.report.table.lines().skip(1) {
        summary.push_str(&format!(" [{}]", line.split_whitespace().collect::<Vec<_>>().join(" ")));
    }
    Ok(format!("24 annotators, 15 items, byte-identical rerun, {elapsed:.2?};{summary}"))
}

fn random_answer(q: QuestionId, rng: &mut ChaCha8Rng) -> Answer {
    match q {
        QuestionId::Q1Attitude => Answer::Attitude(*Attitude::ALL.choose(rng).unwrap()),
        QuestionId::Q2Target => Answer::Target(if rng.random() { TargetChoice::Group } else { TargetChoice::Individual }),
        QuestionId::Q2aAffiliation => Answer::Affiliation(rng.random()),
        QuestionId::Q2xNameGroup => Answer::GroupName(["migrants", "politicians", "Refuġjati"].choose(rng).unwrap().to_string()),
        QuestionId::Q3Strategies => {
            let mut s: BTreeSet<Strategy> = Strategy::ALL.iter().copied().filter(|_| rng.random_bool(0.3)).collect();
            if s.is_empty() {
                s.insert(*Strategy::ALL.choose(rng).unwrap());
            }
            Answer::Strategies(s)
        }
        QuestionId::Q3aViolence => Answer::ViolenceCall(rng.random()),
        QuestionId::Complete => unreachable!("no answer after completion"),
    }
}

/// Validity written out from the gating rules, without the scheme code.
fn valid_by_hand(r: &AnnotationRecord) -> bool {
    let closed = |r: &AnnotationRecord| r.group_name.is_none() && r.strategies.is_empty() && r.violence_call.is_none();
    if r.attitude != Attitude::Negative {
        return r.target.is_none() && closed(r);
    }
    match r.target {
        None => false,
        Some(TargetKind::Individual { via_group_affiliation: false }) => closed(r),
        Some(_) => {
            r.group_name.as_deref().is_some_and(|g| !g.trim().is_empty())
                && !r.strategies.is_empty()
                && r.violence_call.is_some() == r.strategies.contains(&Strategy::Suggestion)
        }
    }
}

fn mutate(r: &mut AnnotationRecord, rng: &mut ChaCha8Rng) {
    match rng.random_range(0..5) {
        0 => r.attitude = *Attitude::ALL.choose(rng).unwrap(),
        1 => {
            r.target = *[
                None,
                Some(TargetKind::Group),
                Some(TargetKind::Individual { via_group_affiliation: true }),
                Some(TargetKind::Individual { via_group_affiliation: false }),
            ]
            .choose(rng)
            .unwrap()
        }
        2 => r.group_name = [None, Some(""), Some("   "), Some("migrants"), Some("ħaddiema")].choose(rng).unwrap().map(String::from),
        3 => r.strategies = Strategy::ALL.iter().copied().filter(|_| rng.random_bool(0.25)).collect(),
        _ => r.violence_call = *[None, Some(true), Some(false)].choose(rng).unwrap(),
    }
}

fn routing_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut finished = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let mut answers = Answers::default();
        let mut steps = 0;
        loop {
            let q = next_question(&answers).map_err(|e| format!("routing error {e:?}"))?;
            if q == QuestionId::Complete {
                break;
            }
            answers.apply(random_answer(q, &mut rng)).map_err(|e| format!("{q:?} rejected a fitting answer: {e:?}"))?;
            steps += 1;
            check(steps <= 6, || "walk did not terminate".into())?;
        }
        let r = answers.finish("c", "a", DateTime::UNIX_EPOCH).map_err(|e| format!("finish failed: {e:?}"))?;
        validate(&r).map_err(|v| format!("walk ended invalid: {v:?}"))?;
        finished.push(r);
    }
    let (mut still_valid, mut rejected) = (0, 0);
    for _ in 0..10_000 {
        let mut r = finished.choose(&mut rng).unwrap().clone();
        mutate(&mut r, &mut rng);
        match validate(&r) {
            Ok(()) => {
                check(valid_by_hand(&r), || format!("accepted invalid {r:?}"))?;
                still_valid += 1;
            }
            Err(v) => {
                check(!valid_by_hand(&r), || format!("rejected valid {r:?}: {v:?}"))?;
                check(!v.is_empty() && v.iter().all(|x| !x.field().is_empty()), || format!("unnamed violation {v:?}"))?;
                rejected += 1;
            }
        }
    }
    Ok(format!("10000 walks complete and valid; mutations: {still_valid} valid, {rejected} rejected with named violations"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn load(name: &str) -> Vec<RawComment> {
    let text = fs::read(fixture(name)).unwrap();
    ingest(text.as_slice(), InputFormat::Jsonl).unwrap().0
}

fn corpus_pipeline(work: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphabet: Vec<char> = "abcghzAGHZ ċġħżĊĠĦŻàèìòùáéíóúâêîôûäëïöüçñ'-\u{0307}\u{0300}".chars().collect();
    for _ in 0..1000 {
        let len = rng.random_range(0..40);
        let s: String = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        let once = fold_diacritics(&s);
        check(fold_diacritics(&once) == once, || format!("fold not idempotent on {s:?}"))?;
    }

    let raws = load("five_comments.jsonl");
    let comments = Anonymizer::for_corpus(b"acceptance", &raws).map_err(|e| e.to_string())?.anonymize_all(&raws);
    let spec =
        SubcorpusSpec { name: "places".into(), keywords: vec!["gharb".into()], word_budget_per_keyword: 5000, fold_diacritics: true };
    let hits = keyword_filter(&comments, &spec).map_err(|e| e.to_string())?;
    check(hits.len() == 1 && hits[0].text.contains("Għarb"), || format!("gharb hits {hits:?}"))?;

    let mut raws = load("twenty_comments.jsonl");
    raws.extend(load("five_comments.jsonl"));
    let anon = Anonymizer::for_corpus(b"acceptance", &raws).map_err(|e| e.to_string())?;
    let mut found = 0;
    for c in anon.anonymize_all(&raws) {
        for name in anon.inventory() {
            if contains_raw_username(&c.text, name) || contains_raw_username(&c.author_pseudonym, name) {
                found += 1;
            }
        }
    }
    check(found == 0, || format!("{found} raw usernames survive"))?;

    let source = work.join("roundtrip-source");
    simulate::run(&SimulationConfig::default(), &source).map_err(|e| e.to_string())?;
    let service = Service::open(&source, system_clock()).map_err(|e| e.to_string())?;
    let config = service.experiment(simulate::EXPERIMENT_ID).map_err(|e| e.to_string())?;
    let original = service.store().load(&EventFilter::default()).map_err(|e| e.to_string())?;
    for format in [ExportFormat::Jsonl, ExportFormat::Csv] {
        let out = work.join(format!("export-{format:?}"));
        let target = work.join(format!("import-{format:?}"));
        export(service.store(), &service.export_context(config), &out, format).map_err(|e| e.to_string())?;
        let (store, report) = import(&out, &target).map_err(|e| e.to_string())?;
        check(report.warnings.is_empty(), || format!("{format:?} import warnings {:?}", report.warnings))?;
        check(report.comments == config.items, || format!("{format:?} comments differ"))?;
        let back = store.load(&EventFilter::default()).map_err(|e| e.to_string())?;
        check(back == original, || format!("{format:?} events differ after import"))?;
        drop(store);
        let reopened = EventStore::open(&target).map_err(|e| e.to_string())?;
        check(reopened.load(&EventFilter::default()).map_err(|e| e.to_string())? == original, || {
            format!("{format:?} import does not survive reopen")
        })?;
    }
    Ok(format!(
        "1000 strings fold idempotently; gharb finds Għarb; 0 raw usernames in {} comments; {} events round-trip (jsonl, csv)",
        raws.len(),
        original.len()
    ))
}

fn sampling(work: &Path) -> Outcome {
    let labels = ["violence", "discriminatory", "other-target", "positive", "ambiguous"];
    let strata: Vec<StratumSpec> = labels
        .iter()
        .enumerate()
        .map(|(s, l)| StratumSpec { label: l.to_string(), member_ids: (0..8).map(|j| format!("s{s}-{j}")).collect(), take: 3 })
        .collect();
    let manifest = stratified_sample(&strata, 42).map_err(|e| e.to_string())?;
    let ids = manifest.selected_ids();
    check(ids.len() == 15 && ids.iter().collect::<BTreeSet<_>>().len() == 15, || format!("selected {ids:?}"))?;

    // Two separate processes, with per-annotator orders.
    let mut csv = String::from("label,comment_id\n");
    let mut comments = String::new();
    for s in &strata {
        for id in &s.member_ids {
            csv.push_str(&format!("{},{id}\n", s.label));
            let author = format!("p{}", id.len() + id.chars().last().unwrap().to_digit(10).unwrap() as usize % 4);
            let c = serde_json::json!({ "id": id, "source": "timesofmalta", "article_id": "a", "author_pseudonym": author,
                                        "created_at": null, "text": "t", "deleted": false, "language": "en" });
            comments.push_str(&format!("{c}\n"));
        }
    }
    fs::write(work.join("strata.csv"), csv).map_err(|e| e.to_string())?;
    fs::write(work.join("comments.jsonl"), comments).map_err(|e| e.to_string())?;
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_hsa"))
            .current_dir(work)
            .args(["sample", "--strata", "strata.csv", "--seed", "42", "--comments", "comments.jsonl"])
            .args(["--annotators", "ann-01,ann-02,ann-03"])
            .output()
    };
    let (a, b) = (run().map_err(|e| e.to_string())?, run().map_err(|e| e.to_string())?);
    check(a.status.success(), || String::from_utf8_lossy(&a.stderr).into_owned())?;
    check(!a.stdout.is_empty() && a.stdout == b.stdout, || "manifests differ between processes".into())?;
    let from_cli: SampleManifest = serde_json::from_slice(&a.stdout).map_err(|e| e.to_string())?;
    check(from_cli.strata == manifest.strata, || "process manifest differs from library manifest".into())?;

    // Adjacency scan over random author layouts.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut satisfiable, mut flagged) = (0, 0);
    for round in 0..1000 {
        let authors = rng.random_range(1..=6);
        let author_of: HashMap<String, String> =
            ids.iter().map(|id| (id.clone(), format!("p{}", rng.random_range(0..authors)))).collect();
        let order = presentation_order(&manifest, &format!("ann-{round}"), &author_of, round).map_err(|e| e.to_string())?;
        let mut sorted = order.ids.clone();
        sorted.sort();
        let mut want = ids.clone();
        want.sort();
        check(sorted == want, || "order is not a permutation of the sample".into())?;
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for a in author_of.values() {
            *counts.entry(a).or_default() += 1;
        }
        let possible = counts.values().max().copied().unwrap_or(0) <= ids.len().div_ceil(2);
        let adjacent = order.ids.windows(2).any(|w| author_of[&w[0]] == author_of[&w[1]]);
        if possible {
            check(!adjacent && !order.author_adjacent, || format!("adjacent authors in satisfiable layout {author_of:?}"))?;
            satisfiable += 1;
        } else {
            check(order.author_adjacent, || "unsatisfiable layout not flagged".into())?;
            flagged += 1;
        }
    }
    Ok(format!("15 items; identical manifests from two processes; {satisfiable} separable layouts clean, {flagged} flagged"))
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<Criterion> = vec![
        ("scheme truth table", Box::new(scheme_truth_table)),
        ("cortese derivation", Box::new(cortese_golden_table)),
        ("agreement metrics", Box::new(agreement_fixture)),
        ("metric ordering property", Box::new(metric_ordering)),
        ("simulated pilot", Box::new(|| simulated_pilot(work.path()))),
        ("routing soundness", Box::new(routing_soundness)),
        ("corpus pipeline", Box::new(|| corpus_pipeline(work.path()))),
        ("sampling", Box::new(|| sampling(work.path()))),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

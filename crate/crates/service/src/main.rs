use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde_json::json;

use hsa_core::agreement::{agreement_report, build_matrix, render_table, Labels, MatrixPolicy};
use hsa_core::corpus::{
    corpus_stats, ingest, keyword_filter, write_jsonl, Anonymizer, InputFormat, SubcorpusSpec,
};
use hsa_core::sampling::{assign_orders, stratified_sample, strata_from_csv};
use hsa_core::scheme::{
    classify_conscious, derive_binary, derive_cortese, majority_vote, validate, AnnotationRecord, Fraction,
    ProtectedGroupRegistry, TieBreak,
};
use hsa_core::store::{export, import, ExportFormat};
use hsa_service::simulate::{self, SimulationConfig};
use hsa_service::{http, system_clock, AnnotatorProfile, ExperimentFile, Service};

#[derive(Parser)]
#[command(name = "hsa", version, about = "Multi-level hate speech annotation: corpus, pilot experiments, agreement")]
struct Cli {
    /// Event store directory.
    #[arg(long, global = true, env = "HSA_STORE", default_value = "hsa-store")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read raw comments, de-duplicate, anonymize and write JSONL.
    Ingest(IngestArgs),
    /// Stratified selection of pilot items, optionally with presentation orders.
    Sample(SampleArgs),
    /// Experiment management.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Register an annotator and assign an arm.
    Assign(AssignArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Agreement report for an experiment.
    Report(ReportArgs),
    /// Write a self-describing dataset export.
    Export(ExportArgs),
    /// Rebuild the store from an export directory.
    Import(ImportArgs),
    /// Agreement metrics for a CSV of item,rater,label rows.
    Agree(AgreeArgs),
    /// Binary and Cortese labels for a JSONL file of annotation records.
    Derive(DeriveArgs),
    /// Seeded end-to-end pilot with synthetic annotators.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: InputFormat,
    /// Key for author pseudonyms.
    #[arg(long)]
    salt: String,
    #[arg(long)]
    output: PathBuf,
    /// JSON subcorpus spec; only matching comments are written.
    #[arg(long)]
    subcorpus: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// CSV with `label` and `comment_id` columns.
    #[arg(long)]
    strata: PathBuf,
    #[arg(long, default_value_t = 3)]
    take: usize,
    #[arg(long)]
    seed: u64,
    /// Anonymized comments, needed for author-separated orders.
    #[arg(long, requires = "annotators")]
    comments: Option<PathBuf>,
    /// Comma-separated annotator ids to generate orders for.
    #[arg(long, value_delimiter = ',', requires = "comments")]
    annotators: Vec<String>,
    /// Give every annotator the same order.
    #[arg(long)]
    shared_order: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Create an experiment from a TOML (or .json) config file.
    Create {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long)]
    experiment: String,
    #[arg(long)]
    annotator: String,
    #[arg(long)]
    gender: String,
    #[arg(long)]
    age_band: String,
    /// Record that consent has not (yet) been given.
    #[arg(long)]
    no_consent: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Bearer token for experiment setup, reports and exports. A random one
    /// is generated and printed when omitted.
    #[arg(long)]
    admin_token: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    experiment: String,
    /// Report even though some annotators are unfinished.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    experiment: String,
    #[arg(long, default_value = "jsonl")]
    format: ExportFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    from: PathBuf,
}

#[derive(Args)]
struct AgreeArgs {
    /// CSV with `item`, `rater` and `label` columns.
    #[arg(long)]
    labels: PathBuf,
    /// Categories that exist even if unobserved.
    #[arg(long, value_delimiter = ',')]
    categories: Vec<String>,
    /// Drop items with fewer raters than the mode instead of failing.
    #[arg(long)]
    drop_incomplete: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    records: PathBuf,
    /// Registry JSON; the built-in Maltese registry when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value = "2/3")]
    threshold: Fraction,
    #[arg(long, default_value = "escalate")]
    tie_break: TieBreak,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = SimulationConfig::default().seed)]
    seed: u64,
    /// Print the whole report as JSON instead of the table.
    #[arg(long)]
    json: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Experiment(ExperimentCommand::Create { config }) => {
            let config = ExperimentFile::load(&config)?;
            let id = config.id.clone();
            let items = config.manifest.selected_ids().len();
            open(&cli.store)?.create_experiment(config)?;
            println!("created experiment {id} with {items} items");
            Ok(())
        }
        Command::Assign(a) => {
            let mut service = open(&cli.store)?;
            let profile =
                AnnotatorProfile { annotator_id: a.annotator, gender: a.gender, age_band: a.age_band, consent: !a.no_consent };
            let reg = service.register(&a.experiment, profile)?;
            println!("{}", reg.arm.as_str());
            Ok(())
        }
        Command::Serve(a) => cmd_serve(&cli.store, a),
        Command::Report(a) => {
            let report = open(&cli.store)?.report(&a.experiment, a.force)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table);
                for note in &report.notes {
                    eprintln!("note: {note}");
                }
                if !report.pending.is_empty() {
                    eprintln!("note: unfinished annotators {:?}", report.pending);
                }
            }
            Ok(())
        }
        Command::Export(a) => {
            let service = open(&cli.store)?;
            let config = service.experiment(&a.experiment)?;
            let manifest = export(service.store(), &service.export_context(config), &a.out, a.format)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(())
        }
        Command::Import(a) => {
            let (store, report) = import(&a.from, &cli.store)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("imported {} events into {}", report.events, store.dir().display());
            Ok(())
        }
        Command::Agree(a) => cmd_agree(a),
        Command::Derive(a) => cmd_derive(a),
        Command::Simulate(a) => {
            if cli.store.join(hsa_core::store::LOG_FILE).exists() {
                bail!("{} already holds a store; simulate needs a fresh directory", cli.store.display());
            }
            let outcome = simulate::run(&SimulationConfig { seed: a.seed, ..Default::default() }, &cli.store)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&outcome.report)?);
            } else {
                print!("{}", outcome.report.table);
            }
            Ok(())
        }
    }
}

fn open(store: &Path) -> Result<Service> {
    Service::open(store, system_clock()).with_context(|| format!("opening store {}", store.display()))
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let (raws, report) = ingest(reader(&a.input)?, a.format)?;
    let anonymizer = Anonymizer::for_corpus(a.salt.as_bytes(), &raws)?;
    let mut comments = anonymizer.anonymize_all(&raws);
    if let Some(spec) = &a.subcorpus {
        let spec: SubcorpusSpec = serde_json::from_reader(reader(spec)?)?;
        comments = keyword_filter(&comments, &spec)?;
    }
    let leaks: usize = comments.iter().map(|c| anonymizer.leaks(c).len()).sum();
    if leaks > 0 {
        bail!("{leaks} raw usernames survived anonymization; nothing written");
    }
    let out = File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    write_jsonl(BufWriter::new(out), &comments)?;
    println!("{}", serde_json::to_string_pretty(&json!({ "ingest": report, "stats": corpus_stats(&comments) }))?);
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let strata = strata_from_csv(reader(&a.strata)?, a.take)?;
    let mut manifest = stratified_sample(&strata, a.seed)?;
    if let Some(path) = &a.comments {
        let comments = hsa_core::corpus::read_jsonl(reader(path)?)?;
        let author_of = hsa_service::service::authors(&comments);
        assign_orders(&mut manifest, &a.annotators, &author_of, a.seed, a.shared_order)?;
    }
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    match &a.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_serve(store: &Path, a: ServeArgs) -> Result<()> {
    let service = open(store)?;
    let token = a.admin_token.unwrap_or_else(|| {
        let t = format!("{:032x}", rand::rng().random::<u128>());
        eprintln!("admin token: {t}");
        t
    });
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr).await.with_context(|| format!("binding {}", a.addr))?;
        println!("listening on http://{}", listener.local_addr()?);
        io::stdout().flush()?;
        axum::serve(listener, http::router(service, token))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn cmd_agree(a: AgreeArgs) -> Result<()> {
    let mut rdr = csv::Reader::from_reader(reader(&a.labels)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).with_context(|| format!("missing column `{name}`"));
    let (item, rater, label) = (col("item")?, col("rater")?, col("label")?);
    let mut labels = Labels::new();
    for row in rdr.records() {
        let row = row?;
        let key = (row[item].to_string(), row[rater].to_string());
        if labels.insert(key.clone(), row[label].to_string()).is_some() {
            bail!("rater {} labels item {} twice", key.1, key.0);
        }
    }
    let policy = if a.drop_incomplete { MatrixPolicy::DropIncomplete } else { MatrixPolicy::Strict };
    let built = build_matrix(&labels, &a.categories, policy)?;
    let report = agreement_report(&built.matrix);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&json!({ "report": report, "excluded": built.excluded }))?);
    } else {
        print!("{}", render_table(&[("labels", Some(&report))]));
        for e in &built.excluded {
            eprintln!("note: dropped item {} ({} raters)", e.item, e.raters);
        }
    }
    Ok(())
}

fn cmd_derive(a: DeriveArgs) -> Result<()> {
    let registry = match &a.registry {
        Some(p) => serde_json::from_reader(reader(p)?)?,
        None => ProtectedGroupRegistry::default_malta(),
    };
    let mut by_comment: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    let text = fs::read_to_string(&a.records).with_context(|| format!("reading {}", a.records.display()))?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: AnnotationRecord = serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
        if let Err(v) = validate(&record) {
            let v: Vec<String> = v.iter().map(ToString::to_string).collect();
            bail!("line {}: invalid record: {}", i + 1, v.join("; "));
        }
        let binary = derive_binary(&record, &registry).with_context(|| format!("line {}", i + 1))?;
        let row = json!({
            "comment_id": record.comment_id,
            "annotator_id": record.annotator_id,
            "binary": binary,
            "cortese": derive_cortese(&record),
        });
        writeln!(out, "{row}")?;
        by_comment.entry(record.comment_id.clone()).or_default().push(record);
    }
    for (comment, records) in &by_comment {
        let labels: Vec<_> = records.iter().map(|r| derive_binary(r, &registry)).collect::<Result<_, _>>()?;
        let row = json!({
            "comment_id": comment,
            "raters": records.len(),
            "gold": majority_vote(&labels, a.tie_break)?,
            "conscious": classify_conscious(records, a.threshold).ok(),
        });
        writeln!(out, "{row}")?;
    }
    Ok(())
}

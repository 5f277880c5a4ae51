//! Command-line entry point: `parse`, `reason`, `diagnose`, `eval`, `kb`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 memory budget
//! exceeded, 4 model backend error.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::action::{diagnose, write_back};
use crate::config::PipelineConfig;
use crate::eval::{
    generate_suite, run_benchmark, write_csv, write_jsonl, EvalError, Method, NoiseProfile, Suite, SuiteVariant,
};
use crate::kb::{KnowledgeBase, PendingEntry};
use crate::model::{build_client, MockBehavior, MockClient};
use crate::perception::{parse_stream, MaskRuleSet, RawLog, StructuredEvent, TemplateCache};
use crate::reasoning::{discover, CausalGraph, ReasoningError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "edgeheal", version, about = "Log-driven root cause analysis and repair suggestions")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Route raw log lines to templates and write structured events.
    Parse(ParseArgs),
    /// Learn a causal graph from structured events.
    Reason(ReasonArgs),
    /// Produce a root cause and repair action from a graph.
    Diagnose(DiagnoseArgs),
    /// Run the benchmark over methods and noise levels.
    Eval(EvalArgs),
    /// Manage the knowledge base.
    Kb(KbArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Raw log file, one line per record.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Events file (JSONL). Defaults to `<input>.events.jsonl`.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub kb: Option<PathBuf>,
    /// Source id stamped on every event. Defaults to the input file stem.
    #[arg(long)]
    pub source: Option<String>,
    /// Print the per-line route plan (no model calls, nothing written).
    #[arg(long)]
    pub dry_run: bool,
    /// Use the offline mock instead of the configured backend.
    #[arg(long)]
    pub offline: bool,
}

#[derive(Debug, Args)]
pub struct ReasonArgs {
    /// Events file written by `parse`.
    #[arg(long, short)]
    pub events: PathBuf,
    /// Graph file (JSON). Defaults to standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub kb: Option<PathBuf>,
    /// Put every mask entry at the background penalty.
    #[arg(long)]
    pub no_priors: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Graph file written by `reason`.
    #[arg(long, short)]
    pub graph: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub kb: Option<PathBuf>,
    /// Report file (JSON). Defaults to standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Use the offline mock instead of the configured backend.
    #[arg(long)]
    pub offline: bool,
    /// Mark the report as operator-validated and queue it as a KB case.
    #[arg(long)]
    pub validate: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory for metrics.csv, metrics.jsonl and checkpoint.jsonl.
    #[arg(long, default_value = "eval-out")]
    pub output_dir: PathBuf,
    /// Keep cells already present in the checkpoint.
    #[arg(long)]
    pub resume: bool,
    /// Comma-separated methods: nesy, nesy_no_priors, drain, direct.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long)]
    pub profile: Option<NoiseProfile>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<SuiteVariant>,
    #[arg(long)]
    pub incidents: Option<usize>,
    #[arg(long)]
    pub windows: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Load a suite directory (manifest.json plus raw logs) instead of generating one.
    #[arg(long, value_name = "DIR")]
    pub suite: Option<PathBuf>,
    /// Write the generated suite to DIR and exit.
    #[arg(long, value_name = "DIR")]
    pub export_suite: Option<PathBuf>,
    /// Cells computed concurrently.
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub memory_budget_mb: Option<f64>,
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

fn parse_variant(s: &str) -> Result<SuiteVariant, String> {
    match s {
        "deterministic" => Ok(SuiteVariant::Deterministic),
        "ambiguous" => Ok(SuiteVariant::Ambiguous),
        other => Err(format!("unknown variant `{other}` (deterministic | ambiguous)")),
    }
}

#[derive(Debug, Args)]
pub struct KbArgs {
    #[command(subcommand)]
    pub action: KbAction,
}

#[derive(Debug, Subcommand)]
pub enum KbAction {
    /// Create an empty knowledge base directory.
    Init {
        #[arg(long, value_name = "DIR")]
        kb: PathBuf,
    },
    /// Recompute embeddings and ids; nonzero exit on any mismatch.
    Verify {
        #[arg(long, value_name = "DIR")]
        kb: PathBuf,
    },
    /// Move pending entries into the validated store.
    Approve {
        #[arg(long, value_name = "DIR")]
        kb: PathBuf,
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        id: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Print store counts as JSON.
    Stats {
        #[arg(long, value_name = "DIR")]
        kb: PathBuf,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }

    fn data(m: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: m.into() }
    }

    fn backend(m: impl Into<String>) -> Self {
        Self { code: EXIT_BACKEND, message: m.into() }
    }
}

type CliResult = Result<(), CliError>;

/// Parses `std::env::args` and runs the command. Returns the exit code.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| CliError::usage(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Parse(a) => cmd_parse(cfg, a),
        Command::Reason(a) => cmd_reason(cfg, a),
        Command::Diagnose(a) => cmd_diagnose(cfg, a),
        Command::Eval(a) => cmd_eval(cfg, a),
        Command::Kb(a) => cmd_kb(a),
    }
}

fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

fn open_kb(dir: Option<&Path>) -> Result<KnowledgeBase, CliError> {
    match dir {
        Some(d) => {
            let (kb, report) = KnowledgeBase::load(d).map_err(|e| CliError::data(e.to_string()))?;
            if !report.diagnostics.is_empty() {
                eprintln!("warning: skipped {} malformed knowledge base lines", report.diagnostics.len());
            }
            Ok(kb)
        }
        None => Ok(KnowledgeBase::in_memory()),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output records serialize")
}

#[derive(Serialize)]
struct EventRecord<'a> {
    #[serde(flatten)]
    event: &'a StructuredEvent,
    config_hash: &'a str,
}

#[derive(Serialize)]
struct ParseSummary<'a> {
    lines: usize,
    events: usize,
    l1: usize,
    l2: usize,
    l3: usize,
    l2_cached: usize,
    degraded: usize,
    timestamp_warnings: usize,
    errors: usize,
    queued_for_validation: usize,
    mean_latency_ms: f64,
    config_hash: &'a str,
}

fn cmd_parse(mut cfg: PipelineConfig, a: ParseArgs) -> CliResult {
    let input = a.input.clone().or_else(|| cfg.paths.input.clone()).ok_or_else(|| CliError::usage("parse needs --input"))?;
    let kb_dir = a.kb.clone().or_else(|| cfg.paths.kb_dir.clone());
    cfg.paths.input = Some(input.clone());
    cfg.paths.kb_dir.clone_from(&kb_dir);
    let hash = cfg.hash();

    let raw = fs::read_to_string(&input).map_err(|e| CliError::data(format!("cannot read {}: {e}", input.display())))?;
    let source = a
        .source
        .clone()
        .unwrap_or_else(|| input.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned()));
    let logs = RawLog::from_lines(raw.lines(), &source);
    let mut kb = open_kb(kb_dir.as_deref())?;
    let rules = MaskRuleSet::default();
    let mut cache = TemplateCache::new(cfg.router.cache_capacity);

    if a.dry_run {
        let offline = MockClient::new(MockBehavior::Offline);
        let out = parse_stream(&logs, &mut cache, &kb, &offline, &rules, &cfg.router);
        let mut events = out.events.iter();
        for route in &out.stats.per_log {
            let (tier, text) = match route.tier {
                Some(t) => (format!("{t:?}"), events.next().map_or("", |e| e.template_text.as_str())),
                None => ("error".to_string(), ""),
            };
            println!("{}\t{}\t{}", route.seq, tier, text);
        }
        return Ok(());
    }

    let client = build_client(&cfg.client, a.offline).map_err(|e| CliError::backend(e.to_string()))?;
    let out = parse_stream(&logs, &mut cache, &kb, client.as_ref(), &rules, &cfg.router);
    let output = a.output.clone().or_else(|| cfg.paths.output.clone()).unwrap_or_else(|| input.with_extension("events.jsonl"));
    let mut body = String::new();
    for e in &out.events {
        body.push_str(&to_json_line(&EventRecord { event: e, config_hash: &hash }));
        body.push('\n');
    }
    write_text(Some(&output), &body)?;

    let mut queued = 0;
    if kb_dir.is_some() {
        for t in &out.to_validate {
            kb.enqueue_validation(PendingEntry::Template { text: t.text.clone(), cause_label: None })
                .map_err(|e| CliError::data(e.to_string()))?;
            queued += 1;
        }
    }
    let s = &out.stats;
    let summary = ParseSummary {
        lines: logs.len(),
        events: out.events.len(),
        l1: s.l1,
        l2: s.l2,
        l3: s.l3,
        l2_cached: s.l2_cached,
        degraded: s.degraded,
        timestamp_warnings: s.timestamp_warnings,
        errors: s.errors,
        queued_for_validation: queued,
        mean_latency_ms: s.mean_latency_ms(),
        config_hash: &hash,
    };
    println!("{}", to_json_line(&summary));
    Ok(())
}

/// Reads events written by `parse`; the provenance field is ignored.
pub fn read_events(path: &Path) -> Result<Vec<StructuredEvent>, String> {
    let file = File::open(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("config_hash");
        }
        events.push(serde_json::from_value(value).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(events)
}

fn cmd_reason(mut cfg: PipelineConfig, a: ReasonArgs) -> CliResult {
    let kb_dir = a.kb.clone().or_else(|| cfg.paths.kb_dir.clone());
    cfg.paths.kb_dir.clone_from(&kb_dir);
    let hash = cfg.hash();
    let events = read_events(&a.events).map_err(CliError::data)?;
    let kb = open_kb(kb_dir.as_deref())?;
    let (mut graph, result) = match discover(&events, &kb, &cfg.reasoning, !a.no_priors) {
        Ok(r) => r,
        Err(ReasoningError::Window(_)) => return Err(CliError::data("insufficient windows: no events")),
        Err(e) => return Err(CliError::data(e.to_string())),
    };
    if let Some(flag) = result.flag {
        eprintln!("warning: solver stopped early ({flag:?}, h = {:e})", result.h);
    }
    graph.config.config_hash = Some(hash);
    let text = serde_json::to_string_pretty(&graph).expect("graph serializes") + "\n";
    write_text(a.output.as_deref(), &text)
}

fn cmd_diagnose(mut cfg: PipelineConfig, a: DiagnoseArgs) -> CliResult {
    let kb_dir = a.kb.clone().or_else(|| cfg.paths.kb_dir.clone());
    cfg.paths.kb_dir.clone_from(&kb_dir);
    if a.validate && kb_dir.is_none() {
        return Err(CliError::usage("--validate needs --kb"));
    }
    let hash = cfg.hash();
    let text = fs::read_to_string(&a.graph).map_err(|e| CliError::data(format!("cannot read {}: {e}", a.graph.display())))?;
    let graph: CausalGraph =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.graph.display())))?;
    let mut kb = open_kb(kb_dir.as_deref())?;
    let client = build_client(&cfg.client, a.offline).map_err(|e| CliError::backend(e.to_string()))?;
    let mut report = diagnose(&graph, &kb, client.as_ref(), &cfg.action);
    report.config_hash = Some(hash);
    if a.validate {
        report.validated = true;
        if let Some(id) = write_back(&mut kb, &report, &graph).map_err(|e| CliError::data(e.to_string()))? {
            eprintln!("queued case {id} for approval");
        }
    }
    let out = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(a.output.as_deref(), &out)
}

fn cmd_eval(mut cfg: PipelineConfig, a: EvalArgs) -> CliResult {
    let bench = &mut cfg.eval;
    if let Some(m) = a.methods {
        bench.methods = m;
    }
    if let Some(l) = a.levels {
        bench.noise_levels = l;
    }
    if let Some(p) = a.profile {
        bench.suite.profile = p;
    }
    if let Some(v) = a.variant {
        bench.suite.variant = v;
    }
    if let Some(n) = a.incidents {
        bench.suite.incidents = n;
    }
    if let Some(w) = a.windows {
        bench.suite.windows = w;
    }
    if let Some(s) = a.seed {
        bench.seed = s;
    }
    if let Some(p) = a.parallel {
        bench.parallel_cells = p;
    }
    if let Some(b) = a.memory_budget_mb {
        bench.memory_budget_mb = b;
    }
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let suite = match &a.suite {
        Some(dir) => Suite::load(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?,
        None => generate_suite(&cfg.eval.suite),
    };
    if let Some(dir) = &a.export_suite {
        suite.save(dir).map_err(|e| CliError::data(e.to_string()))?;
        println!("wrote {} cases ({} lines) to {}", suite.cases.len(), suite.line_count(), dir.display());
        return Ok(());
    }
    let hash = cfg.hash();
    fs::create_dir_all(&a.output_dir).map_err(|e| CliError::data(e.to_string()))?;
    let checkpoint = a.output_dir.join("checkpoint.jsonl");
    if !a.resume && checkpoint.exists() {
        fs::remove_file(&checkpoint).map_err(|e| CliError::data(e.to_string()))?;
    }
    let client = build_client(&cfg.client, false).map_err(|e| CliError::backend(e.to_string()))?;
    let stages = cfg.stages();
    let result = run_benchmark(&suite, &cfg.eval, &stages, client.as_ref(), &hash, Some(&checkpoint), a.stop_after);
    let (reports, budget) = match result {
        Ok(out) => {
            eprintln!(
                "{} cells ({} resumed), peak RSS {:.1} MB of {:.0} MB budget",
                out.reports.len(),
                out.resumed_cells,
                out.peak_rss_mb,
                cfg.eval.memory_budget_mb
            );
            (out.reports, None)
        }
        Err(EvalError::BudgetExceeded { peak_mb, budget_mb, completed }) => {
            (completed, Some(format!("peak RSS {peak_mb:.1} MB exceeded the {budget_mb:.1} MB budget")))
        }
        Err(e) => return Err(CliError::data(e.to_string())),
    };
    write_outputs(&a.output_dir, &reports)?;
    match budget {
        Some(message) => Err(CliError { code: EXIT_BUDGET, message }),
        None => Ok(()),
    }
}

fn write_outputs(dir: &Path, reports: &[crate::eval::MetricsReport]) -> CliResult {
    let io = |e: std::io::Error| CliError::data(e.to_string());
    let csv_file = File::create(dir.join("metrics.csv")).map_err(io)?;
    write_csv(reports, BufWriter::new(csv_file)).map_err(|e| CliError::data(e.to_string()))?;
    let mut jsonl = BufWriter::new(File::create(dir.join("metrics.jsonl")).map_err(io)?);
    write_jsonl(reports, &mut jsonl).map_err(io)?;
    jsonl.flush().map_err(io)
}

#[derive(Serialize)]
struct VerifyReport {
    ok: bool,
    mismatches: Vec<String>,
}

fn cmd_kb(a: KbArgs) -> CliResult {
    let kb_err = |e: crate::kb::KbError| CliError::data(e.to_string());
    match a.action {
        KbAction::Init { kb } => {
            let (store, report) = KnowledgeBase::init(&kb).map_err(kb_err)?;
            println!("{}", to_json_line(&store.stats()));
            if !report.diagnostics.is_empty() {
                eprintln!("warning: skipped {} malformed lines", report.diagnostics.len());
            }
            Ok(())
        }
        KbAction::Verify { kb } => {
            let store = open_kb(Some(&kb))?;
            let mismatches = store.verify();
            let ok = mismatches.is_empty();
            println!("{}", to_json_line(&VerifyReport { ok, mismatches }));
            if ok {
                Ok(())
            } else {
                Err(CliError::data("knowledge base verification failed"))
            }
        }
        KbAction::Approve { kb, id, all } => {
            let mut store = open_kb(Some(&kb))?;
            let now = now_ms();
            let applied = if all {
                store.approve_all(now).map_err(kb_err)?
            } else {
                let id = id.expect("clap requires --id without --all");
                let outcome = store.apply_validated(&id, now).map_err(kb_err)?;
                vec![(id, outcome)]
            };
            for (id, outcome) in applied {
                println!("{id}\t{outcome:?}");
            }
            Ok(())
        }
        KbAction::Stats { kb } => {
            let store = open_kb(Some(&kb))?;
            println!("{}", to_json_line(&store.stats()));
            Ok(())
        }
    }
}

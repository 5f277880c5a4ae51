//! Evaluation harness: seeded noise, synthetic suites, comparison parsers,
//! metrics, and a resumable (method x noise) benchmark runner.

mod baselines;
mod metrics;
mod noise;
mod rss;
mod suite;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{direct_parse, drain_parse, DrainParser};
pub use metrics::{avg_rank, mean_rank, parsing_accuracy, rca_and_e2e, rca_and_e2e_labels, relation_rank, AvgRank, LengthMismatch};
pub use noise::{inject_noise, NoiseConfig, NoiseError, NoiseProfile, NoiseTables, NOISE_LEVELS};
pub use rss::{read_rss_kb, RssSampler};
pub use suite::{generate_suite, render_line, BenchmarkCase, Suite, SuiteConfig, SuiteIoError, SuiteVariant, MANIFEST_FILE};
pub use synthetic::{random_var_sem, simulate, structure_score, StructureScore, VarSem};

use crate::action::{diagnose, ActionConfig, DecisionPath, RcaReport};
use crate::model::{CountingClient, ModelClient};
use crate::perception::{parse_stream, MaskRuleSet, ParseOutput, RawLog, RouterConfig, TemplateCache};
use crate::reasoning::{discover, CausalGraph, ReasoningConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Three-tier router, prior-constrained reasoning.
    Nesy,
    /// Same router, every mask entry at the background penalty.
    NesyNoPriors,
    /// Prefix-tree parser, prior-constrained reasoning.
    Drain,
    /// Model parses every line, prior-constrained reasoning.
    Direct,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Nesy, Self::NesyNoPriors, Self::Drain, Self::Direct];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nesy => "nesy",
            Self::NesyNoPriors => "nesy_no_priors",
            Self::Drain => "drain",
            Self::Direct => "direct",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub noise_levels: Vec<f64>,
    pub seed: u64,
    pub memory_budget_mb: f64,
    pub sample_interval_ms: u64,
    /// Cells computed concurrently; 1 is the sequential reference mode.
    pub parallel_cells: usize,
    pub suite: SuiteConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Nesy, Method::NesyNoPriors],
            noise_levels: NOISE_LEVELS.to_vec(),
            seed: 42,
            memory_budget_mb: 2048.0,
            sample_interval_ms: 100,
            parallel_cells: 1,
            suite: SuiteConfig::default(),
        }
    }
}

/// Stage settings shared by every benchmark cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageConfig {
    pub router: RouterConfig,
    pub reasoning: ReasoningConfig,
    pub action: ActionConfig,
}

/// One (method, noise) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub method: Method,
    pub noise: f64,
    pub seed: u64,
    pub cases: usize,
    pub lines: usize,
    pub pa: f64,
    pub avg_rank: f64,
    pub rank_misses: usize,
    pub rca: f64,
    pub e2e: f64,
    /// Mean edge count per incident graph.
    pub sparsity: f64,
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub local_decisions: usize,
    pub degraded_reports: usize,
    pub model_calls: usize,
    pub avg_latency_ms: f64,
    pub peak_rss_mb: f64,
    #[serde(default)]
    pub config_hash: String,
}

impl MetricsReport {
    fn zeroed(dataset: &str, method: Method, noise: f64, seed: u64) -> Self {
        Self {
            dataset: dataset.into(),
            method,
            noise,
            seed,
            cases: 0,
            lines: 0,
            pa: 0.0,
            avg_rank: 0.0,
            rank_misses: 0,
            rca: 0.0,
            e2e: 0.0,
            sparsity: 0.0,
            l1: 0,
            l2: 0,
            l3: 0,
            local_decisions: 0,
            degraded_reports: 0,
            model_calls: 0,
            avg_latency_ms: 0.0,
            peak_rss_mb: 0.0,
            config_hash: String::new(),
        }
    }

    /// Metrics that are a pure function of suite, config and seed.
    pub fn deterministic_metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("cases", self.cases as f64),
            ("lines", self.lines as f64),
            ("pa", self.pa),
            ("avg_rank", self.avg_rank),
            ("rank_misses", self.rank_misses as f64),
            ("rca", self.rca),
            ("e2e", self.e2e),
            ("sparsity", self.sparsity),
            ("l1", self.l1 as f64),
            ("l2", self.l2 as f64),
            ("l3", self.l3 as f64),
            ("local_decisions", self.local_decisions as f64),
            ("degraded_reports", self.degraded_reports as f64),
            ("model_calls", self.model_calls as f64),
        ]
    }

    fn key(&self) -> (Method, u64) {
        (self.method, self.noise.to_bits())
    }
}

/// Everything produced for one incident inside a cell.
#[derive(Debug, Clone)]
pub struct IncidentOutcome {
    pub case_id: String,
    pub parse: ParseOutput,
    pub graph: CausalGraph,
    pub rank: usize,
    pub hit: bool,
    pub report: RcaReport,
    pub model_calls: usize,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error("peak RSS {peak_mb:.1} MB exceeded the {budget_mb:.1} MB budget")]
    BudgetExceeded { peak_mb: f64, budget_mb: f64, completed: Vec<MetricsReport> },
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    /// Completed cells in (method, noise) configuration order.
    pub reports: Vec<MetricsReport>,
    pub resumed_cells: usize,
    /// False when `stop_after` interrupted the run.
    pub complete: bool,
    pub peak_rss_mb: f64,
}

/// Parses, reasons and diagnoses one incident under `method`.
#[allow(clippy::too_many_arguments)]
pub fn run_incident(
    case: &BenchmarkCase,
    suite: &Suite,
    method: Method,
    noise: &NoiseConfig,
    stages: &StageConfig,
    cache: &mut TemplateCache,
    drain: &mut DrainParser,
    client: &dyn ModelClient,
) -> IncidentOutcome {
    let rules = MaskRuleSet::default();
    let logs: Vec<RawLog> = case
        .logs
        .iter()
        .map(|l| RawLog { line: inject_noise(&l.line, noise), ..l.clone() })
        .collect();
    let counter = CountingClient::new(client);
    let parse = match method {
        Method::Nesy | Method::NesyNoPriors => parse_stream(&logs, cache, &suite.kb, &counter, &rules, &stages.router),
        Method::Drain => drain_parse(&logs, drain, &rules),
        Method::Direct => direct_parse(&logs, &counter, &rules, &stages.router),
    };
    let use_priors = method != Method::NesyNoPriors;
    let graph = match discover(&parse.events, &suite.kb, &stages.reasoning, use_priors) {
        Ok((g, _)) => g,
        Err(e) => {
            log::warn!("{}: {e}", case.id);
            CausalGraph::default()
        }
    };
    let (rank, hit) = relation_rank(&graph, &case.root_relation.0, &case.root_relation.1);
    let report = diagnose(&graph, &suite.kb, &counter, &stages.action);
    IncidentOutcome { case_id: case.id.clone(), parse, graph, rank, hit, report, model_calls: counter.calls() }
}

/// Aligns parsed templates with log positions; failed lines predict "".
fn predictions(parse: &ParseOutput) -> Vec<&str> {
    let mut events = parse.events.iter();
    parse
        .stats
        .per_log
        .iter()
        .map(|r| if r.tier.is_some() { events.next().map_or("", |e| e.template_text.as_str()) } else { "" })
        .collect()
}

/// One (method, noise) cell over every case of the suite.
pub fn run_cell(
    suite: &Suite,
    method: Method,
    level: f64,
    bench: &BenchConfig,
    stages: &StageConfig,
    client: &dyn ModelClient,
    mut on_incident: impl FnMut(&IncidentOutcome) -> Result<(), EvalError>,
) -> Result<MetricsReport, EvalError> {
    let noise = NoiseConfig::new(level, bench.seed, suite.profile)?;
    let mut report = MetricsReport::zeroed(&suite.name, method, level, bench.seed);
    let mut cache = TemplateCache::new(stages.router.cache_capacity);
    let mut drain = DrainParser::default();
    let (mut pa_hits, mut latency_us) = (0usize, 0u64);
    let (mut ranks, mut labels, mut truths) = (Vec::new(), Vec::new(), Vec::new());
    let mut edges = 0usize;
    for case in &suite.cases {
        let out = run_incident(case, suite, method, &noise, stages, &mut cache, &mut drain, client);
        on_incident(&out)?;
        let preds = predictions(&out.parse);
        pa_hits += preds
            .iter()
            .zip(&case.truth_templates)
            .filter(|(p, t)| crate::text::norm(p) == crate::text::norm(t))
            .count();
        report.lines += case.logs.len();
        report.l1 += out.parse.stats.l1;
        report.l2 += out.parse.stats.l2;
        report.l3 += out.parse.stats.l3;
        latency_us += out.parse.stats.per_log.iter().map(|r| r.latency_us).sum::<u64>();
        ranks.push(out.rank);
        report.rank_misses += usize::from(!out.hit);
        edges += out.graph.edge_count();
        report.local_decisions += usize::from(out.report.decision_path == DecisionPath::Local);
        report.degraded_reports += usize::from(out.report.degraded);
        report.model_calls += out.model_calls;
        labels.push((out.report.root_cause.clone(), out.report.action.clone()));
        truths.push((case.root_cause_label.clone(), case.action.clone()));
    }
    report.cases = suite.cases.len();
    if report.cases > 0 {
        report.pa = if report.lines == 0 { 0.0 } else { pa_hits as f64 / report.lines as f64 };
        report.avg_rank = mean_rank(&ranks);
        report.sparsity = edges as f64 / report.cases as f64;
        let preds: Vec<(&str, &str)> = labels.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        (report.rca, report.e2e) = rca_and_e2e_labels(&preds, &truths).expect("one truth per case");
        report.avg_latency_ms = if report.lines == 0 { 0.0 } else { latency_us as f64 / report.lines as f64 / 1e3 };
    }
    Ok(report)
}

/// Rows from an earlier run with the same config hash, keyed by cell.
pub fn read_checkpoint(path: &Path, config_hash: &str) -> Result<BTreeMap<(Method, u64), MetricsReport>, EvalError> {
    let mut done = BTreeMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<MetricsReport>(&line) {
            Ok(r) if r.config_hash == config_hash => {
                done.insert(r.key(), r);
            }
            Ok(_) => {}
            // a torn final line from an interrupted write is expected
            Err(e) => log::warn!("{}", EvalError::Checkpoint { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(done)
}

fn append_checkpoint(path: &Path, report: &MetricsReport) -> Result<(), EvalError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(report).expect("report serializes"))?;
    f.sync_data()?;
    Ok(())
}

/// Runs every configured cell, skipping those already in `checkpoint`.
/// `stop_after` ends the run early after that many newly computed cells.
pub fn run_benchmark(
    suite: &Suite,
    bench: &BenchConfig,
    stages: &StageConfig,
    client: &dyn ModelClient,
    config_hash: &str,
    checkpoint: Option<&Path>,
    stop_after: Option<usize>,
) -> Result<BenchOutcome, EvalError> {
    let sampler = RssSampler::start(Duration::from_millis(bench.sample_interval_ms.max(1)));
    let done = match checkpoint {
        Some(p) => read_checkpoint(p, config_hash)?,
        None => BTreeMap::new(),
    };
    let cells: Vec<(Method, f64)> =
        bench.methods.iter().flat_map(|&m| bench.noise_levels.iter().map(move |&l| (m, l))).collect();
    let mut reports = Vec::new();
    let mut resumed = 0;
    let mut fresh = 0;
    let budget_check = |reports: &Vec<MetricsReport>| -> Result<(), EvalError> {
        let peak = sampler.peak_mb();
        if peak > bench.memory_budget_mb {
            return Err(EvalError::BudgetExceeded { peak_mb: peak, budget_mb: bench.memory_budget_mb, completed: reports.clone() });
        }
        Ok(())
    };

    let mut pending: Vec<(Method, f64)> = Vec::new();
    for &(m, l) in &cells {
        if let Some(r) = done.get(&(m, l.to_bits())) {
            reports.push(r.clone());
            resumed += 1;
        } else {
            pending.push((m, l));
        }
    }
    if let Some(limit) = stop_after {
        pending.truncate(limit);
    }
    let threads = bench.parallel_cells.max(1);
    for chunk in pending.chunks(threads) {
        let results: Vec<Result<MetricsReport, EvalError>> = if threads == 1 {
            chunk
                .iter()
                .map(|&(m, l)| run_cell(suite, m, l, bench, stages, client, |_| budget_check(&reports)))
                .collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&(m, l)| s.spawn(move || run_cell(suite, m, l, bench, stages, client, |_| Ok(()))))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("cell thread")).collect()
            })
        };
        for r in results {
            let mut r = r?;
            r.peak_rss_mb = sampler.peak_mb();
            r.config_hash = config_hash.to_string();
            if let Some(p) = checkpoint {
                append_checkpoint(p, &r)?;
            }
            reports.push(r);
            fresh += 1;
        }
        budget_check(&reports)?;
    }
    let complete = resumed + fresh == cells.len();
    // configuration order, independent of which cells were resumed
    let order: BTreeMap<(Method, u64), usize> = cells.iter().enumerate().map(|(i, &(m, l))| ((m, l.to_bits()), i)).collect();
    reports.sort_by_key(|r| order.get(&r.key()).copied().unwrap_or(usize::MAX));
    Ok(BenchOutcome { reports, resumed_cells: resumed, complete, peak_rss_mb: sampler.finish() })
}

/// Long-format CSV of the deterministic metrics.
pub fn write_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "method", "noise", "metric", "value", "seed", "config_hash"])?;
    for r in reports {
        for (metric, value) in r.deterministic_metrics() {
            w.write_record([
                r.dataset.as_str(),
                r.method.as_str(),
                &format!("{:.1}", r.noise),
                metric,
                &value.to_string(),
                &r.seed.to_string(),
                &r.config_hash,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    dataset: &'a str,
    method: Method,
    noise: f64,
    metric: &'a str,
    value: f64,
    seed: u64,
    config_hash: &'a str,
}

/// Long-format JSONL of every metric, including latency and peak RSS.
pub fn write_jsonl<W: Write>(reports: &[MetricsReport], mut out: W) -> std::io::Result<()> {
    for r in reports {
        let mut metrics = r.deterministic_metrics();
        metrics.push(("avg_latency_ms", r.avg_latency_ms));
        metrics.push(("peak_rss_mb", r.peak_rss_mb));
        for (metric, value) in metrics {
            let row = JsonRow { dataset: &r.dataset, method: r.method, noise: r.noise, metric, value, seed: r.seed, config_hash: &r.config_hash };
            writeln!(out, "{}", serde_json::to_string(&row).expect("row serializes"))?;
        }
    }
    Ok(())
}

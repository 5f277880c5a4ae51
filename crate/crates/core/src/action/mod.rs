//! Action: causal evidence from the graph, case retrieval, a local decision
//! when the evidence is unambiguous, model synthesis otherwise.

mod navigator;
mod synthesis;

use serde::{Deserialize, Serialize};

pub use navigator::{navigate, Candidate, CausalEvidence, EvidencePath, NavigatorConfig, Relation};
pub use synthesis::{parse_answer, synthesis_request, synthesize, SynthesisAnswer, Transcript, FALLBACK_ACTION};

use crate::kb::{CaseMatch, KbError, KnowledgeBase, PendingEntry};
use crate::model::ModelClient;
use crate::reasoning::CausalGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub min_similarity: f64,
    /// The runner-up case must sit at or below this fraction of the best.
    pub margin: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { min_similarity: 0.90, margin: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionConfig {
    pub navigator: NavigatorConfig,
    pub top_n_cases: usize,
    pub matching: MatchConfig,
    pub max_tokens: u32,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self { navigator: NavigatorConfig::default(), top_n_cases: 3, matching: MatchConfig::default(), max_tokens: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    Local,
    Synthesized,
}

/// Values of the three bypass conditions at decision time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCertificate {
    pub top_similarity: f64,
    pub second_similarity: Option<f64>,
    pub margin_limit: f64,
    pub candidate: String,
    pub mapped_cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaReport {
    pub root_cause: String,
    pub root_cause_template: Option<String>,
    pub action: String,
    pub decision_path: DecisionPath,
    pub evidence_digest: CausalEvidence,
    pub cases_used: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Transcript>,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<MatchCertificate>,
    pub validated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Text the case index is queried with: candidate-root labels, then the
/// labels of path events not already named.
pub fn evidence_query(ev: &CausalEvidence, graph: &CausalGraph) -> String {
    let mut parts: Vec<&str> = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    for c in &ev.candidate_roots {
        seen.push(&c.template_id);
        parts.push(&c.label);
    }
    for p in &ev.key_paths {
        for id in &p.nodes {
            if !seen.contains(&id.as_str()) {
                seen.push(id);
                parts.push(graph.label(id));
            }
        }
    }
    parts.join(" ")
}

pub fn retrieve_cases(query: &str, kb: &KnowledgeBase, top_n: usize) -> Vec<CaseMatch> {
    match kb.embedder().embed(query) {
        Ok(q) => kb.search_cases(&q, top_n),
        Err(_) => Vec::new(),
    }
}

fn same_label(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// A local report when the top case is close, maps to the top candidate,
/// and clearly beats the runner-up.
pub fn deterministic_match(
    ev: &CausalEvidence,
    cases: &[CaseMatch],
    kb: &KnowledgeBase,
    cfg: &MatchConfig,
) -> Option<RcaReport> {
    let top = cases.first()?;
    let candidate = ev.candidate_roots.first()?;
    if top.similarity < cfg.min_similarity {
        return None;
    }
    let mapped = kb.cause_for(&candidate.template_id)?;
    if !same_label(mapped, &top.root_cause_label) {
        return None;
    }
    let second = cases.get(1).map(|c| c.similarity);
    if second.is_some_and(|s| s > cfg.margin * top.similarity) {
        return None;
    }
    Some(RcaReport {
        root_cause: top.root_cause_label.clone(),
        root_cause_template: Some(candidate.template_id.clone()),
        action: top.repair_action.clone(),
        decision_path: DecisionPath::Local,
        evidence_digest: ev.clone(),
        cases_used: vec![top.case_id.clone()],
        transcript: None,
        degraded: false,
        certificate: Some(MatchCertificate {
            top_similarity: top.similarity,
            second_similarity: second,
            margin_limit: cfg.margin * top.similarity,
            candidate: candidate.template_id.clone(),
            mapped_cause: mapped.to_string(),
        }),
        validated: false,
        diagnostics: Vec::new(),
        config_hash: None,
    })
}

/// Navigate, retrieve, decide locally if possible, otherwise synthesize.
pub fn diagnose(graph: &CausalGraph, kb: &KnowledgeBase, client: &dyn ModelClient, cfg: &ActionConfig) -> RcaReport {
    let ev = navigate(graph, &cfg.navigator);
    let query = evidence_query(&ev, graph);
    let cases = retrieve_cases(&query, kb, cfg.top_n_cases);
    let mut report = match deterministic_match(&ev, &cases, kb, &cfg.matching) {
        Some(r) => r,
        None => synthesize(&ev, &cases, kb, client, cfg.max_tokens),
    };
    if ev.candidate_roots.is_empty() {
        report.diagnostics.push("empty graph: retrieval-only context".into());
    }
    if cases.is_empty() {
        report.diagnostics.push("no matching cases".into());
    }
    report
}

/// Queues a validated report as a new case. Unvalidated reports are ignored.
pub fn write_back(kb: &mut KnowledgeBase, report: &RcaReport, graph: &CausalGraph) -> Result<Option<String>, KbError> {
    if !report.validated {
        return Ok(None);
    }
    let entry = PendingEntry::Case {
        indexed_text: evidence_query(&report.evidence_digest, graph),
        root_cause_label: report.root_cause.clone(),
        repair_action: report.action.clone(),
        template_refs: report.root_cause_template.iter().cloned().collect(),
    };
    kb.enqueue_validation(entry).map(Some)
}

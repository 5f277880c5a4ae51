use serde::{Deserialize, Serialize};

use super::navigator::CausalEvidence;
use super::{DecisionPath, RcaReport};
use crate::kb::{CaseMatch, KnowledgeBase};
use crate::model::{ChatMessage, ModelClient, ModelRequest, Purpose};

const SYNTHESIS_PROMPT: &str = include_str!("../../assets/prompts/synthesis_v1.txt");
pub const PROMPT_VERSION: &str = "synthesis_v1";
pub const FALLBACK_ACTION: &str = "escalate to operator";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub prompt_version: String,
    pub request_hashes: Vec<String>,
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SynthesisAnswer {
    pub root_cause_template: String,
    pub action: String,
}

/// The model's JSON object, possibly wrapped in prose or a code fence.
pub fn parse_answer(text: &str) -> Option<SynthesisAnswer> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    let ans: SynthesisAnswer = serde_json::from_str(text.get(start..=end)?).ok()?;
    (!ans.root_cause_template.trim().is_empty() && !ans.action.trim().is_empty()).then_some(ans)
}

pub fn synthesis_request(ev: &CausalEvidence, cases: &[CaseMatch], max_tokens: u32, correction: Option<&str>) -> ModelRequest {
    let mut user = format!(
        "EVIDENCE_JSON: {}\nCASES_JSON: {}\n",
        serde_json::to_string(ev).expect("evidence serializes"),
        serde_json::to_string(cases).expect("cases serialize"),
    );
    if let Some(note) = correction {
        user.push_str(note);
        user.push('\n');
    }
    ModelRequest::new(
        Purpose::Synthesis,
        vec![ChatMessage::system(SYNTHESIS_PROMPT), ChatMessage::user(user)],
        0.0,
        max_tokens,
    )
    .expect("synthesis prompt is non-empty")
}

fn cause_text(kb: &KnowledgeBase, ev: &CausalEvidence, template_id: &str) -> String {
    kb.cause_for(template_id)
        .map(str::to_owned)
        .or_else(|| ev.candidate_roots.iter().find(|c| c.template_id == template_id).map(|c| c.label.clone()))
        .unwrap_or_else(|| template_id.to_string())
}

/// Asks the model for a grounded (root, action). An answer naming a root
/// outside the candidates is retried once; after that, or on any client or
/// parse failure, the top candidate and top case action are used instead.
pub fn synthesize(
    ev: &CausalEvidence,
    cases: &[CaseMatch],
    kb: &KnowledgeBase,
    client: &dyn ModelClient,
    max_tokens: u32,
) -> RcaReport {
    let mut transcript =
        Transcript { prompt_version: PROMPT_VERSION.into(), request_hashes: Vec::new(), responses: Vec::new(), errors: Vec::new() };
    let allowed: Vec<&str> = ev.candidate_roots.iter().map(|c| c.template_id.as_str()).collect();
    let correction = format!(
        "Your previous answer named a root cause outside candidate_roots. Choose one of: {}",
        allowed.join(", ")
    );
    let mut accepted = None;
    for attempt in 0..2 {
        let req = synthesis_request(ev, cases, max_tokens, (attempt > 0).then_some(correction.as_str()));
        transcript.request_hashes.push(req.hash());
        let text = match client.complete(&req) {
            Ok(resp) => resp.text,
            Err(e) => {
                transcript.errors.push(e.to_string());
                break;
            }
        };
        transcript.responses.push(text.clone());
        match parse_answer(&text) {
            Some(ans) if ev.is_candidate(&ans.root_cause_template) => {
                accepted = Some(ans);
                break;
            }
            Some(ans) => transcript.errors.push(format!("root {} is not a candidate", ans.root_cause_template)),
            None => {
                transcript.errors.push("unparseable response".into());
                break;
            }
        }
    }

    let cases_used: Vec<String> = cases.iter().map(|c| c.case_id.clone()).collect();
    let (root_cause, root_cause_template, action, degraded) = match accepted {
        Some(ans) => (cause_text(kb, ev, &ans.root_cause_template), Some(ans.root_cause_template), ans.action, false),
        None => {
            let action = cases.first().map(|c| c.repair_action.clone()).unwrap_or_else(|| FALLBACK_ACTION.into());
            match ev.candidate_roots.first() {
                Some(c) => (cause_text(kb, ev, &c.template_id), Some(c.template_id.clone()), action, true),
                None => {
                    let cause = cases.first().map(|c| c.root_cause_label.clone()).unwrap_or_else(|| "unknown".into());
                    (cause, None, action, true)
                }
            }
        }
    };
    RcaReport {
        root_cause,
        root_cause_template,
        action,
        decision_path: DecisionPath::Synthesized,
        evidence_digest: ev.clone(),
        cases_used,
        transcript: Some(transcript),
        degraded,
        certificate: None,
        validated: false,
        diagnostics: Vec::new(),
        config_hash: None,
    }
}

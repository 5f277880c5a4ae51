use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{preprocess, remask, EventTemplate, MaskRuleSet, ProcessedLog, RawLog, StructuredEvent, TemplateCache, Tier};
use crate::kb::KnowledgeBase;
use crate::model::{ChatMessage, ModelClient, ModelRequest, Purpose};
use crate::text::norm;

pub const DEFAULT_DELTA_SIM: f64 = 0.85;

const PARSE_PROMPT: &str = include_str!("../../assets/prompts/parse_v1.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouterConfig {
    pub delta_sim: f64,
    /// Also insert L2 hits into the L1 cache.
    pub cache_l2_hits: bool,
    pub cache_capacity: usize,
    pub parse_temperature: f64,
    pub max_tokens: u32,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            delta_sim: DEFAULT_DELTA_SIM,
            cache_l2_hits: true,
            cache_capacity: super::DEFAULT_CAPACITY,
            parse_temperature: 0.0,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRoute {
    pub seq: u64,
    pub tier: Option<Tier>,
    pub latency_us: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteStats {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    /// L2 hits copied into the cache.
    pub l2_cached: usize,
    pub degraded: usize,
    pub timestamp_warnings: usize,
    pub errors: usize,
    pub per_log: Vec<LogRoute>,
}

impl RouteStats {
    pub fn tiers(&self) -> Vec<Option<Tier>> {
        self.per_log.iter().map(|r| r.tier).collect()
    }

    pub fn mean_latency_ms(&self) -> f64 {
        if self.per_log.is_empty() {
            return 0.0;
        }
        self.per_log.iter().map(|r| r.latency_us as f64).sum::<f64>() / self.per_log.len() as f64 / 1e3
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub events: Vec<StructuredEvent>,
    pub stats: RouteStats,
    /// Fallback templates awaiting knowledge-base validation, first-seen order.
    pub to_validate: Vec<EventTemplate>,
}

pub fn exact_match(p: &ProcessedLog, cache: &mut TemplateCache) -> Option<EventTemplate> {
    cache.get(&p.normalized_text)
}

/// Nearest validated knowledge-base template if its cosine reaches `delta_sim`.
pub fn semantic_match(p: &ProcessedLog, kb: &KnowledgeBase, delta_sim: f64) -> Option<EventTemplate> {
    if !kb.has_templates() {
        return None;
    }
    let query = kb.embedder().embed(&p.normalized_text).ok()?;
    let (entry, sim) = kb.nearest_template(&query)?;
    (sim >= delta_sim).then(|| EventTemplate {
        template_id: entry.template_id.clone(),
        text: entry.text.clone(),
        origin: Tier::L2,
        validated: true,
        degraded: false,
    })
}

/// The fallback request for one processed log.
pub fn parse_prompt(p: &ProcessedLog, temperature: f64, max_tokens: u32) -> ModelRequest {
    ModelRequest::new(
        Purpose::L3Parse,
        vec![ChatMessage::system(PARSE_PROMPT), ChatMessage::user(p.normalized_text.clone())],
        temperature,
        max_tokens,
    )
    .expect("parse prompt is non-empty")
}

fn extract_template_line(response: &str) -> Option<&str> {
    response
        .lines()
        .map(|l| l.trim().trim_start_matches("->").trim().trim_matches(|c| c == '`' || c == '"'))
        .find(|l| !l.is_empty())
}

/// Asks the model to abstract a template, then canonicalizes its answer.
/// Any failure degrades to the processed text itself.
pub fn fallback_generate(
    p: &ProcessedLog,
    client: &dyn ModelClient,
    rules: &MaskRuleSet,
    cfg: &RouterConfig,
) -> EventTemplate {
    let req = parse_prompt(p, cfg.parse_temperature, cfg.max_tokens);
    let generated = match client.complete(&req) {
        Ok(resp) => extract_template_line(&resp.text).map(|l| remask(l, rules)).filter(|t| !t.is_empty()),
        Err(e) => {
            log::debug!("fallback model unavailable: {e}");
            None
        }
    };
    match generated {
        Some(text) => EventTemplate::new(&text, Tier::L3),
        None => EventTemplate { degraded: true, ..EventTemplate::new(&norm(&p.normalized_text), Tier::L3) },
    }
}

/// Routes every log through L1, then L2, then L3, in stream order.
pub fn parse_stream(
    logs: &[RawLog],
    cache: &mut TemplateCache,
    kb: &KnowledgeBase,
    client: &dyn ModelClient,
    rules: &MaskRuleSet,
    cfg: &RouterConfig,
) -> ParseOutput {
    let mut out = ParseOutput::default();
    let mut last_ts: i64 = 0;
    for log in logs {
        let started = Instant::now();
        let processed = match preprocess(&log.line, rules, last_ts + 1) {
            Ok(p) => p,
            Err(e) => {
                out.stats.errors += 1;
                out.stats.per_log.push(LogRoute { seq: log.seq, tier: None, latency_us: 0, note: Some(e.to_string()) });
                continue;
            }
        };
        let mut note = None;
        if processed.timestamp_warning {
            out.stats.timestamp_warnings += 1;
            note = Some("unparsable timestamp; arrival time used".to_string());
        }
        last_ts = processed.timestamp_ms;

        let (tier, template) = if let Some(t) = exact_match(&processed, cache) {
            out.stats.l1 += 1;
            (Tier::L1, t)
        } else if let Some(t) = semantic_match(&processed, kb, cfg.delta_sim) {
            out.stats.l2 += 1;
            if cfg.cache_l2_hits {
                cache.insert(&processed.normalized_text, t.clone());
                out.stats.l2_cached += 1;
            }
            (Tier::L2, t)
        } else {
            let t = fallback_generate(&processed, client, rules, cfg);
            out.stats.l3 += 1;
            if t.degraded {
                out.stats.degraded += 1;
            } else if !out.to_validate.iter().any(|v| v.template_id == t.template_id) {
                out.to_validate.push(t.clone());
            }
            cache.insert(&processed.normalized_text, t.clone());
            (Tier::L3, t)
        };
        out.events.push(StructuredEvent {
            template_id: template.template_id,
            template_text: template.text,
            timestamp_ms: processed.timestamp_ms,
            source_id: log.source_id.clone(),
            tier,
        });
        out.stats.per_log.push(LogRoute {
            seq: log.seq,
            tier: Some(tier),
            latency_us: started.elapsed().as_micros() as u64,
            note,
        });
    }
    out
}

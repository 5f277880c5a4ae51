//! Perception: raw log lines to structured events through a three-tier router
//! (exact cache, semantic retrieval, model fallback).

mod cache;
mod masking;
mod router;

use serde::{Deserialize, Serialize};

use crate::text::{norm, template_id};

pub use cache::{TemplateCache, DEFAULT_CAPACITY};
pub use masking::{
    default_mask_rules, default_timestamp_specs, preprocess, remask, MaskError, MaskRuleSet, MaskRuleSpec,
    Placeholder, ProcessedLog, TimestampSpec,
};
pub use router::{
    exact_match, fallback_generate, parse_prompt, parse_stream, semantic_match, LogRoute, ParseOutput, RouteStats,
    RouterConfig, DEFAULT_DELTA_SIM,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLog {
    pub line: String,
    pub source_id: String,
    pub seq: u64,
}

impl RawLog {
    pub fn new(line: impl Into<String>, source_id: impl Into<String>, seq: u64) -> Self {
        Self { line: line.into(), source_id: source_id.into(), seq }
    }

    /// Numbers the lines of a text blob, skipping blank ones.
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>, source_id: &str) -> Vec<RawLog> {
        lines
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| RawLog::new(l, source_id, i as u64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    L1,
    L2,
    L3,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTemplate {
    pub template_id: String,
    pub text: String,
    pub origin: Tier,
    pub validated: bool,
    #[serde(default)]
    pub degraded: bool,
}

impl EventTemplate {
    /// Canonicalizes `text` and derives its id.
    pub fn new(text: &str, origin: Tier) -> Self {
        let text = norm(text);
        Self { template_id: template_id(&text), text, origin, validated: false, degraded: false }
    }
}

/// One parsed log line, in the line-delimited output shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredEvent {
    pub template_id: String,
    pub template_text: String,
    pub timestamp_ms: i64,
    pub source_id: String,
    pub tier: Tier,
}

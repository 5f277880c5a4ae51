//! Comparison parsers: a fixed-depth prefix-tree clusterer and a route that
//! sends every line to the model.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::model::ModelClient;
use crate::perception::{
    fallback_generate, preprocess, LogRoute, MaskRuleSet, ParseOutput, RawLog, RouterConfig, StructuredEvent, Tier,
};
use crate::text::{template_id, PLACEHOLDER};

#[derive(Debug, Default)]
struct Node {
    children: BTreeMap<String, Node>,
    clusters: Vec<Vec<String>>,
}

/// Drain-style online clusterer over masked text.
#[derive(Debug)]
pub struct DrainParser {
    depth: usize,
    sim_threshold: f64,
    max_children: usize,
    by_length: BTreeMap<usize, Node>,
}

impl Default for DrainParser {
    fn default() -> Self {
        Self::new(4, 0.5, 100)
    }
}

impl DrainParser {
    /// `depth` counts the length layer and the leaf, as in the original layout.
    pub fn new(depth: usize, sim_threshold: f64, max_children: usize) -> Self {
        Self { depth: depth.max(3), sim_threshold, max_children, by_length: BTreeMap::new() }
    }

    fn similarity(cluster: &[String], tokens: &[String]) -> (f64, usize) {
        let mut same = 0;
        let mut params = 0;
        for (c, t) in cluster.iter().zip(tokens) {
            if c == PLACEHOLDER {
                params += 1;
            } else if c == t {
                same += 1;
            }
        }
        (same as f64 / tokens.len().max(1) as f64, params)
    }

    /// Template for `text`, creating or generalizing a cluster.
    pub fn parse(&mut self, text: &str) -> String {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
        let prefix_len = (self.depth - 2).min(tokens.len());
        let max_children = self.max_children;
        let mut node = self.by_length.entry(tokens.len()).or_default();
        for tok in &tokens[..prefix_len] {
            let key = if tok.chars().any(|c| c.is_ascii_digit()) { PLACEHOLDER.to_string() } else { tok.clone() };
            let key = if node.children.contains_key(&key) || node.children.len() < max_children {
                key
            } else {
                PLACEHOLDER.to_string()
            };
            node = node.children.entry(key).or_default();
        }
        let mut best: Option<(usize, f64, usize)> = None;
        for (i, c) in node.clusters.iter().enumerate() {
            let (sim, params) = Self::similarity(c, &tokens);
            if best.is_none_or(|(_, bs, bp)| sim > bs || (sim == bs && params > bp)) {
                best = Some((i, sim, params));
            }
        }
        match best {
            Some((i, sim, _)) if sim >= self.sim_threshold => {
                let cluster = &mut node.clusters[i];
                for (c, t) in cluster.iter_mut().zip(&tokens) {
                    if c != t {
                        *c = PLACEHOLDER.to_string();
                    }
                }
                cluster.join(" ")
            }
            _ => {
                node.clusters.push(tokens.clone());
                tokens.join(" ")
            }
        }
    }
}

fn push_event(out: &mut ParseOutput, log: &RawLog, text: String, ts: i64, tier: Tier, started: Instant) {
    out.events.push(StructuredEvent {
        template_id: template_id(&text),
        template_text: text,
        timestamp_ms: ts,
        source_id: log.source_id.clone(),
        tier,
    });
    out.stats.per_log.push(LogRoute { seq: log.seq, tier: Some(tier), latency_us: started.elapsed().as_micros() as u64, note: None });
}

/// Same masking as the router, then prefix-tree clustering. Events report `L1`.
pub fn drain_parse(logs: &[RawLog], drain: &mut DrainParser, rules: &MaskRuleSet) -> ParseOutput {
    let mut out = ParseOutput::default();
    let mut last_ts = 0;
    for log in logs {
        let started = Instant::now();
        let Ok(p) = preprocess(&log.line, rules, last_ts + 1) else {
            out.stats.errors += 1;
            out.stats.per_log.push(LogRoute { seq: log.seq, tier: None, latency_us: 0, note: Some("empty line".into()) });
            continue;
        };
        last_ts = p.timestamp_ms;
        let text = drain.parse(&p.normalized_text);
        out.stats.l1 += 1;
        push_event(&mut out, log, crate::text::norm(&text), p.timestamp_ms, Tier::L1, started);
    }
    out
}

/// Every line goes to the model, with no cache and no retrieval. Events report `L3`.
pub fn direct_parse(logs: &[RawLog], client: &dyn ModelClient, rules: &MaskRuleSet, cfg: &RouterConfig) -> ParseOutput {
    let mut out = ParseOutput::default();
    let mut last_ts = 0;
    for log in logs {
        let started = Instant::now();
        let Ok(p) = preprocess(&log.line, rules, last_ts + 1) else {
            out.stats.errors += 1;
            out.stats.per_log.push(LogRoute { seq: log.seq, tier: None, latency_us: 0, note: Some("empty line".into()) });
            continue;
        };
        last_ts = p.timestamp_ms;
        let t = fallback_generate(&p, client, rules, cfg);
        out.stats.l3 += 1;
        out.stats.degraded += usize::from(t.degraded);
        push_event(&mut out, log, t.text, p.timestamp_ms, Tier::L3, started);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CountingClient, MockClient};

    #[test]
    fn drain_generalizes_differing_positions() {
        let mut d = DrainParser::default();
        assert_eq!(d.parse("open file alpha now"), "open file alpha now");
        assert_eq!(d.parse("open file beta now"), "open file <*> now");
        assert_eq!(d.parse("close socket x"), "close socket x");
    }

    #[test]
    fn drain_keeps_dissimilar_lines_apart() {
        let mut d = DrainParser::default();
        d.parse("worker started job quickly");
        assert_eq!(d.parse("worker failed disk badly"), "worker failed disk badly");
    }

    #[test]
    fn direct_route_calls_once_per_line() {
        let client = CountingClient::new(MockClient::default());
        let logs = RawLog::from_lines(["a 1", "a 2", "a 3"], "s");
        let out = direct_parse(&logs, &client, &MaskRuleSet::default(), &RouterConfig::default());
        assert_eq!(client.calls(), 3);
        assert!(out.events.iter().all(|e| e.template_text == "a <*>"));
    }
}

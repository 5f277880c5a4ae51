//! Dynamic-field masking and timestamp extraction.

use chrono::NaiveDateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{norm, placeholder_variants, PLACEHOLDER};

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask rule set is empty")]
    EmptyRules,
    #[error("invalid pattern for rule `{kind}`: {source}")]
    BadPattern {
        kind: String,
        #[source]
        source: regex::Error,
    },
    #[error("raw log line is empty")]
    EmptyLine,
}

/// Serializable description of one masking rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRuleSpec {
    pub kind: String,
    pub pattern: String,
    /// Only mask matches that contain at least one ASCII digit.
    #[serde(default)]
    pub require_digit: bool,
}

/// Timestamp recognizer: a regex locating the field plus a chrono format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimestampSpec {
    pub pattern: String,
    pub format: String,
}

pub fn default_timestamp_specs() -> Vec<TimestampSpec> {
    vec![
        // HDFS: 081109 203518
        TimestampSpec {
            pattern: r"\b\d{6} \d{6}\b".into(),
            format: "%y%m%d %H%M%S".into(),
        },
        // OpenStack: 2017-05-16 00:00:00.008
        TimestampSpec {
            pattern: r"\b\d{4}-\d{2}-\d{2}[ T]\d{2}:\d{2}:\d{2}\.\d{1,6}\b".into(),
            format: "%Y-%m-%d %H:%M:%S%.f".into(),
        },
        // Hadoop: 2015-10-18 18:01:47,978
        TimestampSpec {
            pattern: r"\b\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2},\d{3}\b".into(),
            format: "%Y-%m-%d %H:%M:%S,%3f".into(),
        },
        TimestampSpec {
            pattern: r"\b\d{4}-\d{2}-\d{2}[ T]\d{2}:\d{2}:\d{2}\b".into(),
            format: "%Y-%m-%d %H:%M:%S".into(),
        },
    ]
}

/// Field rules applied after timestamps, in this order.
pub fn default_mask_rules() -> Vec<MaskRuleSpec> {
    let rule = |kind: &str, pattern: &str, require_digit: bool| MaskRuleSpec {
        kind: kind.into(),
        pattern: pattern.into(),
        require_digit,
    };
    vec![
        rule("ipv4", r"/?\b(?:\d{1,3}\.){3}\d{1,3}(?::\d{1,5})?\b", false),
        rule("ipv6", r"\b(?:[0-9a-fA-F]{1,4}:){7}[0-9a-fA-F]{1,4}\b", false),
        rule("block_id", r"\bblk_-?\d+\b", false),
        rule("hex_id", r"\b(?:0[xX][0-9a-fA-F]+|[0-9a-fA-F]{8,})\b", true),
        rule("path", r"(?:\b[A-Za-z]:)?(?:/[\w.\-]+){2,}/?", false),
        rule("number", r"(?:\B-)?\b\d+(?:\.\d+)?\b", false),
    ]
}

#[derive(Debug)]
struct CompiledRule {
    kind: String,
    regex: Regex,
    require_digit: bool,
}

#[derive(Debug)]
struct CompiledTimestamp {
    regex: Regex,
    format: String,
}

/// Ordered, compiled masking rules.
#[derive(Debug)]
pub struct MaskRuleSet {
    timestamps: Vec<CompiledTimestamp>,
    rules: Vec<CompiledRule>,
}

impl Default for MaskRuleSet {
    fn default() -> Self {
        Self::new(&default_timestamp_specs(), &default_mask_rules()).expect("default rules compile")
    }
}

impl MaskRuleSet {
    pub fn new(timestamps: &[TimestampSpec], rules: &[MaskRuleSpec]) -> Result<Self, MaskError> {
        if timestamps.is_empty() && rules.is_empty() {
            return Err(MaskError::EmptyRules);
        }
        let timestamps = timestamps
            .iter()
            .map(|t| {
                Regex::new(&t.pattern)
                    .map(|regex| CompiledTimestamp { regex, format: t.format.clone() })
                    .map_err(|source| MaskError::BadPattern { kind: "timestamp".into(), source })
            })
            .collect::<Result<_, _>>()?;
        let rules = rules
            .iter()
            .map(|r| {
                Regex::new(&r.pattern)
                    .map(|regex| CompiledRule {
                        kind: r.kind.clone(),
                        regex,
                        require_digit: r.require_digit,
                    })
                    .map_err(|source| MaskError::BadPattern { kind: r.kind.clone(), source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { timestamps, rules })
    }

    /// True if any raw-field pattern (timestamps included) matches `text`.
    pub fn matches_any(&self, text: &str) -> bool {
        self.timestamps.iter().any(|t| t.regex.is_match(text))
            || self.rules.iter().any(|r| {
                r.regex
                    .find_iter(text)
                    .any(|m| !r.require_digit || m.as_str().bytes().any(|b| b.is_ascii_digit()))
            })
    }
}

/// One replaced dynamic field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placeholder {
    pub kind: String,
    pub original: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedLog {
    pub normalized_text: String,
    pub timestamp_ms: i64,
    pub placeholders: Vec<Placeholder>,
    /// False when the timestamp came from the arrival-time fallback.
    pub timestamp_extracted: bool,
    /// A timestamp-shaped field was found but could not be parsed.
    pub timestamp_warning: bool,
}

// Private-use code points that no rule pattern can match.
const MARK_OPEN: char = '\u{E000}';
const MARK_CLOSE: char = '\u{E001}';
const MARK_DIGIT0: u32 = 0xE010;

fn marker(index: usize) -> String {
    let mut s = String::new();
    s.push(MARK_OPEN);
    for d in index.to_string().bytes() {
        s.push(char::from_u32(MARK_DIGIT0 + u32::from(d - b'0')).unwrap());
    }
    s.push(MARK_CLOSE);
    s
}

struct Masker {
    text: String,
    slots: Vec<Placeholder>,
}

impl Masker {
    fn apply(&mut self, kind: &str, regex: &Regex, require_digit: bool) {
        if !regex.is_match(&self.text) {
            return;
        }
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for m in regex.find_iter(&self.text) {
            if require_digit && !m.as_str().bytes().any(|b| b.is_ascii_digit()) {
                continue;
            }
            out.push_str(&self.text[last..m.start()]);
            out.push_str(&marker(self.slots.len()));
            self.slots.push(Placeholder { kind: kind.to_string(), original: m.as_str().to_string() });
            last = m.end();
        }
        out.push_str(&self.text[last..]);
        self.text = out;
    }

    /// Replaces markers with `<*>` and returns placeholders in text order.
    fn finish(self) -> (String, Vec<Placeholder>) {
        let mut out = String::with_capacity(self.text.len());
        let mut order = Vec::new();
        let mut chars = self.text.chars();
        while let Some(c) = chars.next() {
            if c != MARK_OPEN {
                out.push(c);
                continue;
            }
            let mut idx = 0usize;
            for d in chars.by_ref() {
                if d == MARK_CLOSE {
                    break;
                }
                idx = idx * 10 + (d as u32 - MARK_DIGIT0) as usize;
            }
            out.push_str(PLACEHOLDER);
            order.push(idx);
        }
        let mut slots: Vec<Option<Placeholder>> = self.slots.into_iter().map(Some).collect();
        let placeholders = order.into_iter().filter_map(|i| slots[i].take()).collect();
        (out, placeholders)
    }
}

fn parse_timestamp(raw: &str, format: &str) -> Option<i64> {
    let cleaned = raw.replacen('T', " ", 1);
    NaiveDateTime::parse_from_str(&cleaned, format)
        .ok()
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Masks dynamic fields of `line` and extracts its timestamp.
///
/// A timestamp at the very start of the line is a header: it is stripped and
/// kept only as `timestamp_ms`. Timestamps elsewhere become placeholders. A
/// line that is nothing but a timestamp normalizes to `<*>`. Lines without a
/// parseable timestamp get `fallback_ms`.
pub fn preprocess(line: &str, rules: &MaskRuleSet, fallback_ms: i64) -> Result<ProcessedLog, MaskError> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Err(MaskError::EmptyLine);
    }
    let mut masker = Masker { text: trimmed.to_string(), slots: Vec::new() };
    let mut timestamp = None;
    let mut warning = false;
    masker.apply("literal", placeholder_variants(), false);

    for ts in &rules.timestamps {
        let Some(m) = ts.regex.find(&masker.text) else { continue };
        let raw = m.as_str().to_string();
        match parse_timestamp(&raw, &ts.format) {
            Some(ms) if timestamp.is_none() => timestamp = Some(ms),
            Some(_) => {}
            None => warning = true,
        }
        if m.start() == 0 && masker.text[m.end()..].trim().is_empty() {
            masker.text = marker(masker.slots.len());
            masker.slots.push(Placeholder { kind: "timestamp".into(), original: raw });
        } else if m.start() == 0 {
            masker.text = masker.text[m.end()..].to_string();
            // any further timestamps are masked as fields
            masker.apply("timestamp", &ts.regex, false);
        } else {
            masker.apply("timestamp", &ts.regex, false);
        }
    }
    if timestamp.is_some() {
        warning = false;
    }
    for rule in &rules.rules {
        masker.apply(&rule.kind, &rule.regex, rule.require_digit);
    }
    let (text, placeholders) = masker.finish();
    Ok(ProcessedLog {
        normalized_text: norm(&text),
        timestamp_ms: timestamp.unwrap_or(fallback_ms),
        placeholders,
        timestamp_extracted: timestamp.is_some(),
        timestamp_warning: warning,
    })
}

/// Re-applies the field rules to arbitrary text (model output) and returns
/// its canonical template form. Timestamps are masked, never stripped.
pub fn remask(text: &str, rules: &MaskRuleSet) -> String {
    let mut masker = Masker { text: text.to_string(), slots: Vec::new() };
    for ts in &rules.timestamps {
        masker.apply("timestamp", &ts.regex, false);
    }
    for rule in &rules.rules {
        masker.apply(&rule.kind, &rule.regex, rule.require_digit);
    }
    norm(&masker.finish().0)
}

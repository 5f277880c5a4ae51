//! Persistent knowledge base: reference templates, causal priors and
//! troubleshooting cases, plus the pending-validation journal.
//!
//! On disk a knowledge base is a directory holding `templates.jsonl`,
//! `priors.jsonl`, `cases.jsonl` and `pending.jsonl`. Every line carries a
//! `schema_version`. Main-store files are rewritten in canonical order (sorted
//! by key) so `save(load(x))` reproduces a canonical file byte for byte.
//!
//! New knowledge never enters the main store directly: it is appended to the
//! pending journal and only an explicit approval moves it over with
//! `validated = true`. Retrieval and prior extraction only see validated
//! entries.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_sim, Embedder, EmbeddingVector};
use crate::text::{norm, short_hash, template_id};

pub const SCHEMA_VERSION: u32 = 1;

pub const TEMPLATES_FILE: &str = "templates.jsonl";
pub const PRIORS_FILE: &str = "priors.jsonl";
pub const CASES_FILE: &str = "cases.jsonl";
pub const PENDING_FILE: &str = "pending.jsonl";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base directory {0} does not exist")]
    MissingDirectory(PathBuf),
    #[error("{file}:{line}: schema_version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersionMismatch { file: String, line: usize, found: u32 },
    #[error("no pending entry with id {0}")]
    UnknownPending(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot embed entry text: {0}")]
    Embedding(#[from] crate::embedding::EmbeddingError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    Intra,
    Inter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbTemplateEntry {
    pub schema_version: u32,
    pub template_id: String,
    pub text: String,
    /// Root-cause label a case must carry to match this template as a root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause_label: Option<String>,
    pub support_count: u64,
    pub validated: bool,
    pub added_at: i64,
    #[serde(default)]
    pub sources: Vec<String>,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbPriorEntry {
    pub schema_version: u32,
    pub src_template_id: String,
    pub dst_template_id: String,
    pub family: PriorFamily,
    pub support_count: u64,
    #[serde(default)]
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbCaseEntry {
    pub schema_version: u32,
    pub case_id: String,
    pub indexed_text: String,
    pub root_cause_label: String,
    pub repair_action: String,
    pub template_refs: Vec<String>,
    pub validated: bool,
    pub added_at: i64,
    #[serde(default)]
    pub sources: Vec<String>,
    pub embedding: EmbeddingVector,
}

/// Knowledge awaiting validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PendingEntry {
    Template {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cause_label: Option<String>,
    },
    Prior {
        src_template_id: String,
        dst_template_id: String,
        family: PriorFamily,
    },
    Case {
        indexed_text: String,
        root_cause_label: String,
        repair_action: String,
        template_refs: Vec<String>,
    },
}

impl PendingEntry {
    /// Content-derived id, so re-enqueueing the same knowledge is a no-op.
    pub fn pending_id(&self) -> String {
        short_hash(&serde_json::to_string(self).expect("pending entry serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingRecord {
    pub schema_version: u32,
    pub pending_id: String,
    pub entry: PendingEntry,
}

/// One skipped line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadDiagnostic {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub templates: usize,
    pub priors: usize,
    pub cases: usize,
    pub pending: usize,
    pub diagnostics: Vec<LoadDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyOutcome {
    Inserted,
    Merged,
    /// The entry's pending id was already folded into the store (journal replay).
    AlreadyApplied,
}

/// A case retrieved for a diagnosis query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMatch {
    pub case_id: String,
    pub similarity: f64,
    pub root_cause_label: String,
    pub repair_action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KbStats {
    pub templates: usize,
    pub validated_templates: usize,
    pub intra_priors: usize,
    pub inter_priors: usize,
    pub cases: usize,
    pub validated_cases: usize,
    pub pending: usize,
}

/// Prior pairs as indices into an event order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorPairs {
    pub intra: Vec<(usize, usize)>,
    pub inter: Vec<(usize, usize)>,
    /// Pairs dropped because an endpoint is not in the event order.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    dir: Option<PathBuf>,
    embedder: Embedder,
    templates: BTreeMap<String, KbTemplateEntry>,
    priors: BTreeMap<(PriorFamily, String, String), KbPriorEntry>,
    cases: BTreeMap<String, KbCaseEntry>,
    pending: Vec<PendingRecord>,
}

fn read_jsonl<T: DeserializeOwned>(
    dir: &Path,
    name: &str,
    diagnostics: &mut Vec<LoadDiagnostic>,
) -> Result<Vec<T>, KbError> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                diagnostics.push(LoadDiagnostic { file: name.into(), line: idx + 1, message: e.to_string() });
                continue;
            }
        };
        if let Some(found) = value.get("schema_version").and_then(|v| v.as_u64()) {
            if found != u64::from(SCHEMA_VERSION) {
                return Err(KbError::SchemaVersionMismatch { file: name.into(), line: idx + 1, found: found as u32 });
            }
        }
        match serde_json::from_value(value) {
            Ok(v) => out.push(v),
            Err(e) => diagnostics.push(LoadDiagnostic { file: name.into(), line: idx + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a T>) -> Result<(), KbError> {
    let mut buf = String::new();
    for row in rows {
        buf.push_str(&serde_json::to_string(row).expect("kb rows serialize"));
        buf.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, buf).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl KnowledgeBase {
    /// An empty, purely in-memory knowledge base.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Creates the directory and empty files if absent, then loads it.
    pub fn init(dir: &Path) -> Result<(Self, LoadReport), KbError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for name in [TEMPLATES_FILE, PRIORS_FILE, CASES_FILE, PENDING_FILE] {
            let path = dir.join(name);
            if !path.exists() {
                File::create(&path).map_err(io_err(&path))?;
            }
        }
        Self::load(dir)
    }

    pub fn load(dir: &Path) -> Result<(Self, LoadReport), KbError> {
        if !dir.is_dir() {
            return Err(KbError::MissingDirectory(dir.to_path_buf()));
        }
        let mut diagnostics = Vec::new();
        let templates: Vec<KbTemplateEntry> = read_jsonl(dir, TEMPLATES_FILE, &mut diagnostics)?;
        let priors: Vec<KbPriorEntry> = read_jsonl(dir, PRIORS_FILE, &mut diagnostics)?;
        let cases: Vec<KbCaseEntry> = read_jsonl(dir, CASES_FILE, &mut diagnostics)?;
        let pending: Vec<PendingRecord> = read_jsonl(dir, PENDING_FILE, &mut diagnostics)?;
        for d in &diagnostics {
            log::warn!("skipped {}:{}: {}", d.file, d.line, d.message);
        }
        let mut kb = Self { dir: Some(dir.to_path_buf()), ..Self::default() };
        let report = LoadReport {
            templates: templates.len(),
            priors: priors.len(),
            cases: cases.len(),
            pending: pending.len(),
            diagnostics,
        };
        kb.templates = templates.into_iter().map(|t| (t.template_id.clone(), t)).collect();
        kb.priors = priors
            .into_iter()
            .map(|p| ((p.family, p.src_template_id.clone(), p.dst_template_id.clone()), p))
            .collect();
        kb.cases = cases.into_iter().map(|c| (c.case_id.clone(), c)).collect();
        let mut seen = std::collections::HashSet::new();
        kb.pending = pending.into_iter().filter(|p| seen.insert(p.pending_id.clone())).collect();
        Ok((kb, report))
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn embedder(&self) -> Embedder {
        self.embedder
    }

    /// Rewrites the three main-store files in canonical order.
    pub fn save(&self) -> Result<(), KbError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        self.save_to(dir)
    }

    pub fn save_to(&self, dir: &Path) -> Result<(), KbError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_jsonl(&dir.join(TEMPLATES_FILE), self.templates.values())?;
        write_jsonl(&dir.join(PRIORS_FILE), self.priors.values())?;
        write_jsonl(&dir.join(CASES_FILE), self.cases.values())
    }

    fn save_pending(&self) -> Result<(), KbError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        write_jsonl(&dir.join(PENDING_FILE), self.pending.iter())
    }

    // ---- seeding (fixtures and tests) ----

    /// Inserts a validated reference template directly into the main store.
    pub fn seed_template(&mut self, text: &str, cause_label: Option<&str>) -> Result<String, KbError> {
        let text = norm(text);
        let id = template_id(&text);
        let embedding = self.embedder.embed(&text)?;
        self.templates.insert(
            id.clone(),
            KbTemplateEntry {
                schema_version: SCHEMA_VERSION,
                template_id: id.clone(),
                text,
                cause_label: cause_label.map(str::to_owned),
                support_count: 1,
                validated: true,
                added_at: 0,
                sources: Vec::new(),
                embedding,
            },
        );
        Ok(id)
    }

    pub fn seed_prior(&mut self, src: &str, dst: &str, family: PriorFamily) {
        self.priors.insert(
            (family, src.to_string(), dst.to_string()),
            KbPriorEntry {
                schema_version: SCHEMA_VERSION,
                src_template_id: src.to_string(),
                dst_template_id: dst.to_string(),
                family,
                support_count: 1,
                sources: Vec::new(),
            },
        );
    }

    pub fn seed_case(
        &mut self,
        case_id: &str,
        indexed_text: &str,
        root_cause_label: &str,
        repair_action: &str,
        template_refs: Vec<String>,
    ) -> Result<(), KbError> {
        let embedding = self.embedder.embed(indexed_text)?;
        self.cases.insert(
            case_id.to_string(),
            KbCaseEntry {
                schema_version: SCHEMA_VERSION,
                case_id: case_id.to_string(),
                indexed_text: indexed_text.to_string(),
                root_cause_label: root_cause_label.to_string(),
                repair_action: repair_action.to_string(),
                template_refs,
                validated: true,
                added_at: 0,
                sources: Vec::new(),
                embedding,
            },
        );
        Ok(())
    }

    // ---- read side (validated entries only) ----

    pub fn validated_templates(&self) -> impl Iterator<Item = &KbTemplateEntry> {
        self.templates.values().filter(|t| t.validated)
    }

    pub fn template(&self, id: &str) -> Option<&KbTemplateEntry> {
        self.templates.get(id).filter(|t| t.validated)
    }

    pub fn validated_cases(&self) -> impl Iterator<Item = &KbCaseEntry> {
        self.cases.values().filter(|c| c.validated)
    }

    /// Cause label mapped to a template, if any.
    pub fn cause_for(&self, template_id: &str) -> Option<&str> {
        self.template(template_id).and_then(|t| t.cause_label.as_deref())
    }

    pub fn has_templates(&self) -> bool {
        self.validated_templates().next().is_some()
    }

    /// Best validated template by cosine; ties go to the lowest template id.
    pub fn nearest_template(&self, query: &EmbeddingVector) -> Option<(&KbTemplateEntry, f64)> {
        let mut best: Option<(&KbTemplateEntry, f64)> = None;
        // BTreeMap iteration is id-ascending, so a strict `>` keeps the lowest id on ties
        for entry in self.validated_templates() {
            let Ok(sim) = cosine_sim(query, &entry.embedding) else { continue };
            if best.is_none_or(|(_, s)| sim > s) {
                best = Some((entry, sim));
            }
        }
        best
    }

    /// Top `top_n` validated cases by cosine, descending; ties by case id.
    pub fn search_cases(&self, query: &EmbeddingVector, top_n: usize) -> Vec<CaseMatch> {
        let mut scored: Vec<CaseMatch> = self
            .validated_cases()
            .filter_map(|c| {
                cosine_sim(query, &c.embedding).ok().map(|similarity| CaseMatch {
                    case_id: c.case_id.clone(),
                    similarity,
                    root_cause_label: c.root_cause_label.clone(),
                    repair_action: c.repair_action.clone(),
                })
            })
            .collect();
        scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.case_id.cmp(&b.case_id)));
        scored.truncate(top_n);
        scored
    }

    /// Prior pairs restricted to `event_order`, as index pairs.
    pub fn priors_for(&self, event_order: &[String]) -> PriorPairs {
        let index: HashMap<&str, usize> = event_order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut pairs = PriorPairs::default();
        for p in self.priors.values() {
            match (index.get(p.src_template_id.as_str()), index.get(p.dst_template_id.as_str())) {
                (Some(&i), Some(&j)) => match p.family {
                    PriorFamily::Intra => pairs.intra.push((i, j)),
                    PriorFamily::Inter => pairs.inter.push((i, j)),
                },
                _ => pairs.skipped += 1,
            }
        }
        if pairs.skipped > 0 {
            log::debug!("{} prior pairs reference templates outside the event order", pairs.skipped);
        }
        pairs.intra.sort_unstable();
        pairs.inter.sort_unstable();
        pairs
    }

    // ---- write side ----

    pub fn pending(&self) -> &[PendingRecord] {
        &self.pending
    }

    /// Appends `entry` to the pending journal. Returns its pending id.
    pub fn enqueue_validation(&mut self, entry: PendingEntry) -> Result<String, KbError> {
        let pending_id = entry.pending_id();
        if self.pending.iter().any(|p| p.pending_id == pending_id) {
            return Ok(pending_id);
        }
        let record = PendingRecord { schema_version: SCHEMA_VERSION, pending_id: pending_id.clone(), entry };
        if let Some(dir) = &self.dir {
            let path = dir.join(PENDING_FILE);
            let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
            let mut line = serde_json::to_string(&record).expect("pending record serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(io_err(&path))?;
            file.sync_data().map_err(io_err(&path))?;
        }
        self.pending.push(record);
        Ok(pending_id)
    }

    /// Moves a pending entry into the main store as validated, persists the
    /// store, then drops the entry from the journal.
    pub fn apply_validated(&mut self, pending_id: &str, now_ms: i64) -> Result<ApplyOutcome, KbError> {
        let record = self
            .pending
            .iter()
            .find(|p| p.pending_id == pending_id)
            .cloned()
            .ok_or_else(|| KbError::UnknownPending(pending_id.to_string()))?;
        let outcome = self.merge(&record, now_ms)?;
        self.save()?;
        self.pending.retain(|p| p.pending_id != pending_id);
        self.save_pending()?;
        Ok(outcome)
    }

    /// Approves every pending entry in journal order.
    pub fn approve_all(&mut self, now_ms: i64) -> Result<Vec<(String, ApplyOutcome)>, KbError> {
        let ids: Vec<String> = self.pending.iter().map(|p| p.pending_id.clone()).collect();
        ids.into_iter()
            .map(|id| self.apply_validated(&id, now_ms).map(|o| (id, o)))
            .collect()
    }

    fn merge(&mut self, record: &PendingRecord, now_ms: i64) -> Result<ApplyOutcome, KbError> {
        let source = record.pending_id.clone();
        match &record.entry {
            PendingEntry::Template { text, cause_label } => {
                let text = norm(text);
                let id = template_id(&text);
                if let Some(existing) = self.templates.get_mut(&id) {
                    if existing.sources.contains(&source) {
                        return Ok(ApplyOutcome::AlreadyApplied);
                    }
                    existing.sources.push(source);
                    existing.support_count += 1;
                    existing.validated = true;
                    if existing.cause_label.is_none() {
                        existing.cause_label.clone_from(cause_label);
                    }
                    return Ok(ApplyOutcome::Merged);
                }
                let embedding = self.embedder.embed(&text)?;
                self.templates.insert(
                    id.clone(),
                    KbTemplateEntry {
                        schema_version: SCHEMA_VERSION,
                        template_id: id,
                        text,
                        cause_label: cause_label.clone(),
                        support_count: 1,
                        validated: true,
                        added_at: now_ms,
                        sources: vec![source],
                        embedding,
                    },
                );
                Ok(ApplyOutcome::Inserted)
            }
            PendingEntry::Prior { src_template_id, dst_template_id, family } => {
                let key = (*family, src_template_id.clone(), dst_template_id.clone());
                if let Some(existing) = self.priors.get_mut(&key) {
                    if existing.sources.contains(&source) {
                        return Ok(ApplyOutcome::AlreadyApplied);
                    }
                    existing.sources.push(source);
                    existing.support_count += 1;
                    return Ok(ApplyOutcome::Merged);
                }
                self.priors.insert(
                    key,
                    KbPriorEntry {
                        schema_version: SCHEMA_VERSION,
                        src_template_id: src_template_id.clone(),
                        dst_template_id: dst_template_id.clone(),
                        family: *family,
                        support_count: 1,
                        sources: vec![source],
                    },
                );
                Ok(ApplyOutcome::Inserted)
            }
            PendingEntry::Case { indexed_text, root_cause_label, repair_action, template_refs } => {
                let case_id = format!("case-{}", record.pending_id);
                if self.cases.contains_key(&case_id) {
                    return Ok(ApplyOutcome::AlreadyApplied);
                }
                let embedding = self.embedder.embed(indexed_text)?;
                self.cases.insert(
                    case_id.clone(),
                    KbCaseEntry {
                        schema_version: SCHEMA_VERSION,
                        case_id,
                        indexed_text: indexed_text.clone(),
                        root_cause_label: root_cause_label.clone(),
                        repair_action: repair_action.clone(),
                        template_refs: template_refs.clone(),
                        validated: true,
                        added_at: now_ms,
                        sources: vec![source],
                        embedding,
                    },
                );
                Ok(ApplyOutcome::Inserted)
            }
        }
    }

    /// Entries whose stored embedding differs from a fresh embedding of their text.
    pub fn verify(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let close = |a: &EmbeddingVector, b: &EmbeddingVector| {
            a.dim() == b.dim() && a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= 1e-12)
        };
        for t in self.templates.values() {
            match self.embedder.embed(&t.text) {
                Ok(fresh) if close(&fresh, &t.embedding) => {}
                _ => bad.push(format!("template {}", t.template_id)),
            }
            if template_id(&t.text) != t.template_id {
                bad.push(format!("template {} id does not match its text", t.template_id));
            }
        }
        for c in self.cases.values() {
            match self.embedder.embed(&c.indexed_text) {
                Ok(fresh) if close(&fresh, &c.embedding) => {}
                _ => bad.push(format!("case {}", c.case_id)),
            }
        }
        bad
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            templates: self.templates.len(),
            validated_templates: self.validated_templates().count(),
            intra_priors: self.priors.keys().filter(|k| k.0 == PriorFamily::Intra).count(),
            inter_priors: self.priors.keys().filter(|k| k.0 == PriorFamily::Inter).count(),
            cases: self.cases.len(),
            validated_cases: self.validated_cases().count(),
            pending: self.pending.len(),
        }
    }
}

/// Copy-on-write handle: readers take cheap point-in-time snapshots while a
/// single writer at a time publishes updated versions.
#[derive(Debug, Default)]
pub struct SharedKnowledgeBase {
    current: RwLock<Arc<KnowledgeBase>>,
    writer: Mutex<()>,
}

impl SharedKnowledgeBase {
    pub fn new(kb: KnowledgeBase) -> Self {
        Self { current: RwLock::new(Arc::new(kb)), writer: Mutex::new(()) }
    }

    pub fn snapshot(&self) -> Arc<KnowledgeBase> {
        Arc::clone(&self.current.read().expect("kb lock"))
    }

    pub fn update<R>(&self, f: impl FnOnce(&mut KnowledgeBase) -> R) -> R {
        let _guard = self.writer.lock().expect("kb writer lock");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next);
        *self.current.write().expect("kb lock") = Arc::new(next);
        out
    }
}

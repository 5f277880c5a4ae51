//! Synthetic benchmark incidents: log streams whose window counts follow a
//! known lag-1 structural model, plus the matching fixture knowledge base.

use std::fs;
use std::path::Path;

use chrono::DateTime;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::noise::NoiseProfile;
use super::synthetic::{simulate, VarSem};
use crate::kb::{KbError, KnowledgeBase, PriorFamily};
use crate::perception::RawLog;
use crate::text::{norm, stable_hash, template_id};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteVariant {
    /// One case per incident: eligible for the local decision.
    #[default]
    Deterministic,
    /// A near-duplicate decoy case per incident forces synthesis.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub profile: NoiseProfile,
    pub variant: SuiteVariant,
    pub incidents: usize,
    pub nodes: usize,
    pub windows: usize,
    /// Mean lines per template per window.
    pub base_rate: f64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            profile: NoiseProfile::Storage,
            variant: SuiteVariant::Deterministic,
            incidents: 10,
            nodes: 6,
            windows: 100,
            base_rate: 6.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub id: String,
    pub logs: Vec<RawLog>,
    /// Clean template text per log line.
    pub truth_templates: Vec<String>,
    /// (src, dst) template ids of the annotated root-cause relation.
    pub root_relation: (String, String),
    pub root_cause_label: String,
    pub action: String,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub profile: NoiseProfile,
    pub cases: Vec<BenchmarkCase>,
    pub kb: KnowledgeBase,
}

impl Suite {
    pub fn empty(name: &str, profile: NoiseProfile) -> Self {
        Self { name: name.into(), profile, cases: Vec::new(), kb: KnowledgeBase::in_memory() }
    }

    pub fn line_count(&self) -> usize {
        self.cases.iter().map(|c| c.logs.len()).sum()
    }

    /// Writes `manifest.json`, one raw log and one truth file per case, and the
    /// knowledge base under `kb/`.
    pub fn save(&self, dir: &Path) -> Result<(), SuiteIoError> {
        fs::create_dir_all(dir)?;
        let mut manifest = Manifest { name: self.name.clone(), profile: self.profile, cases: Vec::new() };
        for c in &self.cases {
            let log_file = format!("{}.log", c.id);
            let truth_file = format!("{}.truth", c.id);
            let body: String = c.logs.iter().map(|l| format!("{}\n", l.line)).collect();
            fs::write(dir.join(&log_file), body)?;
            fs::write(dir.join(&truth_file), c.truth_templates.iter().map(|t| format!("{t}\n")).collect::<String>())?;
            manifest.cases.push(ManifestCase {
                id: c.id.clone(),
                log_file,
                truth_file,
                source_id: c.logs.first().map(|l| l.source_id.clone()).unwrap_or_default(),
                root_relation: c.root_relation.clone(),
                root_cause_label: c.root_cause_label.clone(),
                action: c.action.clone(),
            });
        }
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        self.kb.save_to(&dir.join("kb"))?;
        Ok(())
    }

    /// Reads a suite written by [`Suite::save`]: raw log files plus the manifest.
    pub fn load(dir: &Path) -> Result<Self, SuiteIoError> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        let (kb, _) = KnowledgeBase::load(&dir.join("kb"))?;
        let mut cases = Vec::new();
        for m in manifest.cases {
            let raw = fs::read_to_string(dir.join(&m.log_file))?;
            let logs = RawLog::from_lines(raw.lines(), &m.source_id);
            let truth_templates: Vec<String> = fs::read_to_string(dir.join(&m.truth_file))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_owned)
                .collect();
            if truth_templates.len() != logs.len() {
                return Err(SuiteIoError::Mismatch(m.id));
            }
            cases.push(BenchmarkCase {
                id: m.id,
                logs,
                truth_templates,
                root_relation: m.root_relation,
                root_cause_label: m.root_cause_label,
                action: m.action,
            });
        }
        Ok(Self { name: manifest.name, profile: manifest.profile, cases, kb })
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum SuiteIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("case {0}: truth file and log file differ in length")]
    Mismatch(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    name: String,
    profile: NoiseProfile,
    cases: Vec<ManifestCase>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestCase {
    id: String,
    log_file: String,
    truth_file: String,
    source_id: String,
    root_relation: (String, String),
    root_cause_label: String,
    action: String,
}

struct Vocabulary {
    components: &'static [&'static str],
    events: &'static [&'static str],
}

fn vocabulary(profile: NoiseProfile) -> Vocabulary {
    match profile {
        NoiseProfile::Storage => Vocabulary {
            components: &[
                "datanode", "namenode", "blockmanager", "fsdataset", "dataxceiver", "packetresponder", "replicator",
                "balancer", "blockscanner", "journalnode", "editlog", "snapshotter",
            ],
            events: &[
                "received block <*> of size <*> from <*>",
                "served block <*> to <*>",
                "deleting block <*> file <*>",
                "replication of block <*> failed",
                "verification succeeded for <*>",
                "write timeout on <*> after <*> ms",
                "allocated block <*> for <*>",
                "closing stream <*>",
                "added to blockmap <*> size <*>",
                "checksum mismatch on block <*>",
                "heartbeat lost from <*>",
                "disk usage at <*> percent",
                "volume <*> is full",
                "packet responder <*> terminating",
            ],
        },
        NoiseProfile::ControlPlane => Vocabulary {
            components: &[
                "nova.compute", "nova.scheduler", "neutron.agent", "keystone", "glance.api", "cinder.volume",
                "nova.conductor", "heat.engine", "placement", "nova.api", "swift.proxy", "octavia",
            ],
            events: &[
                "get request for instance <*> returned status <*>",
                "post request for volume <*> accepted",
                "instance <*> spawned successfully",
                "claim failed on host <*>",
                "token validation failed for user <*>",
                "port <*> binding failed",
                "image <*> download started",
                "attempting to sync state for instance <*>",
                "lock released on <*> after <*> seconds",
                "heartbeat timeout from agent <*>",
                "scheduler found <*> candidate hosts",
                "rpc call to <*> timed out",
                "quota recount for tenant <*> took <*> seconds",
            ],
        },
        NoiseProfile::Heterogeneous => Vocabulary {
            components: &[
                "mapreduce.task", "yarn.rm", "yarn.nm", "hdfs.client", "shuffle", "speculator", "containerlauncher",
                "taskattempt", "jobhistory", "rmcommunicator", "mrappmaster", "webproxy",
            ],
            events: &[
                "task <*> transitioned from running to failed",
                "container <*> launched on <*>",
                "fetch failure for attempt <*>",
                "registered with resource manager at <*>",
                "progress of task <*> is <*>",
                "address change detected old <*> new <*>",
                "retrying connect to server <*> already tried <*> time",
                "spill <*> finished",
                "killing container <*>",
                "job <*> completed successfully",
                "heartbeat from <*> missed",
                "reduce task <*> started",
                "received block <*> with length <*>",
            ],
        },
    }
}

const FAULTS: &[(&str, &str)] = &[
    ("disk exhaustion", "expand volume and purge temp files"),
    ("network partition", "restore link and rebalance traffic"),
    ("memory pressure", "raise memory limit and restart workers"),
    ("certificate expiry", "rotate certificates"),
    ("configuration drift", "roll back configuration"),
    ("clock skew", "resync time source"),
    ("process crash loop", "restart service with backoff"),
    ("lock contention", "reduce concurrency and clear stale locks"),
    ("quota exceeded", "raise quota and notify tenant"),
    ("hardware fault", "drain node and replace hardware"),
    ("dns failure", "fail over resolver"),
    ("rate limiting", "throttle clients and scale gateway"),
];

fn variable_value(rng: &mut ChaCha8Rng, profile: NoiseProfile) -> String {
    let kinds = if profile == NoiseProfile::Storage { 5 } else { 4 };
    match rng.random_range(0..kinds) {
        0 => rng.random_range(1..100_000u32).to_string(),
        1 => format!(
            "10.{}.{}.{}:{}",
            rng.random_range(0..256u32),
            rng.random_range(0..256u32),
            rng.random_range(1..255u32),
            rng.random_range(1024..65_535u32)
        ),
        2 => format!("{}{:07x}", rng.random_range(1..10u32), rng.random_range(0..0x1000_0000u32)),
        3 => format!("/srv/data{}/current", rng.random_range(0..16u32)),
        _ => format!("blk_{}", rng.random_range(1_000_000_000u64..9_000_000_000)),
    }
}

/// Fills each placeholder of `template` with a value that masks back to it.
pub fn render_line(template: &str, rng: &mut ChaCha8Rng, profile: NoiseProfile) -> String {
    let pieces: Vec<&str> = template.split("<*>").collect();
    let mut out = String::with_capacity(template.len() + 32);
    for (i, piece) in pieces.iter().enumerate() {
        out.push_str(piece);
        if i + 1 < pieces.len() {
            out.push_str(&variable_value(rng, profile));
        }
    }
    out
}

/// Tree-shaped incident model: node 0 is the root with at least two
/// children; the root->1 edge is the annotated relation and stays the
/// strongest after column standardization (deeper nodes accumulate variance,
/// so their incoming weights are kept small).
fn incident_sem(d: usize, rng: &mut ChaCha8Rng) -> VarSem {
    let mut w = DMatrix::zeros(d, d);
    w[(0, 1)] = 1.2;
    for j in 2..d {
        let parent = if j == 2 { 0 } else { rng.random_range(0..(j - 1).min(3)) };
        w[(parent, j)] = rng.random_range(0.35..0.5);
    }
    let mut a = DMatrix::zeros(d, d);
    a[(0, 0)] = 0.3;
    if d > 2 {
        a[(0, d - 1)] = 0.35;
    }
    VarSem { w, a }
}

fn format_ts(ms: i64) -> String {
    DateTime::from_timestamp_millis(ms).expect("in range").format("%Y-%m-%d %H:%M:%S").to_string()
}

/// Builds the suite and its fixture knowledge base. Pure function of `cfg`.
pub fn generate_suite(cfg: &SuiteConfig) -> Suite {
    let vocab = vocabulary(cfg.profile);
    let d = cfg.nodes.clamp(2, vocab.events.len());
    let name = format!("synthetic_{}_{}", cfg.profile, match cfg.variant {
        SuiteVariant::Deterministic => "deterministic",
        SuiteVariant::Ambiguous => "ambiguous",
    });
    let mut suite = Suite::empty(&name, cfg.profile);
    const EPOCH_MS: i64 = 1_767_225_600_000; // 2026-01-01T00:00:00Z
    for k in 0..cfg.incidents {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(format!("incident-{k}").as_bytes(), cfg.seed));
        let component = vocab.components[k % vocab.components.len()];
        let round = k / vocab.components.len();
        let mut events: Vec<&str> = vocab.events.to_vec();
        events.shuffle(&mut rng);
        let templates: Vec<String> = events[..d]
            .iter()
            .map(|e| if round == 0 { norm(&format!("{component} {e}")) } else { norm(&format!("{component} r{round} {e}")) })
            .collect();
        let ids: Vec<String> = templates.iter().map(|t| template_id(t)).collect();
        let (fault, action) = FAULTS[(k + round) % FAULTS.len()];
        let label = format!("{fault} on {component}");
        let action = format!("{action} on {component}");

        let sem = incident_sem(d, &mut rng);
        let x = simulate(&sem, cfg.windows, rng.random());
        let start = EPOCH_MS + k as i64 * 86_400_000;
        let amplitude = cfg.base_rate / 3.0;
        let mut lines: Vec<(i64, String, usize)> = Vec::new();
        for u in 0..cfg.windows {
            for j in 0..d {
                let count = (cfg.base_rate + amplitude * x[(u, j)]).round().clamp(0.0, 4.0 * cfg.base_rate) as usize;
                for _ in 0..count {
                    let ts = start + u as i64 * 60_000 + rng.random_range(0..60) * 1_000;
                    lines.push((ts, render_line(&templates[j], &mut rng, cfg.profile), j));
                }
            }
        }
        // windows tile from the earliest line, so anchor it to the incident start
        if let Some(first) = lines.first_mut() {
            first.0 = start;
        }
        lines.sort_by_key(|l| l.0);
        let logs = lines.iter().enumerate().map(|(i, (ts, body, _))| RawLog::new(format!("{} {body}", format_ts(*ts)), component, i as u64)).collect();
        let truth_templates = lines.iter().map(|l| templates[l.2].clone()).collect();

        for (j, t) in templates.iter().enumerate() {
            suite.kb.seed_template(t, (j == 0).then_some(label.as_str())).expect("non-empty template");
        }
        for (i, jj) in sem.intra_edges() {
            suite.kb.seed_prior(&ids[i], &ids[jj], PriorFamily::Intra);
        }
        for (i, jj) in sem.inter_edges() {
            suite.kb.seed_prior(&ids[i], &ids[jj], PriorFamily::Inter);
        }
        let indexed = templates.join(" ");
        suite.kb.seed_case(&format!("case-{k:03}"), &indexed, &label, &action, vec![ids[0].clone()]).expect("non-empty case");
        if cfg.variant == SuiteVariant::Ambiguous {
            let decoy = format!("{} intermittent", templates[..d - 1].join(" "));
            suite
                .kb
                .seed_case(&format!("case-{k:03}-decoy"), &decoy, &format!("transient load on {component}"), "monitor and defer", vec![ids[1].clone()])
                .expect("non-empty case");
        }

        suite.cases.push(BenchmarkCase {
            id: format!("incident-{k:03}"),
            logs,
            truth_templates,
            root_relation: (ids[0].clone(), ids[1].clone()),
            root_cause_label: label,
            action,
        });
    }
    suite
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::stable_hash;

pub const NOISE_LEVELS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseProfile {
    ControlPlane,
    Storage,
    Heterogeneous,
}

impl NoiseProfile {
    pub const ALL: [NoiseProfile; 3] = [Self::ControlPlane, Self::Storage, Self::Heterogeneous];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ControlPlane => "control_plane",
            Self::Storage => "storage",
            Self::Heterogeneous => "heterogeneous",
        }
    }

    /// Versioned substitution tables bundled with the crate.
    pub fn tables(self) -> &'static NoiseTables {
        static TABLES: OnceLock<[NoiseTables; 3]> = OnceLock::new();
        let all = TABLES.get_or_init(|| {
            let parse = |s: &str| serde_json::from_str::<NoiseTables>(s).expect("bundled noise table parses");
            [
                parse(include_str!("../../assets/noise/control_plane.json")),
                parse(include_str!("../../assets/noise/storage.json")),
                parse(include_str!("../../assets/noise/heterogeneous.json")),
            ]
        });
        &all[self as usize]
    }
}

impl fmt::Display for NoiseProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseProfile {
    type Err = NoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| NoiseError::UnknownProfile(s.into()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise level {0} is not one of 0.0, 0.2, 0.4, 0.6, 0.8, 1.0")]
    BadLevel(f64),
    #[error("unknown noise profile `{0}`")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTables {
    pub version: u32,
    pub profile: String,
    pub synonyms: BTreeMap<String, Vec<String>>,
    pub anchors: BTreeMap<String, Vec<String>>,
    pub status: BTreeMap<String, Vec<String>>,
}

impl NoiseTables {
    /// Alternatives for a lowercase word under `profile`'s eligibility rules.
    fn alternatives(&self, profile: NoiseProfile, word: &str) -> Option<&[String]> {
        let hit = self.synonyms.get(word);
        let hit = match profile {
            NoiseProfile::ControlPlane => hit,
            _ => hit.or_else(|| self.anchors.get(word)).or_else(|| self.status.get(word)),
        };
        hit.map(Vec::as_slice).filter(|alts| !alts.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub level: f64,
    pub seed: u64,
    pub profile: NoiseProfile,
}

impl NoiseConfig {
    pub fn new(level: f64, seed: u64, profile: NoiseProfile) -> Result<Self, NoiseError> {
        if !NOISE_LEVELS.iter().any(|&l| (l - level).abs() < 1e-9) {
            return Err(NoiseError::BadLevel(level));
        }
        Ok(Self { level, seed, profile })
    }
}

fn word_core() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z][A-Za-z_\-]*[A-Za-z]|[A-Za-z]").expect("static regex"))
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.len() > 1 && original.chars().all(|c| !c.is_ascii_lowercase()) {
        replacement.to_ascii_uppercase()
    } else if original.starts_with(|c: char| c.is_ascii_uppercase()) {
        let mut chars = replacement.chars();
        chars.next().map(|c| c.to_ascii_uppercase().to_string() + chars.as_str()).unwrap_or_default()
    } else {
        replacement.to_string()
    }
}

/// Rewrites table words, each independently with probability `level`.
///
/// The generator is seeded from the line and the seed only, so a token
/// replaced at one level is also replaced at every higher level.
pub fn inject_noise(line: &str, cfg: &NoiseConfig) -> String {
    if cfg.level <= 0.0 {
        return line.to_string();
    }
    let tables = cfg.profile.tables();
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(line.as_bytes(), cfg.seed));
    let mut out = String::with_capacity(line.len() + 16);
    let mut last = 0;
    for m in word_core().find_iter(line) {
        let word = m.as_str().to_ascii_lowercase();
        let Some(alts) = tables.alternatives(cfg.profile, &word) else { continue };
        let draw: f64 = rng.random();
        let pick = rng.random_range(0..alts.len());
        if draw < cfg.level {
            out.push_str(&line[last..m.start()]);
            out.push_str(&match_case(m.as_str(), &alts[pick]));
            last = m.end();
        }
    }
    out.push_str(&line[last..]);
    out
}

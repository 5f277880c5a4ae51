//! Text canonicalization and stable hashing shared by every layer.

use std::sync::OnceLock;

use regex::Regex;

/// The canonical placeholder token.
pub const PLACEHOLDER: &str = "<*>";

/// Seed mixed into every stable hash. Changing it changes every template id
/// and every embedding bucket, so it is part of the on-disk format.
pub const HASH_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over `bytes` with a seeded offset basis and a splitmix64 finalizer.
///
/// Pure integer arithmetic, so the value is identical on every platform.
pub fn stable_hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 avalanche
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

pub(crate) fn placeholder_variants() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<:\*:>|<\*+>|\{\}|<[A-Z][A-Z0-9_]*>").unwrap())
}

/// Canonical form used for every exact comparison: placeholder variants
/// unified to `<*>`, lowercased, trimmed, internal whitespace collapsed.
pub fn norm(text: &str) -> String {
    let unified = placeholder_variants().replace_all(text, PLACEHOLDER);
    let lowered = unified.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Number of `<*>` tokens in `text`.
pub fn placeholder_count(text: &str) -> usize {
    text.matches(PLACEHOLDER).count()
}

/// Template id: 16 lowercase hex digits of the stable hash of `norm(text)`.
pub fn template_id(text: &str) -> String {
    format!("{:016x}", stable_hash(norm(text).as_bytes(), HASH_SEED))
}

/// Short id for arbitrary content (case ids, request hashes use SHA-256 instead).
pub fn short_hash(text: &str) -> String {
    format!("{:016x}", stable_hash(text.as_bytes(), HASH_SEED))
}

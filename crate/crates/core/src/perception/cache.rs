//! Bounded exact-match template cache with least-recently-used eviction.

use std::collections::{BTreeMap, HashMap};

use super::EventTemplate;
use crate::text::norm;

pub const DEFAULT_CAPACITY: usize = 10_000;

#[derive(Debug, Clone)]
pub struct TemplateCache {
    capacity: usize,
    tick: u64,
    entries: HashMap<String, (EventTemplate, u64)>,
    recency: BTreeMap<u64, String>,
}

impl Default for TemplateCache {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl TemplateCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        Self { capacity, tick: 0, entries: HashMap::new(), recency: BTreeMap::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn bump(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    /// Exact lookup on `norm(key)`. A hit refreshes recency; a miss changes nothing.
    pub fn get(&mut self, key: &str) -> Option<EventTemplate> {
        let key = norm(key);
        let tick = self.bump();
        let (template, stamp) = self.entries.get_mut(&key)?;
        self.recency.remove(stamp);
        *stamp = tick;
        self.recency.insert(tick, key);
        Some(template.clone())
    }

    /// Read-only lookup that leaves recency untouched.
    pub fn peek(&self, key: &str) -> Option<&EventTemplate> {
        self.entries.get(&norm(key)).map(|(t, _)| t)
    }

    /// Inserts or replaces `key`, evicting the least recently used entry when full.
    pub fn insert(&mut self, key: &str, template: EventTemplate) {
        let key = norm(key);
        let tick = self.bump();
        if let Some((_, old)) = self.entries.remove(&key) {
            self.recency.remove(&old);
        } else if self.entries.len() >= self.capacity {
            if let Some((_, victim)) = self.recency.pop_first() {
                self.entries.remove(&victim);
            }
        }
        self.recency.insert(tick, key.clone());
        self.entries.insert(key, (template, tick));
    }

    /// Iterates templates from least to most recently used.
    pub fn iter_lru(&self) -> impl Iterator<Item = &EventTemplate> {
        self.recency.values().map(|k| &self.entries[k].0)
    }
}

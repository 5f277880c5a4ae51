use edgeheal::kb::KnowledgeBase;
use edgeheal::model::{CountingClient, MockBehavior, MockClient};
use edgeheal::perception::*;
use proptest::prelude::*;

const KNOWN: &str = "081109 203615 148 INFO dfs.DataNode$PacketResponder: Received block blk_38865049064139660 of size 67108864 from /10.251.42.84";
const UNKNOWN: &str = "081109 203620 22 WARN dfs.FSNamesystem: disk quota exceeded on volume 7";

fn kb_with_known() -> KnowledgeBase {
    let mut kb = KnowledgeBase::in_memory();
    let p = preprocess(KNOWN, &MaskRuleSet::default(), 0).unwrap();
    kb.seed_template(&p.normalized_text, Some("packet responder")).unwrap();
    kb
}

fn run(lines: &[&str], kb: &KnowledgeBase, cache: &mut TemplateCache, client: &CountingClient<MockClient>) -> ParseOutput {
    let logs = RawLog::from_lines(lines.iter().copied(), "node-1");
    parse_stream(&logs, cache, kb, client, &MaskRuleSet::default(), &RouterConfig::default())
}

#[test]
fn tiers_are_tried_in_order() {
    let kb = kb_with_known();
    let client = CountingClient::new(MockClient::new(MockBehavior::Echo));
    let mut cache = TemplateCache::new(16);
    let out = run(&[KNOWN, UNKNOWN, KNOWN, UNKNOWN], &kb, &mut cache, &client);
    assert_eq!(out.stats.tiers(), vec![Some(Tier::L2), Some(Tier::L3), Some(Tier::L1), Some(Tier::L1)]);
    assert_eq!(client.calls(), 1);
    assert_eq!(out.to_validate.len(), 1);
    assert_eq!(out.events.len(), 4);
    assert_eq!(out.events[0].template_id, out.events[2].template_id);
}

#[test]
fn known_text_never_reaches_the_model() {
    let kb = kb_with_known();
    let client = CountingClient::new(MockClient::new(MockBehavior::Offline));
    let mut cache = TemplateCache::new(16);
    let out = run(&[KNOWN; 5], &kb, &mut cache, &client);
    assert_eq!(client.calls(), 0);
    assert_eq!((out.stats.l1, out.stats.l2, out.stats.l3), (4, 1, 0));
}

#[test]
fn offline_fallback_degrades_instead_of_failing() {
    let client = CountingClient::new(MockClient::new(MockBehavior::Offline));
    let mut cache = TemplateCache::new(16);
    let out = run(&[UNKNOWN, UNKNOWN], &KnowledgeBase::in_memory(), &mut cache, &client);
    assert_eq!(out.events.len(), 2);
    assert_eq!(out.stats.degraded, 1);
    assert_eq!(out.stats.tiers(), vec![Some(Tier::L3), Some(Tier::L1)]);
}

#[test]
fn masked_fields_collapse_to_one_template() {
    let a = "081109 203615 148 INFO dfs.DataNode: Received block blk_1 of size 10 from /10.0.0.1";
    let b = "081109 203616 149 INFO dfs.DataNode: Received block blk_2 of size 99 from /10.0.0.2";
    let client = CountingClient::new(MockClient::new(MockBehavior::Echo));
    let mut cache = TemplateCache::new(16);
    let out = run(&[a, b], &KnowledgeBase::in_memory(), &mut cache, &client);
    assert_eq!(out.events[0].template_id, out.events[1].template_id);
    assert_eq!(out.events[1].timestamp_ms - out.events[0].timestamp_ms, 1000);
    assert_eq!(client.calls(), 1);
}

#[test]
fn missing_timestamp_falls_back_to_arrival_order() {
    let p = preprocess("kernel panic without any clock", &MaskRuleSet::default(), 77).unwrap();
    assert!(!p.timestamp_extracted && !p.timestamp_warning);
    assert_eq!(p.timestamp_ms, 77);
    let client = CountingClient::new(MockClient::new(MockBehavior::Echo));
    let mut cache = TemplateCache::new(16);
    let out = run(&[KNOWN, "kernel panic without any clock"], &KnowledgeBase::in_memory(), &mut cache, &client);
    assert_eq!(out.events[1].timestamp_ms, out.events[0].timestamp_ms + 1);
}

#[test]
fn lru_evicts_the_least_recent_entry() {
    let mut cache = TemplateCache::new(2);
    for k in ["a", "b"] {
        cache.insert(k, EventTemplate::new(k, Tier::L3));
    }
    assert!(cache.get("a").is_some());
    cache.insert("c", EventTemplate::new("c", Tier::L3));
    assert!(cache.peek("b").is_none());
    assert!(cache.peek("a").is_some() && cache.peek("c").is_some());
    assert_eq!(cache.len(), 2);
}

fn vocabulary() -> Vec<String> {
    (0..8).map(|i| format!("081109 2036{:02} {i} INFO svc{i}: operation kind{i} finished for unit_{i}", 10 + i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// With room for every template, each text misses the cache at most once
    /// and every later occurrence is an L1 hit.
    #[test]
    fn cache_hits_are_monotone(picks in prop::collection::vec(0usize..8, 1..60)) {
        let vocab = vocabulary();
        let lines: Vec<&str> = picks.iter().map(|&i| vocab[i].as_str()).collect();
        let client = CountingClient::new(MockClient::new(MockBehavior::Echo));
        let mut cache = TemplateCache::new(64);
        let out = run(&lines, &KnowledgeBase::in_memory(), &mut cache, &client);
        let mut seen = std::collections::HashSet::new();
        for (pick, tier) in picks.iter().zip(out.stats.tiers()) {
            let expected = if seen.insert(*pick) { Tier::L3 } else { Tier::L1 };
            prop_assert_eq!(tier, Some(expected));
        }
        prop_assert_eq!(client.calls(), seen.len());
        prop_assert_eq!(out.stats.l1 + out.stats.l2 + out.stats.l3, lines.len());
    }

    #[test]
    fn parsing_is_deterministic(picks in prop::collection::vec(0usize..8, 1..40)) {
        let vocab = vocabulary();
        let lines: Vec<&str> = picks.iter().map(|&i| vocab[i].as_str()).collect();
        let kb = kb_with_known();
        let parse = || {
            let client = CountingClient::new(MockClient::new(MockBehavior::Echo));
            let mut cache = TemplateCache::new(64);
            let out = run(&lines, &kb, &mut cache, &client);
            (out.events, out.stats.tiers())
        };
        prop_assert_eq!(parse(), parse());
    }
}

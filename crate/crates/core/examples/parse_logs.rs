//! Routes a few HDFS-style lines through the three-tier parser and prints
//! the tier and template chosen for each.
//!
//! cargo run --example parse_logs

use edgeheal::kb::KnowledgeBase;
use edgeheal::model::{CountingClient, MockBehavior, MockClient};
use edgeheal::perception::{parse_stream, preprocess, MaskRuleSet, RawLog, RouterConfig, TemplateCache};

fn main() {
    let rules = MaskRuleSet::default();
    let mut kb = KnowledgeBase::in_memory();
    let known = "081109 203615 148 INFO dfs.DataNode$PacketResponder: Received block blk_3886 of size 67108864 from /10.251.42.84";
    let text = preprocess(known, &rules, 0).expect("non-empty line").normalized_text;
    kb.seed_template(&text, Some("normal block receipt")).expect("embeddable text");

    let lines = [
        "081109 203615 148 INFO dfs.DataNode$PacketResponder: Received block blk_3886 of size 67108864 from /10.251.42.84",
        "081109 203616 149 INFO dfs.DataNode$PacketResponder: Received block blk_9120 of size 1024 from /10.251.42.91",
        "081109 203620 22 WARN dfs.FSNamesystem: disk quota exceeded on volume 7",
        "081109 203633 23 WARN dfs.FSNamesystem: disk quota exceeded on volume 9",
    ];
    let logs = RawLog::from_lines(lines, "datanode");
    let client = CountingClient::new(MockClient::new(MockBehavior::Echo));
    let mut cache = TemplateCache::new(1000);
    let out = parse_stream(&logs, &mut cache, &kb, &client, &rules, &RouterConfig::default());

    for (route, event) in out.stats.per_log.iter().zip(&out.events) {
        println!("{:>2} {:?} {} {}", route.seq, route.tier.unwrap(), event.template_id, event.template_text);
    }
    println!("L1={} L2={} L3={} model calls={}", out.stats.l1, out.stats.l2, out.stats.l3, client.calls());
    println!("{} new template(s) queued for validation", out.to_validate.len());
}

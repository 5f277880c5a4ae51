//! Records the synthesis exchange of an ambiguous incident to a transcript,
//! then reproduces the report offline from that transcript alone.
//!
//! cargo run --release --example transcript_replay

use edgeheal::action::{diagnose, ActionConfig};
use edgeheal::eval::{generate_suite, SuiteConfig, SuiteVariant};
use edgeheal::model::{load_transcripts, MockClient, RecordingClient, ReplayClient};
use edgeheal::perception::{parse_stream, MaskRuleSet, RouterConfig, TemplateCache};
use edgeheal::reasoning::{discover, ReasoningConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = generate_suite(&SuiteConfig { variant: SuiteVariant::Ambiguous, incidents: 1, ..Default::default() });
    let mut cache = TemplateCache::new(1000);
    let parsed = parse_stream(&suite.cases[0].logs, &mut cache, &suite.kb, &MockClient::default(), &MaskRuleSet::default(), &RouterConfig::default());
    let (graph, _) = discover(&parsed.events, &suite.kb, &ReasoningConfig::default(), true)?;

    let path = std::env::temp_dir().join(format!("edgeheal-transcript-{}.jsonl", std::process::id()));
    let recorder = RecordingClient::create(MockClient::default(), &path)?;
    let live = diagnose(&graph, &suite.kb, &recorder, &ActionConfig::default());

    let entries = load_transcripts(&path)?;
    for e in &entries {
        println!("{} -> {}", e.request_hash, e.response.text);
    }
    let replayed = diagnose(&graph, &suite.kb, &ReplayClient::new(entries), &ActionConfig::default());
    println!("live:     {} / {}", live.root_cause, live.action);
    println!("replayed: {} / {}", replayed.root_cause, replayed.action);
    println!("identical: {}", serde_json::to_string(&live)? == serde_json::to_string(&replayed)?);
    std::fs::remove_file(&path)?;
    Ok(())
}

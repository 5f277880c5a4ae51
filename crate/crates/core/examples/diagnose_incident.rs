//! Full pipeline on one incident of each suite variant: the deterministic
//! case is decided locally, the ambiguous one goes to the model.
//!
//! cargo run --release --example diagnose_incident

use edgeheal::action::{diagnose, ActionConfig};
use edgeheal::eval::{generate_suite, SuiteConfig, SuiteVariant};
use edgeheal::model::{CountingClient, MockClient};
use edgeheal::perception::{parse_stream, MaskRuleSet, RouterConfig, TemplateCache};
use edgeheal::reasoning::{discover, ReasoningConfig};

fn main() {
    for variant in [SuiteVariant::Deterministic, SuiteVariant::Ambiguous] {
        let suite = generate_suite(&SuiteConfig { variant, incidents: 1, ..Default::default() });
        let case = &suite.cases[0];
        let mut cache = TemplateCache::new(1000);
        let client = CountingClient::new(MockClient::default());
        let parsed = parse_stream(&case.logs, &mut cache, &suite.kb, &client, &MaskRuleSet::default(), &RouterConfig::default());
        let (graph, _) = discover(&parsed.events, &suite.kb, &ReasoningConfig::default(), true).expect("enough windows");
        let report = diagnose(&graph, &suite.kb, &client, &ActionConfig::default());
        println!("{variant:?}: {:?} after {} model call(s)", report.decision_path, client.calls());
        println!("  root cause: {} (expected {})", report.root_cause, case.root_cause_label);
        println!("  action:     {}", report.action);
        if let Some(c) = &report.certificate {
            println!("  certificate: top {:.3}, runner-up {:?}, limit {:.3}", c.top_similarity, c.second_similarity, c.margin_limit);
        }
    }
}

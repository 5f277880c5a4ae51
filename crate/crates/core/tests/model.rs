use edgeheal::action::{diagnose, ActionConfig, DecisionPath};
use edgeheal::eval::{generate_suite, SuiteConfig, SuiteVariant};
use edgeheal::model::*;
use edgeheal::perception::{parse_stream, MaskRuleSet, RouterConfig, TemplateCache};
use edgeheal::reasoning::{discover, ReasoningConfig};

#[test]
fn recorded_diagnosis_replays_identically() {
    let suite = generate_suite(&SuiteConfig { variant: SuiteVariant::Ambiguous, incidents: 1, windows: 40, ..Default::default() });
    let mut cache = TemplateCache::new(1000);
    let out = parse_stream(&suite.cases[0].logs, &mut cache, &suite.kb, &MockClient::default(), &MaskRuleSet::default(), &RouterConfig::default());
    let (graph, _) = discover(&out.events, &suite.kb, &ReasoningConfig::default(), true).unwrap();

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("transcripts.jsonl");
    let recorder = RecordingClient::create(MockClient::default(), &path).unwrap();
    let live = diagnose(&graph, &suite.kb, &recorder, &ActionConfig::default());
    assert_eq!(live.decision_path, DecisionPath::Synthesized);

    let cfg = ClientConfig { backend: Backend::Replay, transcripts: Some(path.clone()), ..Default::default() };
    let replay = build_client(&cfg, false).unwrap();
    assert_eq!(replay.provider_tag(), "replay");
    let again = diagnose(&graph, &suite.kb, replay.as_ref(), &ActionConfig::default());
    assert_eq!(serde_json::to_string(&live).unwrap(), serde_json::to_string(&again).unwrap());
    assert_eq!(load_transcripts(&path).unwrap().len(), 1);
}

#[test]
fn replay_without_transcripts_is_rejected() {
    let cfg = ClientConfig { backend: Backend::Replay, ..Default::default() };
    assert!(matches!(build_client(&cfg, false), Err(ClientError::InvalidRequest(_))));
    // offline overrides any configured backend
    assert_eq!(build_client(&cfg, true).unwrap().provider_tag(), "mock");
}

#[test]
fn unreachable_http_backend_reports_transport_errors() {
    let http = HttpConfig { endpoint: "http://127.0.0.1:9/v1/chat/completions".into(), retries: 1, timeout_ms: 500, ..Default::default() };
    let client = HttpChatClient::new(http);
    let req = ModelRequest::new(Purpose::L3Parse, vec![ChatMessage::user("x")], 0.0, 8).unwrap();
    assert!(matches!(client.complete(&req), Err(ClientError::Transport(_) | ClientError::Timeout)));
}

#[test]
fn counting_wrapper_counts_failures_too() {
    let c = CountingClient::new(MockClient::new(MockBehavior::Offline));
    let req = ModelRequest::new(Purpose::L3Parse, vec![ChatMessage::user("x")], 0.0, 8).unwrap();
    assert!(c.complete(&req).is_err());
    assert!(c.complete(&req).is_err());
    assert_eq!(c.calls(), 2);
    c.reset();
    assert_eq!(c.calls(), 0);
}

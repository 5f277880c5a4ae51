use std::fs;

use edgeheal::embedding::{cosine_sim, embed};
use edgeheal::kb::*;
use proptest::prelude::*;

fn template(text: &str) -> PendingEntry {
    PendingEntry::Template { text: text.into(), cause_label: Some("disk full".into()) }
}

#[test]
fn pending_entries_are_invisible_until_approved() {
    let tmp = tempfile::tempdir().unwrap();
    let (mut kb, _) = KnowledgeBase::init(tmp.path()).unwrap();
    let id = kb.enqueue_validation(template("disk quota exceeded on <*>")).unwrap();
    assert_eq!(kb.enqueue_validation(template("disk quota exceeded on <*>")).unwrap(), id);
    assert_eq!(kb.pending().len(), 1);
    assert!(!kb.has_templates());
    assert!(kb.nearest_template(&embed("disk quota exceeded on <*>").unwrap()).is_none());

    // the journal survives a reload
    let (mut kb, report) = KnowledgeBase::load(tmp.path()).unwrap();
    assert_eq!(report.pending, 1);
    assert_eq!(kb.apply_validated(&id, 5).unwrap(), ApplyOutcome::Inserted);
    let (hit, sim) = kb.nearest_template(&embed("disk quota exceeded on <*>").unwrap()).unwrap();
    assert!((sim - 1.0).abs() < 1e-12);
    assert_eq!(kb.cause_for(&hit.template_id), Some("disk full"));

    let (kb, _) = KnowledgeBase::load(tmp.path()).unwrap();
    let s = kb.stats();
    assert_eq!((s.validated_templates, s.pending), (1, 0));
    assert!(kb.verify().is_empty());
}

#[test]
fn approving_the_same_knowledge_twice_merges() {
    let mut kb = KnowledgeBase::in_memory();
    let a = kb.enqueue_validation(template("write failed for <*>")).unwrap();
    kb.apply_validated(&a, 1).unwrap();
    let b = kb.enqueue_validation(template("write failed for <*>")).unwrap();
    assert_ne!(kb.apply_validated(&b, 2).unwrap(), ApplyOutcome::Inserted);
    assert_eq!(kb.stats().templates, 1);
    assert!(matches!(kb.apply_validated("nope", 3), Err(KbError::UnknownPending(_))));
}

#[test]
fn malformed_lines_are_skipped_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let (mut kb, _) = KnowledgeBase::init(tmp.path()).unwrap();
    kb.seed_template("node <*> joined", None).unwrap();
    kb.save().unwrap();
    let path = tmp.path().join(TEMPLATES_FILE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{not json\n");
    fs::write(&path, text).unwrap();
    let (kb, report) = KnowledgeBase::load(tmp.path()).unwrap();
    assert_eq!(report.diagnostics.len(), 1);
    assert_eq!(report.diagnostics[0].file, TEMPLATES_FILE);
    assert_eq!(kb.stats().templates, 1);
}

#[test]
fn missing_directory_is_an_error() {
    assert!(matches!(KnowledgeBase::load(std::path::Path::new("/nonexistent/kb")), Err(KbError::MissingDirectory(_))));
}

#[test]
fn priors_map_onto_the_event_order() {
    let mut kb = KnowledgeBase::in_memory();
    kb.seed_prior("a", "b", PriorFamily::Intra);
    kb.seed_prior("b", "c", PriorFamily::Inter);
    kb.seed_prior("a", "zzz", PriorFamily::Intra);
    let order: Vec<String> = ["c", "b", "a"].iter().map(|s| s.to_string()).collect();
    let p = kb.priors_for(&order);
    assert_eq!(p.intra, vec![(2, 1)]);
    assert_eq!(p.inter, vec![(1, 0)]);
    assert_eq!(p.skipped, 1);
}

#[test]
fn case_search_ranks_by_similarity() {
    let mut kb = KnowledgeBase::in_memory();
    kb.seed_case("c1", "disk usage high write timeout", "disk full", "purge", vec![]).unwrap();
    kb.seed_case("c2", "network link down heartbeat lost", "link down", "reset nic", vec![]).unwrap();
    let hits = kb.search_cases(&embed("disk usage high write timeout").unwrap(), 2);
    assert_eq!(hits[0].case_id, "c1");
    assert!(hits[0].similarity > hits[1].similarity);
}

#[test]
fn shared_snapshots_are_isolated_from_later_writes() {
    let shared = SharedKnowledgeBase::new(KnowledgeBase::in_memory());
    let before = shared.snapshot();
    shared.update(|kb| kb.seed_template("node <*> left", None).map(|_| ())).unwrap();
    assert_eq!(before.stats().templates, 0);
    assert_eq!(shared.snapshot().stats().templates, 1);
}

proptest! {
    #[test]
    fn cosine_is_symmetric_and_bounded(a in "[a-z ]{3,40}", b in "[a-z ]{3,40}") {
        prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
        let (ea, eb) = (embed(&a).unwrap(), embed(&b).unwrap());
        let s = cosine_sim(&ea, &eb).unwrap();
        prop_assert!((s - cosine_sim(&eb, &ea).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((cosine_sim(&ea, &ea).unwrap() - 1.0).abs() < 1e-9);
    }
}

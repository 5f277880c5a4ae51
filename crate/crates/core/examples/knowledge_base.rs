//! Creates an on-disk knowledge base, queues knowledge for validation,
//! approves it, and checks integrity.
//!
//! cargo run --example knowledge_base

use edgeheal::embedding::embed;
use edgeheal::kb::{KnowledgeBase, PendingEntry, PriorFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("edgeheal-kb-{}", std::process::id()));
    let (mut kb, _) = KnowledgeBase::init(&dir)?;

    let disk = "disk usage at <*> percent";
    let write = "write timeout on <*> after <*> ms";
    for text in [disk, write] {
        kb.enqueue_validation(PendingEntry::Template { text: text.into(), cause_label: Some("disk exhaustion".into()) })?;
    }
    println!("pending before approval: {}", kb.stats().pending);
    kb.approve_all(0)?;

    let ids: Vec<String> = kb.validated_templates().map(|t| t.template_id.clone()).collect();
    kb.enqueue_validation(PendingEntry::Prior {
        src_template_id: ids[0].clone(),
        dst_template_id: ids[1].clone(),
        family: PriorFamily::Intra,
    })?;
    kb.enqueue_validation(PendingEntry::Case {
        indexed_text: format!("{disk} {write}"),
        root_cause_label: "disk exhaustion".into(),
        repair_action: "expand volume and purge temp files".into(),
        template_refs: ids.clone(),
    })?;
    kb.approve_all(0)?;

    let (kb, report) = KnowledgeBase::load(&dir)?;
    println!("reloaded: {:?}", kb.stats());
    println!("skipped lines: {}", report.diagnostics.len());
    if let Some((t, sim)) = kb.nearest_template(&embed("disk usage at <*> percent")?) {
        println!("nearest template: {} ({sim:.3})", t.text);
    }
    for hit in kb.search_cases(&embed("write timeout disk usage")?, 3) {
        println!("case {} {:.3} -> {}", hit.case_id, hit.similarity, hit.repair_action);
    }
    println!("verify mismatches: {:?}", kb.verify());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

//! Recovers a known VAR(1) structure with and without priors, then learns a
//! graph from one parsed synthetic incident.
//!
//! cargo run --release --example discover_causal_graph

use edgeheal::eval::{generate_suite, random_var_sem, simulate, structure_score, SuiteConfig};
use edgeheal::kb::PriorPairs;
use edgeheal::model::MockClient;
use edgeheal::perception::{parse_stream, MaskRuleSet, RouterConfig, TemplateCache};
use edgeheal::reasoning::{build_prior_masks, discover, solve, LaggedData, PenaltySet, PriorMasks, PruneConfig, ReasoningConfig, SolveConfig};

fn main() {
    let sem = random_var_sem(6, 3);
    let data = LaggedData::from_matrix(&simulate(&sem, 200, 103)).expect("enough rows");
    let pen = PenaltySet::default();
    let pairs = PriorPairs { intra: sem.intra_edges(), inter: sem.inter_edges(), skipped: 0 };
    for (name, masks) in [("priors", build_prior_masks(&pairs, 6, &pen)), ("background", PriorMasks::background(6, &pen))] {
        let r = solve(&data, &masks, &SolveConfig::default());
        let theta = PruneConfig::default().theta_prune;
        let cut = |m: &nalgebra::DMatrix<f64>| m.map(|v| if v.abs() < theta { 0.0 } else { v });
        let s = structure_score(&sem, &cut(&r.w), &cut(&r.a));
        println!("{name:>10}: F1 {:.3}, reversed {}, h {:.1e}, {} outer iterations", s.f1, s.reversed, r.h, r.outer_iterations);
    }

    let suite = generate_suite(&SuiteConfig { incidents: 1, ..Default::default() });
    let case = &suite.cases[0];
    let mut cache = TemplateCache::new(1000);
    let parsed = parse_stream(&case.logs, &mut cache, &suite.kb, &MockClient::default(), &MaskRuleSet::default(), &RouterConfig::default());
    let (graph, _) = discover(&parsed.events, &suite.kb, &ReasoningConfig::default(), true).expect("enough windows");
    println!("\n{}: {} nodes, {} edges", case.id, graph.nodes.len(), graph.edge_count());
    for (rank, e) in graph.ranked_edges().iter().take(5).enumerate() {
        let lag = e.lag.map_or(String::new(), |l| format!(" (lag {l})"));
        println!("{:>2}. {:+.3} {} -> {}{lag}", rank + 1, e.weight, graph.label(&graph.nodes[e.src]), graph.label(&graph.nodes[e.dst]));
    }
    println!("annotated relation ranked {:?}", graph.rank_of(&case.root_relation.0, &case.root_relation.1));
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::reasoning::CausalGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavigatorConfig {
    pub top_k: usize,
    pub max_depth: usize,
    pub paths_per_root: usize,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        Self { top_k: 3, max_depth: 4, paths_per_root: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub template_id: String,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePath {
    pub nodes: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub src: String,
    pub dst: String,
    pub w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalEvidence {
    pub candidate_roots: Vec<Candidate>,
    pub key_paths: Vec<EvidencePath>,
    pub upstream_relations: Vec<Relation>,
}

impl CausalEvidence {
    pub fn is_candidate(&self, template_id: &str) -> bool {
        self.candidate_roots.iter().any(|c| c.template_id == template_id)
    }
}

/// Ranks root candidates by outgoing minus incoming |weight| and collects
/// their strongest outgoing paths and incident edges. Paths are grouped by
/// candidate rank, strongest first within each candidate.
pub fn navigate(graph: &CausalGraph, cfg: &NavigatorConfig) -> CausalEvidence {
    let n = graph.nodes.len();
    let ranked = graph.ranked_edges();
    let mut score = vec![0.0f64; n];
    // strongest |weight| per ordered pair over both families, self-loops excluded
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for e in &ranked {
        if e.src >= n || e.dst >= n {
            continue;
        }
        score[e.src] += e.weight.abs();
        score[e.dst] -= e.weight.abs();
        if e.src != e.dst {
            let slot = adj[e.src].entry(e.dst).or_insert(0.0);
            *slot = slot.max(e.weight.abs());
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then_with(|| graph.nodes[a].cmp(&graph.nodes[b])));
    order.truncate(cfg.top_k);

    let mut ev = CausalEvidence::default();
    for &c in &order {
        let id = &graph.nodes[c];
        ev.candidate_roots.push(Candidate { template_id: id.clone(), label: graph.label(id).to_string(), score: score[c] });
        let mut paths = Vec::new();
        let mut stack = vec![c];
        maximal_paths(&adj, &mut stack, 1.0, cfg.max_depth, &mut paths);
        paths.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (nodes, s) in paths.into_iter().take(cfg.paths_per_root) {
            ev.key_paths.push(EvidencePath { nodes: nodes.iter().map(|&i| graph.nodes[i].clone()).collect(), score: s });
        }
    }

    for e in &ranked {
        if order.contains(&e.src) || order.contains(&e.dst) {
            ev.upstream_relations.push(Relation {
                src: graph.nodes[e.src].clone(),
                dst: graph.nodes[e.dst].clone(),
                w: e.weight,
                lag: e.lag,
            });
        }
    }
    ev
}

fn maximal_paths(
    adj: &[BTreeMap<usize, f64>],
    stack: &mut Vec<usize>,
    score: f64,
    depth_left: usize,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    let v = *stack.last().expect("path is never empty");
    let mut extended = false;
    if depth_left > 0 {
        for (&u, &w) in &adj[v] {
            if stack.contains(&u) {
                continue;
            }
            extended = true;
            stack.push(u);
            maximal_paths(adj, stack, score * w, depth_left - 1, out);
            stack.pop();
        }
    }
    if !extended && stack.len() > 1 {
        out.push((stack.clone(), score));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoning::{InterEdge, IntraEdge};

    fn graph(nodes: &[&str], intra: &[(&str, &str, f64)]) -> CausalGraph {
        CausalGraph {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            intra: intra.iter().map(|&(s, d, w)| IntraEdge { src: s.into(), dst: d.into(), w }).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn chain_root_and_path() {
        let g = graph(&["a", "b", "c"], &[("a", "b", 0.9), ("b", "c", 0.8)]);
        let ev = navigate(&g, &NavigatorConfig::default());
        assert_eq!(ev.candidate_roots[0].template_id, "a");
        assert!((ev.candidate_roots[0].score - 0.9).abs() < 1e-12);
        assert_eq!(ev.key_paths[0].nodes, vec!["a", "b", "c"]);
        assert!((ev.key_paths[0].score - 0.72).abs() < 1e-12);
    }

    #[test]
    fn isolated_node() {
        let g = graph(&["x"], &[]);
        let ev = navigate(&g, &NavigatorConfig::default());
        assert_eq!(ev.candidate_roots, vec![Candidate { template_id: "x".into(), label: "x".into(), score: 0.0 }]);
        assert!(ev.key_paths.is_empty());
    }

    #[test]
    fn symmetric_components_tie_break_by_id() {
        let g = graph(&["q", "r", "m", "n"], &[("q", "r", 0.5), ("m", "n", 0.5)]);
        let ev = navigate(&g, &NavigatorConfig { top_k: 2, ..Default::default() });
        let ids: Vec<&str> = ev.candidate_roots.iter().map(|c| c.template_id.as_str()).collect();
        assert_eq!(ids, vec!["m", "q"]);
    }

    #[test]
    fn empty_graph_has_no_candidates() {
        assert!(navigate(&CausalGraph::default(), &NavigatorConfig::default()).candidate_roots.is_empty());
    }

    #[test]
    fn depth_is_bounded_and_paths_follow_inter_edges() {
        let names = ["n0", "n1", "n2", "n3", "n4", "n5", "n6"];
        let chain: Vec<(&str, &str, f64)> = names.windows(2).map(|p| (p[0], p[1], 0.9)).collect();
        let mut g = graph(&names, &chain);
        g.inter.push(InterEdge { src: "n0".into(), dst: "n0".into(), w: 0.7, lag: 1 });
        let ev = navigate(&g, &NavigatorConfig { top_k: 1, ..Default::default() });
        assert_eq!(ev.key_paths[0].nodes.len(), 5);
        assert!(ev.upstream_relations.iter().any(|r| r.lag == Some(1)));
    }
}

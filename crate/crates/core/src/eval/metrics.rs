use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::RcaReport;
use crate::reasoning::CausalGraph;
use crate::text::norm;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("length mismatch: {preds} predictions vs {truths} truths")]
pub struct LengthMismatch {
    pub preds: usize,
    pub truths: usize,
}

/// Fraction of predictions equal to their truth after normalization. 0 when empty.
pub fn parsing_accuracy<P: AsRef<str>, T: AsRef<str>>(preds: &[P], truths: &[T]) -> Result<f64, LengthMismatch> {
    if preds.len() != truths.len() {
        return Err(LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    let hits = preds.iter().zip(truths).filter(|(p, t)| norm(p.as_ref()) == norm(t.as_ref())).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Position of the true relation among the graph's ranked edges, or the
/// edge count plus one on a miss. Returns `(rank, hit)`.
pub fn relation_rank(graph: &CausalGraph, src: &str, dst: &str) -> (usize, bool) {
    match graph.rank_of(src, dst) {
        Some(r) => (r, true),
        None => (graph.edge_count() + 1, false),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AvgRank {
    pub mean: f64,
    pub ranks: Vec<usize>,
    pub misses: usize,
}

/// Mean rank over cases; each truth is a `(src, dst)` pair of template ids.
pub fn avg_rank(graphs: &[CausalGraph], truths: &[(String, String)]) -> Result<AvgRank, LengthMismatch> {
    if graphs.len() != truths.len() {
        return Err(LengthMismatch { preds: graphs.len(), truths: truths.len() });
    }
    let mut out = AvgRank::default();
    for (g, (s, d)) in graphs.iter().zip(truths) {
        let (r, hit) = relation_rank(g, s, d);
        out.ranks.push(r);
        out.misses += usize::from(!hit);
    }
    out.mean = mean_rank(&out.ranks);
    Ok(out)
}

pub fn mean_rank(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        0.0
    } else {
        ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
    }
}

fn same(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// `(rca, e2e)`: share of correct root causes, and of correct cause-and-action pairs.
/// Each truth is `(root_cause_label, action)`.
pub fn rca_and_e2e(reports: &[RcaReport], truths: &[(String, String)]) -> Result<(f64, f64), LengthMismatch> {
    let pairs: Vec<(&str, &str)> = reports.iter().map(|r| (r.root_cause.as_str(), r.action.as_str())).collect();
    rca_and_e2e_labels(&pairs, truths)
}

pub fn rca_and_e2e_labels(preds: &[(&str, &str)], truths: &[(String, String)]) -> Result<(f64, f64), LengthMismatch> {
    if preds.len() != truths.len() {
        return Err(LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    if preds.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (mut cause, mut both) = (0usize, 0usize);
    for ((pc, pa), (tc, ta)) in preds.iter().zip(truths) {
        if same(pc, tc) {
            cause += 1;
            if same(pa, ta) {
                both += 1;
            }
        }
    }
    let n = preds.len() as f64;
    Ok((cause as f64 / n, both as f64 / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoning::IntraEdge;

    #[test]
    fn pa_examples() {
        assert_eq!(parsing_accuracy(&["t", "t", "t"], &["t", "t", "t"]), Ok(1.0));
        assert!((parsing_accuracy(&["t", "t", "u"], &["t", "t", "t"]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(parsing_accuracy(&["A  <:*:>"], &["a <*>"]), Ok(1.0));
        assert!(parsing_accuracy(&["t"], &["t", "t"]).is_err());
    }

    fn five_edges() -> CausalGraph {
        let nodes: Vec<String> = (0..6).map(|i| format!("n{i}")).collect();
        let intra = (0..5)
            .map(|i| IntraEdge { src: nodes[i].clone(), dst: nodes[i + 1].clone(), w: 0.9 - 0.1 * i as f64 })
            .collect();
        CausalGraph { nodes, intra, ..Default::default() }
    }

    #[test]
    fn rank_hit_and_miss() {
        let g = five_edges();
        assert_eq!(relation_rank(&g, "n0", "n1"), (1, true));
        assert_eq!(relation_rank(&g, "n2", "n3"), (3, true));
        assert_eq!(relation_rank(&g, "n5", "n0"), (6, false));
        assert_eq!(relation_rank(&CausalGraph::default(), "a", "b"), (1, false));
    }

    #[test]
    fn mean_of_ranks() {
        assert_eq!(mean_rank(&[1, 2, 3]), 2.0);
        let t = |s: &str, d: &str| (s.to_string(), d.to_string());
        let g = five_edges();
        let r = avg_rank(&[g.clone(), g], &[t("n0", "n1"), t("x", "y")]).unwrap();
        assert_eq!(r.ranks, vec![1, 6]);
        assert_eq!(r.misses, 1);
        assert_eq!(r.mean, 3.5);
    }

    #[test]
    fn conjunctive_labels() {
        let t = |a: &str, b: &str| (a.to_string(), b.to_string());
        assert_eq!(rca_and_e2e_labels(&[("x", "y")], &[t("X ", "y")]), Ok((1.0, 1.0)));
        assert_eq!(rca_and_e2e_labels(&[("x", "y"), ("p", "wrong")], &[t("x", "y"), t("p", "q")]), Ok((1.0, 0.5)));
        assert_eq!(rca_and_e2e_labels(&[("x", "y")], &[t("z", "y")]), Ok((0.0, 0.0)));
    }
}

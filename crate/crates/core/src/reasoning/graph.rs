use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::masks::{PenaltySet, PriorMasks};
use super::solver::SolveConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    pub theta_prune: f64,
    /// Weights in `[theta, band * theta)` are damped.
    pub damp_band: f64,
    pub damp_factor: f64,
    /// Bidirectional pairs closer than this ratio keep only one direction.
    pub resolve_ratio: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { theta_prune: 0.05, damp_band: 1.1, damp_factor: 0.9, resolve_ratio: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraEdge {
    pub src: String,
    pub dst: String,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterEdge {
    pub src: String,
    pub dst: String,
    pub w: f64,
    pub lag: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphConfigEcho {
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub theta_prune: f64,
    pub penalties: PenaltySet,
    pub use_priors: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl GraphConfigEcho {
    pub fn from_configs(solve: &SolveConfig, prune: &PruneConfig, penalties: &PenaltySet, use_priors: bool) -> Self {
        Self {
            lambda_w: solve.lambda_w,
            lambda_a: solve.lambda_a,
            theta_prune: prune.theta_prune,
            penalties: *penalties,
            use_priors,
            config_hash: None,
        }
    }
}

/// Pruned graph over template ids. Intra edges form a DAG; inter edges have lag 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    pub intra: Vec<IntraEdge>,
    pub inter: Vec<InterEdge>,
    #[serde(default)]
    pub config: GraphConfigEcho,
}

/// An edge in weight order, endpoints as node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    /// `None` for intra edges.
    pub lag: Option<u32>,
}

impl CausalGraph {
    pub fn edge_count(&self) -> usize {
        self.intra.len() + self.inter.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn label<'a>(&'a self, id: &'a str) -> &'a str {
        self.labels.get(id).map(String::as_str).unwrap_or(id)
    }

    /// Every edge, by descending |weight| then (src, dst) index, intra before inter.
    pub fn ranked_edges(&self) -> Vec<RankedEdge> {
        let idx = |id: &str| self.index_of(id).unwrap_or(usize::MAX);
        let mut edges: Vec<RankedEdge> = self
            .intra
            .iter()
            .map(|e| RankedEdge { src: idx(&e.src), dst: idx(&e.dst), weight: e.w, lag: None })
            .chain(self.inter.iter().map(|e| RankedEdge { src: idx(&e.src), dst: idx(&e.dst), weight: e.w, lag: Some(e.lag) }))
            .collect();
        edges.sort_by(|x, y| {
            y.weight
                .abs()
                .total_cmp(&x.weight.abs())
                .then((x.src, x.dst).cmp(&(y.src, y.dst)))
                .then(x.lag.is_some().cmp(&y.lag.is_some()))
        });
        edges
    }

    /// 1-based position of `src -> dst` (either family) in [`Self::ranked_edges`].
    pub fn rank_of(&self, src: &str, dst: &str) -> Option<usize> {
        let (s, d) = (self.index_of(src)?, self.index_of(dst)?);
        self.ranked_edges().iter().position(|e| e.src == s && e.dst == d).map(|p| p + 1)
    }

    pub fn intra_is_acyclic(&self) -> bool {
        let n = self.nodes.len();
        let edges: Vec<(usize, usize)> =
            self.intra.iter().filter_map(|e| Some((self.index_of(&e.src)?, self.index_of(&e.dst)?))).collect();
        topological_ok(n, &edges)
    }
}

fn topological_ok(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0usize; n];
    let mut out = vec![Vec::new(); n];
    for &(s, d) in edges {
        indeg[d] += 1;
        out[s].push(d);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &u in &out[v] {
            indeg[u] -= 1;
            if indeg[u] == 0 {
                queue.push_back(u);
            }
        }
    }
    seen == n
}

fn reaches(w: &DMatrix<f64>, from: usize, to: usize) -> bool {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        for u in 0..n {
            if w[(v, u)] != 0.0 && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    false
}

fn threshold(m: &mut DMatrix<f64>, cfg: &PruneConfig) {
    let theta = cfg.theta_prune;
    for v in m.iter_mut() {
        if v.abs() < theta {
            *v = 0.0;
        }
    }
    for v in m.iter_mut() {
        if v.abs() < cfg.damp_band * theta {
            *v *= cfg.damp_factor;
        }
    }
    for v in m.iter_mut() {
        if v.abs() < theta {
            *v = 0.0;
        }
    }
}

/// Threshold, damp, resolve near-symmetric pairs by prior support, then break
/// any remaining intra cycles by dropping their weakest edge.
pub fn prune_and_resolve(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    masks: &PriorMasks,
    event_order: &[String],
    cfg: &PruneConfig,
) -> CausalGraph {
    let d = w.nrows();
    let (mut w, mut a) = (w.clone(), a.clone());
    threshold(&mut w, cfg);
    threshold(&mut a, cfg);
    w.fill_diagonal(0.0);

    for i in 0..d {
        for j in i + 1..d {
            let (fwd, back) = (w[(i, j)].abs(), w[(j, i)].abs());
            if fwd == 0.0 || back == 0.0 || fwd.max(back) / fwd.min(back) >= cfg.resolve_ratio {
                continue;
            }
            let keep_forward = masks.w_class[(i, j)]
                .cmp(&masks.w_class[(j, i)])
                .then(fwd.total_cmp(&back))
                .is_ge();
            if keep_forward {
                w[(j, i)] = 0.0;
            } else {
                w[(i, j)] = 0.0;
            }
        }
    }

    loop {
        let mut weakest: Option<(f64, usize, usize)> = None;
        for i in 0..d {
            for j in 0..d {
                let v = w[(i, j)].abs();
                if v == 0.0 || weakest.is_some_and(|(b, _, _)| v >= b) {
                    continue;
                }
                if reaches(&w, j, i) {
                    weakest = Some((v, i, j));
                }
            }
        }
        match weakest {
            Some((_, i, j)) => w[(i, j)] = 0.0,
            None => break,
        }
    }

    let mut g = CausalGraph { nodes: event_order.to_vec(), ..Default::default() };
    for i in 0..d {
        for j in 0..d {
            if w[(i, j)] != 0.0 {
                g.intra.push(IntraEdge { src: event_order[i].clone(), dst: event_order[j].clone(), w: w[(i, j)] });
            }
            if a[(i, j)] != 0.0 {
                g.inter.push(InterEdge { src: event_order[i].clone(), dst: event_order[j].clone(), w: a[(i, j)], lag: 1 });
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::PriorPairs;
    use crate::reasoning::masks::build_prior_masks;

    fn order(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("t{i}")).collect()
    }

    fn bg(d: usize) -> PriorMasks {
        PriorMasks::background(d, &PenaltySet::default())
    }

    #[test]
    fn everything_below_threshold_is_empty() {
        let w = DMatrix::from_element(3, 3, 0.01);
        let g = prune_and_resolve(&w, &w, &bg(3), &order(3), &PruneConfig::default());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn near_threshold_weight_is_damped_away() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.05 * 0.05;
        let g = prune_and_resolve(&w, &DMatrix::zeros(2, 2), &bg(2), &order(2), &PruneConfig::default());
        assert!(g.intra.is_empty());
    }

    #[test]
    fn prior_direction_wins_close_pair() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 0.45;
        w[(1, 0)] = 0.5;
        let pairs = PriorPairs { intra: vec![(0, 1)], ..Default::default() };
        let masks = build_prior_masks(&pairs, 2, &PenaltySet::default());
        let g = prune_and_resolve(&w, &DMatrix::zeros(2, 2), &masks, &order(2), &PruneConfig::default());
        assert_eq!(g.intra, vec![IntraEdge { src: "t0".into(), dst: "t1".into(), w: 0.45 }]);
    }

    #[test]
    fn without_priors_larger_weight_wins() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 0.45;
        w[(1, 0)] = 0.5;
        let g = prune_and_resolve(&w, &DMatrix::zeros(2, 2), &bg(2), &order(2), &PruneConfig::default());
        assert_eq!(g.intra.len(), 1);
        assert_eq!(g.intra[0].src, "t1");
    }

    #[test]
    fn three_cycle_loses_weakest_edge() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 0.9;
        w[(1, 2)] = 0.3;
        w[(2, 0)] = 0.6;
        let g = prune_and_resolve(&w, &DMatrix::zeros(3, 3), &bg(3), &order(3), &PruneConfig::default());
        assert!(g.intra_is_acyclic());
        assert_eq!(g.intra.len(), 2);
        assert!(!g.intra.iter().any(|e| e.src == "t1" && e.dst == "t2"));
    }

    #[test]
    fn ranking_and_lookup() {
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 0.5;
        let mut a = DMatrix::zeros(3, 3);
        a[(2, 2)] = -0.8;
        a[(1, 2)] = 0.5;
        let g = prune_and_resolve(&w, &a, &bg(3), &order(3), &PruneConfig::default());
        assert_eq!(g.rank_of("t2", "t2"), Some(1));
        assert_eq!(g.rank_of("t0", "t1"), Some(2));
        assert_eq!(g.rank_of("t1", "t2"), Some(3));
        assert_eq!(g.rank_of("t1", "t0"), None);
    }
}

//! Reasoning: windowed event counts to a sparse, prior-constrained causal graph.
//!
//! `W` holds intra-slice weights (row = cause, column = effect, constrained to
//! a DAG) and `A` holds lag-1 inter-slice weights. Both share the event order
//! of the [`EventMatrix`] they were learned from.

mod acyclicity;
mod graph;
mod masks;
mod objective;
mod solver;
mod window;

pub use acyclicity::{acyclicity, acyclicity_dense, expm};
pub use graph::{prune_and_resolve, CausalGraph, GraphConfigEcho, InterEdge, IntraEdge, PruneConfig, RankedEdge};
pub use masks::{build_prior_masks, MaskClass, Penalties, PenaltySet, PriorMasks};
pub use objective::{loss_and_grad, LaggedData, Objective, VARIANCE_FLOOR};
pub use solver::{solve, SolveConfig, SolveFlag, SolveResult};
pub use window::{aggregate_windows, EventMatrix, WindowConfig, WindowError};

use crate::kb::KnowledgeBase;

/// Settings for one end-to-end reasoning run.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReasoningConfig {
    pub window: WindowConfig,
    pub penalties: PenaltySet,
    pub solve: SolveConfig,
    pub prune: PruneConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ReasoningError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("insufficient windows: need at least 2, got {0}")]
    InsufficientWindows(usize),
}

/// Events to graph: aggregate, build masks (all background when `use_priors`
/// is false), solve, prune.
pub fn discover(
    events: &[crate::perception::StructuredEvent],
    kb: &KnowledgeBase,
    cfg: &ReasoningConfig,
    use_priors: bool,
) -> Result<(CausalGraph, SolveResult), ReasoningError> {
    let matrix = aggregate_windows(events, &cfg.window)?;
    if matrix.rows() < 2 {
        return Err(ReasoningError::InsufficientWindows(matrix.rows()));
    }
    let masks = if use_priors {
        build_prior_masks(&kb.priors_for(&matrix.event_order), matrix.dim(), &cfg.penalties)
    } else {
        PriorMasks::background(matrix.dim(), &cfg.penalties)
    };
    let data = LaggedData::from_matrix(&matrix.to_dmatrix()).expect("at least two rows");
    let result = solve(&data, &masks, &cfg.solve);
    let mut graph = prune_and_resolve(&result.w, &result.a, &masks, &matrix.event_order, &cfg.prune);
    for id in &matrix.event_order {
        let label = kb
            .template(id)
            .map(|t| t.text.clone())
            .or_else(|| events.iter().find(|e| &e.template_id == id).map(|e| e.template_text.clone()));
        if let Some(label) = label {
            graph.labels.insert(id.clone(), label);
        }
    }
    graph.config = GraphConfigEcho::from_configs(&cfg.solve, &cfg.prune, &cfg.penalties, use_priors);
    Ok((graph, result))
}

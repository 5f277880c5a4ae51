use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kb::PriorPairs;

/// Penalty multipliers for one matrix family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Penalties {
    pub prior: f64,
    pub rev: f64,
    pub bg: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self { prior: 0.1, rev: 10.0, bg: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySet {
    pub w: Penalties,
    pub a: Penalties,
}

/// Which case of the mask definition an entry fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskClass {
    Reverse,
    Background,
    Prior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorMasks {
    pub w_mask: DMatrix<f64>,
    pub a_mask: DMatrix<f64>,
    pub w_class: DMatrix<MaskClass>,
    pub a_class: DMatrix<MaskClass>,
    pub intra_pairs: Vec<(usize, usize)>,
    pub inter_pairs: Vec<(usize, usize)>,
}

fn family(d: usize, pairs: &[(usize, usize)], p: &Penalties) -> (DMatrix<f64>, DMatrix<MaskClass>) {
    let mut supported = DMatrix::from_element(d, d, false);
    for &(i, j) in pairs {
        if i < d && j < d {
            supported[(i, j)] = true;
        }
    }
    let class = DMatrix::from_fn(d, d, |i, j| {
        if supported[(i, j)] {
            MaskClass::Prior
        } else if supported[(j, i)] {
            MaskClass::Reverse
        } else {
            MaskClass::Background
        }
    });
    let mask = class.map(|c| match c {
        MaskClass::Prior => p.prior,
        MaskClass::Reverse => p.rev,
        MaskClass::Background => p.bg,
    });
    (mask, class)
}

/// Builds both penalty masks from prior pairs given as indices into the event order.
pub fn build_prior_masks(pairs: &PriorPairs, d: usize, penalties: &PenaltySet) -> PriorMasks {
    let (w_mask, w_class) = family(d, &pairs.intra, &penalties.w);
    let (a_mask, a_class) = family(d, &pairs.inter, &penalties.a);
    PriorMasks {
        w_mask,
        a_mask,
        w_class,
        a_class,
        intra_pairs: pairs.intra.clone(),
        inter_pairs: pairs.inter.clone(),
    }
}

impl PriorMasks {
    /// Prior-free masks: every entry is the background penalty.
    pub fn background(d: usize, penalties: &PenaltySet) -> Self {
        build_prior_masks(&PriorPairs::default(), d, penalties)
    }

    pub fn dim(&self) -> usize {
        self.w_mask.nrows()
    }
}

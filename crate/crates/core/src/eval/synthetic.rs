//! Linear VAR(1) structural models with known weights, used as the oracle
//! for structure recovery.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// `x_t = x_t W + x_{t-1} A + e_t`, rows as time.
#[derive(Debug, Clone, PartialEq)]
pub struct VarSem {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl VarSem {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn intra_edges(&self) -> Vec<(usize, usize)> {
        support(&self.w)
    }

    pub fn inter_edges(&self) -> Vec<(usize, usize)> {
        support(&self.a)
    }
}

fn support(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Random tree-shaped DAG rooted at node 0 plus a sparse lag structure.
///
/// Intra weights have magnitude in [0.5, 1.0) with random sign; node 0
/// persists across slices and drives one lagged effect.
pub fn random_var_sem(d: usize, seed: u64) -> VarSem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(d, d);
    for j in 1..d {
        let parent = rng.random_range(0..j);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        w[(parent, j)] = sign * rng.random_range(0.5..1.0);
    }
    let mut a = DMatrix::zeros(d, d);
    a[(0, 0)] = 0.4;
    if d > 2 {
        let target = rng.random_range(1..d);
        a[(0, target)] = rng.random_range(0.3..0.5);
    }
    VarSem { w, a }
}

/// `m` rows of data after `burn_in` discarded rows, unit Gaussian noise.
pub fn simulate(sem: &VarSem, m: usize, seed: u64) -> DMatrix<f64> {
    const BURN_IN: usize = 50;
    let d = sem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = (DMatrix::identity(d, d) - &sem.w).try_inverse().expect("DAG weights give an invertible I - W");
    let mut prev = DMatrix::zeros(1, d);
    let mut out = DMatrix::zeros(m, d);
    for t in 0..m + BURN_IN {
        let e = DMatrix::from_fn(1, d, |_, _| StandardNormal.sample(&mut rng));
        let x: DMatrix<f64> = (&prev * &sem.a + e) * &inv;
        if t >= BURN_IN {
            out.row_mut(t - BURN_IN).copy_from(&x);
        }
        prev = x;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True intra edges recovered only in the opposite direction.
    pub reversed: usize,
    pub edges: usize,
}

/// Support comparison over both families (intra and lagged entries are distinct).
pub fn structure_score(truth: &VarSem, w: &DMatrix<f64>, a: &DMatrix<f64>) -> StructureScore {
    let (tw, ta) = (truth.intra_edges(), truth.inter_edges());
    let (ew, ea) = (support(w), support(a));
    let tp = ew.iter().filter(|e| tw.contains(e)).count() + ea.iter().filter(|e| ta.contains(e)).count();
    let predicted = ew.len() + ea.len();
    let actual = tw.len() + ta.len();
    let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
    let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    let reversed = tw.iter().filter(|&&(i, j)| w[(j, i)] != 0.0 && w[(i, j)] == 0.0).count();
    StructureScore { precision, recall, f1, reversed, edges: predicted }
}

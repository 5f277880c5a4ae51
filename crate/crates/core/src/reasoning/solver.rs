use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::acyclicity::acyclicity;
use super::masks::PriorMasks;
use super::objective::{LaggedData, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub h_tol: f64,
    pub rho_init: f64,
    pub rho_mult: f64,
    pub rho_max: f64,
    /// `rho` grows when the new `h` exceeds this fraction of the previous one.
    pub h_progress: f64,
    /// Inner loop stops once no entry moves by more than this.
    pub inner_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            lambda_w: 0.1,
            lambda_a: 0.1,
            max_outer: 100,
            max_inner: 500,
            h_tol: 1e-8,
            rho_init: 1.0,
            rho_mult: 10.0,
            rho_max: 1e16,
            h_progress: 0.75,
            inner_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveFlag {
    /// `rho` passed its cap before `h` reached tolerance.
    NonConvergence,
    /// Outer iterations ran out before `h` reached tolerance.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub h: f64,
    pub rho: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub flag: Option<SolveFlag>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.flag.is_none()
    }
}

/// Masked, L1-penalized lag-1 structure learning under `h(W) = 0`.
pub fn solve(data: &LaggedData, masks: &PriorMasks, cfg: &SolveConfig) -> SolveResult {
    let d = data.dim();
    assert_eq!(masks.dim(), d, "masks must follow the data's event order");
    let mut w = DMatrix::zeros(d, d);
    let mut a = DMatrix::zeros(d, d);
    let (mut alpha, mut rho) = (0.0, cfg.rho_init);
    let mut h_prev = f64::INFINITY;
    let mut h = 0.0;
    let mut inner_total = 0;
    let mut flag = Some(SolveFlag::IterationCap);
    let mut outer = 0;
    let mut step = 1.0;
    while outer < cfg.max_outer {
        outer += 1;
        let obj = Objective { data, masks, lambda_w: cfg.lambda_w, lambda_a: cfg.lambda_a, alpha, rho };
        inner_total += proximal_descent(&obj, &mut w, &mut a, &mut step, cfg);
        h = acyclicity(&w).0;
        if h <= cfg.h_tol {
            flag = None;
            break;
        }
        if h > cfg.h_progress * h_prev {
            rho *= cfg.rho_mult;
        }
        alpha += rho * h;
        h_prev = h;
        if rho >= cfg.rho_max {
            flag = Some(SolveFlag::NonConvergence);
            break;
        }
    }
    if let Some(f) = flag {
        log::warn!("solver stopped without reaching h <= {:e}: {f:?} (h = {h:e}, rho = {rho:e})", cfg.h_tol);
    }
    SolveResult { w, a, h, rho, outer_iterations: outer, inner_iterations: inner_total, flag }
}

/// Accelerated proximal gradient with backtracking and restart on ascent.
/// `step` carries the last accepted step size between calls.
fn proximal_descent(
    obj: &Objective<'_>,
    w: &mut DMatrix<f64>,
    a: &mut DMatrix<f64>,
    step: &mut f64,
    cfg: &SolveConfig,
) -> usize {
    let mut t = (*step * 1.5).min(1.0);
    let mut f_x = obj.smooth(w, a) + obj.penalty(w, a);
    let (mut yw, mut ya) = (w.clone(), a.clone());
    let mut momentum = 1.0f64;
    let mut iters = 0;
    while iters < cfg.max_inner {
        iters += 1;
        let (f_y, gw, ga, _) = obj.smooth_and_grad(&yw, &ya);
        let mut backtracked = false;
        let (nw, na, f_new) = loop {
            let mut nw = &yw - &gw * t;
            let mut na = &ya - &ga * t;
            obj.prox(&mut nw, &mut na, t);
            let f_new = obj.smooth(&nw, &na);
            let (dw, da) = (&nw - &yw, &na - &ya);
            let model = f_y + gw.dot(&dw) + ga.dot(&da) + (dw.norm_squared() + da.norm_squared()) / (2.0 * t);
            if f_new <= model + 1e-12 * f_y.abs().max(1.0) || t < 1e-18 {
                break (nw, na, f_new);
            }
            t *= 0.5;
            backtracked = true;
        };
        let total = f_new + obj.penalty(&nw, &na);
        if total > f_x && momentum > 1.0 {
            // momentum overshot: restart from the last accepted point
            yw.copy_from(w);
            ya.copy_from(a);
            momentum = 1.0;
            continue;
        }
        let moved = (&nw - &*w).amax().max((&na - &*a).amax());
        let decrease = f_x - total;
        let next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next;
        yw = &nw + (&nw - &*w) * beta;
        ya = &na + (&na - &*a) * beta;
        yw.fill_diagonal(0.0);
        momentum = next;
        *w = nw;
        *a = na;
        f_x = total;
        if moved < cfg.inner_tol || decrease <= cfg.inner_tol * total.abs().max(1.0) {
            break;
        }
        if !backtracked {
            t *= 1.5;
        }
    }
    *step = t;
    iters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoning::masks::PenaltySet;

    fn data(seed: u64) -> LaggedData {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        LaggedData::from_matrix(&x).unwrap()
    }

    #[test]
    fn huge_lambda_shrinks_everything() {
        let d = data(1);
        let cfg = SolveConfig { lambda_w: 100.0, lambda_a: 100.0, ..Default::default() };
        let r = solve(&d, &PriorMasks::background(3, &PenaltySet::default()), &cfg);
        assert!(r.w.iter().chain(r.a.iter()).all(|&v| v == 0.0));
        assert!(r.converged());
    }

    #[test]
    fn diagonal_of_w_stays_zero() {
        let d = data(2);
        let cfg = SolveConfig { lambda_w: 0.0, lambda_a: 0.0, ..Default::default() };
        let r = solve(&d, &PriorMasks::background(3, &PenaltySet::default()), &cfg);
        assert!((0..3).all(|i| r.w[(i, i)] == 0.0));
        assert!(r.h <= 1e-8 || r.flag.is_some());
    }
}

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// Degree of the truncated Taylor series. With the argument scaled to
/// 1-norm <= 0.5 the remainder is below 1e-18.
const TAYLOR_DEGREE: usize = 16;
/// Block size of the Paterson-Stockmeyer evaluation (sqrt of the degree).
const PS_BLOCK: usize = 4;

/// Matrix exponential by scaling and squaring with a truncated Taylor series,
/// evaluated in Paterson-Stockmeyer form.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let norm1 = (0..d).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if norm1 == 0.0 {
        return DMatrix::identity(d, d);
    }
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let x = m / 2f64.powi(squarings as i32);

    // powers[i] = x^i for i in 0..=PS_BLOCK
    let mut powers = vec![DMatrix::identity(d, d), x.clone()];
    for i in 2..=PS_BLOCK {
        let next = &powers[i - 1] * &x;
        powers.push(next);
    }
    let mut coeff = [1.0f64; TAYLOR_DEGREE + 1];
    for k in 1..=TAYLOR_DEGREE {
        coeff[k] = coeff[k - 1] / k as f64;
    }
    let block = |j: usize| {
        let mut b = DMatrix::zeros(d, d);
        for (p, &c) in powers.iter().zip(coeff.iter().skip(j * PS_BLOCK)).take(PS_BLOCK) {
            b += p * c;
        }
        b
    };
    let blocks = TAYLOR_DEGREE / PS_BLOCK;
    let mut result = block(blocks);
    for j in (0..blocks).rev() {
        result = &powers[PS_BLOCK] * &result + block(j);
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `h(W) = tr(exp(W∘W)) - d` and its gradient `exp(W∘W)^T ∘ 2W`.
///
/// Both only involve walks that close into cycles, so the exponential is
/// taken per strongly connected component of the support of `W`; every
/// other diagonal entry of `exp(W∘W)` is exactly 1 and every other
/// gradient entry exactly 0.
pub fn acyclicity(w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let d = w.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(d, 0);
    let nodes: Vec<_> = (0..d).map(|_| graph.add_node(())).collect();
    for i in 0..d {
        for j in 0..d {
            if i != j && w[(i, j)] != 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut h = 0.0;
    let mut grad = DMatrix::zeros(d, d);
    for scc in tarjan_scc(&graph) {
        if scc.len() < 2 {
            continue;
        }
        let mut idx: Vec<usize> = scc.iter().map(|n| n.index()).collect();
        idx.sort_unstable();
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| w[(idx[a], idx[b])]);
        let e = expm(&sub.component_mul(&sub));
        h += e.trace() - k as f64;
        for a in 0..k {
            for b in 0..k {
                grad[(idx[a], idx[b])] = 2.0 * e[(b, a)] * sub[(a, b)];
            }
        }
    }
    (h, grad)
}

/// Dense reference for [`acyclicity`].
pub fn acyclicity_dense(w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let e = expm(&w.component_mul(w));
    let h = e.trace() - w.nrows() as f64;
    let grad = e.transpose().component_mul(w) * 2.0;
    (h, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(expm(&DMatrix::zeros(3, 3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn exp_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 5.0]));
        let e = expm(&m);
        for (i, v) in [1.0f64, -2.0, 5.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() < 1e-12 * v.exp().max(1.0));
        }
    }

    #[test]
    fn exp_of_rotation_generator() {
        // exp([[0,-t],[t,0]]) = [[cos t, -sin t],[sin t, cos t]]
        let t = 2.5f64;
        let e = expm(&DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]));
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - t.sin()).abs() < 1e-13);
    }

    #[test]
    fn two_cycle_closed_form() {
        let (h, _) = acyclicity(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!((h - (2.0 * 1f64.cosh() - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn component_form_matches_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = rng.random_range(2..9);
            let w = DMatrix::from_fn(d, d, |i, j| {
                if i != j && rng.random_bool(0.3) { rng.random_range(-1.0..1.0) } else { 0.0 }
            });
            let (h, g) = acyclicity(&w);
            let (hd, gd) = acyclicity_dense(&w);
            assert!((h - hd).abs() < 1e-12 * hd.abs().max(1.0));
            assert!((&g - &gd).amax() < 1e-12 * gd.amax().max(1.0));
        }
    }
}

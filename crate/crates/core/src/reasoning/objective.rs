use nalgebra::DMatrix;

use super::acyclicity::acyclicity;
use super::masks::PriorMasks;

pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Standardized lag-1 design: `y` = rows 1..m, `z` = rows 0..m-1.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedData {
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// Columns whose variance fell under the floor.
    pub degenerate_columns: Vec<usize>,
}

impl LaggedData {
    /// `None` when fewer than two rows are present.
    pub fn from_matrix(x: &DMatrix<f64>) -> Option<Self> {
        let (m, d) = x.shape();
        if m < 2 {
            return None;
        }
        let mut xs = x.clone();
        let mut degenerate_columns = Vec::new();
        for j in 0..d {
            let mut col = xs.column_mut(j);
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            let var = col.norm_squared() / m as f64;
            if var < VARIANCE_FLOOR {
                degenerate_columns.push(j);
            }
            col /= var.max(VARIANCE_FLOOR).sqrt();
        }
        Some(Self { y: xs.rows(1, m - 1).into_owned(), z: xs.rows(0, m - 1).into_owned(), degenerate_columns })
    }

    /// Uses `y` and `z` as given, without standardizing.
    pub fn from_parts(y: DMatrix<f64>, z: DMatrix<f64>) -> Self {
        assert_eq!(y.shape(), z.shape(), "lagged blocks must share a shape");
        Self { y, z, degenerate_columns: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn residual(&self, w: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        &self.y - &self.y * w - &self.z * a
    }
}

/// Least-squares loss `1/(2n) ||Y - YW - ZA||_F^2` and its gradients in `W` and `A`.
pub fn loss_and_grad(data: &LaggedData, w: &DMatrix<f64>, a: &DMatrix<f64>) -> (f64, DMatrix<f64>, DMatrix<f64>) {
    let n = data.n() as f64;
    let r = data.residual(w, a);
    let loss = r.norm_squared() / (2.0 * n);
    let gw = -(data.y.transpose() * &r) / n;
    let ga = -(data.z.transpose() * &r) / n;
    (loss, gw, ga)
}

/// Augmented-Lagrangian objective at fixed multiplier `alpha` and penalty `rho`.
pub struct Objective<'a> {
    pub data: &'a LaggedData,
    pub masks: &'a PriorMasks,
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl Objective<'_> {
    /// Smooth part: loss + alpha h + rho/2 h^2.
    pub fn smooth(&self, w: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
        let r = self.data.residual(w, a);
        let (h, _) = acyclicity(w);
        r.norm_squared() / (2.0 * self.data.n() as f64) + self.alpha * h + 0.5 * self.rho * h * h
    }

    pub fn smooth_and_grad(&self, w: &DMatrix<f64>, a: &DMatrix<f64>) -> (f64, DMatrix<f64>, DMatrix<f64>, f64) {
        let (loss, mut gw, ga) = loss_and_grad(self.data, w, a);
        let (h, gh) = acyclicity(w);
        gw += gh * (self.alpha + self.rho * h);
        (loss + self.alpha * h + 0.5 * self.rho * h * h, gw, ga, h)
    }

    /// Weighted L1 term.
    pub fn penalty(&self, w: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
        let pw: f64 = w.iter().zip(self.masks.w_mask.iter()).map(|(v, m)| v.abs() * m).sum();
        let pa: f64 = a.iter().zip(self.masks.a_mask.iter()).map(|(v, m)| v.abs() * m).sum();
        self.lambda_w * pw + self.lambda_a * pa
    }

    /// Soft-threshold at `step * lambda * mask`, with the `W` diagonal zeroed.
    pub fn prox(&self, w: &mut DMatrix<f64>, a: &mut DMatrix<f64>, step: f64) {
        for (v, m) in w.iter_mut().zip(self.masks.w_mask.iter()) {
            *v = soft_threshold(*v, step * self.lambda_w * m);
        }
        for (v, m) in a.iter_mut().zip(self.masks.a_mask.iter()) {
            *v = soft_threshold(*v, step * self.lambda_a * m);
        }
        w.fill_diagonal(0.0);
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_case() {
        let data = LaggedData::from_matrix(&DMatrix::zeros(5, 3)).unwrap();
        let z = DMatrix::zeros(3, 3);
        let (l, gw, ga) = loss_and_grad(&data, &z, &z);
        assert_eq!(l, 0.0);
        assert!(gw.iter().chain(ga.iter()).all(|&v| v == 0.0));
        assert_eq!(data.degenerate_columns, vec![0, 1, 2]);
    }

    #[test]
    fn standardized_columns() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 30.0, 3.0, 20.0, 4.0, 40.0]);
        let data = LaggedData::from_matrix(&x).unwrap();
        // rows 1..4 of the standardized first column: (-0.5, 0.5, 1.5) / sqrt(1.25)
        let s = 1.25f64.sqrt();
        assert!((data.y[(0, 0)] + 0.5 / s).abs() < 1e-12);
        assert!((data.z[(0, 0)] + 1.5 / s).abs() < 1e-12);
        assert!(LaggedData::from_matrix(&DMatrix::zeros(1, 2)).is_none());
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero() {
        assert_eq!(soft_threshold(0.3, 0.1), 0.19999999999999998);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-0.3, 0.1), -0.19999999999999998);
    }
}

#![allow(dead_code)]

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

/// min ‖w‖₁ s.t. D·w = y, as an LP over w = p − q with p, q ≥ 0.
/// Returns (optimum, w) or None when infeasible.
pub fn lp_l1_min(d: &DMatrix<f64>, y: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let (m, t) = d.shape();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let p: Vec<_> = (0..t).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let q: Vec<_> = (0..t).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..m {
        let mut row = Vec::with_capacity(2 * t);
        for j in 0..t {
            row.push((p[j], d[(i, j)]));
            row.push((q[j], -d[(i, j)]));
        }
        lp.add_constraint(row, ComparisonOp::Eq, y[i]);
    }
    let sol = lp.solve().ok()?.into_solution().ok()?;
    let w = DVector::from_fn(t, |j, _| sol[p[j]] - sol[q[j]]);
    Some((sol.objective(), w))
}

//! Pseudo-inverse inversion of projected templates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{Cell, ExperimentReport};
use crate::error::{ensure, Result};
use crate::geometry::{self, SubspaceBasis};
use crate::randproj::{ProjectionMatrix, Recipe};
use crate::seed::{self, TAG_DATA};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackRow {
    pub index: usize,
    pub reconstruction_norm: f64,
    /// ‖x̂ − x‖/‖x‖, only when the original is known.
    pub relative_error: Option<f64>,
}

fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = geometry::ThinSvd::new(a)?.truncate();
    let inv_s = svd.s.map(|s| 1.0 / s);
    Ok(&svd.v * DMatrix::from_diagonal(&inv_s) * svd.u.transpose())
}

fn rows_for(
    preimage: &DMatrix<f64>,
    templates: &[DVector<f64>],
    originals: Option<&[DVector<f64>]>,
) -> Result<Vec<AttackRow>> {
    if let Some(xs) = originals {
        ensure(xs.len() == templates.len(), || {
            format!("{} templates but {} originals", templates.len(), xs.len())
        })?;
    }
    templates
        .iter()
        .enumerate()
        .map(|(i, t)| {
            ensure(t.len() == preimage.ncols(), || {
                format!("template {i} has length {}, expected {}", t.len(), preimage.ncols())
            })?;
            let x_hat = preimage * t;
            let relative_error = originals.map(|xs| (&x_hat - &xs[i]).norm() / xs[i].norm());
            Ok(AttackRow { index: i, reconstruction_norm: x_hat.norm(), relative_error })
        })
        .collect()
}

/// x̂ = R⁺·x̄ for each template: the minimum-norm preimage.
pub fn inversion_attack(
    r: &ProjectionMatrix,
    templates: &[DVector<f64>],
    originals: Option<&[DVector<f64>]>,
) -> Result<Vec<AttackRow>> {
    rows_for(&pinv(r.entries())?, templates, originals)
}

/// x̂ = B·(R·B)⁺·x̄: the attacker also knows a basis B of the subspace the
/// originals come from.
pub fn subspace_inversion_attack(
    r: &ProjectionMatrix,
    basis: &SubspaceBasis,
    templates: &[DVector<f64>],
    originals: Option<&[DVector<f64>]>,
) -> Result<Vec<AttackRow>> {
    ensure(basis.ambient_dim() == r.cols(), || "basis and matrix dimensions differ".to_string())?;
    let b = basis.orthonormal();
    let rb = r.entries() * b;
    rows_for(&(b * pinv(&rb)?), templates, originals)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttackDemoConfig {
    pub n: usize,
    pub m: usize,
    /// Dimension of the subspace the structured originals are drawn from.
    pub d: usize,
    pub count: usize,
    pub seed: u64,
}

/// Inverts templates of generic vectors and of vectors from a d-dimensional
/// subspace, with and without knowledge of that subspace.
pub fn attack_demo(config: &AttackDemoConfig) -> Result<ExperimentReport> {
    let AttackDemoConfig { n, m, d, count, seed } = *config;
    ensure(d >= 1 && d <= n, || format!("subspace dimension {d} outside 1..={n}"))?;
    ensure(count >= 1, || "need at least one template".to_string())?;
    let r = ProjectionMatrix::generate(n, m, Recipe::DenseGaussian, seed)?;
    let mut rng = seed::stream(&[seed, TAG_DATA, 0xA77AC4]);
    let mut gauss = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let basis = SubspaceBasis::new(gauss(n, d))?;
    let generic: Vec<DVector<f64>> = (0..count).map(|_| gauss(n, 1).column(0).into_owned()).collect();
    let coeffs = gauss(d, count);
    let structured: Vec<DVector<f64>> =
        (0..count).map(|i| basis.orthonormal() * coeffs.column(i)).collect();

    let project = |xs: &[DVector<f64>]| xs.iter().map(|x| r.project(x)).collect::<Result<Vec<_>>>();
    let cases = [
        ("generic", "pinv", inversion_attack(&r, &project(&generic)?, Some(&generic))?),
        ("subspace", "pinv", inversion_attack(&r, &project(&structured)?, Some(&structured))?),
        (
            "subspace",
            "pinv-with-basis",
            subspace_inversion_attack(&r, &basis, &project(&structured)?, Some(&structured))?,
        ),
    ];

    let mut report = ExperimentReport::new(
        "attack",
        config,
        &["data", "attack", "index", "reconstruction_norm", "relative_error"],
    )?;
    for (data, attack, rows) in cases {
        for row in rows {
            report.push_row(vec![
                Cell::Text(data.to_string()),
                Cell::Text(attack.to_string()),
                row.index.into(),
                row.reconstruction_norm.into(),
                row.relative_error.into(),
            ]);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_matrix_inverts_exactly() {
        let r = ProjectionMatrix::generate(40, 40, Recipe::DenseGaussian, 2).unwrap();
        let x = DVector::from_fn(40, |i, _| (i as f64).sin());
        let rows = inversion_attack(&r, &[r.project(&x).unwrap()], Some(std::slice::from_ref(&x))).unwrap();
        assert!(rows[0].relative_error.unwrap() <= 1e-6);
    }

    #[test]
    fn error_at_least_out_of_rowspace_energy() {
        let r = ProjectionMatrix::generate(60, 10, Recipe::DenseGaussian, 4).unwrap();
        let x = DVector::from_fn(60, |i, _| ((i * 7 % 11) as f64) - 5.0);
        let rows = inversion_attack(&r, &[r.project(&x).unwrap()], Some(std::slice::from_ref(&x))).unwrap();
        // energy of x outside the row space of R
        let q = r.entries().transpose().qr().q();
        let inside = &q * q.tr_mul(&x);
        let outside = (&x - inside).norm() / x.norm();
        assert!(rows[0].relative_error.unwrap() >= outside - 1e-9);
        assert!((rows[0].relative_error.unwrap() - outside).abs() < 1e-8);
    }

    #[test]
    fn no_originals_reports_norm_only() {
        let r = ProjectionMatrix::generate(10, 4, Recipe::DenseGaussian, 1).unwrap();
        let rows = inversion_attack(&r, &[DVector::from_element(4, 1.0)], None).unwrap();
        assert!(rows[0].relative_error.is_none());
        assert!(rows[0].reconstruction_norm > 0.0);
    }

    #[test]
    fn demo_basis_knowledge_helps() {
        let cfg = AttackDemoConfig { n: 100, m: 20, d: 4, count: 5, seed: 3 };
        let report = attack_demo(&cfg).unwrap();
        let col = report.column("relative_error").unwrap();
        let mean = |label: &str| {
            let vals: Vec<f64> = report
                .rows
                .iter()
                .filter(|row| matches!(&row[1], Cell::Text(a) if a == label))
                .filter_map(|row| row[col].as_f64())
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        assert!(mean("pinv-with-basis") < 1e-8);
        assert!(mean("pinv") > 0.5);
    }
}

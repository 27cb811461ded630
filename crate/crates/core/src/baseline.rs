//! PCA baseline reducer.

use nalgebra::{DMatrix, DVector};

use crate::data::LabeledDataset;
use crate::error::{ensure, Result};
use crate::geometry;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// n×k, orthonormal columns ordered by decreasing variance.
    components: DMatrix<f64>,
    variances: Vec<f64>,
}

impl PcaModel {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Sample variance along each component (N − 1 denominator).
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    /// Componentsᵀ·(x − mean).
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ensure(x.len() == self.ambient_dim(), || {
            format!("vector has length {}, model expects {}", x.len(), self.ambient_dim())
        })?;
        Ok(self.components.tr_mul(&(x - &self.mean)))
    }

    /// Maps reduced coordinates back to ℝⁿ.
    pub fn reconstruct(&self, coords: &DVector<f64>) -> Result<DVector<f64>> {
        ensure(coords.len() == self.k(), || {
            format!("expected {} coordinates, got {}", self.k(), coords.len())
        })?;
        Ok(&self.components * coords + &self.mean)
    }

    pub fn project_dataset(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        ensure(data.ambient_dim() == self.ambient_dim(), || {
            format!(
                "dataset dimension {} does not match model dimension {}",
                data.ambient_dim(),
                self.ambient_dim()
            )
        })?;
        let mut centered = data.vectors().clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        LabeledDataset::derived(
            centered * &self.components,
            data.labels().to_vec(),
            format!("pca(k={})", self.k()),
            None,
        )
    }
}

/// Top-k principal directions of the mean-centered data via thin SVD.
///
/// Each component's largest-magnitude entry is made positive. Directions past
/// the data rank are still orthonormal but carry zero variance.
pub fn pca_fit(data: &LabeledDataset, k: usize) -> Result<PcaModel> {
    let (count, n) = data.vectors().shape();
    ensure(k >= 1 && k <= n.min(count), || {
        format!("k must lie in 1..={}, got {k}", n.min(count))
    })?;
    let mean = DVector::from_iterator(n, data.vectors().column_iter().map(|c| c.mean()));
    let mut centered = data.vectors().clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let svd = geometry::ThinSvd::new(&centered)?;
    let tol = geometry::rank_tolerance(count, n, svd.sigma_max());
    let denom = (count.max(2) - 1) as f64;

    let mut components = DMatrix::zeros(n, k);
    let mut variances = Vec::with_capacity(k);
    for out in 0..k {
        let mut col = svd.v.column(out).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        components.set_column(out, &col);
        let sigma = svd.s[out];
        variances.push(if sigma > tol { sigma * sigma / denom } else { 0.0 });
    }
    Ok(PcaModel { mean, components, variances })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_out_of_range() {
        let ds = LabeledDataset::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]), vec![1, 1, 2])
            .unwrap();
        assert!(pca_fit(&ds, 0).is_err());
        assert!(pca_fit(&ds, 3).is_err());
    }

    #[test]
    fn line_data() {
        let ts = [-2.0, -1.0, 0.5, 1.0, 1.5];
        let mut rows = Vec::new();
        for &t in &ts {
            rows.extend_from_slice(&[t, 0.0, 0.0]);
        }
        let ds = LabeledDataset::new(DMatrix::from_row_slice(5, 3, &rows), vec![1; 5]).unwrap();
        let model = pca_fit(&ds, 2).unwrap();
        let c0 = model.components().column(0);
        assert!((c0[0] - 1.0).abs() < 1e-12, "{c0}");
        let mean = ts.iter().sum::<f64>() / 5.0;
        let var = ts.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / 4.0;
        assert!((model.variances()[0] - var).abs() < 1e-12);
        assert_eq!(model.variances()[1], 0.0);
        let g = model.components().tr_mul(model.components());
        assert!((g - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn mean_projects_to_zero() {
        let ds = LabeledDataset::new(
            DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 1.0, -1.0, 0.5, 2.0, 2.0]),
            vec![1, 1, 2, 2],
        )
        .unwrap();
        let model = pca_fit(&ds, 2).unwrap();
        let z = model.project(model.mean()).unwrap();
        assert!(z.norm() < 1e-14);
        let c1 = model.components().column(1).into_owned() + model.mean();
        let coords = model.project(&c1).unwrap();
        assert!((coords[1] - 1.0).abs() < 1e-12 && coords[0].abs() < 1e-12);
        assert!(model.project(&DVector::zeros(3)).is_err());
    }
}

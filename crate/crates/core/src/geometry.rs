//! Cosines, principal angles, dataset margins and subspace independence.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};

/// Cosine of the angle between two nonzero vectors, clamped to [−1, 1].
pub fn cosine(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    ensure(x.len() == y.len(), || {
        format!("cosine of vectors with lengths {} and {}", x.len(), y.len())
    })?;
    let (nx, ny) = (x.norm(), y.norm());
    ensure(nx > 0.0 && ny > 0.0, || "cosine is undefined for a zero vector".to_string())?;
    Ok((x.dot(y) / (nx * ny)).clamp(-1.0, 1.0))
}

/// Singular values at or below `max(rows, cols)·ε·σ_max` count as zero.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Thin SVD A = U·diag(s)·Vᵀ with s in descending order.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let (r, c) = a.shape();
        let svd = faer::Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)])
            .thin_svd()
            .map_err(|e| Error::invalid(format!("svd did not converge: {e:?}")))?;
        let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
        let k = fs.nrows();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
        Ok(Self {
            u: DMatrix::from_fn(r, k, |i, j| fu[(i, order[j])]),
            s: DVector::from_fn(k, |j, _| fs[order[j]]),
            v: DMatrix::from_fn(c, k, |i, j| fv[(i, order[j])]),
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.s.iter().cloned().fold(0.0, f64::max)
    }

    /// Number of singular values above [`rank_tolerance`].
    pub fn rank(&self) -> usize {
        let smax = self.sigma_max();
        if smax == 0.0 {
            return 0;
        }
        let tol = rank_tolerance(self.u.nrows(), self.v.nrows(), smax);
        self.s.iter().filter(|&&s| s > tol).count()
    }

    /// Drops the directions past the numerical rank.
    pub fn truncate(self) -> Self {
        let k = self.rank();
        Self {
            u: self.u.columns(0, k).into_owned(),
            s: self.s.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
        }
    }
}

pub fn numerical_rank(matrix: &DMatrix<f64>) -> usize {
    if matrix.is_empty() {
        return 0;
    }
    ThinSvd::new(matrix).map(|s| s.rank()).unwrap_or(0)
}

/// Columns spanning one class subspace, with a cached orthonormal basis of the span.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: DMatrix<f64>,
    orthonormal: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Fails unless `columns` (n×d) has full column rank d.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (n, d) = columns.shape();
        ensure(n >= 1 && d >= 1, || format!("basis must be non-empty, got {n}x{d}"))?;
        ensure(d <= n, || format!("basis has {d} columns in ambient dimension {n}"))?;
        let svd = ThinSvd::new(&columns)?;
        let rank = svd.rank();
        if rank < d {
            return Err(Error::invalid(format!(
                "basis columns are rank deficient (rank {rank} < {d})"
            )));
        }
        let orthonormal = svd.u;
        Ok(Self { columns, orthonormal })
    }

    /// Builds a basis from columns that are already orthonormal.
    pub(crate) fn from_orthonormal(q: DMatrix<f64>) -> Self {
        Self { columns: q.clone(), orthonormal: q }
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// U with UᵀU = I and span(U) = span(columns).
    pub fn orthonormal(&self) -> &DMatrix<f64> {
        &self.orthonormal
    }

    /// ‖x − UUᵀx‖ / ‖x‖; zero for x inside the subspace.
    pub fn relative_residual(&self, x: &DVector<f64>) -> Result<f64> {
        ensure(x.len() == self.ambient_dim(), || {
            format!("vector length {} vs ambient {}", x.len(), self.ambient_dim())
        })?;
        let norm = x.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let coords = self.orthonormal.tr_mul(x);
        Ok((x - &self.orthonormal * coords).norm() / norm)
    }
}

/// Largest cosine between the two subspaces and the principal vectors achieving it.
#[derive(Debug, Clone, Serialize)]
pub struct SubspaceMargin {
    pub gamma: f64,
    /// Principal angle arccos(γ) in radians.
    pub angle: f64,
    #[serde(skip)]
    pub u: DVector<f64>,
    #[serde(skip)]
    pub v: DVector<f64>,
}

/// γ = σ_max(U_aᵀ U_b). The sign of the dot product is absorbed by u ↦ −u.
pub fn subspace_margin(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<SubspaceMargin> {
    ensure(a.ambient_dim() == b.ambient_dim(), || {
        format!(
            "subspaces live in different ambient dimensions ({} vs {})",
            a.ambient_dim(),
            b.ambient_dim()
        )
    })?;
    let cross = a.orthonormal().tr_mul(b.orthonormal());
    let svd = ThinSvd::new(&cross)?;
    let sigma = svd.s[0];
    let left = svd.u.column(0).into_owned();
    let right = svd.v.column(0).into_owned();
    let gamma = sigma.clamp(0.0, 1.0);
    Ok(SubspaceMargin {
        gamma,
        angle: gamma.acos(),
        u: a.orthonormal() * left,
        v: b.orthonormal() * right,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetMargin {
    pub class: usize,
    pub gamma: f64,
    /// Set when some cross-class pair is parallel (γ = 1): the data violates
    /// the independent-subspace model.
    pub degenerate: bool,
}

fn unit_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.norm();
        ensure(norm > 0.0, || format!("sample {i} is the zero vector"))?;
        row /= norm;
    }
    Ok(out)
}

/// γᵢ: the largest cosine between any sample of `class` and any sample of another class.
pub fn dataset_margin(data: &LabeledDataset, class: usize) -> Result<DatasetMargin> {
    let inside = data.class_indices(class);
    ensure(!inside.is_empty(), || format!("class {class} has no samples"))?;
    let outside: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels()[i] != class)
        .collect();
    ensure(!outside.is_empty(), || format!("no samples outside class {class}"))?;
    let xi = unit_rows(&data.rows(&inside))?;
    let xo = unit_rows(&data.rows(&outside))?;
    let gram = &xi * xo.transpose();
    let gamma = gram.max().clamp(-1.0, 1.0);
    Ok(DatasetMargin {
        class,
        gamma,
        degenerate: gamma >= 1.0 - 1e-12,
    })
}

/// [`dataset_margin`] for every class present in the dataset, in class order.
pub fn dataset_margins(data: &LabeledDataset) -> Result<Vec<DatasetMargin>> {
    data.classes().into_iter().map(|c| dataset_margin(data, c)).collect()
}

/// Pairwise subspace margins, and optionally per-class dataset margins.
#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    /// γᵢⱼ, symmetric with unit diagonal.
    pub pairwise: Vec<Vec<f64>>,
    /// Principal pairs for i < j, keyed (i, j) with 0-based subspace indices.
    pub pairs: Vec<((usize, usize), SubspaceMargin)>,
    pub dataset: Vec<DatasetMargin>,
}

impl MarginReport {
    pub fn max_off_diagonal(&self, i: usize) -> f64 {
        self.pairwise[i]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &g)| g)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn margin_report(bases: &[SubspaceBasis], data: Option<&LabeledDataset>) -> Result<MarginReport> {
    let k = bases.len();
    let mut pairwise = vec![vec![1.0; k]; k];
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let m = subspace_margin(&bases[i], &bases[j])?;
            pairwise[i][j] = m.gamma;
            pairwise[j][i] = m.gamma;
            pairs.push(((i, j), m));
        }
    }
    let dataset = match data {
        Some(d) => dataset_margins(d)?,
        None => Vec::new(),
    };
    Ok(MarginReport { pairwise, pairs, dataset })
}

/// True iff the subspaces form a direct sum: rank([B₁ … B_K]) = Σ dᵢ.
pub fn check_independence(bases: &[SubspaceBasis]) -> Result<bool> {
    let Some(first) = bases.first() else {
        return Ok(true);
    };
    let n = first.ambient_dim();
    ensure(bases.iter().all(|b| b.ambient_dim() == n), || {
        "bases must share one ambient dimension".to_string()
    })?;
    let total: usize = bases.iter().map(|b| b.dim()).sum();
    if total > n {
        return Ok(false);
    }
    let mut stacked = DMatrix::zeros(n, total);
    let mut offset = 0;
    for b in bases {
        stacked
            .columns_mut(offset, b.dim())
            .copy_from(b.orthonormal());
        offset += b.dim();
    }
    Ok(numerical_rank(&stacked) == total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn span(vectors: &[DVector<f64>]) -> SubspaceBasis {
        SubspaceBasis::new(DMatrix::from_columns(vectors)).unwrap()
    }

    #[test]
    fn cosine_basics() {
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&e(3, 0), &e(3, 1)).unwrap(), 0.0);
        assert_eq!(cosine(&e(3, 0), &(-e(3, 0))).unwrap(), -1.0);
        assert!(cosine(&x, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!(SubspaceBasis::new(DMatrix::from_columns(&[v.clone(), 2.0 * v])).is_err());
        assert!(SubspaceBasis::new(DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn orthonormal_copy() {
        let b = span(&[
            DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 2.0, 0.0]),
        ]);
        let q = b.orthonormal();
        let gram = q.tr_mul(q);
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(b.relative_residual(&b.columns().column(1).into_owned()).unwrap() < 1e-12);
    }

    #[test]
    fn margin_examples() {
        let a = span(&[e(3, 0)]);
        let b = span(&[e(3, 1)]);
        assert!(subspace_margin(&a, &b).unwrap().gamma.abs() < 1e-15);
        assert!((subspace_margin(&a, &a).unwrap().gamma - 1.0).abs() < 1e-12);
        let diag = span(&[(e(3, 0) + e(3, 1)) / 2f64.sqrt()]);
        let m = subspace_margin(&a, &diag).unwrap();
        assert!((m.gamma - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((m.angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        // principal vectors attain the margin
        assert!((m.u.dot(&m.v) - m.gamma).abs() < 1e-12);
    }

    #[test]
    fn margin_dimension_mismatch() {
        let a = span(&[e(3, 0)]);
        let b = span(&[e(4, 0)]);
        assert!(subspace_margin(&a, &b).is_err());
    }

    #[test]
    fn independence_examples() {
        assert!(check_independence(&[span(&[e(3, 0)]), span(&[e(3, 1)])]).unwrap());
        let b = span(&[e(3, 0) + e(3, 1), e(3, 1)]);
        assert!(!check_independence(&[span(&[e(3, 0)]), b]).unwrap());
        let a = span(&[e(2, 0)]);
        let c = span(&[e(2, 1)]);
        let d = span(&[e(2, 0) + e(2, 1)]);
        assert!(!check_independence(&[a, c, d]).unwrap());
    }

    #[test]
    fn dataset_margin_examples() {
        let ds = LabeledDataset::new(
            DMatrix::from_rows(&[e(2, 0).transpose(), e(2, 1).transpose()]),
            vec![1, 2],
        )
        .unwrap();
        assert_eq!(dataset_margin(&ds, 1).unwrap().gamma, 0.0);

        let d = (e(2, 0) + e(2, 1)) / 2f64.sqrt();
        let ds = LabeledDataset::new(
            DMatrix::from_rows(&[e(2, 0).transpose(), d.transpose()]),
            vec![1, 2],
        )
        .unwrap();
        assert!((dataset_margin(&ds, 1).unwrap().gamma - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(dataset_margin(&ds, 3).is_err());
    }

    #[test]
    fn duplicated_direction_flags_degenerate() {
        let ds = LabeledDataset::new(
            DMatrix::from_rows(&[e(2, 0).transpose(), (3.0 * e(2, 0)).transpose()]),
            vec![1, 2],
        )
        .unwrap();
        let m = dataset_margin(&ds, 1).unwrap();
        assert_eq!(m.gamma, 1.0);
        assert!(m.degenerate);
    }
}

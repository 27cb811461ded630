//! Random projection matrices and cancelable templates.
//!
//! A [`ProjectionMatrix`] is an m×n matrix `R` applied as `R·x`. Entries are
//! generated row by row from streams keyed by `(seed, row)`, so the matrix is
//! a pure function of `(m, n, recipe, seed)` no matter how rows are scheduled.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::geometry::{self, SubspaceBasis};
use crate::seed::{self, TAG_ROW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// i.i.d. N(0, 1/m) entries.
    DenseGaussian,
    /// √(3/m)·s with s ∈ {+1, 0, −1} at probabilities {1/6, 2/3, 1/6}.
    SparseAchlioptas,
    /// The n×n identity; only valid for m = n. Used to isolate other effects in tests.
    Identity,
}

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::DenseGaussian => "dense-gaussian",
            Recipe::SparseAchlioptas => "sparse-achlioptas",
            Recipe::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-gaussian" | "gaussian" | "dense" => Ok(Recipe::DenseGaussian),
            "sparse-achlioptas" | "sparse" | "achlioptas" => Ok(Recipe::SparseAchlioptas),
            "identity" => Ok(Recipe::Identity),
            other => Err(Error::invalid(format!("unknown projection recipe '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    entries: DMatrix<f64>,
    recipe: Recipe,
    seed: u64,
}

/// Fills one row of R. `out.len()` is the ambient dimension n.
fn fill_row(recipe: Recipe, seed: u64, m: usize, row: usize, out: &mut [f64]) {
    match recipe {
        Recipe::DenseGaussian => {
            let scale = 1.0 / (m as f64).sqrt();
            let mut rng = seed::stream(&[seed, TAG_ROW, row as u64]);
            for v in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = scale * z;
            }
        }
        Recipe::SparseAchlioptas => {
            let scale = (3.0 / m as f64).sqrt();
            let mut rng = seed::stream(&[seed, TAG_ROW, row as u64]);
            for v in out.iter_mut() {
                *v = match rng.random_range(0..6u32) {
                    0 => scale,
                    1 => -scale,
                    _ => 0.0,
                };
            }
        }
        Recipe::Identity => {
            out.fill(0.0);
            out[row] = 1.0;
        }
    }
}

fn check_dims(n: usize, m: usize, recipe: Recipe) -> Result<()> {
    ensure(n >= 1 && m >= 1, || {
        format!("projection dimensions must be positive, got m={m}, n={n}")
    })?;
    ensure(recipe != Recipe::Identity || m == n, || {
        format!("identity recipe needs m == n, got m={m}, n={n}")
    })
}

impl ProjectionMatrix {
    /// Generates an m×n projection matrix. Deterministic in every argument.
    pub fn generate(n: usize, m: usize, recipe: Recipe, seed: u64) -> Result<Self> {
        check_dims(n, m, recipe)?;
        let mut buf = vec![0.0; m * n];
        buf.par_chunks_mut(n)
            .enumerate()
            .for_each(|(row, chunk)| fill_row(recipe, seed, m, row, chunk));
        Ok(Self {
            entries: DMatrix::from_row_slice(m, n, &buf),
            recipe,
            seed,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::generate(n, n, Recipe::Identity, 0)
    }

    /// Target dimension m.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Ambient dimension n.
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn recipe(&self) -> Recipe {
        self.recipe
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ensure(x.len() == self.cols(), || {
            format!("vector has length {}, projection expects {}", x.len(), self.cols())
        })?;
        Ok(&self.entries * x)
    }

    /// Projects every column of `matrix` (n×k), giving R·matrix (m×k).
    pub fn project_columns(&self, matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure(matrix.nrows() == self.cols(), || {
            format!("matrix has {} rows, projection expects {}", matrix.nrows(), self.cols())
        })?;
        Ok(&self.entries * matrix)
    }

    /// Projects a subspace basis; `None` when R·B loses rank (m < d or degenerate R).
    pub fn project_basis(&self, basis: &SubspaceBasis) -> Result<Option<SubspaceBasis>> {
        let cols = self.project_columns(basis.columns())?;
        Ok(SubspaceBasis::new(cols).ok())
    }

    /// Projects every sample of a dataset. Labels are kept; attached ground-truth
    /// bases are carried over as R·Bᵢ when they stay full rank.
    pub fn project_dataset(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        ensure(data.ambient_dim() == self.cols(), || {
            format!(
                "dataset dimension {} does not match projection input dimension {}",
                data.ambient_dim(),
                self.cols()
            )
        })?;
        // rows are samples: X·Rᵀ
        let projected = data.vectors() * self.entries.transpose();
        let bases = match data.bases() {
            Some(bases) => {
                let mut out = Vec::with_capacity(bases.len());
                for b in bases {
                    match self.project_basis(b)? {
                        Some(pb) => out.push(pb),
                        None => {
                            out.clear();
                            break;
                        }
                    }
                }
                (out.len() == bases.len()).then_some(out)
            }
            None => None,
        };
        LabeledDataset::derived(
            projected,
            data.labels().to_vec(),
            format!("projected({}, m={}, seed={})", self.recipe.name(), self.rows(), self.seed),
            bases,
        )
    }
}

/// Projects several vectors with R(seed) without materializing R.
///
/// Rows are generated one at a time from the same streams [`ProjectionMatrix::generate`]
/// uses, so the result equals `generate(..).project(x)` for each x up to summation
/// order. Used by the Monte-Carlo runners where R is discarded after one use.
pub fn project_streaming(
    recipe: Recipe,
    seed: u64,
    m: usize,
    xs: &[&DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let n = xs.first().map(|x| x.len()).unwrap_or(0);
    check_dims(n, m, recipe)?;
    ensure(xs.iter().all(|x| x.len() == n), || {
        "all vectors must share one dimension".to_string()
    })?;
    let mut out = vec![DVector::zeros(m); xs.len()];
    let mut row_buf = vec![0.0; n];
    for row in 0..m {
        fill_row(recipe, seed, m, row, &mut row_buf);
        for (x, y) in xs.iter().zip(out.iter_mut()) {
            y[row] = row_buf.iter().zip(x.iter()).map(|(r, v)| r * v).sum();
        }
    }
    Ok(out)
}

/// A revocable template x̄ = R(seed)·x for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancelableTemplate {
    pub subject: String,
    pub seed: u64,
    pub recipe: Recipe,
    pub values: Vec<f64>,
}

impl CancelableTemplate {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    /// Cosine between this template and a probe projected under the same R.
    pub fn match_score(&self, probe: &DVector<f64>) -> Result<f64> {
        let r = ProjectionMatrix::generate(probe.len(), self.dim(), self.recipe, self.seed)?;
        geometry::cosine(&self.vector(), &r.project(probe)?)
    }
}

pub fn issue_template(
    x: &DVector<f64>,
    subject: &str,
    seed: u64,
    m: usize,
) -> Result<CancelableTemplate> {
    ensure(x.iter().any(|v| *v != 0.0), || {
        "cannot issue a template for the zero vector".to_string()
    })?;
    let r = ProjectionMatrix::generate(x.len(), m, Recipe::DenseGaussian, seed)?;
    Ok(CancelableTemplate {
        subject: subject.to_string(),
        seed,
        recipe: Recipe::DenseGaussian,
        values: r.project(x)?.as_slice().to_vec(),
    })
}

/// Replaces a compromised template with one under a fresh, independent matrix.
/// No relationship between the old and new template is implied.
pub fn reissue_template(
    x: &DVector<f64>,
    subject: &str,
    new_seed: u64,
    m: usize,
) -> Result<CancelableTemplate> {
    issue_template(x, subject, new_seed, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dimension_rejected() {
        assert!(ProjectionMatrix::generate(0, 3, Recipe::DenseGaussian, 1).is_err());
        assert!(ProjectionMatrix::generate(3, 0, Recipe::SparseAchlioptas, 1).is_err());
        assert!(ProjectionMatrix::generate(3, 4, Recipe::Identity, 1).is_err());
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let r = ProjectionMatrix::generate(5, 5, Recipe::DenseGaussian, 1).unwrap();
        let y = r.project(&DVector::zeros(5)).unwrap();
        assert_eq!(y, DVector::zeros(5));
    }

    #[test]
    fn dimension_mismatch() {
        let r = ProjectionMatrix::generate(5, 3, Recipe::DenseGaussian, 1).unwrap();
        assert!(r.project(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn regeneration_is_bit_identical() {
        for recipe in [Recipe::DenseGaussian, Recipe::SparseAchlioptas] {
            let a = ProjectionMatrix::generate(40, 17, recipe, 99).unwrap();
            let b = ProjectionMatrix::generate(40, 17, recipe, 99).unwrap();
            let c = ProjectionMatrix::generate(40, 17, recipe, 100).unwrap();
            assert_eq!(a.entries().as_slice(), b.entries().as_slice());
            assert_ne!(a.entries().as_slice(), c.entries().as_slice());
        }
    }

    #[test]
    fn dense_second_moment() {
        // mean of squared entries should be 1/m; sd of R_ij^2 is sqrt(2)/m.
        let r = ProjectionMatrix::generate(300, 100, Recipe::DenseGaussian, 7).unwrap();
        let count = r.entries().len() as f64;
        let mean_sq = r.entries().iter().map(|v| v * v).sum::<f64>() / count;
        let se = 2f64.sqrt() / 100.0 / count.sqrt();
        assert!((mean_sq - 0.01).abs() <= 3.0 * se, "mean_sq={mean_sq}");
    }

    #[test]
    fn sparse_entries_three_point() {
        let m = 12;
        let r = ProjectionMatrix::generate(500, m, Recipe::SparseAchlioptas, 3).unwrap();
        let s = (3.0 / m as f64).sqrt();
        let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
        for &v in r.entries().iter() {
            if v == s {
                pos += 1;
            } else if v == -s {
                neg += 1;
            } else if v == 0.0 {
                zero += 1;
            } else {
                panic!("unexpected entry {v}");
            }
        }
        let total = (pos + neg + zero) as f64;
        let p_zero = zero as f64 / total;
        let se = (2.0 / 9.0 / total).sqrt();
        assert!((p_zero - 2.0 / 3.0).abs() < 4.0 * se, "p_zero={p_zero}");
        assert!((pos as f64 / total - 1.0 / 6.0).abs() < 0.01);
        assert!((neg as f64 / total - 1.0 / 6.0).abs() < 0.01);
    }

    #[test]
    fn streaming_matches_materialized() {
        let x = DVector::from_fn(64, |i, _| (i as f64 * 0.37).sin());
        let y = DVector::from_fn(64, |i, _| (i as f64 * 0.11).cos());
        for recipe in [Recipe::DenseGaussian, Recipe::SparseAchlioptas] {
            let r = ProjectionMatrix::generate(64, 20, recipe, 5).unwrap();
            let streamed = project_streaming(recipe, 5, 20, &[&x, &y]).unwrap();
            for (v, s) in [&x, &y].iter().zip(&streamed) {
                let full = r.project(v).unwrap();
                assert!((full - s).norm() <= 1e-12 * s.norm());
            }
        }
    }

    #[test]
    fn template_requires_nonzero() {
        assert!(issue_template(&DVector::zeros(4), "a", 1, 2).is_err());
    }

    #[test]
    fn template_determinism_and_reissue() {
        let x = DVector::from_fn(50, |i, _| 1.0 + i as f64);
        let a = issue_template(&x, "alice", 11, 20).unwrap();
        let b = issue_template(&x, "alice", 11, 20).unwrap();
        assert_eq!(a, b);
        let r = ProjectionMatrix::generate(50, 20, Recipe::DenseGaussian, 11).unwrap();
        assert_eq!(a.vector(), r.project(&x).unwrap());
        assert!((a.match_score(&x).unwrap() - 1.0).abs() < 1e-12);

        let c = reissue_template(&x, "alice", 12, 20).unwrap();
        assert_ne!(a.values, c.values);
        assert!((c.match_score(&x).unwrap() - 1.0).abs() < 1e-12);
    }
}

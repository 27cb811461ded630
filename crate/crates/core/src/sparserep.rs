//! Basis pursuit, sparse-representation classification and support checks.
//!
//! `basis_pursuit` solves
//!
//! ```text
//! minimize ‖w‖₁  subject to  y = D·w        (or ‖y − D·w‖₂ ≤ σ when σ > 0)
//! ```
//!
//! with scaled-form ADMM on the splitting w = z:
//!
//! ```text
//! x ← Π_C(z − u)            projection onto the feasible set C
//! z ← soft(x + u, 1/ρ)
//! u ← u + x − z
//! ```
//!
//! Π_C uses a thin SVD of D computed once per dictionary, so rank-deficient
//! dictionaries (data on a union of low-dimensional subspaces) are fine as long
//! as y lies in their column space.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::geometry;

/// Unit-norm training samples as columns, with class labels.
#[derive(Debug, Clone)]
pub struct Dictionary {
    columns: DMatrix<f64>,
    labels: Vec<usize>,
    classes: Vec<usize>,
    factor: Factor,
}

/// Thin SVD D = U·diag(s)·Vᵀ restricted to the numerical rank.
#[derive(Debug, Clone)]
struct Factor {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

impl Factor {
    fn new(d: &DMatrix<f64>) -> Result<Self> {
        let svd = geometry::ThinSvd::new(d)?.truncate();
        Ok(Self { u: svd.u, s: svd.s, v: svd.v })
    }

    fn rank(&self) -> usize {
        self.s.len()
    }
}

impl Dictionary {
    /// `columns` is m×T; every column is rescaled to unit ℓ2 norm.
    pub fn new(columns: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        ensure(columns.ncols() >= 1 && columns.nrows() >= 1, || {
            "dictionary must have at least one column".to_string()
        })?;
        ensure(columns.ncols() == labels.len(), || {
            format!("{} columns but {} labels", columns.ncols(), labels.len())
        })?;
        ensure(labels.iter().all(|&l| l >= 1), || "class ids start at 1".to_string())?;
        let mut columns = columns;
        for (j, mut col) in columns.column_iter_mut().enumerate() {
            let norm = col.norm();
            ensure(norm > 0.0, || format!("dictionary column {j} is zero"))?;
            col /= norm;
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        let factor = Factor::new(&columns)?;
        Ok(Self { columns, labels, classes, factor })
    }

    /// Uses every sample of `data` as an atom.
    pub fn from_dataset(data: &LabeledDataset) -> Result<Self> {
        Self::new(data.vectors().transpose(), data.labels().to_vec())
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    /// Signal dimension m.
    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn atoms(&self) -> usize {
        self.columns.ncols()
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    /// Iteration budget exhausted; the code holds the last iterate.
    NonConverged,
    /// y is not reachable: it lies outside the column space (beyond σ).
    Infeasible,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BasisPursuitOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// ADMM penalty ρ.
    pub rho: f64,
    /// σ in ‖y − Dw‖₂ ≤ σ; 0 means exact equality.
    pub noise: f64,
}

impl Default for BasisPursuitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            rho: 1.0,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseCode {
    pub w: DVector<f64>,
    /// (class, ‖y − D·δ_class(w)‖₂) in ascending class order.
    pub residuals: Vec<(usize, f64)>,
    pub status: SolverStatus,
    pub iterations: usize,
    /// ‖y − D·w‖₂ minus the allowed noise level (never negative).
    pub feasibility_gap: f64,
}

impl SparseCode {
    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }
}

/// δ_class(w): w with every coefficient outside `class` zeroed.
pub fn restrict_to_class(w: &DVector<f64>, labels: &[usize], class: usize) -> DVector<f64> {
    DVector::from_iterator(
        w.len(),
        w.iter().zip(labels).map(|(&v, &l)| if l == class { v } else { 0.0 }),
    )
}

fn class_residuals(dict: &Dictionary, y: &DVector<f64>, w: &DVector<f64>) -> Vec<(usize, f64)> {
    dict.classes
        .iter()
        .map(|&c| {
            let wc = restrict_to_class(w, &dict.labels, c);
            (c, (y - &dict.columns * wc).norm())
        })
        .collect()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Projection onto {w : ‖D·w − y‖ ≤ σ} in the SVD coordinates of D.
struct FeasibleSet<'a> {
    factor: &'a Factor,
    /// Uᵀy
    y_coords: DVector<f64>,
    /// ‖y‖² − ‖Uᵀy‖², the part of y no w can reach.
    perp_sq: f64,
    sigma: f64,
    /// V·diag(1/s)·Uᵀy, the least-norm exact solution.
    least_norm: DVector<f64>,
}

impl<'a> FeasibleSet<'a> {
    fn new(factor: &'a Factor, y: &DVector<f64>, sigma: f64) -> Self {
        let y_coords = factor.u.tr_mul(y);
        let perp_sq = (y - &factor.u * &y_coords).norm_squared();
        let least_norm = &factor.v * y_coords.component_div(&factor.s);
        Self { factor, y_coords, perp_sq, sigma, least_norm }
    }

    fn unreachable(&self) -> f64 {
        self.perp_sq.sqrt()
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let a = self.factor.v.tr_mul(v);
        if self.sigma == 0.0 {
            return v - &self.factor.v * &a + &self.least_norm;
        }
        let s = &self.factor.s;
        let b = &self.y_coords;
        let target = self.sigma * self.sigma - self.perp_sq;
        let resid_sq = |lambda: f64| -> f64 {
            (0..a.len())
                .map(|k| {
                    let r = (s[k] * a[k] - b[k]) / (1.0 + lambda * s[k] * s[k]);
                    r * r
                })
                .sum()
        };
        if resid_sq(0.0) <= target {
            return v.clone();
        }
        // resid_sq is decreasing in λ; bracket then bisect.
        let mut hi = 1.0;
        while resid_sq(hi) > target && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if resid_sq(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let lambda = hi;
        let shifted = DVector::from_fn(a.len(), |k, _| {
            (a[k] + lambda * s[k] * b[k]) / (1.0 + lambda * s[k] * s[k]) - a[k]
        });
        v + &self.factor.v * shifted
    }
}

/// ℓ1-minimal coefficients w with D·w = y (or within σ of y).
pub fn basis_pursuit(
    dict: &Dictionary,
    y: &DVector<f64>,
    opts: &BasisPursuitOptions,
) -> Result<SparseCode> {
    ensure(y.len() == dict.dim(), || {
        format!("signal has length {}, dictionary rows {}", y.len(), dict.dim())
    })?;
    ensure(opts.tol > 0.0, || "tolerance must be positive".to_string())?;
    ensure(opts.rho > 0.0, || "penalty must be positive".to_string())?;
    ensure(opts.noise >= 0.0, || "noise level must be non-negative".to_string())?;
    let t = dict.atoms();
    let scale = y.norm();

    let finish = |w: DVector<f64>, status, iterations| {
        let gap = ((y - &dict.columns * &w).norm() - opts.noise).max(0.0);
        SparseCode {
            residuals: class_residuals(dict, y, &w),
            w,
            status,
            iterations,
            feasibility_gap: gap,
        }
    };

    if scale == 0.0 || scale <= opts.noise {
        return Ok(finish(DVector::zeros(t), SolverStatus::Converged, 0));
    }

    // Solve for y/‖y‖ so penalty and thresholds act at a fixed scale.
    let y_unit = y / scale;
    let tol = opts.tol / scale;
    let sigma = opts.noise / scale;
    let set = FeasibleSet::new(&dict.factor, &y_unit, sigma);
    if set.unreachable() > sigma + tol {
        return Ok(finish(DVector::zeros(t), SolverStatus::Infeasible, 0));
    }

    let thresh = 1.0 / opts.rho;
    let mut z = set.project(&DVector::zeros(t));
    let mut u = DVector::<f64>::zeros(t);
    for it in 1..=opts.max_iter {
        let x = set.project(&(&z - &u));
        for i in 0..t {
            z[i] = soft_threshold(x[i] + u[i], thresh);
        }
        u += &x - &z;
        if it % CERTIFY_EVERY == 0 || it == opts.max_iter {
            if let Some(w) = certified(dict, &set, &y_unit, &x, &z, &(&u * opts.rho), tol) {
                return Ok(finish(w * scale, SolverStatus::Converged, it));
            }
        }
    }
    Ok(finish(z * scale, SolverStatus::NonConverged, opts.max_iter))
}

const CERTIFY_EVERY: usize = 10;
const POLISH_EXTRA: usize = 8;

/// Returns a feasible point whose ℓ1 norm is within `tol` of the optimum,
/// preferring sparse candidates: the least-squares fit on z's support, then z,
/// then the feasible ADMM iterate x.
///
/// The lower bound is the dual value yᵀλ − σ‖λ‖ at λ = U·diag(1/s)·Vᵀ·(ρu),
/// rescaled so that ‖Dᵀλ‖∞ ≤ 1. At a fixed point ρu is a subgradient of ‖z‖₁
/// lying in the row space of D, so the bound becomes tight.
fn certified(
    dict: &Dictionary,
    set: &FeasibleSet,
    y: &DVector<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
    scaled_dual: &DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let f = &dict.factor;
    let mut lambda = &f.u * f.v.tr_mul(scaled_dual).component_div(&f.s);
    let reach = dict.columns.tr_mul(&lambda).amax();
    if reach > 1.0 {
        lambda /= reach;
    }
    let lower = y.dot(&lambda) - set.sigma * lambda.norm();

    let feasible = |w: &DVector<f64>| (y - &dict.columns * w).norm() <= set.sigma + tol;
    let l1 = |w: &DVector<f64>| w.iter().map(|v| v.abs()).sum::<f64>();
    if set.sigma == 0.0 {
        // supp(z) can miss an atom whose optimal coefficient is tiny or keep
        // one that is dying out, so also try it with each of the atoms the dual
        // ranks highest added, and with each of its own atoms dropped.
        let support: Vec<usize> = (0..z.len()).filter(|&j| z[j] != 0.0).collect();
        let corr = dict.columns.tr_mul(&lambda);
        let mut extra: Vec<usize> = (0..z.len()).filter(|&j| z[j] == 0.0).collect();
        extra.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()));
        let added = extra.into_iter().take(POLISH_EXTRA).map(|j| {
            let mut trial = support.clone();
            trial.push(j);
            trial
        });
        let dropped = (0..support.len()).filter(|_| support.len() > 1).map(|k| {
            let mut trial = support.clone();
            trial.remove(k);
            trial
        });
        for trial in std::iter::once(support.clone()).chain(added).chain(dropped) {
            if let Some(w) = polish(dict, y, &trial) {
                if feasible(&w) && l1(&w) - lower.max(face_bound(dict, y, &w, &lambda)) <= tol {
                    return Some(w);
                }
            }
        }
    }
    [z, x].into_iter().find(|w| feasible(w) && l1(w) - lower <= tol).cloned()
}

/// Dual bound from λ moved onto {λ : D_Sᵀλ = sign(w_S)}, the face of the
/// candidate w. There yᵀλ = ‖w‖₁ exactly, so only the off-support
/// correlations ‖Dᵀλ‖∞ > 1 cost anything.
fn face_bound(dict: &Dictionary, y: &DVector<f64>, w: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
    let ds = dict.columns.select_columns(&support);
    let signs = DVector::from_iterator(support.len(), support.iter().map(|&j| w[j].signum()));
    let Ok(step) = ds.transpose().svd(true, true).solve(&(signs - ds.tr_mul(lambda)), 1e-12) else {
        return f64::NEG_INFINITY;
    };
    let on_face = lambda + step;
    let reach = dict.columns.tr_mul(&on_face).amax().max(1.0);
    y.dot(&on_face) / reach
}

/// Least-squares refit of y on the columns where z is nonzero.
fn polish(dict: &Dictionary, y: &DVector<f64>, support: &[usize]) -> Option<DVector<f64>> {
    if support.is_empty() || support.len() > dict.dim() {
        return None;
    }
    let ds = dict.columns.select_columns(support);
    let coef = ds.svd(true, true).solve(y, 1e-12).ok()?;
    let mut w = DVector::zeros(dict.columns.ncols());
    for (k, &j) in support.iter().enumerate() {
        w[j] = coef[k];
    }
    Some(w)
}

/// Relative support threshold 10⁻⁴·max|wⱼ|.
pub fn default_support_tol(w: &DVector<f64>) -> f64 {
    1e-4 * w.amax()
}

/// True iff every coefficient above `support_tol` belongs to `true_class`.
pub fn ssc_support_check(
    code: &SparseCode,
    labels: &[usize],
    true_class: usize,
    support_tol: f64,
) -> bool {
    code.w
        .iter()
        .zip(labels)
        .all(|(&v, &l)| v.abs() <= support_tol || l == true_class)
}

#[derive(Debug, Clone)]
pub struct SrcDecision {
    pub class: usize,
    pub residuals: Vec<(usize, f64)>,
    pub code: SparseCode,
}

/// Classifies y by the smallest class-restricted reconstruction residual.
/// Ties go to the smallest class id.
pub fn src_classify(
    dict: &Dictionary,
    y: &DVector<f64>,
    opts: &BasisPursuitOptions,
) -> Result<SrcDecision> {
    let code = basis_pursuit(dict, y, opts)?;
    if code.status != SolverStatus::Converged {
        return Err(Error::Solver {
            status: code.status,
            iterations: code.iterations,
            gap: code.feasibility_gap,
        });
    }
    let (class, _) = code
        .residuals
        .iter()
        .fold((0usize, f64::INFINITY), |best, &(c, r)| if r < best.1 { (c, r) } else { best });
    Ok(SrcDecision {
        class,
        residuals: code.residuals.clone(),
        code,
    })
}

/// Classifies many signals; results are in input order regardless of scheduling.
pub fn src_classify_batch(
    dict: &Dictionary,
    ys: &[DVector<f64>],
    opts: &BasisPursuitOptions,
) -> Result<Vec<SrcDecision>> {
    ys.par_iter().map(|y| src_classify(dict, y, opts)).collect()
}

/// Fraction of `test` samples whose SRC label matches, using `train` as the dictionary.
pub fn src_accuracy(
    train: &LabeledDataset,
    test: &LabeledDataset,
    opts: &BasisPursuitOptions,
) -> Result<f64> {
    ensure(!test.is_empty(), || "empty test set".to_string())?;
    let dict = Dictionary::from_dataset(train)?;
    let ys: Vec<DVector<f64>> = (0..test.len()).map(|i| test.sample(i)).collect();
    let decisions = src_classify_batch(&dict, &ys, opts)?;
    let hits = decisions
        .iter()
        .zip(test.labels())
        .filter(|(d, &l)| d.class == l)
        .count();
    Ok(hits as f64 / test.len() as f64)
}

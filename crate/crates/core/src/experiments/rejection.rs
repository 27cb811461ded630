//! Empirical rejection probability of cosine and inner-product preservation.
//!
//! For each target cosine γ a fixed pair (x, y) is drawn once. For each m in
//! the grid, `trials` fresh projections R are applied and the ratio
//!
//! ```text
//! cosine mode:  (⟨Rx,Ry⟩·‖x‖‖y‖) / (‖Rx‖‖Ry‖·⟨x,y⟩)
//! inner mode:   ⟨Rx,Ry⟩ / ⟨x,y⟩
//! ```
//!
//! is accepted when it falls in [1−ε, 1+ε]. P̂ is the rejected fraction.
//! Trial seeds depend on (master seed, γ index, m, trial) only, never on ε,
//! so P̂ for several ε comes from the same projections.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_se, ExperimentReport};
use crate::error::{ensure, Error, Result};
use crate::randproj::{project_streaming, Recipe};
use crate::seed::{self, TAG_PAIR, TAG_TRIAL};

/// Acute cosine targets used in the reference experiment.
pub const ACUTE_TARGETS: [f64; 4] = [0.019021, 0.37161, 0.67809, 0.92349];
/// Obtuse cosine targets used in the reference experiment.
pub const OBTUSE_TARGETS: [f64; 4] = [-0.036831, -0.45916, -0.65797, -0.92704];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionMode {
    Cosine,
    InnerProduct,
}

impl std::str::FromStr for RejectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(RejectionMode::Cosine),
            "inner" | "inner-product" => Ok(RejectionMode::InnerProduct),
            other => Err(Error::invalid(format!("unknown rejection mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionConfig {
    pub n: usize,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub eps: f64,
    pub gammas: Vec<f64>,
    pub mode: RejectionMode,
    pub master_seed: u64,
    /// Vector lengths are drawn uniformly from this closed range.
    pub length_range: (f64, f64),
    pub recipe: Recipe,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        Self {
            n: 300,
            m_grid: (1..=10).map(|i| 30 * i).collect(),
            trials: 2000,
            eps: 0.1,
            gammas: ACUTE_TARGETS.iter().chain(&OBTUSE_TARGETS).copied().collect(),
            mode: RejectionMode::Cosine,
            master_seed: 0,
            length_range: (1.0, 10.0),
            recipe: Recipe::DenseGaussian,
        }
    }
}

impl RejectionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.trials >= 1, || "need at least one trial".to_string())?;
        ensure(!self.m_grid.is_empty(), || "m grid is empty".to_string())?;
        ensure(self.m_grid.iter().all(|&m| m >= 1), || "m values must be positive".to_string())?;
        ensure(self.n >= 2, || "ambient dimension must be at least 2".to_string())?;
        ensure(!self.gammas.is_empty(), || "no cosine targets".to_string())?;
        validate_eps(self.eps)?;
        for &g in &self.gammas {
            ensure((-1.0..=1.0).contains(&g), || format!("cosine target {g} outside [-1, 1]"))?;
            ensure(g != 0.0, || {
                "cosine target 0 is not allowed: the rejection ratio divides by <x,y>".to_string()
            })?;
        }
        let (lo, hi) = self.length_range;
        ensure(lo > 0.0 && hi >= lo, || format!("bad length range ({lo}, {hi})"))
    }
}

fn validate_eps(eps: f64) -> Result<()> {
    ensure(eps > 0.0 && eps < 1.0, || format!("epsilon must lie in (0, 1), got {eps}"))
}

/// Two vectors with cosine exactly γ (to rounding), given lengths and a random orientation.
pub fn make_pair_with_cosine(
    n: usize,
    gamma: f64,
    length_x: f64,
    length_y: f64,
    seed: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    ensure((-1.0..=1.0).contains(&gamma), || format!("cosine {gamma} outside [-1, 1]"))?;
    ensure(length_x > 0.0 && length_y > 0.0, || "lengths must be positive".to_string())?;
    ensure(n >= 2 || gamma.abs() == 1.0, || "need n >= 2 for |cosine| < 1".to_string())?;
    ensure(n >= 1, || "dimension must be positive".to_string())?;
    let mut rng = seed::stream(&[seed, TAG_PAIR]);
    let mut draw = || DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = draw().normalize();
    let y_unit = if n == 1 {
        &a * gamma
    } else {
        let raw = draw();
        let b = (&raw - &a * a.dot(&raw)).normalize();
        &a * gamma + b * (1.0 - gamma * gamma).max(0.0).sqrt()
    };
    Ok((a * length_x, y_unit * length_y))
}

/// Accept/reject ratio for one projected pair; NaN when a projection vanishes.
fn ratio(mode: RejectionMode, x: &DVector<f64>, y: &DVector<f64>, rx: &DVector<f64>, ry: &DVector<f64>) -> f64 {
    let inner = x.dot(y);
    match mode {
        RejectionMode::Cosine => (rx.dot(ry) * x.norm() * y.norm()) / (rx.norm() * ry.norm() * inner),
        RejectionMode::InnerProduct => rx.dot(ry) / inner,
    }
}

/// Ratios for every trial of one (γ, m) cell.
#[derive(Debug, Clone)]
pub struct RejectionCell {
    pub gamma_index: usize,
    pub gamma: f64,
    pub m: usize,
    pub ratios: Vec<f64>,
}

impl RejectionCell {
    pub fn rejections(&self, eps: f64) -> usize {
        self.ratios
            .iter()
            .filter(|&&r| !((1.0 - eps) <= r && r <= (1.0 + eps)))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionRow {
    pub gamma: f64,
    pub m: usize,
    pub eps: f64,
    pub rejections: usize,
    pub trials: usize,
    pub p_hat: f64,
}

impl RejectionRow {
    pub fn standard_error(&self) -> f64 {
        binomial_se(self.p_hat, self.trials)
    }
}

/// The pair used for target index `gamma_index`, with lengths drawn from the config range.
pub fn config_pair(config: &RejectionConfig, gamma_index: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let gamma = config.gammas[gamma_index];
    let pair_seed = seed::derive_seed(&[config.master_seed, gamma_index as u64]);
    let mut rng = seed::stream(&[pair_seed, TAG_PAIR, 1]);
    let (lo, hi) = config.length_range;
    let mut length = || if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let (lx, ly) = (length(), length());
    make_pair_with_cosine(config.n, gamma, lx, ly, pair_seed)
}

/// Runs every trial of every (γ, m) cell. Cells come out sorted by (γ, m).
pub fn rejection_samples(config: &RejectionConfig) -> Result<Vec<RejectionCell>> {
    config.validate()?;
    let mut cells = Vec::new();
    for (gi, &gamma) in config.gammas.iter().enumerate() {
        let (x, y) = config_pair(config, gi)?;
        for &m in &config.m_grid {
            let ratios = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let s = seed::derive_seed(&[config.master_seed, TAG_TRIAL, gi as u64, m as u64, t as u64]);
                    let p = project_streaming(config.recipe, s, m, &[&x, &y])?;
                    Ok(ratio(config.mode, &x, &y, &p[0], &p[1]))
                })
                .collect::<Result<Vec<f64>>>()?;
            cells.push(RejectionCell { gamma_index: gi, gamma, m, ratios });
        }
    }
    cells.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.m.cmp(&b.m)));
    Ok(cells)
}

pub fn rejection_rows(cells: &[RejectionCell], eps: f64) -> Result<Vec<RejectionRow>> {
    validate_eps(eps)?;
    Ok(cells
        .iter()
        .map(|c| {
            let rejections = c.rejections(eps);
            let trials = c.ratios.len();
            RejectionRow {
                gamma: c.gamma,
                m: c.m,
                eps,
                rejections,
                trials,
                p_hat: rejections as f64 / trials as f64,
            }
        })
        .collect())
}

/// P̂ for every (γ, m) cell and every ε in `eps_list`, from one set of projections.
pub fn rejection_curves(config: &RejectionConfig, eps_list: &[f64]) -> Result<ExperimentReport> {
    ensure(!eps_list.is_empty(), || "no epsilon values".to_string())?;
    let cells = rejection_samples(config)?;
    let mut rows = Vec::new();
    for &eps in eps_list {
        rows.extend(rejection_rows(&cells, eps)?);
    }
    rows.sort_by(|a, b| {
        a.gamma
            .total_cmp(&b.gamma)
            .then(a.m.cmp(&b.m))
            .then(a.eps.total_cmp(&b.eps))
    });

    #[derive(Serialize)]
    struct Shown<'a> {
        #[serde(flatten)]
        config: &'a RejectionConfig,
        eps_list: &'a [f64],
    }
    let mut report = ExperimentReport::new(
        "reject",
        &Shown { config, eps_list },
        &["gamma", "m", "eps", "rejections", "trials", "p_hat", "se"],
    )?;
    for r in &rows {
        report.push_row(vec![
            r.gamma.into(),
            r.m.into(),
            r.eps.into(),
            r.rejections.into(),
            r.trials.into(),
            r.p_hat.into(),
            r.standard_error().into(),
        ]);
    }
    let mut lengths = Vec::new();
    for gi in 0..config.gammas.len() {
        let (x, y) = config_pair(config, gi)?;
        lengths.push((config.gammas[gi], x.norm(), y.norm()));
    }
    report.set_meta("master_seed", config.master_seed)?;
    report.set_meta("pair_lengths", lengths)?;
    Ok(report)
}

pub fn rejection_curve(config: &RejectionConfig) -> Result<ExperimentReport> {
    rejection_curves(config, &[config.eps])
}

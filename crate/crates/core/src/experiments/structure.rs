//! Seeded runs checking class-margin preservation and ℓ1 support recovery on
//! synthetic union-of-subspaces data.

use rayon::prelude::*;
use serde::Serialize;

use super::{Cell, ExperimentReport};
use crate::bounds::{min_projection_dim, projected_margin_bound, MinDimMode, DEFAULT_DELTA};
use crate::data::{generate_union, sample_from_class, UnionSpec};
use crate::error::{ensure, Result};
use crate::geometry::dataset_margins;
use crate::randproj::{ProjectionMatrix, Recipe};
use crate::seed;
use crate::sparserep::{basis_pursuit, default_support_tol, ssc_support_check, BasisPursuitOptions, Dictionary};

const TAG_STRUCTURE: u64 = 0x5354_5255_4354;

#[derive(Debug, Clone, Serialize)]
pub struct MarginRunConfig {
    pub n: usize,
    pub classes: usize,
    pub d: usize,
    pub per_class: usize,
    pub eps: f64,
    pub delta: f64,
    pub runs: usize,
    pub master_seed: u64,
    pub recipe: Recipe,
}

impl Default for MarginRunConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            classes: 3,
            d: 2,
            per_class: 10,
            eps: 0.3,
            delta: DEFAULT_DELTA,
            runs: 100,
            master_seed: 0,
            recipe: Recipe::DenseGaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRun {
    pub run: usize,
    pub m: usize,
    /// (class, γᵢ, projected γ̄ᵢ, bound)
    pub classes: Vec<(usize, f64, f64, f64)>,
}

impl MarginRun {
    pub fn holds(&self) -> bool {
        self.classes.iter().all(|&(_, _, projected, bound)| projected <= bound)
    }
}

/// For each run: generate data, project at the minimum m for (N, ε, δ), and
/// compare every projected class margin to (max(γᵢ, 0) + ε)/(1 − ε).
pub fn margin_preservation(config: &MarginRunConfig) -> Result<Vec<MarginRun>> {
    ensure(config.runs >= 1, || "need at least one run".to_string())?;
    let total = config.classes * config.per_class;
    let m = min_projection_dim(total, config.eps, config.delta, MinDimMode::ExactInversion)?.m;
    ensure(m <= config.n, || {
        format!("required projection dimension {m} exceeds ambient dimension {}", config.n)
    })?;
    (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let s = seed::derive_seed(&[config.master_seed, TAG_STRUCTURE, run as u64]);
            let data = generate_union(&UnionSpec::uniform(config.n, config.classes, config.d, config.per_class, s))?;
            let r = ProjectionMatrix::generate(config.n, m, config.recipe, seed::derive_seed(&[s, 1]))?;
            let before = dataset_margins(&data)?;
            let after = dataset_margins(&r.project_dataset(&data)?)?;
            let classes = before
                .iter()
                .zip(&after)
                .map(|(b, a)| {
                    let bound = projected_margin_bound(b.gamma.max(0.0), config.eps)?;
                    Ok((b.class, b.gamma, a.gamma, bound))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MarginRun { run, m, classes })
        })
        .collect()
}

pub fn margin_report(config: &MarginRunConfig) -> Result<ExperimentReport> {
    let runs = margin_preservation(config)?;
    let mut report = ExperimentReport::new(
        "margin",
        config,
        &["run", "m", "class", "gamma", "projected_gamma", "bound", "holds"],
    )?;
    for run in &runs {
        for &(class, gamma, projected, bound) in &run.classes {
            report.push_row(vec![
                run.run.into(),
                run.m.into(),
                class.into(),
                gamma.into(),
                projected.into(),
                bound.into(),
                Cell::Text((projected <= bound).to_string()),
            ]);
        }
    }
    let held = runs.iter().filter(|r| r.holds()).count();
    report.set_meta("runs_holding", held)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportRunConfig {
    pub n: usize,
    pub classes: usize,
    pub d: usize,
    pub per_class: usize,
    /// Fresh test points drawn per class and instance.
    pub tests_per_class: usize,
    pub instances: usize,
    pub master_seed: u64,
    pub solver: BasisPursuitOptions,
}

impl Default for SupportRunConfig {
    fn default() -> Self {
        Self {
            n: 50,
            classes: 3,
            d: 3,
            per_class: 15,
            tests_per_class: 3,
            instances: 50,
            master_seed: 0,
            solver: BasisPursuitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportOutcome {
    pub instance: usize,
    pub class: usize,
    pub converged: bool,
    pub pure: bool,
    /// ℓ1 mass outside the true class over total ℓ1 mass.
    pub leakage: f64,
}

/// Codes fresh points from each subspace over the clean training dictionary
/// and checks that the support stays inside the point's own class.
pub fn support_recovery(config: &SupportRunConfig) -> Result<Vec<SupportOutcome>> {
    ensure(config.instances >= 1, || "need at least one instance".to_string())?;
    let per_instance = (0..config.instances)
        .into_par_iter()
        .map(|inst| {
            let s = seed::derive_seed(&[config.master_seed, TAG_STRUCTURE, 2, inst as u64]);
            let data = generate_union(&UnionSpec::uniform(config.n, config.classes, config.d, config.per_class, s))?;
            let dict = Dictionary::from_dataset(&data)?;
            let mut out = Vec::new();
            for class in 1..=config.classes {
                for y in sample_from_class(&data, class, config.tests_per_class, seed::derive_seed(&[s, 3]))? {
                    let code = basis_pursuit(&dict, &y, &config.solver)?;
                    let tol = default_support_tol(&code.w);
                    let total = code.l1_norm();
                    let off: f64 = code
                        .w
                        .iter()
                        .zip(dict.labels())
                        .filter(|(_, &l)| l != class)
                        .map(|(v, _)| v.abs())
                        .sum();
                    out.push(SupportOutcome {
                        instance: inst,
                        class,
                        converged: code.is_converged(),
                        pure: ssc_support_check(&code, dict.labels(), class, tol),
                        leakage: if total > 0.0 { off / total } else { 0.0 },
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

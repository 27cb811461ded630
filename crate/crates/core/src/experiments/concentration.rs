//! Monte-Carlo checks of the norm and cosine concentration bounds.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::binomial_se;
use crate::bounds::{self, cosine_interval};
use crate::error::{ensure, Result};
use crate::experiments::rejection::make_pair_with_cosine;
use crate::geometry::cosine;
use crate::randproj::{project_streaming, Recipe};
use crate::seed::{self, TAG_PAIR, TAG_TRIAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationRate {
    pub violations: usize,
    pub trials: usize,
    pub rate: f64,
    /// Failure probability allowed by the bound.
    pub bound: f64,
}

impl ViolationRate {
    fn new(violations: usize, trials: usize, bound: f64) -> Self {
        Self {
            violations,
            trials,
            rate: violations as f64 / trials as f64,
            bound,
        }
    }

    pub fn standard_error(&self) -> f64 {
        binomial_se(self.rate, self.trials)
    }

    /// rate ≤ bound + k·SE, with SE taken at the bound.
    pub fn within(&self, k: f64) -> bool {
        self.rate <= self.bound + k * binomial_se(self.bound.min(1.0), self.trials)
    }
}

/// Fraction of trials where ‖Rx‖² leaves [(1−ε)‖x‖², (1+ε)‖x‖²].
/// Each trial draws a fresh x and a fresh R.
pub fn jl_violation_rate(
    n: usize,
    m: usize,
    eps: f64,
    trials: usize,
    recipe: Recipe,
    master_seed: u64,
) -> Result<ViolationRate> {
    ensure(trials >= 1, || "need at least one trial".to_string())?;
    let bound = 1.0 - bounds::jl_success_prob(m, eps)?;
    let violations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(&[master_seed, TAG_PAIR, t as u64]);
            let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = seed::derive_seed(&[master_seed, TAG_TRIAL, m as u64, t as u64]);
            let rx = &project_streaming(recipe, s, m, &[&x])?[0];
            let ratio = rx.norm_squared() / x.norm_squared();
            Ok(usize::from(!((1.0 - eps) <= ratio && ratio <= 1.0 + eps)))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(ViolationRate::new(violations, trials, bound))
}

/// Fraction of trials where cos(Rx, Ry) falls outside the cosine interval for γ.
pub fn cosine_interval_violation_rate(
    n: usize,
    m: usize,
    gamma: f64,
    eps: f64,
    trials: usize,
    recipe: Recipe,
    master_seed: u64,
) -> Result<ViolationRate> {
    ensure(trials >= 1, || "need at least one trial".to_string())?;
    let interval = cosine_interval(gamma, eps)?;
    let bound = 1.0 - bounds::cosine_success_prob(m, eps)?;
    let (x, y) = make_pair_with_cosine(n, gamma, 1.0, 1.0, master_seed)?;
    let violations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed::derive_seed(&[master_seed, TAG_TRIAL, m as u64, t as u64]);
            let p = project_streaming(recipe, s, m, &[&x, &y])?;
            // a vanishing projection has no cosine; count it as a violation
            let inside = cosine(&p[0], &p[1]).map(|c| interval.contains(c)).unwrap_or(false);
            Ok(usize::from(!inside))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(ViolationRate::new(violations, trials, bound))
}

//! RP-vs-PCA reduction timing and SRC accuracy.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Cell, ExperimentReport};
use crate::baseline::pca_fit;
use crate::data::{self, LabeledDataset};
use crate::error::{ensure, Error, Result};
use crate::randproj::{ProjectionMatrix, Recipe};
use crate::seed;
use crate::sparserep::{src_accuracy, BasisPursuitOptions};

const TAG_BENCH: u64 = 0x4245_4e43_48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rp,
    Pca,
    /// No reduction; the reference accuracy.
    Full,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rp => "rp",
            Method::Pca => "pca",
            Method::Full => "full",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp" => Ok(Method::Rp),
            "pca" => Ok(Method::Pca),
            "full" => Ok(Method::Full),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub methods: Vec<Method>,
    pub split_fraction: f64,
    pub seed: u64,
    pub recipe: Recipe,
    /// Timed repetitions after one untimed warm-up; 0 disables timing.
    pub timing_repeats: usize,
    /// Run the SRC classifier on the held-out split.
    pub accuracy: bool,
    pub solver: BasisPursuitOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![100],
            methods: vec![Method::Rp, Method::Pca],
            split_fraction: 0.5,
            seed: 0,
            recipe: Recipe::DenseGaussian,
            timing_repeats: 5,
            accuracy: true,
            solver: BasisPursuitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub dim: usize,
    pub time_ms: Option<f64>,
    pub accuracy: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Median wall time in ms of `repeats` runs of `f`, after one warm-up run.
pub fn median_time_ms<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    ensure(repeats >= 1, || "need at least one timed repetition".to_string())?;
    f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(f()?);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(median(times))
}

fn rp_seed(config: &BenchConfig, dim: usize) -> u64 {
    seed::derive_seed(&[config.seed, TAG_BENCH, dim as u64])
}

/// Reduction cost only: RP builds R and projects every sample; PCA fits on
/// `fit_on` and projects every sample.
pub fn time_reduction(
    method: Method,
    data: &LabeledDataset,
    fit_on: &LabeledDataset,
    dim: usize,
    config: &BenchConfig,
) -> Result<f64> {
    let n = data.ambient_dim();
    match method {
        Method::Rp => median_time_ms(config.timing_repeats, || {
            ProjectionMatrix::generate(n, dim, config.recipe, rp_seed(config, dim))?.project_dataset(data)
        }),
        Method::Pca => median_time_ms(config.timing_repeats, || {
            pca_fit(fit_on, dim)?.project_dataset(data)
        }),
        Method::Full => Ok(0.0),
    }
}

fn reduced_accuracy(
    method: Method,
    train: &LabeledDataset,
    test: &LabeledDataset,
    dim: usize,
    config: &BenchConfig,
) -> Result<f64> {
    let n = train.ambient_dim();
    match method {
        Method::Rp => {
            let r = ProjectionMatrix::generate(n, dim, config.recipe, rp_seed(config, dim))?;
            src_accuracy(&r.project_dataset(train)?, &r.project_dataset(test)?, &config.solver)
        }
        Method::Pca => {
            let model = pca_fit(train, dim)?;
            src_accuracy(&model.project_dataset(train)?, &model.project_dataset(test)?, &config.solver)
        }
        Method::Full => src_accuracy(train, test, &config.solver),
    }
}

/// Timing and held-out SRC accuracy for every (method, dim).
/// `Full` contributes one row at dim = n regardless of `dims`.
pub fn structure_benchmark(data: &LabeledDataset, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let n = data.ambient_dim();
    ensure(!config.methods.is_empty(), || "no methods selected".to_string())?;
    ensure(!config.dims.is_empty() || config.methods == [Method::Full], || "no dimensions given".to_string())?;
    for &d in &config.dims {
        ensure(d >= 1 && d <= n, || format!("dimension {d} outside 1..={n}"))?;
    }
    let (train, test) = data::split(data, config.split_fraction, config.seed)?;
    if config.methods.contains(&Method::Pca) {
        let cap = n.min(train.len());
        for &d in &config.dims {
            ensure(d <= cap, || {
                format!("pca dimension {d} exceeds min(n, training samples) = {cap}")
            })?;
        }
    }

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    for &method in &methods {
        let dims: Vec<usize> = if method == Method::Full { vec![n] } else { config.dims.clone() };
        for dim in dims {
            let time_ms = if config.timing_repeats > 0 && method != Method::Full {
                Some(time_reduction(method, data, &train, dim, config)?)
            } else {
                None
            };
            let accuracy = if config.accuracy {
                Some(reduced_accuracy(method, &train, &test, dim, config)?)
            } else {
                None
            };
            rows.push(BenchRow { method, dim, time_ms, accuracy });
        }
    }
    Ok(rows)
}

pub fn benchmark_report(data: &LabeledDataset, config: &BenchConfig) -> Result<ExperimentReport> {
    let rows = structure_benchmark(data, config)?;
    let mut report = ExperimentReport::new("bench", config, &["method", "dim", "time_ms", "accuracy"])?;
    for r in rows {
        report.push_row(vec![
            Cell::Text(r.method.name().to_string()),
            r.dim.into(),
            r.time_ms.into(),
            r.accuracy.into(),
        ]);
    }
    report.set_meta("samples", data.len())?;
    report.set_meta("ambient_dim", data.ambient_dim())?;
    report.set_meta("classes", data.num_classes())?;
    Ok(report)
}

//! Closed-form concentration bounds for Gaussian random projections.
//!
//! All probabilities share the tail term `exp(−(m/4)(ε² − ε³))` and are
//! clamped to [0, 1]; the raw expressions go negative for small m.

use serde::Serialize;

use crate::error::{ensure, Error, Result};

pub const DEFAULT_DELTA: f64 = 0.95;
pub const DEFAULT_SUBSPACE_CONSTANT: f64 = 4.0;

fn check_eps(eps: f64) -> Result<()> {
    ensure(eps > 0.0 && eps < 0.5, || format!("epsilon must lie in (0, 1/2), got {eps}"))
}

fn check_delta(delta: f64) -> Result<()> {
    ensure(delta > 0.0 && delta < 1.0, || format!("delta must lie in (0, 1), got {delta}"))
}

fn check_gamma(gamma: f64) -> Result<()> {
    ensure((-1.0..=1.0).contains(&gamma), || {
        format!("cosine must lie in [-1, 1], got {gamma}")
    })
}

fn check_m(m: usize) -> Result<()> {
    ensure(m >= 1, || "projection dimension m must be positive".to_string())
}

/// ε² − ε³
fn rate(eps: f64) -> f64 {
    eps * eps - eps * eps * eps
}

/// exp(−(m/4)(ε² − ε³))
pub fn tail_term(m: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    check_m(m)?;
    Ok((-(m as f64) / 4.0 * rate(eps)).exp())
}

/// Lower bound on P((1−ε)‖x‖² ≤ ‖Rx‖² ≤ (1+ε)‖x‖²).
pub fn jl_success_prob(m: usize, eps: f64) -> Result<f64> {
    Ok((1.0 - 2.0 * tail_term(m, eps)?).max(0.0))
}

/// Lower bound on the probability that the projected cosine lands in [`cosine_interval`].
pub fn cosine_success_prob(m: usize, eps: f64) -> Result<f64> {
    Ok((1.0 - 8.0 * tail_term(m, eps)?).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CosineCase {
    /// γ < −ε
    Negative,
    /// −ε ≤ γ < ε
    NearZero,
    /// γ ≥ ε
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosineInterval {
    pub lo: f64,
    pub hi: f64,
    pub case: CosineCase,
}

impl CosineInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Interval that holds the projected cosine with probability ≥ [`cosine_success_prob`].
pub fn cosine_interval(gamma: f64, eps: f64) -> Result<CosineInterval> {
    check_gamma(gamma)?;
    check_eps(eps)?;
    let (plus, minus) = (1.0 + eps, 1.0 - eps);
    let interval = if gamma < -eps {
        CosineInterval {
            lo: (gamma - eps) / minus,
            hi: (gamma + eps) / plus,
            case: CosineCase::Negative,
        }
    } else if gamma < eps {
        CosineInterval {
            lo: (gamma - eps) / minus,
            hi: (gamma + eps) / minus,
            case: CosineCase::NearZero,
        }
    } else {
        CosineInterval {
            lo: (gamma - eps) / plus,
            hi: (gamma + eps) / minus,
            case: CosineCase::Positive,
        }
    };
    Ok(interval)
}

/// [⟨x,y⟩ − ε‖x‖‖y‖, ⟨x,y⟩ + ε‖x‖‖y‖]; the width grows with the vector lengths.
pub fn inner_product_interval(x_norm: f64, y_norm: f64, inner: f64, eps: f64) -> Result<(f64, f64)> {
    check_eps(eps)?;
    ensure(x_norm > 0.0 && y_norm > 0.0, || "vector norms must be positive".to_string())?;
    ensure(inner.abs() <= x_norm * y_norm * (1.0 + 1e-12), || {
        format!("inner product {inner} exceeds the norm product")
    })?;
    let slack = eps * x_norm * y_norm;
    Ok((inner - slack, inner + slack))
}

/// Upper bound γᵢ/(1−ε) + ε/(1−ε) on a class margin after projection.
pub fn projected_margin_bound(gamma: f64, eps: f64) -> Result<f64> {
    ensure((0.0..1.0).contains(&gamma), || {
        format!("class margin must lie in [0, 1), got {gamma}")
    })?;
    check_eps(eps)?;
    Ok((gamma + eps) / (1.0 - eps))
}

/// Lower bound on the probability that every class margin obeys
/// [`projected_margin_bound`] simultaneously, for N samples.
pub fn multiclass_success_prob(n_samples: usize, m: usize, eps: f64) -> Result<f64> {
    ensure(n_samples >= 1, || "sample count must be positive".to_string())?;
    let n = n_samples as f64;
    Ok((1.0 - 6.0 * n * n * tail_term(m, eps)?).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinDimMode {
    /// m ≥ 8/(ε²−ε³) · ln(√6·N/(1−δ)), the published closed form.
    PaperLiteral,
    /// m ≥ 4/(ε²−ε³) · ln(6N²/(1−δ)), solving 1 − 6N²e^{−(m/4)(ε²−ε³)} ≥ δ for m.
    ExactInversion,
}

impl std::str::FromStr for MinDimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" | "literal" => Ok(MinDimMode::PaperLiteral),
            "exact-inversion" | "exact" => Ok(MinDimMode::ExactInversion),
            other => Err(Error::invalid(format!("unknown min-dim mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MinProjectionDim {
    pub m: usize,
    pub mode: MinDimMode,
}

pub fn min_projection_dim(
    n_samples: usize,
    eps: f64,
    delta: f64,
    mode: MinDimMode,
) -> Result<MinProjectionDim> {
    ensure(n_samples >= 1, || "sample count must be positive".to_string())?;
    check_eps(eps)?;
    check_delta(delta)?;
    let n = n_samples as f64;
    let raw = match mode {
        MinDimMode::PaperLiteral => 8.0 / rate(eps) * (6f64.sqrt() * n / (1.0 - delta)).ln(),
        MinDimMode::ExactInversion => 4.0 / rate(eps) * (6.0 * n * n / (1.0 - delta)).ln(),
    };
    let mut m = (raw.ceil() as usize).max(1);
    if mode == MinDimMode::ExactInversion {
        // ceil can land one short when raw is within rounding of an integer
        while multiclass_success_prob(n_samples, m, eps)? < delta {
            m += 1;
        }
    }
    Ok(MinProjectionDim { m, mode })
}

/// ⌈c·d·ln(max(d, 2))⌉ random vectors for data confined to a d-dimensional subspace.
pub fn recommended_dim_for_subspace(d: usize, c: f64) -> Result<usize> {
    ensure(d >= 1, || "subspace dimension must be positive".to_string())?;
    ensure(c > 0.0 && c.is_finite(), || format!("constant must be positive, got {c}"))?;
    Ok((c * d as f64 * (d.max(2) as f64).ln()).ceil() as usize)
}

/// A bundle of inputs for evaluating every bound at once (the CLI `bounds` view).
#[derive(Debug, Clone, Serialize)]
pub struct BoundQuery {
    pub eps: f64,
    pub m: usize,
    pub n_samples: usize,
    pub delta: f64,
    pub gamma: f64,
}

impl Default for BoundQuery {
    fn default() -> Self {
        Self {
            eps: 0.3,
            m: 300,
            n_samples: 1000,
            delta: DEFAULT_DELTA,
            gamma: 0.5,
        }
    }
}

impl BoundQuery {
    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        check_m(self.m)?;
        check_delta(self.delta)?;
        check_gamma(self.gamma)?;
        ensure(self.n_samples >= 1, || "sample count must be positive".to_string())
    }

    /// (name, value) pairs for every quantity defined at this query point.
    pub fn evaluate(&self) -> Result<Vec<(String, f64)>> {
        self.validate()?;
        let mut out = vec![
            ("jl_success_prob".to_string(), jl_success_prob(self.m, self.eps)?),
            ("cosine_success_prob".to_string(), cosine_success_prob(self.m, self.eps)?),
        ];
        let ci = cosine_interval(self.gamma, self.eps)?;
        out.push(("cosine_interval_lo".into(), ci.lo));
        out.push(("cosine_interval_hi".into(), ci.hi));
        let (lo, hi) = inner_product_interval(1.0, 1.0, self.gamma, self.eps)?;
        out.push(("unit_inner_product_lo".into(), lo));
        out.push(("unit_inner_product_hi".into(), hi));
        if (0.0..1.0).contains(&self.gamma) {
            out.push((
                "projected_margin_bound".into(),
                projected_margin_bound(self.gamma, self.eps)?,
            ));
        }
        out.push((
            "multiclass_success_prob".into(),
            multiclass_success_prob(self.n_samples, self.m, self.eps)?,
        ));
        for mode in [MinDimMode::PaperLiteral, MinDimMode::ExactInversion] {
            let md = min_projection_dim(self.n_samples, self.eps, self.delta, mode)?;
            let name = match mode {
                MinDimMode::PaperLiteral => "min_dim_paper_literal",
                MinDimMode::ExactInversion => "min_dim_exact_inversion",
            };
            out.push((name.into(), md.m as f64));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jl_examples() {
        // oracle: 1 - 2 exp(-75 * 0.063)
        let expected = 1.0 - 2.0 * (-4.725f64).exp();
        assert!((jl_success_prob(300, 0.3).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.982_258_572).abs() < 1e-9);
        assert_eq!(jl_success_prob(1, 0.1).unwrap(), 0.0);
        let mut prev = 0.0;
        for m in (100..5000).step_by(100) {
            let p = jl_success_prob(m, 0.2).unwrap();
            assert!(p >= prev);
            prev = p;
        }
        assert!(jl_success_prob(10, 0.5).is_err());
        assert!(jl_success_prob(10, 0.0).is_err());
    }

    #[test]
    fn cosine_interval_cases() {
        let c = cosine_interval(0.5, 0.1).unwrap();
        assert_eq!(c.case, CosineCase::Positive);
        assert!((c.lo - 0.363_636_363_636).abs() < 1e-10);
        assert!((c.hi - 0.666_666_666_667).abs() < 1e-10);

        let c = cosine_interval(0.0, 0.1).unwrap();
        assert_eq!(c.case, CosineCase::NearZero);
        assert!((c.lo + 0.111_111_111_111).abs() < 1e-10);
        assert!((c.hi - 0.111_111_111_111).abs() < 1e-10);

        let c = cosine_interval(-0.5, 0.1).unwrap();
        assert_eq!(c.case, CosineCase::Negative);
        assert!((c.lo + 0.666_666_666_667).abs() < 1e-10);
        assert!((c.hi + 0.363_636_363_636).abs() < 1e-10);

        assert!(cosine_interval(1.5, 0.1).is_err());
    }

    #[test]
    fn cosine_interval_extremes_and_boundaries() {
        for eps in [0.05, 0.1, 0.3, 0.49] {
            assert!(cosine_interval(1.0, eps).unwrap().contains(1.0));
            assert!(cosine_interval(-1.0, eps).unwrap().contains(-1.0));
            for b in [eps, -eps] {
                let below = cosine_interval(b - 1e-13, eps).unwrap();
                let at = cosine_interval(b, eps).unwrap();
                assert_ne!(below.case, at.case);
                assert!((below.lo - at.lo).abs() < 1e-12);
                assert!((below.hi - at.hi).abs() < 1e-12);
            }
        }
        let tiny = cosine_interval(0.4, 1e-12).unwrap();
        assert!((tiny.lo - 0.4).abs() < 1e-11 && (tiny.hi - 0.4).abs() < 1e-11);
    }

    #[test]
    fn inner_product_examples() {
        let (lo, hi) = inner_product_interval(1.0, 1.0, 0.5, 0.1).unwrap();
        assert!((lo - 0.4).abs() < 1e-15 && (hi - 0.6).abs() < 1e-15);
        let (lo, hi) = inner_product_interval(10.0, 10.0, 50.0, 0.1).unwrap();
        assert!((lo - 40.0).abs() < 1e-12 && (hi - 60.0).abs() < 1e-12);
        let (lo, hi) = inner_product_interval(2.0, 3.0, 1.0, 1e-14).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        assert!(inner_product_interval(0.0, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn margin_bound_examples() {
        assert!((projected_margin_bound(0.0, 0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(projected_margin_bound(0.0, 1e-12).unwrap() < 1e-11);
        assert!(projected_margin_bound(1.0, 0.1).is_err());
        assert!(projected_margin_bound(0.2, 0.3).unwrap() > projected_margin_bound(0.1, 0.3).unwrap());
        assert!(projected_margin_bound(0.2, 0.3).unwrap() > projected_margin_bound(0.2, 0.2).unwrap());
    }

    #[test]
    fn multiclass_examples() {
        let single = 1.0 - 6.0 * tail_term(5000, 0.2).unwrap();
        assert_eq!(multiclass_success_prob(1, 5000, 0.2).unwrap(), single);
        // oracle: 1 - 6e4 * exp(-1500 * 0.019125)
        let p = multiclass_success_prob(100, 6000, 0.15).unwrap();
        let deficit = 6.0e4 * (-28.6875f64).exp();
        assert!((1.0 - p - deficit).abs() < 1e-15);
        assert!((deficit - 2.086_067e-8).abs() < 1e-13);
        assert_eq!(multiclass_success_prob(1000, 10, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn min_dim_examples() {
        let lit = min_projection_dim(1000, 0.4, 0.95, MinDimMode::PaperLiteral).unwrap();
        assert_eq!(lit.m, 900);
        assert_eq!(lit.mode, MinDimMode::PaperLiteral);

        let floor = min_projection_dim(1, 0.3, 1e-9, MinDimMode::ExactInversion).unwrap();
        let expected = (4.0 / (0.09 - 0.027) * 6f64.ln()).ceil() as usize;
        assert!(floor.m == expected || floor.m == expected + 1);

        let exact = min_projection_dim(1000, 0.15, 0.95, MinDimMode::ExactInversion).unwrap();
        assert!(multiclass_success_prob(1000, exact.m, 0.15).unwrap() >= 0.95);
        assert!(multiclass_success_prob(1000, exact.m - 1, 0.15).unwrap() < 0.95);
    }

    #[test]
    fn subspace_rule() {
        assert_eq!(
            recommended_dim_for_subspace(1, 4.0).unwrap(),
            (4.0 * 2f64.ln()).ceil() as usize
        );
        assert_eq!(recommended_dim_for_subspace(9, 4.0).unwrap(), 80);
        let mut prev = 0;
        for d in 1..200 {
            let m = recommended_dim_for_subspace(d, DEFAULT_SUBSPACE_CONSTANT).unwrap();
            assert!(m >= prev);
            prev = m;
        }
        assert!(recommended_dim_for_subspace(0, 4.0).is_err());
    }

    #[test]
    fn query_evaluates() {
        let rows = BoundQuery::default().evaluate().unwrap();
        assert!(rows.iter().any(|(k, _)| k == "min_dim_exact_inversion"));
        let bad = BoundQuery { eps: 0.7, ..BoundQuery::default() };
        assert!(bad.evaluate().is_err());
    }
}

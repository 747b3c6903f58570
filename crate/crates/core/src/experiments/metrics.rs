//! Error measures and their Monte-Carlo summaries.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::Result;
use crate::periodogram::{fourier_grid, zero_bin};
use crate::quadrature::EvenRule;
use crate::spectral_model::{LrdProfile, ModelSpec};

pub const MIN_HISTOGRAM_BINS: usize = 10;
pub const MAX_HISTOGRAM_BINS: usize = 1000;

/// `∫_{-π}^{π} |f_{n,θ₀}(ω) - f_{n,θ̂}(ω)| dω`.
pub fn l1_error(model: &ModelSpec, theta0: &LrdProfile, theta_hat: &LrdProfile, n: usize, rule: &EvenRule) -> f64 {
    let (a0, a1) = (theta0.alpha(n), theta_hat.alpha(n));
    if a0 == a1 {
        return 0.0;
    }
    rule.integrate(|w| (model.density_at(a0, n, w) - model.density_at(a1, n, w)).abs())
}

/// Pointwise errors `f̂_n(ω_k) - f_{n,θ₀}(ω_k)` over the nonzero Fourier bins.
/// `row` is indexed like [`fourier_grid`] when it has `T` entries, or like
/// the grid without its zero bin when it has `T - 1`.
pub fn grid_errors(row: &[f64], model: &ModelSpec, theta0: &LrdProfile, n: usize, t_len: usize) -> Result<Vec<f64>> {
    let zero = zero_bin(t_len);
    let grid = fourier_grid(t_len);
    let with_zero = row.len() == t_len;
    let mut out = Vec::with_capacity(t_len - 1);
    for (k, &w) in grid.iter().enumerate() {
        if k == zero {
            continue;
        }
        let idx = if with_zero || k < zero { k } else { k - 1 };
        out.push(row[idx] - model.spectral_density(theta0, n, w)?);
    }
    Ok(out)
}

/// `(1/#bins) Σ_{k≠0} |f̂ - f|`.
pub fn temporal_mean_abs_error(errors: &[f64]) -> f64 {
    errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64
}

/// `(1/#bins) Σ_{k≠0} (f̂ - f)²`.
pub fn quadratic_error(errors: &[f64]) -> f64 {
    errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64
}

/// Riemann-sum L¹ norm `(2π/T) Σ_{k≠0} |f̂ - f|`.
pub fn grid_l1_error(errors: &[f64], t_len: usize) -> f64 {
    2.0 * PI / t_len as f64 * errors.iter().map(|e| e.abs()).sum::<f64>()
}

/// `P̂(error > ε_i) = #{r : error_r > ε_i} / R`.
pub fn empirical_probabilities(errors: &[f64], thresholds: &[f64]) -> Vec<f64> {
    let r = errors.len() as f64;
    thresholds
        .iter()
        .map(|&eps| errors.iter().filter(|&&e| e > eps).count() as f64 / r)
        .collect()
}

/// Linear-interpolation quantile.
pub fn quantile(values: &[f64], tau: f64) -> f64 {
    Data::new(values.to_vec()).quantile(tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Freedman–Diaconis width, at least [`MIN_HISTOGRAM_BINS`] bins. A sample
    /// with no spread gets a single bin.
    pub fn freedman_diaconis(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Histogram { edges: vec![], counts: vec![] };
        }
        if hi <= lo {
            return Histogram {
                edges: vec![lo, hi],
                counts: vec![values.len()],
            };
        }
        let iqr = Data::new(values.to_vec()).interquartile_range();
        let width = 2.0 * iqr / (values.len() as f64).cbrt();
        let fd = if width > 0.0 { ((hi - lo) / width).ceil() as usize } else { 0 };
        let bins = fd.clamp(MIN_HISTOGRAM_BINS, MAX_HISTOGRAM_BINS);
        let step = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + step * i as f64 })
            .collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let i = (((v - lo) / step) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::SpherePoint;
    use crate::spectral_model::SphArmaSpec;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    fn one_scale() -> ModelSpec {
        let arma = SphArmaSpec::white(vec![1.0]).unwrap();
        ModelSpec::new(arma, LrdProfile::new("t", vec![0.3]).unwrap(), BTreeSet::new(), SpherePoint::NORTH).unwrap()
    }

    #[test]
    fn l1_basic_properties() {
        let m = one_scale();
        let rule = EvenRule::default();
        let a = LrdProfile::new("a", vec![0.3]).unwrap();
        let b = LrdProfile::new("b", vec![0.2]).unwrap();
        assert_eq!(l1_error(&m, &a, &a, 1, &rule), 0.0);
        assert_eq!(l1_error(&m, &a, &b, 1, &rule), l1_error(&m, &b, &a, 1, &rule));
    }

    #[test]
    fn l1_against_fine_riemann_sum() {
        let m = one_scale();
        let a = LrdProfile::new("a", vec![0.3]).unwrap();
        let b = LrdProfile::new("b", vec![0.2]).unwrap();
        let got = l1_error(&m, &a, &b, 1, &EvenRule::default());
        // midpoint sum on 10⁶ uniform cells of (0, π], doubled
        let n = 1_000_000;
        let h = PI / n as f64;
        let f = |al: f64, w: f64| (4.0 * (0.5 * w).sin().powi(2)).powf(-al / 2.0) / (2.0 * PI);
        let oracle: f64 = 2.0 * h * (0..n).map(|i| {
            let w = (i as f64 + 0.5) * h;
            (f(0.3, w) - f(0.2, w)).abs()
        }).sum::<f64>();
        assert_relative_eq!(got, oracle, max_relative = 1e-4);
    }

    #[test]
    fn probabilities_examples() {
        assert_eq!(empirical_probabilities(&[0.1, 0.3], &[0.05, 0.2, 0.4]), vec![1.0, 0.5, 0.0]);
        assert_eq!(empirical_probabilities(&[0.0, 0.0], &[0.1, 0.2]), vec![0.0, 0.0]);
        assert_eq!(empirical_probabilities(&[0.5, 0.7], &[0.1, 0.2]), vec![1.0, 1.0]);
    }

    #[test]
    fn grid_error_examples() {
        let m = one_scale();
        let t = 16;
        let truth: Vec<f64> = fourier_grid(t)
            .iter()
            .map(|&w| if w == 0.0 { 0.0 } else { m.spectral_density(&m.lrd, 1, w).unwrap() })
            .collect();
        let e = grid_errors(&truth, &m, &m.lrd, 1, t).unwrap();
        assert_eq!(temporal_mean_abs_error(&e), 0.0);
        let shifted: Vec<f64> = truth.iter().map(|v| v + 0.25).collect();
        let e = grid_errors(&shifted, &m, &m.lrd, 1, t).unwrap();
        assert_relative_eq!(temporal_mean_abs_error(&e), 0.25, max_relative = 1e-12);
        assert!(quadratic_error(&e) >= temporal_mean_abs_error(&e).powi(2));
        // rows without the zero bin line up the same way
        let z = zero_bin(t);
        let mut short = shifted.clone();
        short.remove(z);
        assert_eq!(grid_errors(&short, &m, &m.lrd, 1, t).unwrap(), e);
    }

    #[test]
    fn histogram_counts_and_floor() {
        let values: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Histogram::freedman_diaconis(&values);
        assert!(h.counts.len() >= MIN_HISTOGRAM_BINS);
        assert_eq!(h.counts.iter().sum::<usize>(), 200);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        let single = Histogram::freedman_diaconis(&[0.4]);
        assert_eq!(single.counts, vec![1]);
        let mostly_zero: Vec<f64> = (0..50).map(|i| if i == 7 { 1.0 } else { 0.0 }).collect();
        let h = Histogram::freedman_diaconis(&mostly_zero);
        assert_eq!(h.counts.len(), MIN_HISTOGRAM_BINS);
        assert_eq!(h.counts[0], 49);
    }
}

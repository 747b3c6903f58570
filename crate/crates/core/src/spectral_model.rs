//! Per-scale semiparametric spectral model
//!
//! ```text
//! f_{n,θ}(ω) = B_n^η(0) · M_n(ω) · [4 sin²(ω/2)]^{-α(n,θ)/2}
//! ```
//!
//! where `M_n` is the SRD transfer modulus of a scalar ARMA filter whose
//! coefficients are the eigenvalues `λ_n(Φ_k)`, `λ_n(Ψ_l)`, and `α(n,θ)` is
//! the eigenvalue of the long-memory operator on scale `n`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::SpherePoint;
use crate::quadrature::EvenRule;
use crate::rng::stream_rng;

/// Long-memory eigenvalues must stay strictly below this.
pub const ALPHA_UPPER: f64 = 0.5;

/// Eigenvalue sequence `{α(n, θ)}`, `n = 1..M`, of the long-memory operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrdProfile {
    pub label: String,
    alphas: Vec<f64>,
}

impl LrdProfile {
    pub fn new(label: impl Into<String>, alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter("empty LRD profile".into()));
        }
        if let Some((i, a)) = alphas
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0 && **a < ALPHA_UPPER))
        {
            return Err(Error::InvalidParameter(format!(
                "alpha({}) = {a} outside [0, 1/2)",
                i + 1
            )));
        }
        Ok(LrdProfile {
            label: label.into(),
            alphas,
        })
    }

    /// `α(n, θ)` for `n ≥ 1`.
    pub fn alpha(&self, n: usize) -> f64 {
        self.alphas[n - 1]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn truncation(&self) -> usize {
        self.alphas.len()
    }

    /// `(l_α, L_α)`: minimum over `lrd_scales`, maximum over every scale.
    pub fn bounds(&self, lrd_scales: &[usize]) -> (f64, f64) {
        let lo = lrd_scales
            .iter()
            .map(|&n| self.alpha(n))
            .fold(f64::INFINITY, f64::min);
        let hi = self.alphas.iter().copied().fold(0.0, f64::max);
        (lo, hi)
    }

    /// True when the profile is zero exactly on `srd_set` and positive elsewhere.
    pub fn respects_srd_set(&self, srd_set: &BTreeSet<usize>) -> bool {
        (1..=self.truncation()).all(|n| (self.alpha(n) == 0.0) == srd_set.contains(&n))
    }

    pub fn vanishes_on(&self, srd_set: &BTreeSet<usize>) -> bool {
        srd_set
            .iter()
            .all(|&n| n > self.truncation() || self.alpha(n) == 0.0)
    }
}

/// Roots of `c_0 + c_1 z + ... + c_k z^k`, trailing zero coefficients ignored.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = match coeffs.iter().rposition(|c| *c != 0.0) {
        Some(d) if d > 0 => d,
        _ => return Vec::new(),
    };
    let lead = coeffs[degree];
    let companion = DMatrix::from_fn(degree, degree, |i, j| {
        if i == 0 {
            -coeffs[degree - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion.complex_eigenvalues().iter().copied().collect()
}

const ROOT_MARGIN: f64 = 1e-9;
const COMMON_ROOT_TOL: f64 = 1e-6;

/// Per-scale ARMA eigenvalues and innovation variances of a SPHARMA(p, q)
/// process truncated at `M` scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphArmaSpec {
    p: usize,
    q: usize,
    /// `phi[n-1][k-1] = λ_n(Φ_k)`.
    phi: Vec<Vec<f64>>,
    /// `psi[n-1][l-1] = λ_n(Ψ_l)`.
    psi: Vec<Vec<f64>>,
    /// `sigma2[n-1] = σ_n²`.
    sigma2: Vec<f64>,
}

impl SphArmaSpec {
    pub fn new(
        p: usize,
        q: usize,
        phi: Vec<Vec<f64>>,
        psi: Vec<Vec<f64>>,
        sigma2: Vec<f64>,
    ) -> Result<Self> {
        let m = sigma2.len();
        if m == 0 {
            return Err(Error::InvalidModel("truncation M must be positive".into()));
        }
        if phi.len() != m || psi.len() != m {
            return Err(Error::InvalidModel(format!(
                "coefficient tables must have M = {m} rows"
            )));
        }
        for (i, s) in sigma2.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "sigma2({}) = {s} must be positive",
                    i + 1
                )));
            }
        }
        for n in 1..=m {
            let ar = &phi[n - 1];
            let ma = &psi[n - 1];
            if ar.len() != p || ma.len() != q {
                return Err(Error::InvalidModel(format!(
                    "scale {n}: expected {p} AR and {q} MA eigenvalues"
                )));
            }
            if ar.iter().chain(ma).any(|c| !c.is_finite()) {
                return Err(Error::InvalidModel(format!("scale {n}: non-finite coefficient")));
            }
            let ar_poly: Vec<f64> = std::iter::once(1.0).chain(ar.iter().map(|c| -c)).collect();
            let ar_roots = polynomial_roots(&ar_poly);
            if let Some(r) = ar_roots.iter().find(|r| r.norm() <= 1.0 + ROOT_MARGIN) {
                return Err(Error::InvalidModel(format!(
                    "scale {n}: AR polynomial has root {r} inside or on the unit circle"
                )));
            }
            let ma_poly: Vec<f64> = std::iter::once(1.0).chain(ma.iter().copied()).collect();
            let ma_roots = polynomial_roots(&ma_poly);
            for a in &ar_roots {
                if let Some(b) = ma_roots.iter().find(|b| (a - *b).norm() <= COMMON_ROOT_TOL) {
                    return Err(Error::InvalidModel(format!(
                        "scale {n}: AR and MA polynomials share root {b}"
                    )));
                }
            }
        }
        Ok(SphArmaSpec {
            p,
            q,
            phi,
            psi,
            sigma2,
        })
    }

    /// White-noise scales (`p = q = 0`).
    pub fn white(sigma2: Vec<f64>) -> Result<Self> {
        let m = sigma2.len();
        Self::new(0, 0, vec![Vec::new(); m], vec![Vec::new(); m], sigma2)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn truncation(&self) -> usize {
        self.sigma2.len()
    }

    pub fn ar(&self, n: usize) -> &[f64] {
        &self.phi[n - 1]
    }

    pub fn ma(&self, n: usize) -> &[f64] {
        &self.psi[n - 1]
    }

    pub fn sigma2(&self, n: usize) -> f64 {
        self.sigma2[n - 1]
    }
}

/// `M_n(ω) = |1 + Ψ_{q,n}(e^{-iω})|² / |Φ_{p,n}(e^{-iω})|²`.
pub fn arma_srd_factor(spec: &SphArmaSpec, n: usize, omega: f64) -> f64 {
    let w = omega.abs();
    let z = |k: usize| Complex64::from_polar(1.0, -(k as f64) * w);
    let ar = spec
        .ar(n)
        .iter()
        .enumerate()
        .fold(Complex64::new(1.0, 0.0), |acc, (k, c)| acc - c * z(k + 1));
    let ma = spec
        .ma(n)
        .iter()
        .enumerate()
        .fold(Complex64::new(1.0, 0.0), |acc, (l, c)| acc + c * z(l + 1));
    ma.norm_sqr() / ar.norm_sqr()
}

/// Singular LRD factor `[4 sin²(ω/2)]^{-α/2}`.
pub fn lrd_factor(alpha: f64, omega: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    let s = (0.5 * omega.abs()).sin();
    (4.0 * s * s).powf(-0.5 * alpha)
}

/// Model with the true long-memory profile `θ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arma: SphArmaSpec,
    pub lrd: LrdProfile,
    pub srd_set: BTreeSet<usize>,
    /// `b_eta0[n-1] = B_n^η(0)`.
    pub b_eta0: Vec<f64>,
    pub pole: SpherePoint,
}

impl ModelSpec {
    /// Uses `B_n^η(0) = σ_n² / (2π)`.
    pub fn new(
        arma: SphArmaSpec,
        lrd: LrdProfile,
        srd_set: BTreeSet<usize>,
        pole: SpherePoint,
    ) -> Result<Self> {
        let b_eta0 = arma.sigma2.iter().map(|s| s / (2.0 * PI)).collect();
        Self::with_b_eta0(arma, lrd, srd_set, b_eta0, pole)
    }

    pub fn with_b_eta0(
        arma: SphArmaSpec,
        lrd: LrdProfile,
        srd_set: BTreeSet<usize>,
        b_eta0: Vec<f64>,
        pole: SpherePoint,
    ) -> Result<Self> {
        let m = arma.truncation();
        if lrd.truncation() != m || b_eta0.len() != m {
            return Err(Error::InvalidModel(format!(
                "LRD profile and B^eta(0) must cover M = {m} scales"
            )));
        }
        if let Some(n) = srd_set.iter().find(|&&n| n == 0 || n > m) {
            return Err(Error::InvalidModel(format!("SRD scale {n} outside 1..={m}")));
        }
        if !lrd.respects_srd_set(&srd_set) {
            return Err(Error::InvalidModel(
                "true LRD profile must vanish exactly on the SRD set".into(),
            ));
        }
        if b_eta0.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidModel("B^eta(0) must be positive".into()));
        }
        Ok(ModelSpec {
            arma,
            lrd,
            srd_set,
            b_eta0,
            pole,
        })
    }

    pub fn truncation(&self) -> usize {
        self.arma.truncation()
    }

    pub fn b_eta0(&self, n: usize) -> f64 {
        self.b_eta0[n - 1]
    }

    pub fn lrd_scales(&self) -> Vec<usize> {
        (1..=self.truncation())
            .filter(|n| !self.srd_set.contains(n))
            .collect()
    }

    fn check_scale(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.truncation() {
            return Err(Error::InvalidParameter(format!(
                "scale {n} outside 1..={}",
                self.truncation()
            )));
        }
        Ok(())
    }

    /// `f_{n,θ}(ω)` for `ω ∈ [-π, π]`; `ω = 0` only when `α(n,θ) = 0`.
    pub fn spectral_density(&self, theta: &LrdProfile, n: usize, omega: f64) -> Result<f64> {
        self.check_scale(n)?;
        let alpha = theta.alpha(n);
        if omega == 0.0 && alpha > 0.0 {
            return Err(Error::SingularFrequency { alpha });
        }
        Ok(self.density_at(alpha, n, omega))
    }

    /// Density with an explicit exponent; no singularity check.
    pub(crate) fn density_at(&self, alpha: f64, n: usize, omega: f64) -> f64 {
        self.b_eta0(n) * arma_srd_factor(&self.arma, n, omega) * lrd_factor(alpha, omega)
    }

    /// `B_n(0) = ∫_{-π}^{π} f_{n,θ}(ω) dω`.
    pub fn autocovariance_b0(&self, theta: &LrdProfile, n: usize, rule: &EvenRule) -> Result<f64> {
        self.check_scale(n)?;
        let alpha = theta.alpha(n);
        if alpha >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} is not integrable"
            )));
        }
        Ok(rule.integrate(|w| self.density_at(alpha, n, w)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    /// `B_n(0)`, `n = 1..M`.
    pub b0: Vec<f64>,
    /// `Σ_{n≤M} (2n+1) B_n(0)`.
    pub trace_sum: f64,
    /// `Σ_{n≤M} (2n+1) B_n(0)²`.
    pub hilbert_schmidt_sum: f64,
    /// Log-log slope of `B_n(0)` against `n` over the upper half of scales.
    pub tail_exponent: Option<f64>,
    pub summable: bool,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn validate_summability(model: &ModelSpec, rule: &EvenRule) -> SummabilityReport {
    let m = model.truncation();
    let b0: Vec<f64> = (1..=m)
        .map(|n| {
            model
                .autocovariance_b0(&model.lrd, n, rule)
                .expect("validated model")
        })
        .collect();
    let trace_sum = b0
        .iter()
        .enumerate()
        .map(|(i, b)| (2 * i + 3) as f64 * b)
        .sum();
    let hilbert_schmidt_sum = b0
        .iter()
        .enumerate()
        .map(|(i, b)| (2 * i + 3) as f64 * b * b)
        .sum();
    let tail_exponent = if m >= 2 {
        let start = (m / 2).max(1);
        let xs: Vec<f64> = (start..=m).map(|n| n as f64).collect();
        let ys = b0[start - 1..].to_vec();
        Some(log_log_slope(&xs, &ys))
    } else {
        None
    };
    // (2n+1) B_n(0) summable needs B_n(0) to decay faster than n^{-2}
    let summable = tail_exponent.is_none_or(|e| e < -2.0);
    SummabilityReport {
        b0,
        trace_sum,
        hilbert_schmidt_sum,
        tail_exponent,
        summable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateOrdering {
    /// Eigenvalues decay in `n`: compact long-memory operator.
    #[default]
    Decreasing,
    /// Eigenvalues grow in `n`: noncompact operator.
    Increasing,
}

/// Clip applied to scaled Beta draws.
pub const CANDIDATE_FLOOR: f64 = 1e-4;

/// `count` candidate profiles over `m` scales. Candidate `i` (1-based) draws
/// each eigenvalue from `0.5 · Beta(2, 5i/(i+1))`; values are then sorted
/// along `n` according to `ordering`. Scales in `srd_set` are set to zero.
pub fn candidate_family_with(
    count: usize,
    m: usize,
    seed: u64,
    ordering: CandidateOrdering,
    srd_set: &BTreeSet<usize>,
) -> Vec<LrdProfile> {
    (1..=count)
        .map(|i| {
            let b = 5.0 * i as f64 / (i as f64 + 1.0);
            let beta = Beta::new(2.0, b).expect("positive shape parameters");
            let mut rng = stream_rng(seed, i as u64);
            let lrd: Vec<usize> = (1..=m).filter(|n| !srd_set.contains(n)).collect();
            let mut draws: Vec<f64> = lrd
                .iter()
                .map(|_| {
                    (0.5 * beta.sample(&mut rng)).clamp(CANDIDATE_FLOOR, ALPHA_UPPER - CANDIDATE_FLOOR)
                })
                .collect();
            match ordering {
                CandidateOrdering::Decreasing => draws.sort_by(|a, b| b.total_cmp(a)),
                CandidateOrdering::Increasing => draws.sort_by(|a, b| a.total_cmp(b)),
            }
            let mut alphas = vec![0.0; m];
            for (n, a) in lrd.iter().zip(draws) {
                alphas[n - 1] = a;
            }
            LrdProfile::new(format!("candidate-{i}"), alphas).expect("clipped into range")
        })
        .collect()
}

/// Decreasing (compact) candidate family without SRD scales.
pub fn candidate_family(count: usize, m: usize, seed: u64) -> Vec<LrdProfile> {
    candidate_family_with(count, m, seed, CandidateOrdering::Decreasing, &BTreeSet::new())
}

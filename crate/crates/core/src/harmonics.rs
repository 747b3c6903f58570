//! Legendre/Jacobi polynomials, eigenspace dimensions and zonal kernels on
//! the sphere.
//!
//! Only the summed zonal kernel `Σ_j S_{n,j}(x) S_{n,j}(y)` is exposed; the
//! individual spherical harmonics are never formed.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Inputs outside `[-1, 1]` by at most this much are clamped silently.
pub const DOMAIN_SLACK: f64 = 1e-12;

fn clamp_unit(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::InvalidParameter(format!(
            "argument {x} outside [-1, 1]"
        )));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Legendre polynomial `P_n(x)` by upward three-term recurrence.
///
/// `x` is clamped to `[-1, 1]`; callers are expected to pass values that
/// are in range up to rounding.
pub fn legendre(n: usize, x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn check_jacobi_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "Jacobi parameters must exceed -1, got ({alpha}, {beta})"
        )));
    }
    Ok(())
}

fn jacobi_unchecked(n: usize, alpha: f64, beta: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let ab = alpha + beta;
    let mut cur = 0.5 * ((ab + 2.0) * x + (alpha - beta));
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let a1 = 2.0 * (kf + 1.0) * (kf + ab + 1.0) * s;
        let a2 = (s + 1.0) * (alpha * alpha - beta * beta);
        let a3 = s * (s + 1.0) * (s + 2.0);
        let a4 = 2.0 * (kf + alpha) * (kf + beta) * (s + 2.0);
        let next = ((a2 + a3 * x) * cur - a4 * prev) / a1;
        prev = cur;
        cur = next;
    }
    cur
}

/// Jacobi polynomial `P_n^{(α,β)}(x)` (standard normalisation).
pub fn jacobi(n: usize, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    check_jacobi_params(alpha, beta)?;
    Ok(jacobi_unchecked(n, alpha, beta, clamp_unit(x)?))
}

/// `R_n^{(α,β)}(x) = P_n^{(α,β)}(x) / P_n^{(α,β)}(1)`.
///
/// The denominator is produced by the same recurrence, so `R_n(1) == 1.0`
/// holds bit for bit.
pub fn jacobi_normalized(n: usize, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    check_jacobi_params(alpha, beta)?;
    let x = clamp_unit(x)?;
    let at_one = jacobi_unchecked(n, alpha, beta, 1.0);
    Ok(jacobi_unchecked(n, alpha, beta, x) / at_one)
}

/// Surface measure `ω_d` of the unit sphere `S^d ⊂ R^{d+1}`.
pub fn sphere_volume(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / ln_gamma(h).exp()
}

/// One eigenspace `H_n` of the Laplace–Beltrami operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicScale {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Dimension `δ(n, d)` of `H_n`.
    pub delta: usize,
    /// Laplace–Beltrami eigenvalue. Bookkeeping only.
    pub lambda_lb: f64,
    volume: f64,
}

/// Real-valued `δ(n,d)` from the Γ-ratio formula.
pub fn dimension_formula(n: usize, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let ab = alpha + beta;
    let log = ln_gamma(beta + 1.0) + ln_gamma(nf + ab + 1.0) + ln_gamma(nf + alpha + 1.0)
        - ln_gamma(alpha + 1.0)
        - ln_gamma(ab + 2.0)
        - ln_gamma(nf + 1.0)
        - ln_gamma(nf + beta + 1.0);
    (2.0 * nf + ab + 1.0) * log.exp()
}

impl HarmonicScale {
    /// Scale `n` on the sphere `S^d`, where `(α, β) = ((d-2)/2, (d-2)/2)`.
    pub fn sphere(n: usize, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "manifold dimension must be at least 2, got {d}"
            )));
        }
        let a = (d as f64 - 2.0) / 2.0;
        Self::new(n, d, a, a, 1.0)
    }

    /// General two-point homogeneous space with Jacobi pair `(α, β)` and
    /// eigenvalue multiplier `ε` (2 for real projective spaces, 1 otherwise).
    pub fn new(n: usize, d: usize, alpha: f64, beta: f64, epsilon: f64) -> Result<Self> {
        check_jacobi_params(alpha, beta)?;
        if alpha + beta <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha + beta must exceed -1, got {}",
                alpha + beta
            )));
        }
        let raw = dimension_formula(n, alpha, beta);
        let delta = raw.round();
        if (raw - delta).abs() > 1e-6 * raw.max(1.0) || delta < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "dimension formula gives non-integer {raw} for n = {n}"
            )));
        }
        let ne = n as f64 * epsilon;
        Ok(HarmonicScale {
            n,
            d,
            alpha,
            beta,
            delta: delta as usize,
            lambda_lb: -ne * (ne + alpha + beta + 1.0),
            volume: sphere_volume(d),
        })
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }
}

/// `Σ_j S_{n,j}(x) S_{n,j}(y)` for any pair with `⟨x, y⟩ = cosdist`, via the
/// addition formula `(δ(n,d)/ω_d) R_n^{(α,β)}(cosdist)`.
pub fn zonal_kernel(scale: &HarmonicScale, cosdist: f64) -> Result<f64> {
    let r = jacobi_normalized(scale.n, scale.alpha, scale.beta, cosdist)?;
    Ok(scale.delta as f64 / scale.volume * r)
}

/// A point on the unit sphere `S^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint([f64; 3]);

impl SpherePoint {
    pub const NORTH: SpherePoint = SpherePoint([0.0, 0.0, 1.0]);
    pub const SOUTH: SpherePoint = SpherePoint([0.0, 0.0, -1.0]);

    /// Accepts a vector whose norm is 1 within `1e-12`.
    pub fn from_unit(v: [f64; 3]) -> Result<Self> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "not a unit vector (norm {norm})"
            )));
        }
        Ok(SpherePoint(v))
    }

    /// Projects any nonzero vector onto the sphere.
    pub fn normalize(v: [f64; 3]) -> Result<Self> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter("cannot normalise zero vector".into()));
        }
        Ok(SpherePoint([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Colatitude in `[0, π]`, longitude in radians.
    pub fn from_angles(colatitude: f64, longitude: f64) -> Self {
        let (st, ct) = colatitude.sin_cos();
        let (sp, cp) = longitude.sin_cos();
        SpherePoint([st * cp, st * sp, ct])
    }

    /// Uniform draw on `S^2` (normalised Gaussian vector).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 3] = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            if let Ok(p) = Self::normalize(v) {
                return p;
            }
        }
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    /// `(colatitude, longitude)` with longitude in `(-π, π]`.
    pub fn angles(&self) -> (f64, f64) {
        let [x, y, z] = self.0;
        (z.clamp(-1.0, 1.0).acos(), y.atan2(x))
    }
}

/// Cosine of the geodesic distance, clamped to `[-1, 1]`.
pub fn geodesic_cos(x: &SpherePoint, y: &SpherePoint) -> f64 {
    let a = x.0;
    let b = y.0;
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
}

/// Equiangular colatitude × longitude grid of cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    pub colatitudes: Vec<f64>,
    pub longitudes: Vec<f64>,
}

impl SphereGrid {
    pub fn equiangular(n_colat: usize, n_lon: usize) -> Self {
        let colatitudes = (0..n_colat)
            .map(|i| PI * (i as f64 + 0.5) / n_colat as f64)
            .collect();
        let longitudes = (0..n_lon)
            .map(|j| -PI + 2.0 * PI * (j as f64 + 0.5) / n_lon as f64)
            .collect();
        SphereGrid {
            colatitudes,
            longitudes,
        }
    }

    /// Points in row-major order (colatitude outer, longitude inner).
    pub fn points(&self) -> Vec<(f64, f64, SpherePoint)> {
        self.colatitudes
            .iter()
            .flat_map(|&c| {
                self.longitudes
                    .iter()
                    .map(move |&l| (c, l, SpherePoint::from_angles(c, l)))
            })
            .collect()
    }
}

impl Default for SphereGrid {
    fn default() -> Self {
        SphereGrid::equiangular(60, 120)
    }
}

/// Zonal field `Σ_{n=1..M} a_n · zonal_kernel(n, ⟨x, pole⟩)` on `S^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalField {
    pub pole: SpherePoint,
    /// `coefficients[n - 1] = a_n`.
    pub coefficients: Vec<f64>,
}

impl ZonalField {
    pub fn truncation(&self) -> usize {
        self.coefficients.len()
    }
}

pub fn reconstruct_field(field: &ZonalField, grid: &[SpherePoint]) -> Result<Vec<f64>> {
    if let Some(bad) = field.coefficients.iter().find(|a| !a.is_finite()) {
        return Err(Error::Data(format!("non-finite field coefficient {bad}")));
    }
    let weights: Vec<f64> = (1..=field.truncation())
        .map(|n| (2 * n + 1) as f64 / (4.0 * PI))
        .collect();
    Ok(grid
        .iter()
        .map(|x| {
            let c = geodesic_cos(x, &field.pole);
            // P_n(c) for all n by one recurrence sweep
            let (mut prev, mut cur) = (1.0, c);
            let mut acc = 0.0;
            for (i, (&a, &w)) in field.coefficients.iter().zip(&weights).enumerate() {
                let n = i + 1;
                if n > 1 {
                    let k = (n - 1) as f64;
                    let next = ((2.0 * k + 1.0) * c * cur - k * prev) / (k + 1.0);
                    prev = cur;
                    cur = next;
                }
                acc += a * w * cur;
            }
            acc
        })
        .collect())
}

//! Minimum-contrast estimation of the long-memory profile.
//!
//! With weight `W(ω, n) = W̃(n)|ω|^γ`, the normalizer is
//! `N_θ(n) = W̃(n) ∫ f_{n,θ}(ω)|ω|^γ dω`, the density operator eigenvalue is
//! `Υ(ω,n,θ) = f_{n,θ}(ω) / N_θ(n)` and the empirical contrast is
//! `U_{T,θ}(n) = -(2π/T) Σ_{k≠0} p̂_n(ω_k) ln Υ(ω_k,n,θ) W(ω_k, n)`.
//! The selected candidate minimizes `sup_n |U_{T,θ}(n)|`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::periodogram::{fourier_grid, zero_bin, SpectralTable, TableKind};
use crate::quadrature::EvenRule;
use crate::spectral_model::{arma_srd_factor, lrd_factor, LrdProfile, ModelSpec};

pub const DEFAULT_GAMMA: f64 = 1.5;
const UPSILON_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct ContrastConfig {
    pub gamma: f64,
    /// `W̃(n)` for `n = 1..M`; empty means `W̃ ≡ 1`.
    pub w_tilde: Vec<f64>,
    pub candidates: Vec<LrdProfile>,
    pub rule: EvenRule,
}

impl ContrastConfig {
    pub fn new(candidates: Vec<LrdProfile>) -> Self {
        ContrastConfig {
            gamma: DEFAULT_GAMMA,
            w_tilde: Vec::new(),
            candidates,
            rule: EvenRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma = {} must exceed 1", self.gamma)));
        }
        if self.w_tilde.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("weights W̃(n) must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn w_tilde(&self, n: usize) -> f64 {
        if self.w_tilde.is_empty() {
            1.0
        } else {
            self.w_tilde[n - 1]
        }
    }

    fn check_cover(&self, model: &ModelSpec) -> Result<()> {
        if !self.w_tilde.is_empty() && self.w_tilde.len() != model.truncation() {
            return Err(Error::Config(format!(
                "{} weights for {} scales",
                self.w_tilde.len(),
                model.truncation()
            )));
        }
        if let Some(c) = self
            .candidates
            .iter()
            .find(|c| c.truncation() != model.truncation())
        {
            return Err(Error::Config(format!(
                "candidate {:?} covers {} scales, model has {}",
                c.label,
                c.truncation(),
                model.truncation()
            )));
        }
        Ok(())
    }
}

/// `N_θ(n) = W̃(n) ∫ f_{n,θ}(ω) |ω|^γ dω`.
pub fn normalizer(model: &ModelSpec, theta: &LrdProfile, config: &ContrastConfig, n: usize) -> Result<f64> {
    config.validate()?;
    model.spectral_density(theta, n, PI)?;
    let alpha = theta.alpha(n);
    let g = config.gamma;
    Ok(config.w_tilde(n) * config.rule.integrate(|w| model.density_at(alpha, n, w) * w.powf(g)))
}

/// `Υ(ω, n, θ) = f_{n,θ}(ω) / N_θ(n)`.
pub fn upsilon(
    model: &ModelSpec,
    theta: &LrdProfile,
    config: &ContrastConfig,
    n: usize,
    omega: f64,
) -> Result<f64> {
    let f = model.spectral_density(theta, n, omega)?;
    Ok(f / normalizer(model, theta, config, n)?)
}

/// `∫ Υ(ω,n,θ) W̃(n)|ω|^γ dω` evaluated with `rule`, which should differ
/// from the rule inside `config` for the check to mean anything.
pub fn identity_integral(
    model: &ModelSpec,
    theta: &LrdProfile,
    config: &ContrastConfig,
    n: usize,
    rule: &EvenRule,
) -> Result<f64> {
    let norm = normalizer(model, theta, config, n)?;
    let alpha = theta.alpha(n);
    let (g, wt) = (config.gamma, config.w_tilde(n));
    Ok(rule.integrate(|w| model.density_at(alpha, n, w) / norm * wt * w.powf(g)))
}

/// Population loss `L_n(θ₀, θ) = W̃(n) ∫ f_{n,θ₀} |ω|^γ ln(Υ_{θ₀}/Υ_θ) dω ≥ 0`.
pub fn theoretical_loss(
    model: &ModelSpec,
    theta0: &LrdProfile,
    theta: &LrdProfile,
    config: &ContrastConfig,
    n: usize,
) -> Result<f64> {
    let n0 = normalizer(model, theta0, config, n)?;
    let n1 = normalizer(model, theta, config, n)?;
    let (a0, a1) = (theta0.alpha(n), theta.alpha(n));
    let g = config.gamma;
    // ln(Υ₀/Υ_θ) = (a1 - a0)/2 · ln(4 sin²(ω/2)) + ln(N_θ/N₀)
    let shift = (n1 / n0).ln();
    Ok(config.w_tilde(n)
        * config.rule.integrate(|w| {
            let s = (0.5 * w).sin();
            let log_ratio = 0.5 * (a1 - a0) * (4.0 * s * s).ln() + shift;
            model.density_at(a0, n, w) * w.powf(g) * log_ratio
        }))
}

/// Precomputed `ln Υ · W` tables for one sample size and scale set.
#[derive(Debug, Clone)]
pub struct ContrastEngine {
    t_len: usize,
    scales: Vec<usize>,
    candidates: Vec<LrdProfile>,
    /// `[candidate][scale][nonzero bin]`.
    log_weights: Vec<Vec<Vec<f64>>>,
    /// `[candidate][scale]`.
    normalizers: Vec<Vec<f64>>,
}

impl ContrastEngine {
    pub fn new(model: &ModelSpec, config: &ContrastConfig, t_len: usize, scales: &[usize]) -> Result<Self> {
        config.validate()?;
        config.check_cover(model)?;
        if config.candidates.is_empty() {
            return Err(Error::Config("contrast needs at least one candidate".into()));
        }
        if t_len < 2 {
            return Err(Error::InvalidParameter(format!("T = {t_len} too small")));
        }
        if let Some(n) = scales.iter().find(|&&n| n == 0 || n > model.truncation()) {
            return Err(Error::InvalidParameter(format!("scale {n} outside model")));
        }
        let g = config.gamma;
        let zero = zero_bin(t_len);
        let bins: Vec<f64> = fourier_grid(t_len)
            .into_iter()
            .enumerate()
            .filter(|(k, _)| *k != zero)
            .map(|(_, w)| w)
            .collect();
        let nodes = config.rule.nodes();
        let weights = config.rule.weights();

        // candidate-free parts, per scale
        struct ScaleParts {
            quad: Vec<f64>,
            log_srd: Vec<f64>,
            weight: Vec<f64>,
        }
        let parts: Vec<ScaleParts> = scales
            .iter()
            .map(|&n| {
                let (b, wt) = (model.b_eta0(n), config.w_tilde(n));
                ScaleParts {
                    quad: nodes
                        .iter()
                        .zip(weights)
                        .map(|(&w, &q)| q * wt * b * arma_srd_factor(&model.arma, n, w) * w.powf(g))
                        .collect(),
                    log_srd: bins
                        .iter()
                        .map(|&w| (b * arma_srd_factor(&model.arma, n, w)).ln())
                        .collect(),
                    weight: bins.iter().map(|&w| wt * w.abs().powf(g)).collect(),
                }
            })
            .collect();
        let log_sin: Vec<f64> = bins
            .iter()
            .map(|&w| {
                let s = (0.5 * w).sin();
                (4.0 * s * s).ln()
            })
            .collect();

        let per_candidate: Vec<(Vec<Vec<f64>>, Vec<f64>)> = config
            .candidates
            .par_iter()
            .map(|theta| {
                let mut tables = Vec::with_capacity(scales.len());
                let mut norms = Vec::with_capacity(scales.len());
                for (&n, part) in scales.iter().zip(&parts) {
                    let alpha = theta.alpha(n);
                    let norm: f64 = nodes
                        .iter()
                        .zip(&part.quad)
                        .map(|(&w, q)| q * lrd_factor(alpha, w))
                        .sum();
                    let ln_norm = norm.ln();
                    tables.push(
                        (0..bins.len())
                            .map(|k| {
                                let ln_ups = part.log_srd[k] - 0.5 * alpha * log_sin[k] - ln_norm;
                                ln_ups.max(UPSILON_FLOOR.ln()) * part.weight[k]
                            })
                            .collect(),
                    );
                    norms.push(norm);
                }
                (tables, norms)
            })
            .collect();
        let (log_weights, normalizers) = per_candidate.into_iter().unzip();
        Ok(ContrastEngine {
            t_len,
            scales: scales.to_vec(),
            candidates: config.candidates.clone(),
            log_weights,
            normalizers,
        })
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn candidates(&self) -> &[LrdProfile] {
        &self.candidates
    }

    pub fn normalizers(&self, candidate: usize) -> &[f64] {
        &self.normalizers[candidate]
    }

    fn rows<'a>(&self, table: &'a SpectralTable) -> Result<Vec<Vec<f64>>> {
        if table.kind != TableKind::Periodogram {
            return Err(Error::Contract(format!(
                "contrast needs a periodogram, got {}",
                table.kind.as_str()
            )));
        }
        if table.t_len != self.t_len {
            return Err(Error::Contract(format!(
                "periodogram has T = {}, engine built for {}",
                table.t_len, self.t_len
            )));
        }
        let zero = zero_bin(self.t_len);
        self.scales
            .iter()
            .map(|&n| {
                let row = table.row(n)?;
                if row.iter().any(|v| v.is_nan()) {
                    return Err(Error::Data(format!("NaN in periodogram at scale {n}")));
                }
                Ok(row
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != zero)
                    .map(|(_, v)| *v)
                    .collect())
            })
            .collect()
    }

    fn evaluate(&self, candidate: usize, rows: &[Vec<f64>]) -> Vec<f64> {
        let h = 2.0 * PI / self.t_len as f64;
        self.log_weights[candidate]
            .iter()
            .zip(rows)
            .map(|(lw, p)| -h * lw.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// `U_{T,θ}(n)` for one candidate over the engine's scales.
    pub fn contrast(&self, candidate: usize, table: &SpectralTable) -> Result<Vec<f64>> {
        let rows = self.rows(table)?;
        Ok(self.evaluate(candidate, &rows))
    }

    pub fn select(&self, table: &SpectralTable) -> Result<ContrastReport> {
        let rows = self.rows(table)?;
        let values: Vec<Vec<f64>> = (0..self.candidates.len())
            .into_par_iter()
            .map(|c| self.evaluate(c, &rows))
            .collect();
        let norms: Vec<f64> = values
            .iter()
            .map(|u| u.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        if let Some(c) = norms.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite contrast for candidate {c}")));
        }
        let mut selected = 0;
        for (i, v) in norms.iter().enumerate() {
            if *v < norms[selected] {
                selected = i;
            }
        }
        Ok(ContrastReport {
            scales: self.scales.clone(),
            values,
            norms,
            selected,
            selected_profile: self.candidates[selected].clone(),
        })
    }
}

/// `U_{T,θ}(n)` for every scale of the periodogram.
pub fn empirical_contrast(
    table: &SpectralTable,
    model: &ModelSpec,
    theta: &LrdProfile,
    config: &ContrastConfig,
) -> Result<Vec<f64>> {
    let single = ContrastConfig {
        candidates: vec![theta.clone()],
        ..config.clone()
    };
    ContrastEngine::new(model, &single, table.t_len, &table.scales)?.contrast(0, table)
}

/// Contrast over all scales of the periodogram and the argmin candidate.
pub fn select_theta(table: &SpectralTable, model: &ModelSpec, config: &ContrastConfig) -> Result<ContrastReport> {
    ContrastEngine::new(model, config, table.t_len, &table.scales)?.select(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastReport {
    pub scales: Vec<usize>,
    /// `values[candidate][scale]`, signed.
    pub values: Vec<Vec<f64>>,
    /// `sup_n |U_{T,θ}(n)|` per candidate.
    pub norms: Vec<f64>,
    pub selected: usize,
    pub selected_profile: LrdProfile,
}

impl ContrastReport {
    /// Candidate indices sorted by norm, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.norms.len()).collect();
        idx.sort_by(|&a, &b| self.norms[a].total_cmp(&self.norms[b]).then(a.cmp(&b)));
        idx
    }

    /// Header `candidate_index,n,U_value`.
    pub fn write_values_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "candidate_index,n,U_value")?;
        for (c, row) in self.values.iter().enumerate() {
            for (n, u) in self.scales.iter().zip(row) {
                writeln!(out, "{c},{n},{u}")?;
            }
        }
        Ok(())
    }

    /// Header `candidate_index,norm,selected`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "candidate_index,norm,selected")?;
        for (c, v) in self.norms.iter().enumerate() {
            writeln!(out, "{c},{v},{}", u8::from(c == self.selected))?;
        }
        Ok(())
    }
}

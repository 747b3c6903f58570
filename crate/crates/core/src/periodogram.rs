//! Functional DFT, per-scale periodogram and the weighted periodogram
//! estimator.
//!
//! The Fourier grid for a sample of length `T` is `ω_k = 2πk/T` with
//! `k = -(⌈T/2⌉-1) ..= ⌊T/2⌋`: exactly `T` distinct bins covering `(-π, π]`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{plan, FunctionalSample};
use crate::spectral_model::{LrdProfile, ModelSpec};

/// Smallest periodization term kept.
const PERIODIZATION_CUTOFF: f64 = 1e-12;

/// Lowest Fourier index `k` for sample size `t_len`.
pub fn fourier_k_min(t_len: usize) -> i64 {
    -(t_len.div_ceil(2) as i64 - 1)
}

/// Fourier frequencies in ascending order.
pub fn fourier_grid(t_len: usize) -> Vec<f64> {
    let k0 = fourier_k_min(t_len);
    (0..t_len as i64)
        .map(|i| 2.0 * PI * (k0 + i) as f64 / t_len as f64)
        .collect()
}

/// Position of the zero frequency in [`fourier_grid`].
pub fn zero_bin(t_len: usize) -> usize {
    (-fourier_k_min(t_len)) as usize
}

/// `(1/√(2πT)) Σ_{t=1}^T x_t e^{-iω_k t}` on the Fourier grid, by FFT.
pub fn fdft(x: &[f64]) -> Vec<Complex64> {
    let t_len = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(t_len, true).process(&mut buf);
    let norm = 1.0 / (2.0 * PI * t_len as f64).sqrt();
    let k0 = fourier_k_min(t_len);
    (0..t_len as i64)
        .map(|i| {
            let k = k0 + i;
            let omega = 2.0 * PI * k as f64 / t_len as f64;
            // the FFT sums from t = 0; the transform starts at t = 1
            let shift = Complex64::from_polar(norm, -omega);
            buf[k.rem_euclid(t_len as i64) as usize] * shift
        })
        .collect()
}

/// Direct `O(T·K)` evaluation of the fDFT at arbitrary frequencies.
pub fn fdft_direct(x: &[f64], frequencies: &[f64]) -> Vec<Complex64> {
    let norm = 1.0 / (2.0 * PI * x.len() as f64).sqrt();
    frequencies
        .iter()
        .map(|&w| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| Complex64::from_polar(v, -w * (t + 1) as f64))
                .sum::<Complex64>()
                * norm
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Fdft,
    Periodogram,
    Smoothed,
    Model,
}

impl TableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::Fdft => "fdft",
            TableKind::Periodogram => "periodogram",
            TableKind::Smoothed => "smoothed",
            TableKind::Model => "model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableValues {
    /// `[scale][order j][frequency]`.
    Complex(Vec<Vec<Vec<Complex64>>>),
    /// `[scale][frequency]`.
    Real(Vec<Vec<f64>>),
}

/// Values of a per-scale spectral function on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    pub kind: TableKind,
    pub t_len: usize,
    pub scales: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub values: TableValues,
}

impl SpectralTable {
    pub fn real(&self) -> Result<&[Vec<f64>]> {
        match &self.values {
            TableValues::Real(v) => Ok(v),
            TableValues::Complex(_) => Err(Error::Contract(format!(
                "{} table holds complex values",
                self.kind.as_str()
            ))),
        }
    }

    /// Row for scale `n`.
    pub fn row(&self, n: usize) -> Result<&[f64]> {
        let pos = self.position(n)?;
        Ok(&self.real()?[pos])
    }

    fn position(&self, n: usize) -> Result<usize> {
        self.scales
            .iter()
            .position(|&s| s == n)
            .ok_or_else(|| Error::InvalidParameter(format!("scale {n} not in table")))
    }

    fn expect_kind(&self, kind: TableKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Contract(format!(
                "expected {} table, got {}",
                kind.as_str(),
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    /// CSV with header `kind,n,omega,value_re,value_im`, n-major, ω ascending.
    /// fDFT tables list the orders `j` of each scale one after another.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,n,omega,value_re,value_im")?;
        let kind = self.kind.as_str();
        match &self.values {
            TableValues::Real(rows) => {
                for (n, row) in self.scales.iter().zip(rows) {
                    for (w, v) in self.frequencies.iter().zip(row) {
                        writeln!(out, "{kind},{n},{w},{v},0")?;
                    }
                }
            }
            TableValues::Complex(scales) => {
                for (n, orders) in self.scales.iter().zip(scales) {
                    for row in orders {
                        for (w, v) in self.frequencies.iter().zip(row) {
                            writeln!(out, "{kind},{n},{w},{},{}", v.re, v.im)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// fDFT of every stored coefficient series.
pub fn fdft_table(sample: &FunctionalSample) -> Result<SpectralTable> {
    let t_len = sample.t_len;
    if t_len < 2 {
        return Err(Error::InvalidParameter(format!("fDFT needs T ≥ 2, got {t_len}")));
    }
    let scales: Vec<usize> = (1..=sample.truncation()).collect();
    let values = scales
        .par_iter()
        .map(|&n| sample.scale(n).iter().map(|s| fdft(s)).collect())
        .collect();
    Ok(SpectralTable {
        kind: TableKind::Fdft,
        t_len,
        scales,
        frequencies: fourier_grid(t_len),
        values: TableValues::Complex(values),
    })
}

/// Diagonal periodogram `(1/J_n) Σ_j |X̃_{n,j}(ω)|²`.
pub fn periodogram_scale(table: &SpectralTable) -> Result<SpectralTable> {
    table.expect_kind(TableKind::Fdft)?;
    let TableValues::Complex(scales) = &table.values else {
        return Err(Error::Contract("fdft table without complex values".into()));
    };
    let values = scales
        .iter()
        .map(|orders| {
            let j = orders.len() as f64;
            (0..table.frequencies.len())
                .map(|k| orders.iter().map(|row| row[k].norm_sqr()).sum::<f64>() / j)
                .collect()
        })
        .collect();
    Ok(SpectralTable {
        kind: TableKind::Periodogram,
        t_len: table.t_len,
        scales: table.scales.clone(),
        frequencies: table.frequencies.clone(),
        values: TableValues::Real(values),
    })
}

/// fDFT followed by the periodogram.
pub fn periodogram(sample: &FunctionalSample) -> Result<SpectralTable> {
    periodogram_scale(&fdft_table(sample)?)
}

/// `(2π/T) Σ_{k≠0} p̂_n(ω_k)` for every scale of the table.
pub fn integrated_periodogram(table: &SpectralTable) -> Result<Vec<f64>> {
    table.expect_kind(TableKind::Periodogram)?;
    let zero = zero_bin(table.t_len);
    let h = 2.0 * PI / table.t_len as f64;
    Ok(table
        .real()?
        .iter()
        .map(|row| {
            h * row
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != zero)
                .map(|(_, v)| v)
                .sum::<f64>()
        })
        .collect())
}

/// Model density `f_{n,θ}` on the nonzero Fourier frequencies.
pub fn model_table(
    model: &ModelSpec,
    theta: &LrdProfile,
    t_len: usize,
    scales: &[usize],
) -> Result<SpectralTable> {
    let zero = zero_bin(t_len);
    let frequencies: Vec<f64> = fourier_grid(t_len)
        .into_iter()
        .enumerate()
        .filter(|(k, _)| *k != zero)
        .map(|(_, w)| w)
        .collect();
    let values = scales
        .iter()
        .map(|&n| {
            frequencies
                .iter()
                .map(|&w| model.spectral_density(theta, n, w))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(SpectralTable {
        kind: TableKind::Model,
        t_len,
        scales: scales.to_vec(),
        frequencies,
        values: TableValues::Real(values),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowShape {
    /// `W(x) = (1 - |x|)_+`.
    Bartlett,
    /// Standard normal density.
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingWindow {
    pub shape: WindowShape,
    pub bandwidth: f64,
}

impl SmoothingWindow {
    pub fn new(shape: WindowShape, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth <= PI) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {bandwidth} outside (0, π]"
            )));
        }
        Ok(SmoothingWindow { shape, bandwidth })
    }

    /// The unscaled window `W(x)`.
    pub fn kernel(&self, x: f64) -> f64 {
        match self.shape {
            WindowShape::Bartlett => (1.0 - x.abs()).max(0.0),
            WindowShape::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
        }
    }

    /// `W^{(T)}(x) = Σ_j (1/B) W((x + 2πj)/B)`.
    pub fn periodized(&self, x: f64) -> f64 {
        let b = self.bandwidth;
        let x = x.rem_euclid(2.0 * PI);
        let term = |j: i64| self.kernel((x + 2.0 * PI * j as f64) / b) / b;
        let mut total = 0.0;
        for dir in [1i64, -1] {
            let mut j = if dir == 1 { 0 } else { -1 };
            loop {
                let v = term(j);
                total += v;
                if v < PERIODIZATION_CUTOFF {
                    break;
                }
                j += dir;
            }
        }
        total
    }
}

impl Default for SmoothingWindow {
    fn default() -> Self {
        SmoothingWindow {
            shape: WindowShape::Gaussian,
            bandwidth: 0.65,
        }
    }
}

/// Circular smoothing of one periodogram row; the zero bin is left out of
/// the input but an output value is produced for it.
fn smooth_row(row: &[f64], kernel: &[Complex64], t_len: usize) -> Vec<f64> {
    let k0 = fourier_k_min(t_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); t_len];
    for (i, &p) in row.iter().enumerate() {
        let k = k0 + i as i64;
        if k != 0 {
            buf[k.rem_euclid(t_len as i64) as usize] = Complex64::new(p, 0.0);
        }
    }
    plan(t_len, true).process(&mut buf);
    for (x, y) in buf.iter_mut().zip(kernel) {
        *x *= y;
    }
    plan(t_len, false).process(&mut buf);
    let scale = 2.0 * PI / (t_len as f64 * t_len as f64);
    (0..t_len as i64)
        .map(|i| {
            let k = k0 + i;
            (buf[k.rem_euclid(t_len as i64) as usize].re * scale).max(0.0)
        })
        .collect()
}

/// `f̂(ω) = (2π/T) Σ_{t=1}^{T-1} W^{(T)}(ω - 2πt/T) p̂(2πt/T)` for the scales
/// in `srd_scales`.
pub fn smoothed_estimator(
    table: &SpectralTable,
    window: &SmoothingWindow,
    srd_scales: &BTreeSet<usize>,
) -> Result<SpectralTable> {
    table.expect_kind(TableKind::Periodogram)?;
    SmoothingWindow::new(window.shape, window.bandwidth)?;
    let t_len = table.t_len;
    let mut kernel: Vec<Complex64> = (0..t_len)
        .map(|r| Complex64::new(window.periodized(2.0 * PI * r as f64 / t_len as f64), 0.0))
        .collect();
    plan(t_len, true).process(&mut kernel);
    let scales: Vec<usize> = srd_scales.iter().copied().collect();
    let values = scales
        .iter()
        .map(|&n| Ok(smooth_row(table.row(n)?, &kernel, t_len)))
        .collect::<Result<_>>()?;
    Ok(SpectralTable {
        kind: TableKind::Smoothed,
        t_len,
        scales,
        frequencies: table.frequencies.clone(),
        values: TableValues::Real(values),
    })
}

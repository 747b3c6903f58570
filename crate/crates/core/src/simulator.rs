//! Gaussian multifractionally integrated SPHARMA(p,q) sample paths.
//!
//! Each scale `n` is an independent scalar FARIMA(p, α(n,θ₀)/2, q) series
//! built by a truncated MA(∞) fractional-integration filter:
//!
//! 1. `ε_t ~ N(0, σ_n²)` for `t = 1..burn_in+T+L`;
//! 2. `u_t = ε_t + Σ_l λ_n(Ψ_l) ε_{t-l}`;
//! 3. `w_t = Σ_{k≤L} ψ_k u_{t-k}` with `ψ` from [`frac_ma_coeffs`];
//! 4. `x_t = Σ_k λ_n(Φ_k) x_{t-k} + w_t` from zero initial conditions;
//!
//! and the last `T` values of `x` are kept.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{reconstruct_field, SphereGrid, SpherePoint, ZonalField};
use crate::rng::{coefficient_stream, stream_rng};
use crate::spectral_model::ModelSpec;

pub const DEFAULT_FILTER_LAG: usize = 4096;
pub const MIN_FILTER_LAG: usize = 64;
pub const DEFAULT_ELEMENT_BUDGET: usize = 50_000_000;

/// MA(∞) coefficients `ψ_0..ψ_L` of `(1 - B)^{-d}`.
pub fn frac_ma_coeffs(d: f64, lag: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&d) {
        return Err(Error::InvalidParameter(format!(
            "fractional order d = {d} outside [0, 1)"
        )));
    }
    let mut psi = Vec::with_capacity(lag + 1);
    psi.push(1.0);
    for k in 1..=lag {
        let kf = k as f64;
        psi.push(psi[k - 1] * (kf - 1.0 + d) / kf);
    }
    Ok(psi)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// First `signal.len()` terms of the causal convolution `signal * filter`.
fn causal_convolve(signal: &[f64], filter: &[f64]) -> Vec<f64> {
    let out_len = signal.len();
    let size = (signal.len() + filter.len()).next_power_of_two();
    let mut a: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    a.resize(size, Complex64::new(0.0, 0.0));
    let mut b: Vec<Complex64> = filter.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    b.resize(size, Complex64::new(0.0, 0.0));
    let fwd = plan(size, true);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    plan(size, false).process(&mut a);
    let scale = 1.0 / size as f64;
    a[..out_len].iter().map(|c| c.re * scale).collect()
}

/// One scale-`n` coefficient series of length `t_len`.
pub fn simulate_scale<R: Rng + ?Sized>(
    model: &ModelSpec,
    n: usize,
    t_len: usize,
    burn_in: usize,
    filter_lag: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 || n > model.truncation() {
        return Err(Error::InvalidParameter(format!("scale {n} outside model")));
    }
    let total = burn_in + t_len + filter_lag;
    let sigma = model.arma.sigma2(n).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let eps: Vec<f64> = (0..total).map(|_| normal.sample(rng)).collect();

    let ma = model.arma.ma(n);
    let u: Vec<f64> = (0..total)
        .map(|t| {
            eps[t]
                + ma
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l < t)
                    .map(|(l, c)| c * eps[t - l - 1])
                    .sum::<f64>()
        })
        .collect();

    let d = model.lrd.alpha(n) / 2.0;
    let w = if d == 0.0 {
        u
    } else {
        causal_convolve(&u, &frac_ma_coeffs(d, filter_lag)?)
    };

    let ar = model.arma.ar(n);
    let mut x = vec![0.0; total];
    for t in 0..total {
        let mut v = w[t];
        for (k, c) in ar.iter().enumerate() {
            if t > k {
                v += c * x[t - k - 1];
            }
        }
        x[t] = v;
    }
    Ok(x.split_off(total - t_len))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// One coefficient series per scale (pole-based zonal generation).
    #[default]
    Zonal,
    /// `2n + 1` i.i.d. series per scale.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_len: usize,
    pub burn_in: usize,
    pub filter_lag: usize,
    pub representation: Representation,
    pub seed: u64,
    pub element_budget: usize,
}

impl SimConfig {
    pub fn new(t_len: usize, seed: u64) -> Self {
        SimConfig {
            t_len,
            burn_in: 2 * DEFAULT_FILTER_LAG,
            filter_lag: DEFAULT_FILTER_LAG,
            representation: Representation::Zonal,
            seed,
            element_budget: DEFAULT_ELEMENT_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 {
            return Err(Error::Config("sample size T must be positive".into()));
        }
        if self.filter_lag < MIN_FILTER_LAG {
            return Err(Error::Config(format!(
                "filter lag {} below minimum {MIN_FILTER_LAG}",
                self.filter_lag
            )));
        }
        if self.burn_in < self.filter_lag {
            return Err(Error::Config(format!(
                "burn-in {} shorter than filter lag {}",
                self.burn_in, self.filter_lag
            )));
        }
        Ok(())
    }
}

/// Harmonic coefficients `V_{n,j}(t)`, `n = 1..M`, `t = 1..T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub representation: Representation,
    pub t_len: usize,
    pub seed: Option<u64>,
    /// `series[n-1][j-1][t-1]`.
    series: Vec<Vec<Vec<f64>>>,
}

impl FunctionalSample {
    pub fn new(representation: Representation, series: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let t_len = series
            .first()
            .and_then(|s| s.first())
            .map(Vec::len)
            .ok_or_else(|| Error::Data("empty sample".into()))?;
        for (i, scale) in series.iter().enumerate() {
            let n = i + 1;
            let expect = match representation {
                Representation::Zonal => 1,
                Representation::Full => 2 * n + 1,
            };
            if scale.len() != expect {
                return Err(Error::Data(format!(
                    "scale {n}: {} series, expected {expect}",
                    scale.len()
                )));
            }
            for s in scale {
                if s.len() != t_len {
                    return Err(Error::Data(format!("scale {n}: ragged series length")));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("scale {n}: non-finite value")));
                }
            }
        }
        Ok(FunctionalSample {
            representation,
            t_len,
            seed: None,
            series,
        })
    }

    pub fn truncation(&self) -> usize {
        self.series.len()
    }

    pub fn orders(&self, n: usize) -> usize {
        self.series[n - 1].len()
    }

    pub fn series(&self, n: usize, j: usize) -> &[f64] {
        &self.series[n - 1][j - 1]
    }

    pub fn scale(&self, n: usize) -> &[Vec<f64>] {
        &self.series[n - 1]
    }

    /// Zonal field at time `t` (1-based).
    pub fn zonal_field(&self, pole: SpherePoint, t: usize) -> Result<ZonalField> {
        if self.representation != Representation::Zonal {
            return Err(Error::Contract(
                "field snapshots need the zonal representation".into(),
            ));
        }
        if t == 0 || t > self.t_len {
            return Err(Error::InvalidParameter(format!("time {t} outside 1..={}", self.t_len)));
        }
        Ok(ZonalField {
            pole,
            coefficients: self.series.iter().map(|s| s[0][t - 1]).collect(),
        })
    }

    /// CSV with header `n,j,t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,j,t,value")?;
        for (i, scale) in self.series.iter().enumerate() {
            for (j, s) in scale.iter().enumerate() {
                for (t, v) in s.iter().enumerate() {
                    writeln!(out, "{},{},{},{}", i + 1, j + 1, t + 1, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut cells: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('n')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Data(format!("line {}: expected 4 columns", lineno + 1)));
            }
            let parse_idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Data(format!("line {}: bad index {s:?}", lineno + 1)))
            };
            let (n, j, t) = (parse_idx(fields[0])?, parse_idx(fields[1])?, parse_idx(fields[2])?);
            let v: f64 = fields[3]
                .parse()
                .map_err(|_| Error::Data(format!("line {}: bad value {:?}", lineno + 1, fields[3])))?;
            if n == 0 || j == 0 || t == 0 {
                return Err(Error::Data(format!("line {}: indices are 1-based", lineno + 1)));
            }
            cells.entry((n, j)).or_default().push((t, v));
        }
        let m = cells.keys().map(|k| k.0).max().ok_or_else(|| Error::Data("no rows".into()))?;
        let mut max_j = vec![0usize; m + 1];
        for &(n, j) in cells.keys() {
            max_j[n] = max_j[n].max(j);
        }
        let representation = if max_j[1..].iter().all(|&j| j == 1) {
            Representation::Zonal
        } else {
            Representation::Full
        };
        let mut series = Vec::with_capacity(m);
        for n in 1..=m {
            let mut scale = Vec::new();
            for j in 1..=max_j[n] {
                let mut rows = cells
                    .remove(&(n, j))
                    .ok_or_else(|| Error::Data(format!("missing series ({n}, {j})")))?;
                rows.sort_by_key(|r| r.0);
                if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
                    return Err(Error::Data(format!("series ({n}, {j}): times not 1..T")));
                }
                scale.push(rows.into_iter().map(|r| r.1).collect());
            }
            series.push(scale);
        }
        FunctionalSample::new(representation, series)
    }
}

/// Draws a full functional sample; every `(n, j)` series owns its own stream.
pub fn simulate_sample(model: &ModelSpec, config: &SimConfig) -> Result<FunctionalSample> {
    config.validate()?;
    let m = model.truncation();
    let orders = |n: usize| match config.representation {
        Representation::Zonal => 1,
        Representation::Full => 2 * n + 1,
    };
    let elements: usize = (1..=m).map(|n| orders(n) * config.t_len).sum();
    if elements > config.element_budget {
        return Err(Error::Config(format!(
            "sample needs {elements} values, budget is {}",
            config.element_budget
        )));
    }
    let jobs: Vec<(usize, usize)> = (1..=m)
        .flat_map(|n| (1..=orders(n)).map(move |j| (n, j)))
        .collect();
    let drawn: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(n, j)| {
            let mut rng = stream_rng(config.seed, coefficient_stream(n, j));
            simulate_scale(model, n, config.t_len, config.burn_in, config.filter_lag, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut it = drawn.into_iter();
    let series = (1..=m)
        .map(|n| (0..orders(n)).map(|_| it.next().expect("job count")).collect())
        .collect();
    let mut sample = FunctionalSample::new(config.representation, series)?;
    sample.seed = Some(config.seed);
    Ok(sample)
}

/// Writes `colatitude,longitude,value,t` rows for each requested time.
pub fn write_snapshots<W: Write>(
    sample: &FunctionalSample,
    pole: SpherePoint,
    grid: &SphereGrid,
    times: &[usize],
    mut out: W,
) -> Result<()> {
    let pts = grid.points();
    let locs: Vec<SpherePoint> = pts.iter().map(|p| p.2).collect();
    let io = |e| Error::io("snapshot", e);
    writeln!(out, "colatitude,longitude,value,t").map_err(io)?;
    for &t in times {
        let field = sample.zonal_field(pole, t)?;
        let values = reconstruct_field(&field, &locs)?;
        for ((c, l, _), v) in pts.iter().zip(values) {
            writeln!(out, "{c},{l},{v},{t}").map_err(io)?;
        }
    }
    Ok(())
}

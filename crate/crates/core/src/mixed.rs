//! Mixed SRD–LRD spectral estimation: smoothed periodogram on the SRD scales,
//! minimum-contrast plug-in `f_{n,θ̂}` on the remaining scales.

use std::collections::BTreeSet;
use std::io::Write;

use crate::contrast::{ContrastConfig, ContrastEngine, ContrastReport};
use crate::error::{Error, Result};
use crate::periodogram::{model_table, periodogram, smoothed_estimator, SmoothingWindow, SpectralTable};
use crate::simulator::FunctionalSample;
use crate::spectral_model::{LrdProfile, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedEstimate {
    pub srd_set: BTreeSet<usize>,
    pub window: SmoothingWindow,
    /// Smoothed periodogram on the SRD scales (full Fourier grid).
    pub srd: Option<SpectralTable>,
    /// Plug-in density on the LRD scales (Fourier grid without the zero bin).
    pub lrd: Option<SpectralTable>,
    /// Index into the caller's candidate list.
    pub selected: Option<usize>,
    pub selected_profile: Option<LrdProfile>,
    pub report: Option<ContrastReport>,
    /// Every scale is SRD; no contrast step ran.
    pub degenerate: bool,
}

impl MixedEstimate {
    /// Header lines start with `#`, then `part,n,omega,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let shape = match self.window.shape {
            crate::periodogram::WindowShape::Bartlett => "bartlett",
            crate::periodogram::WindowShape::Gaussian => "gaussian",
        };
        writeln!(out, "# window={shape}")?;
        writeln!(out, "# bandwidth={}", self.window.bandwidth)?;
        match self.selected {
            Some(i) => writeln!(out, "# selected={i}")?,
            None => writeln!(out, "# selected=none")?,
        }
        if self.degenerate {
            writeln!(out, "# degenerate=true")?;
        }
        writeln!(out, "part,n,omega,value")?;
        for (part, table) in [("srd", &self.srd), ("lrd", &self.lrd)] {
            let Some(table) = table else { continue };
            let rows = table.real().map_err(std::io::Error::other)?;
            for (n, row) in table.scales.iter().zip(rows) {
                for (w, v) in table.frequencies.iter().zip(row) {
                    writeln!(out, "{part},{n},{w},{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Reusable estimator for repeated samples of one length.
#[derive(Debug, Clone)]
pub struct MixedEstimator {
    model: ModelSpec,
    srd_set: BTreeSet<usize>,
    window: SmoothingWindow,
    lrd_scales: Vec<usize>,
    /// Original indices of the candidates kept after the SRD restriction.
    kept: Vec<usize>,
    engine: Option<ContrastEngine>,
    t_len: usize,
}

impl MixedEstimator {
    pub fn new(
        model: &ModelSpec,
        config: &ContrastConfig,
        srd_set: &BTreeSet<usize>,
        window: SmoothingWindow,
        t_len: usize,
    ) -> Result<Self> {
        let m = model.truncation();
        if let Some(n) = srd_set.iter().find(|&&n| n == 0 || n > m) {
            return Err(Error::Config(format!("SRD scale {n} outside 1..={m}")));
        }
        SmoothingWindow::new(window.shape, window.bandwidth)?;
        let lrd_scales: Vec<usize> = (1..=m).filter(|n| !srd_set.contains(n)).collect();
        let (kept, engine) = if lrd_scales.is_empty() {
            (Vec::new(), None)
        } else {
            let kept: Vec<usize> = config
                .candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.vanishes_on(srd_set))
                .map(|(i, _)| i)
                .collect();
            if kept.is_empty() {
                return Err(Error::Config(
                    "no candidate vanishes on the SRD set".into(),
                ));
            }
            let restricted = ContrastConfig {
                candidates: kept.iter().map(|&i| config.candidates[i].clone()).collect(),
                ..config.clone()
            };
            let engine = ContrastEngine::new(model, &restricted, t_len, &lrd_scales)?;
            (kept, Some(engine))
        };
        Ok(MixedEstimator {
            model: model.clone(),
            srd_set: srd_set.clone(),
            window,
            lrd_scales,
            kept,
            engine,
            t_len,
        })
    }

    pub fn estimate(&self, sample: &FunctionalSample) -> Result<MixedEstimate> {
        if sample.truncation() != self.model.truncation() {
            return Err(Error::Data(format!(
                "sample has {} scales, model {}",
                sample.truncation(),
                self.model.truncation()
            )));
        }
        if sample.t_len != self.t_len {
            return Err(Error::Data(format!(
                "sample has T = {}, estimator built for {}",
                sample.t_len, self.t_len
            )));
        }
        let ptable = periodogram(sample)?;
        let srd = if self.srd_set.is_empty() {
            None
        } else {
            Some(smoothed_estimator(&ptable, &self.window, &self.srd_set)?)
        };
        let Some(engine) = &self.engine else {
            return Ok(MixedEstimate {
                srd_set: self.srd_set.clone(),
                window: self.window,
                srd,
                lrd: None,
                selected: None,
                selected_profile: None,
                report: None,
                degenerate: true,
            });
        };
        let report = engine.select(&ptable)?;
        let profile = report.selected_profile.clone();
        let lrd = model_table(&self.model, &profile, self.t_len, &self.lrd_scales)?;
        Ok(MixedEstimate {
            srd_set: self.srd_set.clone(),
            window: self.window,
            srd,
            lrd: Some(lrd),
            selected: Some(self.kept[report.selected]),
            selected_profile: Some(profile),
            report: Some(report),
            degenerate: false,
        })
    }
}

/// One-shot mixed estimate.
pub fn estimate_mixed(
    sample: &FunctionalSample,
    model: &ModelSpec,
    config: &ContrastConfig,
    srd_set: &BTreeSet<usize>,
    window: SmoothingWindow,
) -> Result<MixedEstimate> {
    MixedEstimator::new(model, config, srd_set, window, sample.t_len)?.estimate(sample)
}

//! Scenario files: a TOML description of the model, the candidate family,
//! estimator settings and the Monte-Carlo grid.
//!
//! Built-in scenarios live in `scenarios/*.toml` and are compiled in.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contrast::{ContrastConfig, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::harmonics::SpherePoint;
use crate::periodogram::{SmoothingWindow, WindowShape};
use crate::rng::{derive_seed, stream_rng};
use crate::simulator::{Representation, SimConfig, DEFAULT_ELEMENT_BUDGET, DEFAULT_FILTER_LAG};
use crate::spectral_model::{candidate_family_with, CandidateOrdering, LrdProfile, ModelSpec, SphArmaSpec};

pub const BUILTIN: &[(&str, &str)] = &[
    ("sphar1-compact", include_str!("../scenarios/sphar1-compact.toml")),
    ("sphar1-noncompact", include_str!("../scenarios/sphar1-noncompact.toml")),
    ("sphar3-compact", include_str!("../scenarios/sphar3-compact.toml")),
    ("sphar3-noncompact", include_str!("../scenarios/sphar3-noncompact.toml")),
    ("spharma11-compact", include_str!("../scenarios/spharma11-compact.toml")),
    ("spharma31-compact", include_str!("../scenarios/spharma31-compact.toml")),
    ("mixed", include_str!("../scenarios/mixed.toml")),
    ("single-scale", include_str!("../scenarios/single-scale.toml")),
];

/// A per-scale sequence `n ↦ value`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EigenLaw {
    Constant { value: f64 },
    Table { values: Vec<f64> },
    /// `a / (1 + b n)`.
    Hyperbolic { a: f64, b: f64 },
    /// `base + amp · n / (n + half)`.
    Saturating { base: f64, amp: f64, half: f64 },
    /// `scale · n^{-exponent}`.
    Power { scale: f64, exponent: f64 },
}

impl EigenLaw {
    pub fn eval(&self, n: usize) -> Result<f64> {
        let x = n as f64;
        Ok(match self {
            EigenLaw::Constant { value } => *value,
            EigenLaw::Table { values } => *values.get(n - 1).ok_or_else(|| {
                Error::Config(format!("table has {} entries, scale {n} requested", values.len()))
            })?,
            EigenLaw::Hyperbolic { a, b } => a / (1.0 + b * x),
            EigenLaw::Saturating { base, amp, half } => base + amp * x / (x + half),
            EigenLaw::Power { scale, exponent } => scale * x.powf(-exponent),
        })
    }

    pub fn sequence(&self, m: usize) -> Result<Vec<f64>> {
        (1..=m).map(|n| self.eval(n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSet {
    List(Vec<usize>),
    Range { from: usize, to: usize },
}

impl Default for ScaleSet {
    fn default() -> Self {
        ScaleSet::List(Vec::new())
    }
}

impl ScaleSet {
    pub fn to_set(&self) -> BTreeSet<usize> {
        match self {
            ScaleSet::List(v) => v.iter().copied().collect(),
            ScaleSet::Range { from, to } => (*from..=*to).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Thresholds {
    List(Vec<f64>),
    /// `ε_i = step · i`, `i = 1..=count`.
    Step { step: f64, count: usize },
    /// `ε_i = upper · i / (count + 1)`: `count` points inside `(0, upper)`.
    Interior { upper: f64, count: usize },
}

impl Thresholds {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Thresholds::List(v) => v.clone(),
            Thresholds::Step { step, count } => (1..=*count).map(|i| step * i as f64).collect(),
            Thresholds::Interior { upper, count } => (1..=*count)
                .map(|i| upper * i as f64 / (*count as f64 + 1.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleSpec {
    pub colatitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateSpec {
    pub count: usize,
    pub ordering: CandidateOrdering,
    /// Put the true profile first; the family then has `count - 1` draws.
    pub include_truth: bool,
    /// Fixed candidate list; overrides the Beta family.
    pub explicit: Option<Vec<Vec<f64>>>,
}

impl Default for CandidateSpec {
    fn default() -> Self {
        CandidateSpec {
            count: 100,
            ordering: CandidateOrdering::Decreasing,
            include_truth: true,
            explicit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastSpec {
    pub gamma: f64,
    pub w_tilde: Option<EigenLaw>,
}

impl Default for ContrastSpec {
    fn default() -> Self {
        ContrastSpec {
            gamma: DEFAULT_GAMMA,
            w_tilde: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub filter_lag: usize,
    pub burn_in: usize,
    pub representation: Representation,
    pub element_budget: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            filter_lag: DEFAULT_FILTER_LAG,
            burn_in: 2 * DEFAULT_FILTER_LAG,
            representation: Representation::Zonal,
            element_budget: DEFAULT_ELEMENT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub shape: WindowShape,
    pub bandwidth: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        let w = SmoothingWindow::default();
        WindowSpec {
            shape: w.shape,
            bandwidth: w.bandwidth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[default]
    Contrast,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub estimator: EstimatorKind,
    pub t: Vec<usize>,
    pub r: Vec<usize>,
    pub thresholds: Thresholds,
    pub paper_t: Vec<usize>,
    pub paper_r: Vec<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            estimator: EstimatorKind::Contrast,
            t: vec![64, 256, 1024],
            r: vec![100, 200],
            thresholds: Thresholds::Interior {
                upper: 0.1,
                count: 100,
            },
            paper_t: vec![50, 500, 1000],
            paper_r: vec![100, 2000, 5000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub truncation: usize,
    pub seed: u64,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub q: usize,
    #[serde(default)]
    pub srd_set: ScaleSet,
    pub sigma2: EigenLaw,
    /// One law per AR lag.
    #[serde(default)]
    pub phi: Vec<EigenLaw>,
    /// One law per MA lag.
    #[serde(default)]
    pub psi: Vec<EigenLaw>,
    /// Long-memory eigenvalues; forced to zero on `srd_set`.
    pub lrd: EigenLaw,
    #[serde(default)]
    pub pole: Option<PoleSpec>,
    #[serde(default)]
    pub candidates: CandidateSpec,
    #[serde(default)]
    pub contrast: ContrastSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

/// Everything an estimator run needs, derived from a [`Scenario`].
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub model: ModelSpec,
    /// Candidate list; `truth_index` points at `θ₀` when it is included.
    pub contrast: ContrastConfig,
    pub truth_index: Option<usize>,
    pub window: SmoothingWindow,
    pub thresholds: Vec<f64>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Scenario::from_toml(text).expect("built-in scenarios parse"))
    }

    /// A built-in name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(s) = Self::builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            let names: Vec<&str> = BUILTIN.iter().map(|b| b.0).collect();
            return Err(Error::Config(format!(
                "no scenario file {name_or_path:?}; built-ins are {}",
                names.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 {
            return Err(Error::Config("truncation must be positive".into()));
        }
        if self.phi.len() != self.p || self.psi.len() != self.q {
            return Err(Error::Config(format!(
                "p = {}, q = {} but {} phi and {} psi laws given",
                self.p,
                self.q,
                self.phi.len(),
                self.psi.len()
            )));
        }
        let e = &self.experiment;
        if e.t.iter().chain(&e.paper_t).any(|&t| t < 2) || e.t.is_empty() {
            return Err(Error::Config("every T must be at least 2".into()));
        }
        if e.r.iter().chain(&e.paper_r).any(|&r| r == 0) || e.r.is_empty() {
            return Err(Error::Config("every R must be at least 1".into()));
        }
        let th = e.thresholds.values();
        if th.is_empty() || th[0] <= 0.0 || th.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "thresholds must be positive and strictly increasing".into(),
            ));
        }
        if e.estimator == EstimatorKind::Contrast && !self.srd_set().is_empty() {
            return Err(Error::Config(
                "an SRD set needs the mixed estimator".into(),
            ));
        }
        if self.candidates.explicit.is_none() && self.candidates.count == 0 {
            return Err(Error::Config("candidate count must be positive".into()));
        }
        Ok(())
    }

    pub fn srd_set(&self) -> BTreeSet<usize> {
        self.srd_set.to_set()
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let m = self.truncation;
        let srd = self.srd_set();
        let rows = |laws: &[EigenLaw]| -> Result<Vec<Vec<f64>>> {
            (1..=m)
                .map(|n| laws.iter().map(|l| l.eval(n)).collect())
                .collect()
        };
        let arma = SphArmaSpec::new(self.p, self.q, rows(&self.phi)?, rows(&self.psi)?, self.sigma2.sequence(m)?)?;
        let alphas = (1..=m)
            .map(|n| if srd.contains(&n) { Ok(0.0) } else { self.lrd.eval(n) })
            .collect::<Result<Vec<_>>>()?;
        let lrd = LrdProfile::new("truth", alphas)?;
        let pole = match &self.pole {
            Some(p) => SpherePoint::from_angles(p.colatitude, p.longitude),
            None => SpherePoint::random(&mut stream_rng(derive_seed(self.seed, "pole", 0), 0)),
        };
        ModelSpec::new(arma, lrd, srd, pole)
    }

    pub fn build(&self) -> Result<BuiltScenario> {
        let model = self.model()?;
        let m = self.truncation;
        let spec = &self.candidates;
        let (candidates, truth_index) = match &spec.explicit {
            Some(list) => {
                let c = list
                    .iter()
                    .enumerate()
                    .map(|(i, a)| LrdProfile::new(format!("candidate-{i}"), a.clone()))
                    .collect::<Result<Vec<_>>>()?;
                let truth = c.iter().position(|p| p.alphas() == model.lrd.alphas());
                (c, truth)
            }
            None => {
                let draws = if spec.include_truth { spec.count - 1 } else { spec.count };
                let seed = derive_seed(self.seed, "candidates", 0);
                let family = candidate_family_with(draws, m, seed, spec.ordering, &model.srd_set);
                if spec.include_truth {
                    (std::iter::once(model.lrd.clone()).chain(family).collect(), Some(0))
                } else {
                    (family, None)
                }
            }
        };
        let w_tilde = match &self.contrast.w_tilde {
            Some(law) => law.sequence(m)?,
            None => Vec::new(),
        };
        let contrast = ContrastConfig {
            gamma: self.contrast.gamma,
            w_tilde,
            ..ContrastConfig::new(candidates)
        };
        contrast.validate()?;
        Ok(BuiltScenario {
            model,
            contrast,
            truth_index,
            window: SmoothingWindow::new(self.window.shape, self.window.bandwidth)?,
            thresholds: self.experiment.thresholds.values(),
        })
    }

    pub fn sim_config(&self, t_len: usize, seed: u64) -> SimConfig {
        SimConfig {
            t_len,
            burn_in: self.simulation.burn_in,
            filter_lag: self.simulation.filter_lag,
            representation: self.simulation.representation,
            seed,
            element_budget: self.simulation.element_budget,
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

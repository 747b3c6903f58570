//! Monte-Carlo driver: simulate, estimate, score and aggregate over a grid of
//! sample sizes `T` and replication counts `R`.
//!
//! The replications of the largest `R` are computed once per `T`; smaller `R`
//! cells summarize their prefixes. Each replication is persisted as JSON so an
//! interrupted run resumes where it stopped.

pub mod metrics;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixed::{MixedEstimate, MixedEstimator};
use crate::quadrature::EvenRule;
use crate::rng::derive_seed;
use crate::scenario::{BuiltScenario, Scenario};
use crate::simulator::simulate_sample;
use metrics::{
    empirical_probabilities, grid_errors, grid_l1_error, l1_error, quadratic_error, temporal_mean_abs_error,
    Histogram,
};

#[derive(Debug, Clone, Default)]
pub struct PlanOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub paper_scale: bool,
    pub t_override: Option<Vec<usize>>,
    pub r_override: Option<Vec<usize>>,
}

/// Resolved Monte-Carlo plan.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    pub built: BuiltScenario,
    pub t_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(scenario: &Scenario, opts: &PlanOptions) -> Result<Self> {
        let e = &scenario.experiment;
        let (t_default, r_default) = if opts.paper_scale {
            (e.paper_t.clone(), e.paper_r.clone())
        } else {
            (e.t.clone(), e.r.clone())
        };
        let t_values = opts.t_override.clone().unwrap_or(t_default);
        let mut r_values = opts.r_override.clone().unwrap_or(r_default);
        r_values.sort_unstable();
        r_values.dedup();
        if t_values.is_empty() || t_values.iter().any(|&t| t < 2) {
            return Err(Error::Config("every T must be at least 2".into()));
        }
        if r_values.is_empty() || r_values[0] == 0 {
            return Err(Error::Config("every R must be at least 1".into()));
        }
        if opts.workers == Some(0) {
            return Err(Error::Config("worker count must be positive".into()));
        }
        Ok(ExperimentPlan {
            scenario: scenario.clone(),
            built: scenario.build()?,
            t_values,
            r_values,
            seed: opts.seed.unwrap_or(scenario.seed),
            out_dir: opts.out_dir.clone(),
            workers: opts.workers,
        })
    }

    fn state_dir(&self, t_len: usize) -> PathBuf {
        let hash = self.scenario.config_hash();
        self.out_dir
            .join("state")
            .join(format!("{}-{}-seed{}", self.scenario.name, &hash[..12], self.seed))
            .join(format!("T{t_len}"))
    }

    pub fn replication_seed(&self, t_len: usize, rep: usize) -> u64 {
        derive_seed(self.seed, "replication", ((t_len as u64) << 32) | rep as u64)
    }
}

/// Scores of one replication, per scale `n = 1..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub selected: Option<usize>,
    /// L¹ norm of the spectral error.
    pub l1: Vec<f64>,
    /// Frequency-averaged absolute error.
    pub abs: Vec<f64>,
    /// Frequency-averaged squared error.
    pub quad: Vec<f64>,
    pub seconds: f64,
}

/// Scores an estimate against the true model.
pub fn score_estimate(
    built: &BuiltScenario,
    estimate: &MixedEstimate,
    t_len: usize,
    rule: &EvenRule,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let model = &built.model;
    let theta0 = &model.lrd;
    let m = model.truncation();
    let (mut l1, mut abs, mut quad) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for (part, table) in [(true, &estimate.srd), (false, &estimate.lrd)] {
        let Some(table) = table else { continue };
        let rows = table.real()?;
        for (&n, row) in table.scales.iter().zip(rows) {
            let errs = grid_errors(row, model, theta0, n, t_len)?;
            abs[n - 1] = temporal_mean_abs_error(&errs);
            quad[n - 1] = quadratic_error(&errs);
            l1[n - 1] = if part {
                grid_l1_error(&errs, t_len)
            } else {
                let theta = estimate.selected_profile.as_ref().expect("LRD part has a profile");
                l1_error(model, theta0, theta, n, rule)
            };
        }
    }
    Ok((l1, abs, quad))
}

/// Summary of one `(T, R)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub t_len: usize,
    pub r: usize,
    pub thresholds: Vec<f64>,
    /// `[n-1][i]`.
    pub probabilities: Vec<Vec<f64>>,
    pub histograms: Vec<Histogram>,
    pub mean_quadratic_error: Vec<f64>,
    pub mean_abs_error: Vec<f64>,
    /// Empty when no contrast step ran.
    pub selection: Vec<f64>,
    pub records: Vec<ReplicationRecord>,
}

impl CellSummary {
    fn from_records(records: &[ReplicationRecord], t_len: usize, thresholds: &[f64], candidates: usize) -> Result<Self> {
        let r = records.len();
        let m = records[0].l1.len();
        let column = |f: fn(&ReplicationRecord) -> &Vec<f64>, n: usize| -> Vec<f64> {
            records.iter().map(|rec| f(rec)[n]).collect()
        };
        let probabilities = (0..m)
            .map(|n| empirical_probabilities(&column(|x| &x.l1, n), thresholds))
            .collect();
        let histograms = (0..m)
            .map(|n| Histogram::freedman_diaconis(&column(|x| &x.abs, n)))
            .collect();
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / r as f64;
        let mqe: Vec<f64> = (0..m).map(|n| mean(column(|x| &x.quad, n))).collect();
        let mae: Vec<f64> = (0..m).map(|n| mean(column(|x| &x.abs, n))).collect();
        for n in 0..m {
            if mqe[n] < mae[n] * mae[n] * (1.0 - 1e-12) {
                return Err(Error::Contract(format!(
                    "scale {}: mean quadratic error {} below squared mean absolute error {}",
                    n + 1,
                    mqe[n],
                    mae[n] * mae[n]
                )));
            }
        }
        let selection = if records.iter().all(|x| x.selected.is_some()) {
            let mut counts = vec![0usize; candidates];
            for rec in records {
                counts[rec.selected.expect("checked")] += 1;
            }
            counts.iter().map(|&c| c as f64 / r as f64).collect()
        } else {
            Vec::new()
        };
        Ok(CellSummary {
            t_len,
            r,
            thresholds: thresholds.to_vec(),
            probabilities,
            histograms,
            mean_quadratic_error: mqe,
            mean_abs_error: mae,
            selection,
            records: records.to_vec(),
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn load_record(path: &Path) -> Option<ReplicationRecord> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn run_replication(
    plan: &ExperimentPlan,
    estimator: &MixedEstimator,
    rule: &EvenRule,
    t_len: usize,
    rep: usize,
) -> Result<ReplicationRecord> {
    let state = plan.state_dir(t_len).join(format!("rep{rep:06}.json"));
    if let Some(rec) = load_record(&state) {
        if rec.replication == rep {
            return Ok(rec);
        }
    }
    let start = Instant::now();
    let config = plan.scenario.sim_config(t_len, plan.replication_seed(t_len, rep));
    let sample = simulate_sample(&plan.built.model, &config)?;
    let estimate = estimator.estimate(&sample)?;
    let (l1, abs, quad) = score_estimate(&plan.built, &estimate, t_len, rule)?;
    let rec = ReplicationRecord {
        replication: rep,
        selected: estimate.selected,
        l1,
        abs,
        quad,
        seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string(&rec).expect("record serializes");
    fs::write(&state, json).map_err(|e| Error::io(&state, e))?;
    Ok(rec)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scenario: &'a str,
    seed: u64,
    t: usize,
    r: usize,
    estimator: crate::scenario::EstimatorKind,
    version: &'a str,
    config_hash: String,
    truth_index: Option<usize>,
    candidates: usize,
    thresholds: &'a [f64],
}

fn write_cell(plan: &ExperimentPlan, cell: &CellSummary) -> Result<()> {
    let name = &plan.scenario.name;
    let prefix = plan.out_dir.join(format!("{name}_T{}_R{}", cell.t_len, cell.r));
    let path = |metric: &str| PathBuf::from(format!("{}_{metric}.csv", prefix.display()));
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p.clone(), e)
    };

    let p = path("probabilities");
    let mut out = create(&p)?;
    writeln!(out, "n,threshold,probability").map_err(io(&p))?;
    for (n, row) in cell.probabilities.iter().enumerate() {
        for (eps, v) in cell.thresholds.iter().zip(row) {
            writeln!(out, "{},{eps},{v}", n + 1).map_err(io(&p))?;
        }
    }
    out.flush().map_err(io(&p))?;

    let p = path("histogram");
    let mut out = create(&p)?;
    writeln!(out, "n,bin_left,bin_right,count").map_err(io(&p))?;
    for (n, h) in cell.histograms.iter().enumerate() {
        for (i, c) in h.counts.iter().enumerate() {
            writeln!(out, "{},{},{},{c}", n + 1, h.edges[i], h.edges[i + 1]).map_err(io(&p))?;
        }
    }
    out.flush().map_err(io(&p))?;

    let p = path("mqe");
    let mut out = create(&p)?;
    writeln!(out, "n,part,mean_quadratic_error,mean_abs_error").map_err(io(&p))?;
    let srd = plan.built.model.srd_set.clone();
    for n in 0..cell.mean_quadratic_error.len() {
        let part = if srd.contains(&(n + 1)) { "srd" } else { "lrd" };
        writeln!(
            out,
            "{},{part},{},{}",
            n + 1,
            cell.mean_quadratic_error[n],
            cell.mean_abs_error[n]
        )
        .map_err(io(&p))?;
    }
    out.flush().map_err(io(&p))?;

    if !cell.selection.is_empty() {
        let p = path("selection");
        let mut out = create(&p)?;
        writeln!(out, "candidate_index,frequency").map_err(io(&p))?;
        for (i, f) in cell.selection.iter().enumerate() {
            writeln!(out, "{i},{f}").map_err(io(&p))?;
        }
        out.flush().map_err(io(&p))?;
    }

    let p = path("errors");
    let mut out = create(&p)?;
    writeln!(out, "replication,n,l1,abs,quad").map_err(io(&p))?;
    for rec in &cell.records {
        for n in 0..rec.l1.len() {
            writeln!(out, "{},{},{},{},{}", rec.replication, n + 1, rec.l1[n], rec.abs[n], rec.quad[n])
                .map_err(io(&p))?;
        }
    }
    out.flush().map_err(io(&p))?;

    let sidecar = Sidecar {
        scenario: name,
        seed: plan.seed,
        t: cell.t_len,
        r: cell.r,
        estimator: plan.scenario.experiment.estimator,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: plan.scenario.config_hash(),
        truth_index: plan.built.truth_index,
        candidates: plan.built.contrast.candidates.len(),
        thresholds: &cell.thresholds,
    };
    let p = PathBuf::from(format!("{}.json", prefix.display()));
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// Runs every `(T, R)` cell of the plan, writes the CSV artifacts and returns
/// the summaries in plan order.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<CellSummary>> {
    fs::create_dir_all(&plan.out_dir).map_err(|e| Error::io(&plan.out_dir, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = plan.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rule = EvenRule::default();
    let r_max = *plan.r_values.last().expect("validated non-empty");
    let mut summaries = Vec::new();
    let mut timings: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for &t_len in &plan.t_values {
        let dir = plan.state_dir(t_len);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let records: Vec<ReplicationRecord> = pool.install(|| -> Result<Vec<_>> {
            let estimator = MixedEstimator::new(
                &plan.built.model,
                &plan.built.contrast,
                &plan.built.model.srd_set,
                plan.built.window,
                t_len,
            )?;
            (0..r_max)
                .into_par_iter()
                .map(|rep| {
                    run_replication(plan, &estimator, &rule, t_len, rep).map_err(|e| Error::Replication {
                        replication: rep,
                        source: Box::new(e),
                    })
                })
                .collect()
        })?;
        timings.insert(format!("T{t_len}"), records.iter().map(|r| r.seconds).collect());
        for &r in &plan.r_values {
            let cell = CellSummary::from_records(
                &records[..r],
                t_len,
                &plan.built.thresholds,
                plan.built.contrast.candidates.len(),
            )?;
            write_cell(plan, &cell)?;
            summaries.push(cell);
        }
    }
    let p = plan.out_dir.join("timings.json");
    let json = serde_json::to_string_pretty(&timings).expect("timings serialize");
    fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(summaries)
}

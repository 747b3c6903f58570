use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lrd_sphere::contrast::{identity_integral, ContrastEngine};
use lrd_sphere::experiments::{run_plan, ExperimentPlan, PlanOptions};
use lrd_sphere::harmonics::SphereGrid;
use lrd_sphere::mixed::MixedEstimator;
use lrd_sphere::periodogram::periodogram;
use lrd_sphere::quadrature::EvenRule;
use lrd_sphere::scenario::{EstimatorKind, Scenario};
use lrd_sphere::simulator::{simulate_sample, write_snapshots, FunctionalSample, Representation};
use lrd_sphere::spectral_model::validate_summability;
use lrd_sphere::{Error, Result};

#[derive(Parser)]
#[command(name = "lrd-sphere", version, about = "Long-memory functional time series on the sphere")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Built-in scenario name or path to a scenario TOML file.
    #[arg(long, global = true, default_value = "sphar1-compact")]
    scenario: String,
    /// Master seed; defaults to the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Use the full T and R grids instead of the desk-scale ones.
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one functional sample and write coefficient and snapshot CSVs.
    Simulate {
        /// Sample size.
        #[arg(long, default_value_t = 512)]
        t: usize,
        /// Store all 2n+1 series per scale.
        #[arg(long)]
        full: bool,
        /// Times (1-based) at which to write sphere snapshots.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<usize>,
    },
    /// Estimate the spectral model from one sample.
    Estimate {
        /// Coefficient CSV (n,j,t,value); simulated from the scenario if absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Sample size when simulating.
        #[arg(long, default_value_t = 512)]
        t: usize,
    },
    /// Run the Monte-Carlo plan of a scenario.
    Reproduce {
        /// Built-in scenario name or scenario file (overrides --scenario).
        name: Option<String>,
        /// Override the sample sizes.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<usize>>,
        /// Override the replication counts.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<usize>>,
    },
    /// Check summability and the identity constraint for a scenario.
    Validate,
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = writer(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn simulate(common: &Common, scenario: &Scenario, t: usize, full: bool, snapshots: &[usize]) -> Result<()> {
    let model = scenario.model()?;
    let mut config = scenario.sim_config(t, common.seed.unwrap_or(scenario.seed));
    if full {
        config.representation = Representation::Full;
    }
    let sample = simulate_sample(&model, &config)?;
    let path = common.out.join(format!("{}_sample.csv", scenario.name));
    write_with(&path, |w| sample.write_csv(w))?;
    println!("wrote {}", path.display());
    if !snapshots.is_empty() {
        let path = common.out.join(format!("{}_snapshots.csv", scenario.name));
        let mut w = writer(&path)?;
        write_snapshots(&sample, model.pole, &SphereGrid::default(), snapshots, &mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn estimate(common: &Common, scenario: &Scenario, input: Option<&Path>, t: usize) -> Result<()> {
    let built = scenario.build()?;
    let sample = match input {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Error::io(p, e))?;
            FunctionalSample::read_csv(BufReader::new(file))?
        }
        None => {
            let config = scenario.sim_config(t, common.seed.unwrap_or(scenario.seed));
            simulate_sample(&built.model, &config)?
        }
    };
    let name = &scenario.name;
    let ptable = periodogram(&sample)?;
    let path = common.out.join(format!("{name}_periodogram.csv"));
    write_with(&path, |w| ptable.write_csv(w))?;

    let est = match scenario.experiment.estimator {
        EstimatorKind::Mixed => {
            MixedEstimator::new(&built.model, &built.contrast, &built.model.srd_set, built.window, sample.t_len)?
                .estimate(&sample)?
        }
        EstimatorKind::Contrast => {
            let engine = ContrastEngine::new(&built.model, &built.contrast, sample.t_len, &ptable.scales)?;
            let report = engine.select(&ptable)?;
            let path = common.out.join(format!("{name}_contrast_values.csv"));
            write_with(&path, |w| report.write_values_csv(w))?;
            let path = common.out.join(format!("{name}_contrast_summary.csv"));
            write_with(&path, |w| report.write_summary_csv(w))?;
            println!("selected candidate {}", report.selected);
            return Ok(());
        }
    };
    if let Some(report) = &est.report {
        let path = common.out.join(format!("{name}_contrast_values.csv"));
        write_with(&path, |w| report.write_values_csv(w))?;
        let path = common.out.join(format!("{name}_contrast_summary.csv"));
        write_with(&path, |w| report.write_summary_csv(w))?;
    }
    let path = common.out.join(format!("{name}_mixed.csv"));
    write_with(&path, |w| est.write_csv(w))?;
    match est.selected {
        Some(i) => println!("selected candidate {i}"),
        None => println!("every scale is short-memory; no candidate selected"),
    }
    Ok(())
}

fn validate(scenario: &Scenario) -> Result<()> {
    let built = scenario.build()?;
    let model = &built.model;
    let report = validate_summability(model, &EvenRule::default());
    println!("trace sum        {}", report.trace_sum);
    println!("Hilbert-Schmidt  {}", report.hilbert_schmidt_sum);
    match report.tail_exponent {
        Some(e) => println!("tail exponent    {e}"),
        None => println!("tail exponent    n/a"),
    }
    if !report.summable {
        println!("warning: B_n(0)(2n+1) tail does not decay fast enough to extend past M");
    }
    let oracle = EvenRule::graded_midpoint(100_000, 2);
    let mut worst: f64 = 0.0;
    for theta in &built.contrast.candidates {
        for n in model.lrd_scales() {
            let v = identity_integral(model, theta, &built.contrast, n, &oracle)?;
            worst = worst.max((v - 1.0).abs());
        }
    }
    println!("identity max dev {worst:e}");
    if worst > 1e-6 {
        return Err(Error::Contract(format!("identity constraint off by {worst:e}")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let scenario_name = match &cli.command {
        Command::Reproduce { name: Some(n), .. } => n.clone(),
        _ => common.scenario.clone(),
    };
    let scenario = Scenario::load(&scenario_name)?;
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Error::Config("worker count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if !matches!(cli.command, Command::Validate) {
        fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    }
    match &cli.command {
        Command::Simulate { t, full, snapshots } => simulate(common, &scenario, *t, *full, snapshots),
        Command::Estimate { input, t } => estimate(common, &scenario, input.as_deref(), *t),
        Command::Reproduce { t, r, .. } => {
            let opts = PlanOptions {
                out_dir: common.out.clone(),
                seed: common.seed,
                workers: common.workers,
                paper_scale: common.paper_scale,
                t_override: t.clone(),
                r_override: r.clone(),
            };
            let plan = ExperimentPlan::new(&scenario, &opts)?;
            let cells = run_plan(&plan)?;
            for c in &cells {
                println!("{} T={} R={} done", scenario.name, c.t_len, c.r);
            }
            Ok(())
        }
        Command::Validate => validate(&scenario),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;

use clap::Args;
use ibounds::critical::CvMethod;
use ibounds::montecarlo::{format_table, run_experiment, table1_configs, DgpKind, McConfig, McMetrics};
use ibounds::pipeline::EstimatorChoice;

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::output::{num, strings, OutputDir};

pub const KEYS: &[&str] =
    &["out", "table1", "dgp", "n", "estimator", "estimate_v", "cv_method", "reps", "R", "seed", "grid_points"];

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run all sixteen designs of the study.
    #[arg(long)]
    pub table1: bool,
    /// Design: 1 (flat) or 2 (kinked).
    #[arg(long)]
    pub dgp: Option<u8>,
    #[arg(long)]
    pub n: Option<usize>,
    /// series or local-linear.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Estimate the near-optimal set instead of using the full grid.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub estimate_v: Option<bool>,
    /// simulated or an analytic method matching the estimator.
    #[arg(long)]
    pub cv_method: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Simulation draws per critical value.
    #[arg(long = "R")]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

impl McArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path, KEYS)?,
            None => Settings::default(),
        };
        s.set_opt("out", self.out.as_ref().map(|p| p.display()));
        if self.table1 {
            s.set_opt("table1", Some(true));
        }
        s.set_opt("dgp", self.dgp);
        s.set_opt("n", self.n);
        s.set_opt("estimator", self.estimator.as_ref());
        s.set_opt("estimate_v", self.estimate_v);
        s.set_opt("cv_method", self.cv_method.as_ref());
        s.set_opt("reps", self.reps);
        s.set_opt("R", self.draws);
        s.set_opt("seed", self.seed);
        s.set_opt("grid_points", self.grid_points);
        s.set_default("out", "ibounds-mc");
        s.set_default("table1", false);
        s.set_default("dgp", 1);
        s.set_default("n", 500);
        s.set_default("estimator", "series");
        s.set_default("estimate_v", false);
        s.set_default("cv_method", "simulated");
        s.set_default("reps", 1000);
        s.set_default("R", 5000);
        s.set_default("seed", 1);
        s.set_default("grid_points", 200);
        Ok(s)
    }
}

fn configs(s: &Settings) -> Result<Vec<McConfig>> {
    let reps: usize = s.require("reps")?;
    let seed: u64 = s.require("seed")?;
    if reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    let mut configs = if s.flag("table1")? {
        table1_configs(reps, seed)
    } else {
        let id: u8 = s.require("dgp")?;
        let dgp = DgpKind::from_id(id).ok_or_else(|| CliError::Usage(format!("unknown dgp {id}; use 1 or 2")))?;
        let estimator = match s.require::<String>("estimator")?.as_str() {
            "series" => EstimatorChoice::Series { terms: None },
            "local-linear" => EstimatorChoice::LocalLinear { bandwidth: None },
            other => return Err(CliError::Usage(format!("unknown estimator '{other}'"))),
        };
        let n: usize = s.require("n")?;
        if n < 50 {
            return Err(CliError::Usage(format!("n must be at least 50, got {n}")));
        }
        let mut c = McConfig::new(dgp, n, estimator, s.flag("estimate_v")?);
        c.reps = reps;
        c.seed = seed;
        vec![c]
    };
    let name: String = s.require("cv_method")?;
    let cv = CvMethod::parse(&name).ok_or_else(|| CliError::Usage(format!("unknown cv_method '{name}'")))?;
    let draws: usize = s.require("R")?;
    if draws < ibounds::critical::MIN_DRAWS {
        return Err(CliError::Usage(format!("R must be at least {}", ibounds::critical::MIN_DRAWS)));
    }
    let grid_points: usize = s.require("grid_points")?;
    for c in &mut configs {
        c.cv_method = cv;
        c.draws = draws;
        c.grid_points = grid_points;
    }
    Ok(configs)
}

fn metrics_csv(results: &[McMetrics]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&[
        "estimator", "dgp", "n", "estimate_v", "avg_smoothing", "method", "mean_bias", "median_bias", "sd", "mad",
        "rmse", "coverage_50", "coverage_95", "failed",
    ]);
    let mut rows = Vec::new();
    for m in results {
        let c = &m.config;
        for (name, mm, cov) in [("analog", &m.analog, false), ("new", &m.corrected, true)] {
            rows.push(vec![
                c.estimator.as_str().to_string(),
                c.dgp.id().to_string(),
                c.n.to_string(),
                c.estimate_v.to_string(),
                num(Some(m.avg_smoothing)),
                name.to_string(),
                num(Some(mm.mean_bias)),
                num(Some(mm.median_bias)),
                num(Some(mm.sd)),
                num(Some(mm.mad)),
                num(Some(mm.rmse)),
                num(if cov { mm.coverage_at(0.5) } else { None }),
                num(if cov { mm.coverage_at(0.95) } else { None }),
                m.failed.to_string(),
            ]);
        }
    }
    (header, rows)
}

pub fn run(args: &McArgs) -> Result<String> {
    let settings = args.settings()?;
    let configs = configs(&settings)?;
    let out: PathBuf = settings.require::<String>("out")?.into();
    let mut results = Vec::with_capacity(configs.len());
    for c in &configs {
        log::info!("running {} dgp{} n={} estimate_v={}", c.estimator.as_str(), c.dgp.id(), c.n, c.estimate_v);
        results.push(run_experiment(c)?);
    }
    let table = format_table(&results);
    let dir = OutputDir::create(&out)?;
    dir.write("table.txt", &table)?;
    let (h, rows) = metrics_csv(&results);
    dir.write_csv("metrics.csv", &h, &rows)?;
    dir.write("manifest.txt", &settings.manifest("mc"))?;
    Ok(table)
}

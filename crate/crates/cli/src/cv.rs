use std::path::PathBuf;

use clap::Args;
use ibounds::argmin::ArgminSet;
use ibounds::critical::{
    analytic_kernel_k, series_exponential_a_n, series_exponential_k, simulate_sup_draws, KernelVariant,
};
use ibounds::data::{transform_outcome, BoundCurve, EstimatorKind, EvaluationGrid, InfluenceWeights, Side, Smoothing};
use ibounds::montecarlo::{dgp_sample, study_transform, DgpKind, DgpSpec};
use ibounds::nalgebra::DMatrix;
use ibounds::pipeline::{fit_curve, EstimatorChoice, GridSpec};

use crate::artifact::{self, Artifact};
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::output::{fixed, num, OutputDir};

pub const KEYS: &[&str] = &["out", "artifact", "fixture", "p", "R", "seed"];

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Weights file written by `estimate --emit-weights`.
    #[arg(long, conflicts_with = "fixture")]
    pub artifact: Option<PathBuf>,
    /// Built-in fixture: singleton, series or kernel.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Comma-separated levels.
    #[arg(long)]
    pub p: Option<String>,
    /// Simulation draws.
    #[arg(long = "R")]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn fixture(name: &str) -> Result<Artifact> {
    let fitted = |estimator| -> Result<Artifact> {
        let sample = dgp_sample(&DgpSpec::new(DgpKind::Flat, 500)?, 1);
        let sample = transform_outcome(&sample, &study_transform())?;
        let grid = GridSpec { points: 200, trim_pct: 5.0, hi: Some(1.5) };
        let (curve, weights, _, _) = fit_curve(&sample, Side::Lower, estimator, &grid)?;
        let set = ArgminSet::full(&curve);
        Ok(Artifact { curve, weights, set })
    };
    match name {
        "singleton" => {
            let grid = EvaluationGrid::discrete(vec![vec![0.0]])?;
            let curve = BoundCurve::new(grid, vec![0.0], vec![0.1], Side::Upper, 100, Smoothing::None, EstimatorKind::Discrete)?;
            let weights = InfluenceWeights::new(DMatrix::from_element(1, 1, 1.0), 10.0);
            let set = ArgminSet::full(&curve);
            Ok(Artifact { curve, weights, set })
        }
        "series" => fitted(EstimatorChoice::Series { terms: None }),
        "kernel" => fitted(EstimatorChoice::LocalLinear { bandwidth: None }),
        other => Err(CliError::Usage(format!("unknown fixture '{other}'; use singleton, series or kernel"))),
    }
}

fn analytic_column(name: &str, f: impl Fn(f64) -> ibounds::Result<f64> + 'static) -> (String, Box<dyn Fn(f64) -> Option<f64>>) {
    let f = move |p| match f(p) {
        Ok(k) => Some(k),
        Err(e) => {
            log::warn!("{e}");
            None
        }
    };
    (name.to_string(), Box::new(f))
}

pub fn run(args: &CvArgs) -> Result<String> {
    let mut s = match &args.config {
        Some(path) => Settings::load(path, KEYS)?,
        None => Settings::default(),
    };
    s.set_opt("out", args.out.as_ref().map(|p| p.display()));
    s.set_opt("artifact", args.artifact.as_ref().map(|p| p.display()));
    s.set_opt("fixture", args.fixture.as_ref());
    s.set_opt("p", args.p.as_ref());
    s.set_opt("R", args.draws);
    s.set_opt("seed", args.seed);
    s.set_default("out", "ibounds-cv");
    s.set_default("p", "0.5,0.9,0.95,0.99");
    s.set_default("R", 10_000);
    s.set_default("seed", 1);

    let art = match (s.get::<String>("artifact")?, s.get::<String>("fixture")?) {
        (Some(path), None) => artifact::load(path.as_ref())?,
        (None, Some(name)) => fixture(&name)?,
        (Some(_), Some(_)) => return Err(CliError::Usage("give either an artifact or a fixture, not both".into())),
        (None, None) => return Err(CliError::Usage("missing artifact: pass --artifact FILE or --fixture NAME".into())),
    };
    let levels: Vec<f64> = s.list("p")?;
    if levels.is_empty() || levels.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(CliError::Usage("levels p must lie in (0, 1)".into()));
    }
    let draws: usize = s.require("R")?;
    let seed: u64 = s.require("seed")?;
    let sims = simulate_sup_draws(&art.weights, &art.set, draws, seed)?;

    let Artifact { curve, weights, set } = &art;
    let mut columns: Vec<(String, Box<dyn Fn(f64) -> Option<f64>>)> = Vec::new();
    match curve.smoothing {
        Smoothing::Terms(_) if curve.grid.dim() == 1 => {
            let a_n = series_exponential_a_n(weights, set, curve);
            columns.push(analytic_column("series-exp", move |p| series_exponential_k(a_n.clone()?, p).map(|c| c.k)));
        }
        Smoothing::Bandwidth(h) => {
            let measure = set.measure(curve);
            let d = curve.grid.dim();
            for (name, variant) in [
                ("gumbel", KernelVariant::Gumbel),
                ("gumbel-approx", KernelVariant::GumbelApprox),
                ("hardle-linton", KernelVariant::HardleLinton),
            ] {
                columns.push(analytic_column(name, move |p| analytic_kernel_k(measure, h, d, p, variant).map(|c| c.k)));
            }
        }
        _ => {}
    }

    let mut text = format!(
        "critical values over {} of {} grid points ({} draws, seed {seed})\n{:>6} {:>10} {:>8}",
        set.len(),
        curve.len(),
        draws,
        "p",
        "simulated",
        "mc_se"
    );
    for (name, _) in &columns {
        text.push_str(&format!(" {name:>14}"));
    }
    text.push('\n');
    let mut header = vec!["p".to_string(), "simulated".into(), "mc_se".into()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    let mut rows = Vec::new();
    for &p in &levels {
        let k = sims.quantile(p)?;
        let se = sims.mc_se(p);
        text.push_str(&format!("{p:>6} {k:>10.4} {se:>8.4}"));
        let mut row = vec![num(Some(p)), num(Some(k)), num(Some(se))];
        for (_, f) in &columns {
            let v = f(p);
            text.push_str(&format!(" {:>14}", fixed(v, 4)));
            row.push(num(v));
        }
        text.push('\n');
        rows.push(row);
    }
    let out: PathBuf = s.require::<String>("out")?.into();
    let dir = OutputDir::create(&out)?;
    dir.write("cv.txt", &text)?;
    dir.write_csv("cv.csv", &header, &rows)?;
    dir.write("manifest.txt", &s.manifest("cv"))?;
    Ok(text)
}

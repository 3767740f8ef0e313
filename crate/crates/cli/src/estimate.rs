use std::path::PathBuf;

use clap::Args;
use ibounds::argmin::SetMode;
use ibounds::critical::CvMethod;
use ibounds::data::{transform_outcome, Sample, Side, TransformForm, TransformSpec};
use ibounds::inference::{ci_identified_set, ci_parameter, OneSidedResult, TauRule, TwoSidedInterval};
use ibounds::pipeline::{fit_side, EstimatorChoice, FittedSide, GridSpec, SetChoice, SideConfig};
use ibounds::rng::derive_seed;

use crate::artifact;
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::input::read_sample;
use crate::output::{fixed, num, strings, OutputDir};

pub const KEYS: &[&str] = &[
    "data", "out", "estimator", "side", "t", "y0", "y1", "form", "grid_points", "trim_pct", "grid_hi", "epsilon",
    "set_mode", "cv_method", "R", "alpha", "p", "tau_rule", "ci", "seed", "K", "h", "emit_curve", "emit_weights",
];

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV with header y,z,v (or y,z,v1,...,vd).
    pub data: Option<PathBuf>,
    /// Key=value configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// series, local-linear or discrete.
    #[arg(long)]
    pub estimator: Option<String>,
    /// lower, upper or both.
    #[arg(long)]
    pub side: Option<String>,
    /// Treatment value defining the bound outcomes; omit to use y as is.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Left end of the outcome support (lower bound outcome).
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    /// Right end of the outcome support (upper bound outcome).
    #[arg(long, allow_hyphen_values = true)]
    pub y1: Option<f64>,
    /// realized (keep y when z = t) or monotone (keep y when z <= t / z >= t).
    #[arg(long)]
    pub form: Option<String>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Percentile trimmed from each end of the covariate range.
    #[arg(long)]
    pub trim_pct: Option<f64>,
    /// Fixed right end of the grid.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// nonparametric, parametric or full (no set estimation).
    #[arg(long)]
    pub set_mode: Option<String>,
    /// simulated, series-exp, gumbel, gumbel-approx or hardle-linton.
    #[arg(long)]
    pub cv_method: Option<String>,
    /// Simulation draws for critical values.
    #[arg(long = "R")]
    pub draws: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated levels for one-sided bounds.
    #[arg(long)]
    pub p: Option<String>,
    /// sigma or log-n.
    #[arg(long)]
    pub tau_rule: Option<String>,
    /// none, set, parameter or both (two-sided runs only).
    #[arg(long)]
    pub ci: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of series terms.
    #[arg(long = "K")]
    pub terms: Option<usize>,
    /// Kernel bandwidth.
    #[arg(long)]
    pub h: Option<f64>,
    /// Write curve_<side>.csv with corrected curves and set membership.
    #[arg(long)]
    pub emit_curve: bool,
    /// Write weights_<side>.csv for the `cv` command.
    #[arg(long)]
    pub emit_weights: bool,
}

impl EstimateArgs {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path, KEYS)?,
            None => Settings::default(),
        };
        s.set_opt("data", self.data.as_ref().map(|p| p.display()));
        s.set_opt("out", self.out.as_ref().map(|p| p.display()));
        s.set_opt("estimator", self.estimator.as_ref());
        s.set_opt("side", self.side.as_ref());
        s.set_opt("t", self.t);
        s.set_opt("y0", self.y0);
        s.set_opt("y1", self.y1);
        s.set_opt("form", self.form.as_ref());
        s.set_opt("grid_points", self.grid_points);
        s.set_opt("trim_pct", self.trim_pct);
        s.set_opt("grid_hi", self.grid_hi);
        s.set_opt("epsilon", self.epsilon);
        s.set_opt("set_mode", self.set_mode.as_ref());
        s.set_opt("cv_method", self.cv_method.as_ref());
        s.set_opt("R", self.draws);
        s.set_opt("alpha", self.alpha);
        s.set_opt("p", self.p.as_ref());
        s.set_opt("tau_rule", self.tau_rule.as_ref());
        s.set_opt("ci", self.ci.as_ref());
        s.set_opt("seed", self.seed);
        s.set_opt("K", self.terms);
        s.set_opt("h", self.h);
        if self.emit_curve {
            s.set_opt("emit_curve", Some(true));
        }
        if self.emit_weights {
            s.set_opt("emit_weights", Some(true));
        }
        s.set_default("out", "ibounds-out");
        s.set_default("estimator", "series");
        s.set_default("side", "both");
        s.set_default("form", "realized");
        s.set_default("grid_points", 200);
        s.set_default("trim_pct", 5);
        s.set_default("set_mode", "nonparametric");
        s.set_default("cv_method", "simulated");
        s.set_default("R", 10_000);
        s.set_default("alpha", 0.05);
        s.set_default("p", "0.5,0.95");
        s.set_default("tau_rule", "sigma");
        s.set_default("ci", "both");
        s.set_default("seed", 1);
        s.set_default("emit_curve", false);
        s.set_default("emit_weights", false);
        Ok(s)
    }
}

struct Plan {
    data: PathBuf,
    out: PathBuf,
    sides: Vec<Side>,
    transform: Option<(f64, Option<f64>, Option<f64>, TransformForm)>,
    config: SideConfig,
    alpha: f64,
    levels: Vec<f64>,
    tau_rule: TauRule,
    ci_set: bool,
    ci_parameter: bool,
    emit_curve: bool,
    emit_weights: bool,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_level(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("{name} must lie in (0, 1), got {x}")))
    }
}

fn plan(s: &Settings) -> Result<Plan> {
    let data: PathBuf = s.get::<String>("data")?.ok_or_else(|| usage("no input CSV given"))?.into();
    let estimator = match s.require::<String>("estimator")?.as_str() {
        "series" => EstimatorChoice::Series { terms: s.get("K")? },
        "local-linear" => EstimatorChoice::LocalLinear { bandwidth: s.get("h")? },
        "discrete" => EstimatorChoice::Discrete,
        other => return Err(usage(format!("unknown estimator '{other}'"))),
    };
    let sides = match s.require::<String>("side")?.as_str() {
        "lower" => vec![Side::Lower],
        "upper" => vec![Side::Upper],
        "both" => vec![Side::Lower, Side::Upper],
        other => return Err(usage(format!("unknown side '{other}'"))),
    };
    let form = match s.require::<String>("form")?.as_str() {
        "realized" => TransformForm::RealizedTreatment,
        "monotone" => TransformForm::MonotoneResponse,
        other => return Err(usage(format!("unknown form '{other}'"))),
    };
    let transform = match s.get::<f64>("t")? {
        None => None,
        Some(t) => {
            let (y0, y1) = (s.get::<f64>("y0")?, s.get::<f64>("y1")?);
            if sides.contains(&Side::Lower) && y0.is_none() {
                return Err(usage("the lower bound outcome needs y0"));
            }
            if sides.contains(&Side::Upper) && y1.is_none() {
                return Err(usage("the upper bound outcome needs y1"));
            }
            Some((t, y0, y1, form))
        }
    };
    let set = match s.require::<String>("set_mode")?.as_str() {
        "full" => SetChoice::Full,
        m => {
            let mode = match m {
                "nonparametric" => SetMode::Nonparametric,
                "parametric" => SetMode::Parametric,
                other => return Err(usage(format!("unknown set_mode '{other}'"))),
            };
            let epsilon = s.get::<f64>("epsilon")?.unwrap_or(mode.default_epsilon());
            if !(epsilon >= 0.0) {
                return Err(usage("epsilon must be nonnegative"));
            }
            SetChoice::Estimate { epsilon, mode }
        }
    };
    let cv_name = s.require::<String>("cv_method")?;
    let cv_method = CvMethod::parse(&cv_name).ok_or_else(|| usage(format!("unknown cv_method '{cv_name}'")))?;
    match (cv_method, estimator) {
        (CvMethod::SeriesExponential, EstimatorChoice::Series { .. }) => {}
        (CvMethod::SeriesExponential, _) => return Err(usage("series-exp critical values need the series estimator")),
        (CvMethod::KernelGumbel | CvMethod::KernelGumbelApprox | CvMethod::KernelHardleLinton, e)
            if !matches!(e, EstimatorChoice::LocalLinear { .. }) =>
        {
            return Err(usage(format!("{cv_name} critical values need the local-linear estimator")))
        }
        _ => {}
    }
    let draws: usize = s.require("R")?;
    if draws < ibounds::critical::MIN_DRAWS {
        return Err(usage(format!("R must be at least {}", ibounds::critical::MIN_DRAWS)));
    }
    let alpha: f64 = s.require("alpha")?;
    check_level("alpha", alpha)?;
    let levels: Vec<f64> = s.list("p")?;
    if levels.is_empty() {
        return Err(usage("at least one level p is required"));
    }
    for &p in &levels {
        check_level("p", p)?;
    }
    let tau_rule = match s.require::<String>("tau_rule")?.as_str() {
        "sigma" => TauRule::SigmaRule,
        "log-n" => TauRule::LogN,
        other => return Err(usage(format!("unknown tau_rule '{other}'"))),
    };
    let (ci_set, ci_parameter) = match s.require::<String>("ci")?.as_str() {
        "none" => (false, false),
        "set" => (true, false),
        "parameter" => (false, true),
        "both" => (true, true),
        other => return Err(usage(format!("unknown ci '{other}'"))),
    };
    Ok(Plan {
        data,
        out: s.require::<String>("out")?.into(),
        sides,
        transform,
        config: SideConfig {
            estimator,
            grid: GridSpec { points: s.require("grid_points")?, trim_pct: s.require("trim_pct")?, hi: s.get("grid_hi")? },
            set,
            cv_method,
            draws,
            seed: s.require("seed")?,
        },
        alpha,
        levels,
        tau_rule,
        ci_set,
        ci_parameter,
        emit_curve: s.flag("emit_curve")?,
        emit_weights: s.flag("emit_weights")?,
    })
}

fn side_sample(sample: &Sample, side: Side, plan: &Plan) -> Result<Sample> {
    let Some((t, y0, y1, form)) = plan.transform else {
        return Ok(sample.clone());
    };
    let spec = TransformSpec {
        t,
        y0: y0.unwrap_or(f64::NEG_INFINITY),
        y1: y1.unwrap_or(f64::INFINITY),
        target: side,
        form,
    };
    Ok(transform_outcome(sample, &spec)?)
}

struct SideRun {
    side: Side,
    fitted: FittedSide,
    results: Vec<OneSidedResult>,
}

fn set_extent(fitted: &FittedSide) -> Option<(f64, f64)> {
    let grid = &fitted.curve.grid;
    if grid.dim() != 1 {
        return None;
    }
    let first = *fitted.set.indices.first()?;
    let last = *fitted.set.indices.last()?;
    Some((grid.point(first)[0], grid.point(last)[0]))
}

fn smoothing_label(fitted: &FittedSide) -> String {
    use ibounds::data::Smoothing;
    match fitted.curve.smoothing {
        Smoothing::None => "none".into(),
        Smoothing::Terms(k) => match fitted.k_cv {
            Some(cv) => format!("K = {k} (cross-validated {cv})"),
            None => format!("K = {k}"),
        },
        Smoothing::Bandwidth(h) => {
            format!("h = {h:.6}{}", if fitted.bandwidth_fallback { " (rule-of-thumb fallback)" } else { "" })
        }
    }
}

fn report(runs: &[SideRun], intervals: &[TwoSidedInterval], plan: &Plan) -> String {
    let mut out = String::new();
    for run in runs {
        let c = &run.fitted.curve;
        out.push_str(&format!("{} bound ({} estimator, n = {})\n", run.side.as_str(), plan.config.estimator.as_str(), c.n));
        out.push_str(&format!("  smoothing: {}\n", smoothing_label(&run.fitted)));
        let set = &run.fitted.set;
        match set_extent(&run.fitted) {
            Some((a, b)) => out.push_str(&format!(
                "  set: {} of {} grid points, [{a:.6}, {b:.6}]\n",
                set.len(),
                c.len()
            )),
            None => out.push_str(&format!("  set: {} of {} grid points\n", set.len(), c.len())),
        }
        out.push_str(&format!("  analog bound: {:.6}\n", c.analog_bound()));
        out.push_str(&format!(
            "  {:>6} {:>12} {:>10} {:>14} {:>10} {:>10} {:>10}\n",
            "p", "theta_p", "k", "method", "a_n", "b_n", "mc_se"
        ));
        for r in &run.results {
            let k = &r.k_used;
            out.push_str(&format!(
                "  {:>6} {:>12.6} {:>10.6} {:>14} {:>10} {:>10} {:>10}\n",
                r.p,
                r.theta_p,
                k.k,
                k.method.as_str(),
                fixed(k.a_n, 4),
                fixed(k.b_n, 4),
                fixed(k.mc_se, 4)
            ));
        }
        out.push('\n');
    }
    for ci in intervals {
        out.push_str(&format!(
            "{} interval at level {}: [{:.6}, {:.6}]{}\n",
            ci.kind.as_str(),
            ci.level,
            ci.lo,
            ci.hi,
            if ci.crossed { " (bounds cross: empty)" } else { "" }
        ));
        out.push_str(&format!("  one-sided level used: {:.6}\n", ci.p_used));
        if let Some(d) = ci.delta_hat {
            out.push_str(&format!(
                "  delta_hat = {d:.6}, tau_n = {}, sigma_n = {}\n",
                fixed(ci.tau_n, 6),
                fixed(ci.sigma_n, 6)
            ));
        }
    }
    out
}

fn results_csv(runs: &[SideRun]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&[
        "side", "p", "theta_p", "k", "k_method", "k_mc_se", "a_n", "b_n", "argopt_index", "set_points", "set_lo", "set_hi",
    ]);
    let mut rows = Vec::new();
    for run in runs {
        let extent = set_extent(&run.fitted);
        for r in &run.results {
            rows.push(vec![
                run.side.as_str().to_string(),
                num(Some(r.p)),
                num(Some(r.theta_p)),
                num(Some(r.k_used.k)),
                r.k_used.method.as_str().to_string(),
                num(r.k_used.mc_se),
                num(r.k_used.a_n),
                num(r.k_used.b_n),
                r.argopt_index.to_string(),
                run.fitted.set.len().to_string(),
                num(extent.map(|e| e.0)),
                num(extent.map(|e| e.1)),
            ]);
        }
    }
    (header, rows)
}

fn intervals_csv(intervals: &[TwoSidedInterval]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&["kind", "level", "lo", "hi", "p_used", "delta_hat", "p_hat_n", "tau_n", "sigma_n", "crossed"]);
    let rows = intervals
        .iter()
        .map(|ci| {
            vec![
                ci.kind.as_str().to_string(),
                num(Some(ci.level)),
                num(Some(ci.lo)),
                num(Some(ci.hi)),
                num(Some(ci.p_used)),
                num(ci.delta_hat),
                num(ci.p_hat_n),
                num(ci.tau_n),
                num(ci.sigma_n),
                ci.crossed.to_string(),
            ]
        })
        .collect();
    (header, rows)
}

fn curve_csv(run: &SideRun) -> (Vec<String>, Vec<Vec<String>>) {
    let c = &run.fitted.curve;
    let d = c.grid.dim();
    let mut header: Vec<String> = if d == 1 { vec!["v".into()] } else { (1..=d).map(|j| format!("v{j}")).collect() };
    header.extend(strings(&["theta_hat", "se"]));
    header.extend(run.results.iter().map(|r| format!("corrected_p{}", r.p)));
    header.push("in_veps".into());
    let sign = c.side.sign();
    let rows = (0..c.len())
        .map(|i| {
            let mut row: Vec<String> = c.grid.point(i).iter().map(|&x| num(Some(x))).collect();
            row.push(num(Some(c.theta_hat[i])));
            row.push(num(Some(c.se[i])));
            row.extend(run.results.iter().map(|r| num(Some(c.theta_hat[i] + sign * r.k_used.k * c.se[i]))));
            row.push(if run.fitted.set.contains(i) { "1".into() } else { "0".into() });
            row
        })
        .collect();
    (header, rows)
}

/// Each side draws from its own stream so a one-sided run matches the same
/// side of a two-sided run.
fn side_seed(seed: u64, side: Side) -> u64 {
    derive_seed(seed, &[if side == Side::Lower { 0 } else { 1 }])
}

pub fn run(args: &EstimateArgs) -> Result<String> {
    let settings = args.settings()?;
    let plan = plan(&settings)?;
    let sample = read_sample(&plan.data)?;
    let mut runs = Vec::new();
    for &side in &plan.sides {
        let data = side_sample(&sample, side, &plan)?;
        let mut config = plan.config;
        config.seed = side_seed(plan.config.seed, side);
        let fitted = fit_side(&data, side, &config)?;
        let results = plan
            .levels
            .iter()
            .map(|&p| fitted.problem().bound(p))
            .collect::<ibounds::Result<Vec<_>>>()?;
        runs.push(SideRun { side, fitted, results });
    }
    let mut intervals = Vec::new();
    if runs.len() == 2 {
        let (lo, hi) = (runs[0].fitted.problem(), runs[1].fitted.problem());
        if plan.ci_set {
            let p = 1.0 - plan.alpha / 2.0;
            intervals.push(ci_identified_set(&lo.bound(p)?, &hi.bound(p)?)?);
        }
        if plan.ci_parameter {
            intervals.push(ci_parameter(&lo, &hi, plan.alpha, plan.tau_rule)?);
        }
    }

    let text = report(&runs, &intervals, &plan);
    let dir = OutputDir::create(&plan.out)?;
    dir.write("results.txt", &text)?;
    let (h, rows) = results_csv(&runs);
    dir.write_csv("results.csv", &h, &rows)?;
    if !intervals.is_empty() {
        let (h, rows) = intervals_csv(&intervals);
        dir.write_csv("intervals.csv", &h, &rows)?;
    }
    for run in &runs {
        if plan.emit_curve {
            let (h, rows) = curve_csv(run);
            dir.write_csv(&format!("curve_{}.csv", run.side.as_str()), &h, &rows)?;
        }
        if plan.emit_weights {
            let f = &run.fitted;
            dir.write(&format!("weights_{}.csv", run.side.as_str()), &artifact::render(&f.curve, &f.weights, &f.set))?;
        }
    }
    let mut manifest = settings.manifest("estimate");
    for &side in &plan.sides {
        manifest.push_str(&format!("# {} critical-value seed: {}\n", side.as_str(), side_seed(plan.config.seed, side)));
    }
    dir.write("manifest.txt", &manifest)?;
    Ok(text)
}

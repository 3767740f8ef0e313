//! Simulation study of the analog and precision-corrected lower-bound
//! estimators under two monotone-instrument designs.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::argmin::SetMode;
use crate::critical::CvMethod;
use crate::data::{transform_outcome, Sample, Side, TransformSpec};
use crate::error::{Error, Result};
use crate::pipeline::{fit_side, EstimatorChoice, GridSpec, SetChoice, SideConfig};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{median, norm_cdf};

pub const DOMAIN_LO: f64 = -2.0;
pub const DOMAIN_HI: f64 = 2.0;
/// Point at which the parameter of interest is evaluated.
pub const TARGET_POINT: f64 = 1.5;
/// Truncation point of the outcome shock and left end of the outcome support.
pub const TRUNCATION: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpKind {
    /// Flat bound-generating function.
    Flat,
    /// Increasing on `[-2, 1]`, flat on `[1, 2]`.
    Kinked,
}

impl DgpKind {
    pub fn id(self) -> u8 {
        match self {
            DgpKind::Flat => 1,
            DgpKind::Kinked => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(DgpKind::Flat),
            2 => Some(DgpKind::Kinked),
            _ => None,
        }
    }

    /// Selection index `phi_0(v)`.
    pub fn phi(self, v: f64) -> f64 {
        match self {
            DgpKind::Flat => 0.0,
            DgpKind::Kinked => v.min(1.0),
        }
    }

    /// Outcome mean `mu_0(v)`.
    pub fn mu(self, v: f64) -> f64 {
        match self {
            DgpKind::Flat => 0.0,
            DgpKind::Kinked => 2.0 * v.min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, n: usize) -> Result<Self> {
        if n < 50 {
            return Err(Error::InvalidInput(format!("sample size must be at least 50, got {n}")));
        }
        Ok(Self { kind, n })
    }
}

/// Draws `V ~ U[-2, 2]`, `Z = 1{phi(V) + e > 0}` and
/// `Y = mu(V) + |V| U` with `U` a standard normal truncated to `[-1.96, 1.96]`.
pub fn dgp_sample(spec: &DgpSpec, seed: u64) -> Sample {
    let mut rng = stream_rng(seed, 0);
    let mut y = Vec::with_capacity(spec.n);
    let mut z = Vec::with_capacity(spec.n);
    let mut v = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let vi: f64 = rng.random_range(DOMAIN_LO..DOMAIN_HI);
        let e: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        let u = eta.clamp(-TRUNCATION, TRUNCATION);
        z.push(if spec.kind.phi(vi) + e > 0.0 { 1.0 } else { 0.0 });
        y.push(spec.kind.mu(vi) + vi.abs() * u);
        v.push(vi);
    }
    Sample::univariate(y, z, v).expect("generated sample is valid")
}

/// Lower bound-generating function `mu(v) Phi(phi(v)) - 1.96 Phi(-phi(v))`.
pub fn true_theta_l(kind: DgpKind, v: f64) -> f64 {
    let phi = kind.phi(v);
    kind.mu(v) * norm_cdf(phi) - TRUNCATION * norm_cdf(-phi)
}

/// True lower bound on the parameter at the target point: the supremum of
/// `theta_l` over `v <= 1.5`, attained on the flat part of the design.
pub fn true_bound(kind: DgpKind) -> f64 {
    true_theta_l(kind, TARGET_POINT)
}

/// Outcome transformation used by the study (treatment `t = 1`).
pub fn study_transform() -> TransformSpec {
    TransformSpec::miv_lower(1.0, -TRUNCATION)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub dgp: DgpKind,
    pub n: usize,
    pub estimator: EstimatorChoice,
    pub estimate_v: bool,
    pub cv_method: CvMethod,
    pub reps: usize,
    /// Levels at which coverage of the corrected estimator is reported.
    pub p_list: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
    pub grid_points: usize,
}

impl McConfig {
    pub fn new(dgp: DgpKind, n: usize, estimator: EstimatorChoice, estimate_v: bool) -> Self {
        Self {
            dgp,
            n,
            estimator,
            estimate_v,
            cv_method: CvMethod::Simulated,
            reps: 1000,
            p_list: vec![0.5, 0.95],
            draws: 5000,
            seed: 1,
            grid_points: 200,
        }
    }

    fn side_config(&self, seed: u64) -> SideConfig {
        let mode = SetMode::Nonparametric;
        SideConfig {
            estimator: self.estimator,
            grid: GridSpec { points: self.grid_points, trim_pct: 5.0, hi: Some(TARGET_POINT) },
            set: if self.estimate_v {
                SetChoice::Estimate { epsilon: mode.default_epsilon(), mode }
            } else {
                SetChoice::Full
            },
            cv_method: self.cv_method,
            draws: self.draws,
            seed,
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub analog: f64,
    /// Corrected estimate at `p = 1/2`.
    pub corrected_median: f64,
    /// Corrected estimates at each level of the configuration's `p_list`.
    pub corrected: Vec<f64>,
    pub smoothing: f64,
    pub set_size: usize,
}

/// Runs a single replication with its own seed.
pub fn run_replication(config: &McConfig, rep_seed: u64) -> Result<Replication> {
    let spec = DgpSpec::new(config.dgp, config.n)?;
    let sample = dgp_sample(&spec, rep_seed);
    let sample = transform_outcome(&sample, &study_transform())?;
    let fitted = fit_side(&sample, Side::Lower, &config.side_config(derive_seed(rep_seed, &[1])))?;
    let problem = fitted.problem();
    let corrected = config
        .p_list
        .iter()
        .map(|&p| problem.bound(p).map(|r| r.theta_p))
        .collect::<Result<Vec<_>>>()?;
    Ok(Replication {
        analog: fitted.curve.analog_bound(),
        corrected_median: problem.bound(0.5)?.theta_p,
        corrected,
        smoothing: fitted.curve.smoothing.value(),
        set_size: fitted.set.len(),
    })
}

/// Summary of one estimator across replications. `sd` uses the `1/R`
/// divisor so that `rmse^2 = mean_bias^2 + sd^2` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub mean_bias: f64,
    pub median_bias: f64,
    pub sd: f64,
    pub mad: f64,
    pub rmse: f64,
    /// `(p, fraction of replications with estimate <= true bound)`.
    pub coverage: Vec<(f64, f64)>,
}

impl MethodMetrics {
    pub fn from_estimates(estimates: &[f64], truth: f64) -> Self {
        let r = estimates.len() as f64;
        let errors: Vec<f64> = estimates.iter().map(|e| e - truth).collect();
        let mean_bias = errors.iter().sum::<f64>() / r;
        let var = errors.iter().map(|e| (e - mean_bias).powi(2)).sum::<f64>() / r;
        Self {
            mean_bias,
            median_bias: median(&errors),
            sd: var.sqrt(),
            mad: errors.iter().map(|e| e.abs()).sum::<f64>() / r,
            rmse: (errors.iter().map(|e| e * e).sum::<f64>() / r).sqrt(),
            coverage: Vec::new(),
        }
    }

    pub fn coverage_at(&self, p: f64) -> Option<f64> {
        self.coverage.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|(_, c)| *c)
    }
}

fn coverage(estimates: &[f64], truth: f64) -> f64 {
    estimates.iter().filter(|&&e| e <= truth).count() as f64 / estimates.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct McMetrics {
    pub config: McConfig,
    pub truth: f64,
    pub analog: MethodMetrics,
    pub corrected: MethodMetrics,
    pub avg_smoothing: f64,
    pub avg_set_size: f64,
    pub failed: usize,
    pub replications: Vec<Replication>,
}

/// Runs `config.reps` replications in parallel. Replication `r` uses the
/// seed derived from `(config.seed, r)`, so results do not depend on the
/// thread count. More than 1% failed replications is an error.
pub fn run_experiment(config: &McConfig) -> Result<McMetrics> {
    if config.reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    let outcomes: Vec<Result<Replication>> = (0..config.reps)
        .into_par_iter()
        .map(|r| run_replication(config, derive_seed(config.seed, &[r as u64])))
        .collect();
    let mut reps = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rep) => reps.push(rep),
            Err(e) => failures.push((r, e)),
        }
    }
    if !failures.is_empty() {
        let (r, e) = &failures[0];
        log::warn!("{} replication(s) failed; first at {r}: {e}", failures.len());
        if failures.len() as f64 > 0.01 * config.reps as f64 || reps.is_empty() {
            return Err(Error::TooManyFailures {
                failed: failures.len(),
                total: config.reps,
                first: format!("replication {r}: {e}"),
            });
        }
    }
    let truth = true_bound(config.dgp);
    let analog: Vec<f64> = reps.iter().map(|r| r.analog).collect();
    let median_est: Vec<f64> = reps.iter().map(|r| r.corrected_median).collect();
    let mut corrected = MethodMetrics::from_estimates(&median_est, truth);
    corrected.coverage = config
        .p_list
        .iter()
        .enumerate()
        .map(|(j, &p)| (p, coverage(&reps.iter().map(|r| r.corrected[j]).collect::<Vec<_>>(), truth)))
        .collect();
    let count = reps.len() as f64;
    Ok(McMetrics {
        config: config.clone(),
        truth,
        analog: MethodMetrics::from_estimates(&analog, truth),
        corrected,
        avg_smoothing: reps.iter().map(|r| r.smoothing).sum::<f64>() / count,
        avg_set_size: reps.iter().map(|r| r.set_size as f64).sum::<f64>() / count,
        failed: failures.len(),
        replications: reps,
    })
}

/// The sixteen designs of the study: estimator by design by sample size by
/// set estimation.
pub fn table1_configs(reps: usize, seed: u64) -> Vec<McConfig> {
    let mut out = Vec::with_capacity(16);
    for estimator in [EstimatorChoice::Series { terms: None }, EstimatorChoice::LocalLinear { bandwidth: None }] {
        for dgp in [DgpKind::Flat, DgpKind::Kinked] {
            for n in [500, 1000] {
                for estimate_v in [false, true] {
                    let mut c = McConfig::new(dgp, n, estimator, estimate_v);
                    c.reps = reps;
                    c.seed = seed;
                    out.push(c);
                }
            }
        }
    }
    out
}

fn fmt_cov(m: &MethodMetrics, p: f64) -> String {
    m.coverage_at(p).map(|c| format!("{c:.3}")).unwrap_or_default()
}

/// Aligned text table with one analog row and one corrected row per
/// experiment.
pub fn format_table(results: &[McMetrics]) -> String {
    let mut out = format!(
        "{:<13} {:>3} {:>5} {:>9} {:>4} {:<6} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "estimator", "dgp", "n", "smoothing", "V?", "method", "mean", "median", "sd", "mad", "rmse", "0.50", "0.95"
    );
    for m in results {
        let c = &m.config;
        let v = if c.estimate_v { "Yes" } else { "No" };
        for (name, metrics, cov) in [("Analog", &m.analog, false), ("New", &m.corrected, true)] {
            out.push_str(&format!(
                "{:<13} {:>3} {:>5} {:>9.3} {:>4} {:<6} {:>7.3} {:>7.3} {:>6.3} {:>6.3} {:>6.3} {:>6} {:>6}\n",
                c.estimator.as_str(),
                c.dgp.id(),
                c.n,
                m.avg_smoothing,
                v,
                name,
                metrics.mean_bias,
                metrics.median_bias,
                metrics.sd,
                metrics.mad,
                metrics.rmse,
                if cov { fmt_cov(metrics, 0.5) } else { String::new() },
                if cov { fmt_cov(metrics, 0.95) } else { String::new() },
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    #[test]
    fn true_bounds() {
        assert_eq!(true_theta_l(DgpKind::Flat, -1.3), -0.98);
        assert_eq!(true_theta_l(DgpKind::Flat, 1.5), -0.98);
        assert!((true_theta_l(DgpKind::Kinked, 0.0) + 0.98).abs() < 1e-15);
        let expected = 2.0 * 0.841_344_746_068_542_9 - 1.96 * 0.158_655_253_931_457_05;
        assert!((true_bound(DgpKind::Kinked) - expected).abs() < 1e-9);
        assert!((true_bound(DgpKind::Kinked) - 1.3717).abs() < 1e-3);
        // Increasing below the kink, flat above.
        assert!(true_theta_l(DgpKind::Kinked, 0.5) < true_theta_l(DgpKind::Kinked, 0.9));
        assert_eq!(true_theta_l(DgpKind::Kinked, 1.2), true_theta_l(DgpKind::Kinked, 1.5));
    }

    #[test]
    fn generated_moments() {
        let s = dgp_sample(&DgpSpec::new(DgpKind::Flat, 40_000).unwrap(), 3);
        assert!(mean(s.y()).abs() < 0.02);
        assert!((mean(s.z()) - 0.5).abs() < 0.01);
        let v = s.v_scalar().unwrap();
        assert!(v.iter().all(|&x| (DOMAIN_LO..DOMAIN_HI).contains(&x)));
        assert!(s.y().iter().zip(v).all(|(y, v)| y.abs() <= TRUNCATION * v.abs() + 1e-12));

        let s = dgp_sample(&DgpSpec::new(DgpKind::Kinked, 40_000).unwrap(), 4);
        let v = s.v_scalar().unwrap();
        let high: Vec<f64> = s.z().iter().zip(v).filter(|(_, &v)| v > 1.0).map(|(z, _)| *z).collect();
        assert!((mean(&high) - norm_cdf(1.0)).abs() < 0.02);
    }

    #[test]
    fn sample_is_deterministic() {
        let spec = DgpSpec::new(DgpKind::Kinked, 60).unwrap();
        assert_eq!(dgp_sample(&spec, 11), dgp_sample(&spec, 11));
        assert_ne!(dgp_sample(&spec, 11), dgp_sample(&spec, 12));
        assert!(DgpSpec::new(DgpKind::Flat, 49).is_err());
    }

    #[test]
    fn metrics_identities() {
        let est = [0.1, -0.2, 0.4, 0.0, 0.25];
        let m = MethodMetrics::from_estimates(&est, 0.05);
        assert!((m.rmse.powi(2) - m.mean_bias.powi(2) - m.sd.powi(2)).abs() < 1e-14);
        assert!((m.median_bias - 0.05).abs() < 1e-15);
        let single = MethodMetrics::from_estimates(&[0.3], 0.1);
        assert_eq!(single.sd, 0.0);
        assert!((single.mean_bias - 0.2).abs() < 1e-15 && (single.rmse - 0.2).abs() < 1e-15);
    }

    #[test]
    fn small_experiment_runs() {
        let mut c = McConfig::new(DgpKind::Flat, 200, EstimatorChoice::Series { terms: None }, true);
        c.reps = 4;
        c.draws = 1000;
        let m = run_experiment(&c).unwrap();
        assert_eq!(m.replications.len(), 4);
        for r in &m.replications {
            assert!(r.corrected[1] <= r.analog + 1e-12);
            assert!(r.corrected[1] <= r.corrected[0] + 1e-12);
        }
        assert!(m.corrected.coverage_at(0.95).unwrap() >= m.corrected.coverage_at(0.5).unwrap());
        assert_eq!(m.clone(), run_experiment(&c).unwrap());
        let table = format_table(&[m]);
        assert_eq!(table.lines().count(), 3);
    }

    #[test]
    fn table_matrix_has_sixteen_designs() {
        let cs = table1_configs(10, 2);
        assert_eq!(cs.len(), 16);
        assert!(cs.iter().all(|c| c.reps == 10 && c.seed == 2));
    }
}

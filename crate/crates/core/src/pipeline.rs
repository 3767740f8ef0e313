//! End-to-end estimation of one bound: fit, evaluate on a grid, estimate the
//! near-optimal set and prepare critical values.

use crate::argmin::{estimate_veps, ArgminSet, SetMode};
use crate::critical::{CriticalValueSource, CvMethod};
use crate::data::{build_grid, BoundCurve, EvaluationGrid, InfluenceWeights, Sample, Side};
use crate::discrete::{discrete_curve, fit_discrete, support_from_sample};
use crate::error::Result;
use crate::inference::OneSidedProblem;
use crate::kernel::{fit_kernel, kernel_curve, rot_bandwidth};
use crate::series::{fit_series, select_k, series_curve, DEFAULT_CV_CANDIDATES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorChoice {
    /// Cell means over the observed support.
    Discrete,
    /// Cubic B-spline series; `terms` overrides the data-driven choice.
    Series { terms: Option<usize> },
    /// Local linear; `bandwidth` overrides the rule of thumb.
    LocalLinear { bandwidth: Option<f64> },
}

impl EstimatorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorChoice::Discrete => "discrete",
            EstimatorChoice::Series { .. } => "series",
            EstimatorChoice::LocalLinear { .. } => "local-linear",
        }
    }
}

/// Grid of equally spaced points between a lower sample percentile and
/// either a fixed endpoint or the mirrored upper percentile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub trim_pct: f64,
    pub hi: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 200, trim_pct: 5.0, hi: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetChoice {
    /// Use every grid point.
    Full,
    Estimate { epsilon: f64, mode: SetMode },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideConfig {
    pub estimator: EstimatorChoice,
    pub grid: GridSpec,
    pub set: SetChoice,
    pub cv_method: CvMethod,
    pub draws: usize,
    pub seed: u64,
}

/// Everything needed to evaluate one bound at any level.
#[derive(Debug, Clone)]
pub struct FittedSide {
    pub curve: BoundCurve,
    pub weights: InfluenceWeights,
    pub set: ArgminSet,
    pub source: CriticalValueSource,
    /// Cross-validated number of series terms before undersmoothing.
    pub k_cv: Option<usize>,
    /// True when the bandwidth rule of thumb fell back to its simple form.
    pub bandwidth_fallback: bool,
}

impl FittedSide {
    pub fn problem(&self) -> OneSidedProblem<'_> {
        OneSidedProblem { curve: &self.curve, set: &self.set, source: &self.source }
    }
}

/// Fits the estimator to `sample`, whose outcome is already the bound
/// outcome for `side`.
pub fn fit_curve(
    sample: &Sample,
    side: Side,
    estimator: EstimatorChoice,
    grid: &GridSpec,
) -> Result<(BoundCurve, InfluenceWeights, Option<usize>, bool)> {
    match estimator {
        EstimatorChoice::Discrete => {
            let fit = fit_discrete(sample, &support_from_sample(sample))?;
            let (c, w) = discrete_curve(&fit, side)?;
            Ok((c, w, None, false))
        }
        EstimatorChoice::Series { terms } => {
            let grid = build_grid(sample, grid.points, grid.trim_pct, grid.hi)?;
            let (k, k_cv) = match terms {
                Some(k) => (k, None),
                None => {
                    let sel = select_k(sample, &DEFAULT_CV_CANDIDATES)?;
                    (sel.k, Some(sel.k_cv))
                }
            };
            let fit = fit_series(sample, k)?;
            let (c, w) = series_curve(&fit, &grid, side)?;
            Ok((c, w, k_cv, false))
        }
        EstimatorChoice::LocalLinear { bandwidth } => {
            let grid = build_grid(sample, grid.points, grid.trim_pct, grid.hi)?;
            let (h, fallback) = match bandwidth {
                Some(h) => (h, false),
                None => {
                    let rot = rot_bandwidth(sample)?;
                    (rot.h, rot.fallback)
                }
            };
            let fit = fit_kernel(sample, h, &grid)?;
            let (c, w) = kernel_curve(&fit, sample, &grid, side)?;
            Ok((c, w, None, fallback))
        }
    }
}

/// Runs the full one-sided pipeline.
pub fn fit_side(sample: &Sample, side: Side, config: &SideConfig) -> Result<FittedSide> {
    let (curve, weights, k_cv, bandwidth_fallback) = fit_curve(sample, side, config.estimator, &config.grid)?;
    weights.validate(&curve)?;
    let set = match config.set {
        SetChoice::Full => ArgminSet::full(&curve),
        SetChoice::Estimate { epsilon, mode } => estimate_veps(&curve, epsilon, mode),
    };
    let source = CriticalValueSource::build(config.cv_method, &curve, &weights, &set, config.draws, config.seed)?;
    Ok(FittedSide { curve, weights, set, source, k_cv, bandwidth_fallback })
}

/// Grid used by the continuous estimators, exposed for reporting.
pub fn working_grid(sample: &Sample, grid: &GridSpec) -> Result<EvaluationGrid> {
    build_grid(sample, grid.points, grid.trim_pct, grid.hi)
}

//! Core domain types: samples, outcome transforms, evaluation grids, and
//! estimated bound curves with their influence weights.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats;

/// Which bound a curve estimates.
///
/// An upper bound is the infimum of its bound-generating function and a
/// lower bound is the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// `+1` for upper bounds (corrections are added), `-1` for lower bounds.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

/// Observations `(y, z, v)` with a `d`-dimensional covariate `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
    d: usize,
}

impl Sample {
    /// Builds a sample from outcome, treatment and a row-major `n x d`
    /// covariate buffer.
    pub fn new(y: Vec<f64>, z: Vec<f64>, v: Vec<f64>, d: usize) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptySample);
        }
        if d == 0 {
            return Err(Error::InvalidInput("covariate dimension must be >= 1".into()));
        }
        let n = y.len();
        if z.len() != n || v.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "column lengths disagree: y={}, z={}, v={} (expected {})",
                n,
                z.len(),
                v.len(),
                n * d
            )));
        }
        for (what, col, width) in [("y", &y, 1), ("z", &z, 1), ("v", &v, d)] {
            if let Some(pos) = col.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what, row: pos / width });
            }
        }
        Ok(Self { y, z, v, d })
    }

    /// Sample with a scalar covariate.
    pub fn univariate(y: Vec<f64>, z: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::new(y, z, v, 1)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn v_row(&self, i: usize) -> &[f64] {
        &self.v[i * self.d..(i + 1) * self.d]
    }

    /// The covariate column when `d == 1`.
    pub fn v_scalar(&self) -> Result<&[f64]> {
        if self.d != 1 {
            return Err(Error::InvalidInput(format!(
                "a scalar covariate is required, got d = {}",
                self.d
            )));
        }
        Ok(&self.v)
    }

    /// Replaces the outcome column, keeping treatment and covariates.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(y, self.z.clone(), self.v.clone(), self.d)
    }

    /// Applies `f` to every outcome.
    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_y(self.y.iter().map(|&y| f(y)).collect())
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let z = rows.iter().map(|&i| self.z[i]).collect();
        let v = rows.iter().flat_map(|&i| self.v_row(i).to_vec()).collect();
        Self::new(y, z, v, self.d)
    }
}

/// Indicator form used to build the bound outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformForm {
    /// Realized-treatment form: keep `y` when `z == t` (monotone instrument bounds).
    RealizedTreatment,
    /// Monotone treatment response form: keep `y` when `t >= z` (lower) or
    /// `t <= z` (upper).
    MonotoneResponse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec {
    pub t: f64,
    /// Left endpoint of the outcome support.
    pub y0: f64,
    /// Right endpoint of the outcome support.
    pub y1: f64,
    pub target: Side,
    pub form: TransformForm,
}

impl TransformSpec {
    pub fn miv_lower(t: f64, y0: f64) -> Self {
        Self {
            t,
            y0,
            y1: f64::INFINITY,
            target: Side::Lower,
            form: TransformForm::RealizedTreatment,
        }
    }
}

/// Replaces each outcome by the bound outcome `Y^l` or `Y^u`.
///
/// Lower target keeps `y` when the indicator holds and substitutes `y0`
/// otherwise; upper target substitutes `y1`.
pub fn transform_outcome(sample: &Sample, spec: &TransformSpec) -> Result<Sample> {
    let fill = match spec.target {
        Side::Lower => spec.y0,
        Side::Upper => spec.y1,
    };
    if !spec.t.is_finite() || !fill.is_finite() {
        return Err(Error::InvalidInput("transform parameters must be finite".into()));
    }
    if spec.target == Side::Upper && spec.y0.is_finite() && spec.y0 > spec.y1 {
        return Err(Error::InvalidInput(format!(
            "support endpoints out of order: y0 = {} > y1 = {}",
            spec.y0, spec.y1
        )));
    }
    let y = sample
        .y()
        .iter()
        .zip(sample.z())
        .map(|(&y, &z)| {
            let keep = match (spec.form, spec.target) {
                (TransformForm::RealizedTreatment, _) => z == spec.t,
                (TransformForm::MonotoneResponse, Side::Lower) => spec.t >= z,
                (TransformForm::MonotoneResponse, Side::Upper) => spec.t <= z,
            };
            if keep {
                y
            } else {
                fill
            }
        })
        .collect();
    sample.with_y(y)
}

/// Finite set of points over which bound curves are evaluated and optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    dim: usize,
    coords: Vec<f64>,
    domain_lo: Vec<f64>,
    domain_hi: Vec<f64>,
    measure: f64,
    cell: f64,
}

impl EvaluationGrid {
    /// `g` equally spaced points on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, g: usize) -> Result<Self> {
        if g < 2 {
            return Err(Error::InvalidInput("grid needs at least 2 points".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("invalid grid range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / (g - 1) as f64;
        let mut coords: Vec<f64> = (0..g).map(|i| lo + step * i as f64).collect();
        coords[g - 1] = hi;
        Ok(Self {
            dim: 1,
            coords,
            domain_lo: vec![lo],
            domain_hi: vec![hi],
            measure: hi - lo,
            cell: step,
        })
    }

    /// Tensor-product lattice with `per_axis` points along each axis.
    pub fn lattice(lo: &[f64], hi: &[f64], per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput("lattice bounds must share a dimension".into()));
        }
        if per_axis < 2 {
            return Err(Error::InvalidInput("lattice needs at least 2 points per axis".into()));
        }
        let dim = lo.len();
        let axes: Vec<EvaluationGrid> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| Self::uniform(a, b, per_axis))
            .collect::<Result<_>>()?;
        let total = per_axis.pow(dim as u32);
        let mut coords = Vec::with_capacity(total * dim);
        for flat in 0..total {
            let mut rem = flat;
            let mut point = vec![0.0; dim];
            for axis in (0..dim).rev() {
                point[axis] = axes[axis].coords[rem % per_axis];
                rem /= per_axis;
            }
            coords.extend(point);
        }
        Ok(Self {
            dim,
            coords,
            domain_lo: lo.to_vec(),
            domain_hi: hi.to_vec(),
            measure: axes.iter().map(|a| a.measure).product(),
            cell: axes.iter().map(|a| a.cell).product(),
        })
    }

    /// Finite support points (counting measure, one unit per point).
    pub fn discrete(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("no support points".into()));
        };
        let dim = first.len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("support points must share a dimension".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(Error::InvalidInput(format!("duplicate support point {p:?}")));
            }
        }
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &points {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Ok(Self {
            dim,
            measure: points.len() as f64,
            coords: points.into_iter().flatten().collect(),
            domain_lo: lo,
            domain_hi: hi,
            cell: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Points of a one-dimensional grid.
    pub fn scalar_points(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::InvalidInput(format!(
                "a one-dimensional grid is required, got d = {}",
                self.dim
            )));
        }
        Ok(&self.coords)
    }

    pub fn domain_lo(&self) -> &[f64] {
        &self.domain_lo
    }

    pub fn domain_hi(&self) -> &[f64] {
        &self.domain_hi
    }

    /// Total measure of the working domain.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Measure attributed to one grid point (spacing for uniform 1-D grids).
    pub fn cell_measure(&self) -> f64 {
        self.cell
    }
}

/// Grid of `g` equally spaced points from the `trim_pct` percentile of `v`
/// up to `hi`, or to the `100 - trim_pct` percentile when `hi` is unset.
pub fn build_grid(sample: &Sample, g: usize, trim_pct: f64, hi: Option<f64>) -> Result<EvaluationGrid> {
    if g < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 points".into()));
    }
    if !(0.0..50.0).contains(&trim_pct) {
        return Err(Error::InvalidInput(format!("trim percentile {trim_pct} not in [0, 50)")));
    }
    let mut v = sample.v_scalar()?.to_vec();
    v.sort_by(f64::total_cmp);
    if v[0] == v[v.len() - 1] {
        return Err(Error::DegenerateCovariate);
    }
    let lo = stats::quantile_sorted(&v, trim_pct / 100.0);
    let hi = hi.unwrap_or_else(|| stats::quantile_sorted(&v, 1.0 - trim_pct / 100.0));
    EvaluationGrid::uniform(lo, hi, g)
}

/// Smoothing parameter used by an estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    None,
    /// Number of series terms.
    Terms(usize),
    /// Kernel bandwidth.
    Bandwidth(f64),
}

impl Smoothing {
    pub fn value(&self) -> f64 {
        match *self {
            Smoothing::None => f64::NAN,
            Smoothing::Terms(k) => k as f64,
            Smoothing::Bandwidth(h) => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Discrete,
    Series,
    LocalLinear,
}

/// Estimated bound-generating function with pointwise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub grid: EvaluationGrid,
    pub theta_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub side: Side,
    pub n: usize,
    pub smoothing: Smoothing,
    pub kind: EstimatorKind,
}

impl BoundCurve {
    pub fn new(
        grid: EvaluationGrid,
        theta_hat: Vec<f64>,
        se: Vec<f64>,
        side: Side,
        n: usize,
        smoothing: Smoothing,
        kind: EstimatorKind,
    ) -> Result<Self> {
        if theta_hat.len() != grid.len() || se.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "curve lengths disagree with grid: theta={}, se={}, grid={}",
                theta_hat.len(),
                se.len(),
                grid.len()
            )));
        }
        if let Some(i) = theta_hat.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { what: "theta_hat", row: i });
        }
        if let Some(i) = se.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::NonFinite { what: "se", row: i });
        }
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self { grid, theta_hat, se, side, n, smoothing, kind })
    }

    pub fn len(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_hat.is_empty()
    }

    /// Same curve treated as the other side.
    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    /// Grid index of the plain (uncorrected) optimum: argmin for upper,
    /// argmax for lower. Ties resolve to the first index.
    pub fn analog_index(&self) -> usize {
        let sign = self.side.sign();
        let mut best = 0;
        for i in 1..self.len() {
            if sign * self.theta_hat[i] < sign * self.theta_hat[best] {
                best = i;
            }
        }
        best
    }

    /// Plain analog bound estimate over the full grid.
    pub fn analog_bound(&self) -> f64 {
        self.theta_hat[self.analog_index()]
    }

    pub fn max_se(&self) -> f64 {
        self.se.iter().cloned().fold(0.0, f64::max)
    }
}

/// Per-grid-point vectors whose normalized inner product with a standard
/// Gaussian vector approximates the studentized estimation process.
///
/// Row `i` of `vectors` belongs to grid point `i`; `scale` is the factor
/// relating vector norm to the standard error (`sqrt(n)` for parametric
/// and series estimators, `sqrt(n h)` for kernel estimators).
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceWeights {
    pub vectors: DMatrix<f64>,
    pub scale: f64,
}

impl InfluenceWeights {
    pub fn new(vectors: DMatrix<f64>, scale: f64) -> Self {
        Self { vectors, scale }
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.vectors.row(i).norm()
    }

    /// Ratio `||vector_i|| / (scale * se_i)`; `NaN` where `se_i = 0`.
    pub fn norm_consistency(&self, se: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if se[i] > 0.0 {
                    self.norm(i) / (self.scale * se[i])
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    /// Checks the shape against `curve` and that every point with positive
    /// standard error carries a nonzero vector.
    pub fn validate(&self, curve: &BoundCurve) -> Result<()> {
        if self.len() != curve.len() {
            return Err(Error::InvalidInput(format!(
                "weights cover {} points, curve has {}",
                self.len(),
                curve.len()
            )));
        }
        for (i, &s) in curve.se.iter().enumerate() {
            if s > 0.0 && self.norm(i) == 0.0 {
                return Err(Error::ZeroNorm { index: i });
            }
        }
        Ok(())
    }

    /// Weights with every vector negated.
    pub fn negated(&self) -> Self {
        Self { vectors: -&self.vectors, scale: self.scale }
    }
}

//! Critical values for the supremum of the studentized estimation process.
//!
//! The default pathway simulates the maximum of the normalized Gaussian
//! process `g(v)'Z / ||g(v)||` over the estimated set. Analytic
//! alternatives cover the exponential majorant for series estimators and
//! the Gumbel family for kernel estimators.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::argmin::ArgminSet;
use crate::data::{BoundCurve, InfluenceWeights, Smoothing};
use crate::error::{Error, Result};
use crate::kernel::QUARTIC_LAMBDA;
use crate::linalg;
use crate::rng;

/// Draws generated per random stream.
const BLOCK: usize = 512;

/// Relative eigenvalue cutoff when factoring the process covariance.
pub const RANK_TOL: f64 = 1e-10;

/// Minimum number of simulation draws.
pub const MIN_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CvMethod {
    Simulated,
    SeriesExponential,
    KernelGumbel,
    KernelGumbelApprox,
    KernelHardleLinton,
}

impl CvMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CvMethod::Simulated => "simulated",
            CvMethod::SeriesExponential => "series-exp",
            CvMethod::KernelGumbel => "gumbel",
            CvMethod::KernelGumbelApprox => "gumbel-approx",
            CvMethod::KernelHardleLinton => "hardle-linton",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulated" | "sim" => CvMethod::Simulated,
            "series-exp" | "exponential" => CvMethod::SeriesExponential,
            "gumbel" => CvMethod::KernelGumbel,
            "gumbel-approx" => CvMethod::KernelGumbelApprox,
            "hardle-linton" => CvMethod::KernelHardleLinton,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValue {
    pub p: f64,
    pub k: f64,
    pub method: CvMethod,
    pub a_n: Option<f64>,
    pub b_n: Option<f64>,
    pub draws: Option<usize>,
    pub seed: Option<u64>,
    /// Monte Carlo standard error of a simulated `k`.
    pub mc_se: Option<f64>,
}

impl CriticalValue {
    fn analytic(p: f64, k: f64, method: CvMethod, a_n: f64, b_n: f64) -> Self {
        Self { p, k, method, a_n: Some(a_n), b_n: Some(b_n), draws: None, seed: None, mc_se: None }
    }
}

fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(p))
    }
}

/// Index of the `p`-quantile under the `ceil(p R)` order-statistic rule.
fn order_index(p: f64, r: usize) -> usize {
    ((p * r as f64).ceil() as usize).clamp(1, r) - 1
}

/// Sorted simulated maxima of the normalized process over a set.
#[derive(Debug, Clone, PartialEq)]
pub struct SupDraws {
    sorted: Vec<f64>,
    pub seed: u64,
}

impl SupDraws {
    pub fn from_maxima(mut maxima: Vec<f64>, seed: u64) -> Self {
        maxima.sort_by(f64::total_cmp);
        Self { sorted: maxima, seed }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Order statistic at position `ceil(p R)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_level(p)?;
        Ok(self.sorted[order_index(p, self.sorted.len())])
    }

    /// Distribution-free standard error of the `p`-quantile: half the gap
    /// between the order statistics one binomial standard deviation away.
    pub fn mc_se(&self, p: f64) -> f64 {
        let r = self.sorted.len();
        let delta = (p * (1.0 - p) / r as f64).sqrt();
        let lo = self.sorted[order_index((p - delta).max(0.0), r)];
        let hi = self.sorted[order_index((p + delta).min(1.0), r)];
        0.5 * (hi - lo)
    }

    pub fn critical_value(&self, p: f64) -> Result<CriticalValue> {
        Ok(CriticalValue {
            p,
            k: self.quantile(p)?,
            method: CvMethod::Simulated,
            a_n: None,
            b_n: None,
            draws: Some(self.sorted.len()),
            seed: Some(self.seed),
            mc_se: Some(self.mc_se(p)),
        })
    }
}

/// Simulates `draws` maxima of `g(v)'Z / ||g(v)||` over the set members.
///
/// The normalized weights over the whole grid are replaced by a factor
/// with the same Gram matrix, so the simulated process has exactly the
/// same law while the Gaussian dimension drops to the process rank. Since
/// the factor depends only on that Gram matrix, `g` and `-g` give identical
/// draws, and enlarging the set can only raise each simulated maximum.
pub fn simulate_sup_draws(weights: &InfluenceWeights, set: &ArgminSet, draws: usize, seed: u64) -> Result<SupDraws> {
    if draws < MIN_DRAWS {
        return Err(Error::InvalidInput(format!("at least {MIN_DRAWS} draws are required, got {draws}")));
    }
    if set.is_empty() {
        return Err(Error::InvalidInput("empty set".into()));
    }
    for &i in &set.indices {
        if i >= weights.len() {
            return Err(Error::InvalidInput(format!("set index {i} outside the grid")));
        }
        if !(weights.norm(i) > 0.0) {
            return Err(Error::ZeroNorm { index: i });
        }
    }
    let normalized = linalg::normalize_rows(&weights.vectors);
    let factor = linalg::gram_factor(&normalized, RANK_TOL);
    let rows = factor.select_rows(set.indices.iter());
    let maxima = simulate_maxima(&rows, draws, seed);
    Ok(SupDraws::from_maxima(maxima, seed))
}

fn simulate_maxima(rows: &DMatrix<f64>, draws: usize, seed: u64) -> Vec<f64> {
    let dim = rows.ncols();
    let blocks = draws.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let len = BLOCK.min(draws - b * BLOCK);
            let mut rng = rng::stream_rng(seed, b as u64);
            let z = DMatrix::from_fn(dim, len, |_, _| rng.sample::<f64, _>(StandardNormal));
            let values = rows * z;
            (0..len)
                .map(|c| values.column(c).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Simulated critical value at level `p`.
pub fn simulate_k(weights: &InfluenceWeights, set: &ArgminSet, p: f64, draws: usize, seed: u64) -> Result<CriticalValue> {
    check_level(p)?;
    simulate_sup_draws(weights, set, draws, seed)?.critical_value(p)
}

/// Quantile estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupQuantile {
    pub value: f64,
    pub mc_se: f64,
}

/// Reference quantile of `max_j X_j` for `X ~ N(0, corr(cov))`, sampled
/// directly through a Cholesky factor of the correlation matrix.
pub fn bruteforce_sup_quantile(cov: &DMatrix<f64>, p: f64, draws: usize, seed: u64) -> Result<SupQuantile> {
    check_level(p)?;
    let m = cov.nrows();
    if m == 0 || m > 50 || cov.ncols() != m {
        return Err(Error::InvalidInput(format!("covariance must be square with 1..=50 rows, got {m}")));
    }
    let d: Vec<f64> = (0..m).map(|i| cov[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput("covariance has a nonpositive variance".into()));
    }
    let corr = DMatrix::from_fn(m, m, |i, j| cov[(i, j)] / (d[i] * d[j]).sqrt());
    let corr = (&corr + corr.transpose()) * 0.5;
    let min_eig = SymmetricEigen::new(corr.clone()).eigenvalues.min();
    if min_eig < -1e-8 * m as f64 {
        return Err(Error::NotPsd { min_eigenvalue: min_eig });
    }
    let mut jitter = 0.0;
    let chol = loop {
        let mut c = corr.clone();
        for i in 0..m {
            c[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(c) {
            break ch;
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
        if jitter > 1e-6 {
            return Err(Error::NotPsd { min_eigenvalue: min_eig });
        }
    };
    let l = chol.l();
    let mut rng = rng::stream_rng(seed, u64::MAX);
    let mut z = vec![0.0; m];
    let maxima = (0..draws)
        .map(|_| {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            (0..m)
                .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let sup = SupDraws::from_maxima(maxima, seed);
    Ok(SupQuantile { value: sup.quantile(p)?, mc_se: sup.mc_se(p) })
}

/// Quantile `-log(1 - p)` of the standard exponential.
pub fn exponential_quantile(p: f64) -> f64 {
    -(1.0 - p).ln()
}

/// Quantile `-log(log(1/p))` of the type I extreme-value distribution.
pub fn gumbel_quantile(p: f64) -> f64 {
    -(-p.ln()).ln()
}

/// Exponential-majorant normalizing constant `sqrt(2 log(kappa / 2 pi))`
/// where `kappa` integrates `||d alpha / dv||` over the set, with
/// `alpha(v) = g(v) / ||g(v)||` differentiated on the grid.
pub fn series_exponential_a_n(weights: &InfluenceWeights, set: &ArgminSet, curve: &BoundCurve) -> Result<f64> {
    let grid = &curve.grid;
    if grid.dim() != 1 {
        return Err(Error::AnalyticUndefined("the exponential bound needs a scalar covariate".into()));
    }
    if set.len() < 2 {
        return Err(Error::AnalyticUndefined("set has a single grid point".into()));
    }
    let step = grid.cell_measure();
    let alpha = linalg::normalize_rows(&weights.vectors);
    let last = alpha.nrows() - 1;
    let gradient_norm = |i: usize| -> f64 {
        let (a, b) = match i {
            0 => (0, 1),
            i if i == last => (last - 1, last),
            i => (i - 1, i + 1),
        };
        (alpha.row(b) - alpha.row(a)).norm() / (step * (b - a) as f64)
    };
    let norms: Vec<f64> = set.indices.iter().map(|&i| gradient_norm(i)).collect();
    let kappa: f64 = set
        .indices
        .windows(2)
        .zip(norms.windows(2))
        .filter(|(idx, _)| idx[1] == idx[0] + 1)
        .map(|(_, g)| 0.5 * step * (g[0] + g[1]))
        .sum();
    let ratio = kappa / (2.0 * std::f64::consts::PI);
    if !(ratio > 1.0) {
        return Err(Error::AnalyticUndefined(format!("kappa / 2pi = {ratio:.4} does not exceed 1")));
    }
    Ok((2.0 * ratio.ln()).sqrt())
}

/// `k = a_n + c(p) / a_n` with the exponential quantile `c(p)`.
pub fn series_exponential_k(a_n: f64, p: f64) -> Result<CriticalValue> {
    check_level(p)?;
    if !(a_n > 0.0) {
        return Err(Error::AnalyticUndefined(format!("a_n = {a_n}")));
    }
    let k = a_n + exponential_quantile(p) / a_n;
    Ok(CriticalValue::analytic(p, k, CvMethod::SeriesExponential, a_n, a_n))
}

/// Analytic series critical value over the set.
pub fn analytic_series_k(weights: &InfluenceWeights, set: &ArgminSet, curve: &BoundCurve, p: f64) -> Result<CriticalValue> {
    series_exponential_k(series_exponential_a_n(weights, set, curve)?, p)
}

/// Largest root `a` of
/// `mes h^{-d} lambda^{d/2} (2 pi)^{-(d+1)/2} a^{d-1} exp(-a^2 / 2) = 1`.
pub fn kernel_a_n(measure: f64, h: f64, d: usize, lambda: f64) -> Result<f64> {
    if !(measure > 0.0 && h > 0.0 && lambda > 0.0) || d == 0 {
        return Err(Error::AnalyticUndefined(format!("measure {measure}, h {h}, d {d}")));
    }
    let df = d as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let log_const = measure.ln() - df * h.ln() + 0.5 * df * lambda.ln() - 0.5 * (df + 1.0) * two_pi.ln();
    if d == 1 {
        let a2 = 2.0 * log_const;
        if !(a2 > 0.0) {
            return Err(Error::AnalyticUndefined(format!("log argument {a2:.4} is not positive")));
        }
        return Ok(a2.sqrt());
    }
    let f = |a: f64| log_const + (df - 1.0) * a.ln() - 0.5 * a * a;
    let mut lo = (df - 1.0).sqrt().max(1.0);
    let mut hi = 100.0;
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(Error::AnalyticUndefined("no root of the level equation in [1, 100]".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `k = a_n + c(p) / a_n` with the Gumbel quantile `c(p)`.
pub fn gumbel_k(a_n: f64, p: f64) -> Result<CriticalValue> {
    check_level(p)?;
    if !(a_n > 0.0) {
        return Err(Error::AnalyticUndefined(format!("a_n = {a_n}")));
    }
    Ok(CriticalValue::analytic(p, a_n + gumbel_quantile(p) / a_n, CvMethod::KernelGumbel, a_n, a_n))
}

/// `k = sqrt(a_n^2 - 2 log log (1/p))`, falling back to the Gumbel form
/// when the radicand is negative.
pub fn gumbel_approx_k(a_n: f64, p: f64) -> Result<CriticalValue> {
    check_level(p)?;
    let radicand = a_n * a_n + 2.0 * gumbel_quantile(p);
    if !(a_n > 0.0) || radicand < 0.0 {
        log::warn!("penultimate Gumbel approximation undefined at a_n = {a_n}, p = {p}; using Gumbel");
        return gumbel_k(a_n, p);
    }
    Ok(CriticalValue::analytic(p, radicand.sqrt(), CvMethod::KernelGumbelApprox, a_n, a_n))
}

/// One-sided Hardle-Linton form with `a_n = sqrt(2 log(mes / h))` and
/// `b_n = a_n + log sqrt((lambda / 2 pi) / a_n)`.
pub fn hardle_linton_k(measure: f64, h: f64, lambda: f64, p: f64) -> Result<CriticalValue> {
    check_level(p)?;
    let ratio = measure / h;
    if !(ratio > 1.0) || !(lambda > 0.0) {
        return Err(Error::AnalyticUndefined(format!("mes / h = {ratio:.4} does not exceed 1")));
    }
    let a_n = (2.0 * ratio.ln()).sqrt();
    let b_n = a_n + ((lambda / (2.0 * std::f64::consts::PI)) / a_n).sqrt().ln();
    let k = b_n + gumbel_quantile(p) / a_n;
    Ok(CriticalValue::analytic(p, k, CvMethod::KernelHardleLinton, a_n, b_n))
}

/// Variant of the kernel analytic critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    Gumbel,
    GumbelApprox,
    HardleLinton,
}

/// Kernel critical value for a set of the given measure.
pub fn analytic_kernel_k(measure: f64, h: f64, d: usize, p: f64, variant: KernelVariant) -> Result<CriticalValue> {
    match variant {
        KernelVariant::Gumbel => gumbel_k(kernel_a_n(measure, h, d, QUARTIC_LAMBDA)?, p),
        KernelVariant::GumbelApprox => gumbel_approx_k(kernel_a_n(measure, h, d, QUARTIC_LAMBDA)?, p),
        KernelVariant::HardleLinton => {
            if d != 1 {
                return Err(Error::AnalyticUndefined("the Hardle-Linton form needs d = 1".into()));
            }
            hardle_linton_k(measure, h, QUARTIC_LAMBDA, p)
        }
    }
}

/// Produces critical values at any level from one simulation or one set of
/// analytic constants.
#[derive(Debug, Clone, PartialEq)]
pub enum CriticalValueSource {
    Simulated(SupDraws),
    SeriesExponential { a_n: f64 },
    Kernel { variant: KernelVariant, measure: f64, h: f64, d: usize },
}

impl CriticalValueSource {
    /// Builds the source for `method`, falling back to simulation (with a
    /// warning) when an analytic constant is undefined.
    pub fn build(
        method: CvMethod,
        curve: &BoundCurve,
        weights: &InfluenceWeights,
        set: &ArgminSet,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        let analytic = match method {
            CvMethod::Simulated => None,
            CvMethod::SeriesExponential => {
                Some(series_exponential_a_n(weights, set, curve).map(|a_n| Self::SeriesExponential { a_n }))
            }
            CvMethod::KernelGumbel | CvMethod::KernelGumbelApprox | CvMethod::KernelHardleLinton => {
                let variant = match method {
                    CvMethod::KernelGumbel => KernelVariant::Gumbel,
                    CvMethod::KernelGumbelApprox => KernelVariant::GumbelApprox,
                    _ => KernelVariant::HardleLinton,
                };
                let Smoothing::Bandwidth(h) = curve.smoothing else {
                    return Err(Error::InvalidInput(format!(
                        "{} critical values need a kernel estimator",
                        method.as_str()
                    )));
                };
                let source = Self::Kernel { variant, measure: set.measure(curve), h, d: curve.grid.dim() };
                Some(source.k(0.5).map(|_| source))
            }
        };
        match analytic {
            Some(Ok(source)) => Ok(source),
            Some(Err(Error::AnalyticUndefined(why))) => {
                log::warn!("{} critical value undefined ({why}); simulating instead", method.as_str());
                Ok(Self::Simulated(simulate_sup_draws(weights, set, draws, seed)?))
            }
            Some(Err(e)) => Err(e),
            None => Ok(Self::Simulated(simulate_sup_draws(weights, set, draws, seed)?)),
        }
    }

    pub fn k(&self, p: f64) -> Result<CriticalValue> {
        match self {
            Self::Simulated(draws) => draws.critical_value(p),
            Self::SeriesExponential { a_n } => series_exponential_k(*a_n, p),
            Self::Kernel { variant, measure, h, d } => analytic_kernel_k(*measure, *h, *d, p, *variant),
        }
    }

    pub fn method(&self) -> CvMethod {
        match self {
            Self::Simulated(_) => CvMethod::Simulated,
            Self::SeriesExponential { .. } => CvMethod::SeriesExponential,
            Self::Kernel { variant: KernelVariant::Gumbel, .. } => CvMethod::KernelGumbel,
            Self::Kernel { variant: KernelVariant::GumbelApprox, .. } => CvMethod::KernelGumbelApprox,
            Self::Kernel { variant: KernelVariant::HardleLinton, .. } => CvMethod::KernelHardleLinton,
        }
    }
}

//! Local-linear estimation with the quartic (biweight) kernel.
//!
//! Includes the undersmoothed rule-of-thumb bandwidth, kernel density and
//! conditional-variance estimates sharing that bandwidth, and the kernel
//! influence weights used to simulate critical values.

use nalgebra::{DMatrix, DVector};

use crate::data::{BoundCurve, EstimatorKind, EvaluationGrid, InfluenceWeights, Sample, Side, Smoothing};
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

/// `\int K(u)^2 du` for the quartic kernel.
pub const QUARTIC_L2: f64 = 5.0 / 7.0;

/// `-\int K K'' / \int K^2` for the quartic kernel.
pub const QUARTIC_LAMBDA: f64 = 3.0;

/// Floor applied to density and conditional-variance estimates.
pub const FLOOR: f64 = 1e-10;

/// Rule-of-thumb constant for local-linear fits with the quartic kernel.
const ROT_CONSTANT: f64 = 2.036;

/// Quartic kernel `(15/16) (1 - s^2)^2` on `[-1, 1]`.
#[inline]
pub fn quartic(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s * s;
        0.9375 * t * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotBandwidth {
    /// Undersmoothed bandwidth on the original covariate scale.
    pub h: f64,
    /// Rule-of-thumb bandwidth for the studentized covariate.
    pub h_rot: f64,
    /// Sample standard deviation of the covariate.
    pub s_v: f64,
    /// Mean squared residual of the global quartic fit.
    pub sigma2: f64,
    /// Weighted mean squared second derivative of the quartic fit.
    pub curvature: f64,
    /// True when the rule broke down and `s_v * n^{-2/7}` was used instead.
    pub fallback: bool,
}

/// Integral of the trimming weight in the rule-of-thumb numerator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightNorm {
    /// Weight normalized to integrate to one.
    #[default]
    Unit,
    /// Indicator weight, integrating to the 10-90 quantile span of the
    /// studentized covariate.
    Span,
}

/// Rule-of-thumb bandwidth `h_rot * s_v * n^{1/5} * n^{-2/7}` with the
/// default weight normalization.
pub fn rot_bandwidth(sample: &Sample) -> Result<RotBandwidth> {
    rot_bandwidth_with(sample, WeightNorm::default())
}

/// Rule-of-thumb bandwidth `h_rot * s_v * n^{1/5} * n^{-2/7}`.
///
/// `h_rot` comes from a global quartic polynomial fit on the studentized
/// covariate, with the curvature averaged over observations between the
/// 10th and 90th sample quantiles. When either the residual variance or the
/// curvature vanishes the rule is undefined and `s_v * n^{-2/7}` is
/// returned with `fallback` set.
pub fn rot_bandwidth_with(sample: &Sample, norm: WeightNorm) -> Result<RotBandwidth> {
    let v = sample.v_scalar()?;
    let n = v.len();
    if n < 6 {
        return Err(Error::InvalidInput(format!("need at least 6 observations, got {n}")));
    }
    let nf = n as f64;
    let mean = stats::mean(v);
    let s_v = stats::sample_sd(v);
    if !(s_v > 0.0) {
        return Err(Error::DegenerateCovariate);
    }
    let vt: Vec<f64> = v.iter().map(|x| (x - mean) / s_v).collect();
    let x = DMatrix::from_fn(n, 5, |i, j| vt[i].powi(j as i32));
    let y = DVector::from_column_slice(sample.y());
    let (b, _) = linalg::ols(&x, &y).ok_or(Error::RankDeficient { k: 5 })?;
    let resid = &y - &x * &b;
    let sigma2 = resid.norm_squared() / nf;

    let mut sorted = vt.clone();
    sorted.sort_by(f64::total_cmp);
    let q10 = stats::quantile_sorted(&sorted, 0.1);
    let q90 = stats::quantile_sorted(&sorted, 0.9);
    let curvature = vt
        .iter()
        .filter(|&&t| t >= q10 && t <= q90)
        .map(|&t| (2.0 * b[2] + 6.0 * b[3] * t + 12.0 * b[4] * t * t).powi(2))
        .sum::<f64>()
        / nf;

    let y_scale = {
        let m = stats::mean(sample.y());
        sample.y().iter().map(|y| (y - m).powi(2)).sum::<f64>() / nf
    };
    let undersmooth = nf.powf(0.2) * nf.powf(-2.0 / 7.0);
    if !(sigma2 > 1e-12 * y_scale.max(f64::MIN_POSITIVE)) || !(curvature > 0.0) {
        log::warn!(
            "rule-of-thumb bandwidth undefined (residual variance {sigma2:e}, curvature {curvature:e}); \
             using s_v * n^(-2/7), consider setting h manually"
        );
        return Ok(RotBandwidth {
            h: s_v * nf.powf(-2.0 / 7.0),
            h_rot: 0.0,
            s_v,
            sigma2,
            curvature,
            fallback: true,
        });
    }
    let weight_integral = match norm {
        WeightNorm::Unit => 1.0,
        WeightNorm::Span => q90 - q10,
    };
    let h_rot = ROT_CONSTANT * (sigma2 * weight_integral / curvature).powf(0.2) * nf.powf(-0.2);
    Ok(RotBandwidth { h: h_rot * s_v * undersmooth, h_rot, s_v, sigma2, curvature, fallback: false })
}

/// Observations sorted by covariate for windowed kernel sums.
struct Sorted {
    v: Vec<f64>,
    y: Vec<f64>,
}

impl Sorted {
    fn new(v: &[f64], y: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        Self { v: idx.iter().map(|&i| v[i]).collect(), y: idx.iter().map(|&i| y[i]).collect() }
    }

    /// Index range of observations strictly within `h` of `x`.
    fn window(&self, x: f64, h: f64) -> std::ops::Range<usize> {
        let lo = self.v.partition_point(|&t| t <= x - h);
        let hi = self.v.partition_point(|&t| t < x + h);
        lo..hi.max(lo)
    }

    fn local_linear(&self, x: f64, h: f64) -> Result<f64> {
        let window = self.window(x, h);
        let mut distinct = 0;
        let mut last = f64::NAN;
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in window {
            let d = self.v[i] - x;
            let w = quartic(d / h);
            if w <= 0.0 {
                continue;
            }
            if self.v[i] != last {
                distinct += 1;
                last = self.v[i];
            }
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            t0 += w * self.y[i];
            t1 += w * d * self.y[i];
        }
        let det = s0 * s2 - s1 * s1;
        if distinct < 2 || !(det > 0.0) {
            return Err(Error::SparseNeighborhood { point: x, h });
        }
        Ok((s2 * t0 - s1 * t1) / det)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")))
    }
}

/// Local-linear estimate at each grid point: the intercept of a kernel-
/// weighted regression of `y` on `v_i - v`.
pub fn local_linear_fit(sample: &Sample, h: f64, grid: &EvaluationGrid) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let sorted = Sorted::new(sample.v_scalar()?, sample.y());
    grid.scalar_points()?.iter().map(|&x| sorted.local_linear(x, h)).collect()
}

/// Kernel density estimate `(n h)^{-1} sum K((x - v_i) / h)` at each point,
/// without flooring.
pub fn kde(v: &[f64], h: f64, points: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nh = v.len() as f64 * h;
    points
        .iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&t| t <= x - h);
            let hi = sorted.partition_point(|&t| t < x + h);
            sorted[lo..hi.max(lo)].iter().map(|&t| quartic((x - t) / h)).sum::<f64>() / nh
        })
        .collect()
}

/// Nadaraya-Watson regression of `values` on `v` at each point.
fn nadaraya_watson(sorted_v: &[f64], sorted_values: &[f64], h: f64, points: &[f64]) -> Vec<f64> {
    points
        .iter()
        .map(|&x| {
            let lo = sorted_v.partition_point(|&t| t <= x - h);
            let hi = sorted_v.partition_point(|&t| t < x + h);
            let (mut num, mut den) = (0.0, 0.0);
            for i in lo..hi.max(lo) {
                let w = quartic((x - sorted_v[i]) / h);
                num += w * sorted_values[i];
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect()
}

/// Fitted kernel estimator on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit {
    pub h: f64,
    pub theta_hat: Vec<f64>,
    /// Floored density estimate per grid point.
    pub f_hat: Vec<f64>,
    /// Floored conditional variance per grid point.
    pub sigma2_hat: Vec<f64>,
    /// Conditional variance at each observation, in sample order.
    pub sigma2_at_data: Vec<f64>,
    pub n: usize,
}

/// Density and conditional variance on the grid.
///
/// The variance is a Nadaraya-Watson regression of squared local-linear
/// residuals on the covariate; both are floored at `FLOOR`.
pub fn kde_and_condvar(sample: &Sample, h: f64, grid: &EvaluationGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let fit = fit_kernel(sample, h, grid)?;
    Ok((fit.f_hat, fit.sigma2_hat))
}

/// Runs every kernel estimate needed for inference with bandwidth `h`.
pub fn fit_kernel(sample: &Sample, h: f64, grid: &EvaluationGrid) -> Result<KernelFit> {
    check_bandwidth(h)?;
    let v = sample.v_scalar()?;
    let points = grid.scalar_points()?;
    let sorted = Sorted::new(v, sample.y());
    let theta_hat = points.iter().map(|&x| sorted.local_linear(x, h)).collect::<Result<Vec<_>>>()?;
    let sq_resid: Vec<f64> = sorted
        .v
        .iter()
        .zip(&sorted.y)
        .map(|(&x, &y)| sorted.local_linear(x, h).map(|fit| (y - fit).powi(2)))
        .collect::<Result<_>>()?;
    let f_hat = kde(v, h, points).into_iter().map(|f| f.max(FLOOR)).collect();
    let sigma2_hat = nadaraya_watson(&sorted.v, &sq_resid, h, points)
        .into_iter()
        .map(|s| s.max(FLOOR))
        .collect();
    let sigma2_at_data = nadaraya_watson(&sorted.v, &sq_resid, h, v)
        .into_iter()
        .map(|s| s.max(FLOOR))
        .collect();
    Ok(KernelFit { h, theta_hat, f_hat, sigma2_hat, sigma2_at_data, n: sample.n() })
}

/// Curve with `se(v) = sqrt(sigma2(v) \int K^2 / (n h f(v)))` and influence
/// weights `w_i(v) = sigma(v_i) K((v - v_i) / h) / (sqrt(n h) f(v))`.
pub fn kernel_curve(
    fit: &KernelFit,
    sample: &Sample,
    grid: &EvaluationGrid,
    side: Side,
) -> Result<(BoundCurve, InfluenceWeights)> {
    let v = sample.v_scalar()?;
    let points = grid.scalar_points()?;
    if fit.theta_hat.len() != points.len() || fit.sigma2_at_data.len() != v.len() {
        return Err(Error::InvalidInput("kernel fit does not match sample and grid".into()));
    }
    let nh = fit.n as f64 * fit.h;
    let root_nh = nh.sqrt();
    let se = fit
        .sigma2_hat
        .iter()
        .zip(&fit.f_hat)
        .map(|(&s2, &f)| (s2 * QUARTIC_L2 / (nh * f)).sqrt())
        .collect();
    let sigma_data: Vec<f64> = fit.sigma2_at_data.iter().map(|s| s.sqrt()).collect();
    let mut w = DMatrix::zeros(points.len(), v.len());
    for (g, &x) in points.iter().enumerate() {
        let denom = root_nh * fit.f_hat[g];
        for (i, &vi) in v.iter().enumerate() {
            let k = quartic((x - vi) / fit.h);
            if k > 0.0 {
                w[(g, i)] = sigma_data[i] * k / denom;
            }
        }
    }
    let curve = BoundCurve::new(
        grid.clone(),
        fit.theta_hat.clone(),
        se,
        side,
        fit.n,
        Smoothing::Bandwidth(fit.h),
        EstimatorKind::LocalLinear,
    )?;
    Ok((curve, InfluenceWeights::new(w, root_nh)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn quartic_constants_match_quadrature() {
        let l2 = simpson(|u| quartic(u).powi(2), -1.0, 1.0, 2000);
        assert!((l2 - QUARTIC_L2).abs() < 1e-8);
        // K''(u) = (15/16)(12 u^2 - 4) on (-1, 1).
        let kk2 = simpson(|u| quartic(u) * 0.9375 * (12.0 * u * u - 4.0), -1.0, 1.0, 2000);
        assert!((-kk2 / l2 - QUARTIC_LAMBDA).abs() < 1e-8);
        assert!((simpson(quartic, -1.0, 1.0, 2000) - 1.0).abs() < 1e-12);
    }

    fn uniform(n: usize, seed: u64, f: impl Fn(f64, &mut ChaCha8Rng) -> f64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y = v.iter().map(|&x| f(x, &mut rng)).collect();
        Sample::univariate(y, vec![0.0; n], v).unwrap()
    }

    #[test]
    fn local_linear_reproduces_lines() {
        let s = uniform(200, 1, |v, _| 1.5 - 2.0 * v);
        let grid = EvaluationGrid::uniform(0.05, 0.95, 37).unwrap();
        for h in [0.05, 0.2, 0.7] {
            let fit = local_linear_fit(&s, h, &grid).unwrap();
            for (t, &x) in fit.iter().zip(grid.scalar_points().unwrap()) {
                assert!((t - (1.5 - 2.0 * x)).abs() < 1e-10);
            }
        }
        let c = uniform(100, 2, |_, _| 0.25);
        let fit = local_linear_fit(&c, 0.1, &grid).unwrap();
        assert!(fit.iter().all(|t| (t - 0.25).abs() < 1e-12));
    }

    #[test]
    fn local_linear_matches_weighted_least_squares() {
        let v = [0.0, 0.3, 0.5, 0.8, 1.1];
        let y = [1.0, 2.0, 0.5, 3.0, 2.5];
        let s = Sample::univariate(y.to_vec(), vec![0.0; 5], v.to_vec()).unwrap();
        let (x0, h) = (0.5, 0.7);
        // Oracle: (X'WX)^{-1} X'Wy with X = [1, v - x0].
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { v[i] - x0 });
        let w = DMatrix::from_diagonal(&DVector::from_iterator(5, v.iter().map(|vi| quartic((vi - x0) / h))));
        let beta = (x.transpose() * &w * &x).try_inverse().unwrap() * x.transpose() * &w * DVector::from_row_slice(&y);
        let grid = EvaluationGrid::uniform(x0, x0 + 0.1, 2).unwrap();
        let fit = local_linear_fit(&s, h, &grid).unwrap();
        assert!((fit[0] - beta[0]).abs() < 1e-12);
    }

    #[test]
    fn sparse_neighborhood_rejected() {
        let s = uniform(50, 3, |_, _| 0.0);
        let grid = EvaluationGrid::uniform(2.0, 3.0, 3).unwrap();
        assert!(matches!(local_linear_fit(&s, 0.1, &grid), Err(Error::SparseNeighborhood { .. })));
    }

    #[test]
    fn density_near_one_for_uniform() {
        let s = uniform(20_000, 4, |_, _| 0.0);
        let f = kde(s.v_scalar().unwrap(), 0.1, &[0.3, 0.5, 0.7]);
        assert!(f.iter().all(|x| (x - 1.0).abs() < 0.05), "{f:?}");
    }

    #[test]
    fn density_of_point_mass() {
        let f = kde(&[0.4; 7], 0.25, &[0.4]);
        assert!((f[0] - 0.9375 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn noiseless_variance_is_floored() {
        let s = uniform(300, 5, |v, _| 2.0 * v + 1.0);
        let grid = EvaluationGrid::uniform(0.1, 0.9, 9).unwrap();
        let (f, s2) = kde_and_condvar(&s, 0.2, &grid).unwrap();
        assert!(f.iter().all(|&x| x > 0.5));
        assert!(s2.iter().all(|&x| (FLOOR..1e-9).contains(&x)));
    }

    /// Step-by-step evaluation of the rule of thumb with hand-rolled
    /// normal equations (Gaussian elimination).
    fn rot_oracle(v: &[f64], y: &[f64], span: bool) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
        let t: Vec<f64> = v.iter().map(|x| (x - m) / sd).collect();
        let mut a = [[0.0f64; 6]; 5];
        for (ti, yi) in t.iter().zip(y) {
            let row = [1.0, *ti, ti * ti, ti.powi(3), ti.powi(4)];
            for r in 0..5 {
                for c in 0..5 {
                    a[r][c] += row[r] * row[c];
                }
                a[r][5] += row[r] * yi;
            }
        }
        for col in 0..5 {
            let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..5 {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..6 {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let b: Vec<f64> = (0..5).map(|i| a[i][5] / a[i][i]).collect();
        let fitted = |x: f64| b[0] + b[1] * x + b[2] * x * x + b[3] * x.powi(3) + b[4] * x.powi(4);
        let s2 = t.iter().zip(y).map(|(x, yi)| (yi - fitted(*x)).powi(2)).sum::<f64>() / n;
        let mut st = t.clone();
        st.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (n - 1.0);
            let lo = pos.floor() as usize;
            st[lo] + (pos - lo as f64) * (st[lo + 1] - st[lo])
        };
        let (q10, q90) = (q(0.1), q(0.9));
        let curv = t
            .iter()
            .filter(|&&x| x >= q10 && x <= q90)
            .map(|x| (2.0 * b[2] + 6.0 * b[3] * x + 12.0 * b[4] * x * x).powi(2))
            .sum::<f64>()
            / n;
        let w = if span { q90 - q10 } else { 1.0 };
        let h_rot = 2.036 * (s2 * w / curv).powf(0.2) * n.powf(-0.2);
        h_rot * sd * n.powf(0.2) * n.powf(-2.0 / 7.0)
    }

    #[test]
    fn rot_matches_oracle() {
        let s = uniform(500, 6, |v, r| 3.0 * v * v - v.powi(4) + r.random_range(-0.5..0.5));
        let rot = rot_bandwidth(&s).unwrap();
        let oracle = rot_oracle(s.v_scalar().unwrap(), s.y(), false);
        assert!(!rot.fallback);
        assert!((rot.h - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", rot.h);
        let span = rot_bandwidth_with(&s, WeightNorm::Span).unwrap();
        let oracle = rot_oracle(s.v_scalar().unwrap(), s.y(), true);
        assert!((span.h - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", span.h);
    }

    #[test]
    fn rot_falls_back_on_noiseless_quadratic() {
        let s = uniform(200, 7, |_, _| 0.0);
        let v = s.v_scalar().unwrap();
        let m = stats::mean(v);
        let sd = stats::sample_sd(v);
        let s = s.with_y(v.iter().map(|x| ((x - m) / sd).powi(2)).collect()).unwrap();
        let rot = rot_bandwidth(&s).unwrap();
        assert!(rot.fallback);
        assert!((rot.h - sd * 200f64.powf(-2.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_gives_zero_se_and_weights() {
        let s = uniform(100, 8, |v, _| v);
        let grid = EvaluationGrid::uniform(0.2, 0.8, 5).unwrap();
        let mut fit = fit_kernel(&s, 0.2, &grid).unwrap();
        fit.sigma2_hat = vec![0.0; 5];
        fit.sigma2_at_data = vec![0.0; 100];
        let (curve, w) = kernel_curve(&fit, &s, &grid, Side::Upper).unwrap();
        assert!(curve.se.iter().all(|&x| x == 0.0));
        assert_eq!(w.vectors.amax(), 0.0);
    }

    #[test]
    fn se_close_to_weight_norm() {
        let s = uniform(2000, 9, |v, r| v + (0.5 + v) * r.random_range(-1.0..1.0));
        let grid = EvaluationGrid::uniform(0.2, 0.8, 13).unwrap();
        let fit = fit_kernel(&s, 0.1, &grid).unwrap();
        let (curve, w) = kernel_curve(&fit, &s, &grid, Side::Upper).unwrap();
        for (r, se) in w.norm_consistency(&curve.se).iter().zip(&curve.se) {
            assert!((r - 1.0).abs() < 0.15, "ratio {r} at se {se}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let s = uniform(2000, 10, |v, r| v + r.random_range(-1.0..1.0));
        let h = rot_bandwidth(&s).unwrap().h;
        let pts: Vec<f64> = (0..=2000).map(|i| -1.0 + 3.0 * i as f64 / 2000.0).collect();
        let f = kde(s.v_scalar().unwrap(), h, &pts);
        let step = 3.0 / 2000.0;
        let total = f.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum::<f64>();
        assert!((total - 1.0).abs() < 0.02, "{total}");
    }

    #[test]
    fn scale_equivariance_and_permutation_invariance() {
        let s = uniform(400, 11, |v, r| v.sin() + r.random_range(-0.3..0.3));
        let grid = EvaluationGrid::uniform(0.15, 0.85, 11).unwrap();
        let base = kernel_curve(&fit_kernel(&s, 0.15, &grid).unwrap(), &s, &grid, Side::Upper).unwrap().0;
        let a = -3.0;
        let scaled = s.map_y(|y| a * y).unwrap();
        let c = kernel_curve(&fit_kernel(&scaled, 0.15, &grid).unwrap(), &scaled, &grid, Side::Upper).unwrap().0;
        for i in 0..grid.len() {
            assert!((c.theta_hat[i] - a * base.theta_hat[i]).abs() < 1e-10);
            assert!((c.se[i] - a.abs() * base.se[i]).abs() < 1e-10 * base.se[i]);
        }
        let rows: Vec<usize> = (0..400).rev().collect();
        let perm = s.select(&rows).unwrap();
        let p = kernel_curve(&fit_kernel(&perm, 0.15, &grid).unwrap(), &perm, &grid, Side::Upper).unwrap().0;
        for i in 0..grid.len() {
            assert!((p.se[i] - base.se[i]).abs() < 1e-12 * base.se[i]);
        }
    }
}

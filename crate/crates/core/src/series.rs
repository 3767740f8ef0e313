//! Regression-spline (series) estimation of a bound-generating function.
//!
//! The estimator regresses the outcome on a B-spline basis with interior
//! knots at equally spaced sample quantiles of the covariate. The number of
//! terms comes from leave-one-out cross-validation, inflated by
//! `n^{-1/5} n^{2/7}` so that the approximation bias is dominated by the
//! sampling error. Standard errors use an Eicker-White sandwich.

use nalgebra::{DMatrix, DVector};

use crate::data::{BoundCurve, EstimatorKind, EvaluationGrid, InfluenceWeights, Sample, Side, Smoothing};
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

/// Default cross-validation candidates for the number of terms.
pub const DEFAULT_CV_CANDIDATES: [usize; 5] = [5, 6, 7, 8, 9];

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasisSpec {
    pub degree: usize,
    pub interior_knots: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl SplineBasisSpec {
    pub fn new(degree: usize, interior_knots: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("boundary knots out of order: [{lo}, {hi}]")));
        }
        let mut prev = lo;
        for &k in &interior_knots {
            if !(k > prev) {
                return Err(Error::InvalidInput(format!(
                    "interior knots must increase strictly inside ({lo}, {hi})"
                )));
            }
            prev = k;
        }
        if !(prev < hi) {
            return Err(Error::InvalidInput(format!(
                "interior knots must increase strictly inside ({lo}, {hi})"
            )));
        }
        Ok(Self { degree, interior_knots, lo, hi })
    }

    /// Basis with `k` functions whose interior knots sit at equally spaced
    /// sample quantiles of `v`. Cubic when `k >= 4`, otherwise degree `k - 1`.
    pub fn at_quantiles(v: &[f64], k: usize, lo: f64, hi: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("at least one basis function is required".into()));
        }
        let degree = 3.min(k - 1);
        let m = k - degree - 1;
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let knots = (1..=m)
            .map(|j| stats::quantile_sorted(&sorted, j as f64 / (m + 1) as f64))
            .collect();
        Self::new(degree, knots, lo, hi)
    }

    /// Number of basis functions.
    pub fn k(&self) -> usize {
        self.interior_knots.len() + self.degree + 1
    }

    fn knot_vector(&self) -> Vec<f64> {
        let p = self.degree;
        let mut u = vec![self.lo; p + 1];
        u.extend(&self.interior_knots);
        u.extend(std::iter::repeat_n(self.hi, p + 1));
        u
    }
}

/// Evaluates all `K` basis functions at `v`.
pub fn bspline_basis(v: f64, spec: &SplineBasisSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.k()];
    let knots = spec.knot_vector();
    let (span, values) = nonzero_basis(v, spec, &knots)?;
    let p = spec.degree;
    out[span - p..=span].copy_from_slice(&values);
    Ok(out)
}

/// Knot span index and the `degree + 1` nonzero basis values at `v`.
fn nonzero_basis(v: f64, spec: &SplineBasisSpec, knots: &[f64]) -> Result<(usize, Vec<f64>)> {
    let tol = 1e-12 * (spec.hi - spec.lo);
    if !(v >= spec.lo - tol && v <= spec.hi + tol) {
        return Err(Error::OutsideBoundary { value: v, lo: spec.lo, hi: spec.hi });
    }
    let v = v.clamp(spec.lo, spec.hi);
    let p = spec.degree;
    let k = spec.k();
    let span = if v >= spec.hi {
        k - 1
    } else {
        // Largest i in [p, k-1] with knots[i] <= v.
        p + knots[p..k].partition_point(|&t| t <= v) - 1
    };
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = v - knots[span + 1 - j];
        right[j] = knots[span + j] - v;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    Ok((span, n))
}

/// `len(v) x K` design matrix.
pub fn design_matrix(v: &[f64], spec: &SplineBasisSpec) -> Result<DMatrix<f64>> {
    let knots = spec.knot_vector();
    let p = spec.degree;
    let mut x = DMatrix::zeros(v.len(), spec.k());
    for (i, &vi) in v.iter().enumerate() {
        let (span, values) = nonzero_basis(vi, spec, &knots)?;
        for (offset, val) in values.into_iter().enumerate() {
            x[(i, span - p + offset)] = val;
        }
    }
    Ok(x)
}

/// Which residual weighting enters the sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HcVariant {
    /// Raw squared residuals.
    #[default]
    Hc0,
    /// Squared residuals scaled by `n / (n - K)`.
    Hc1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub basis: SplineBasisSpec,
    pub beta_hat: DVector<f64>,
    /// Asymptotic covariance of `sqrt(n) (beta_hat - beta)`.
    pub omega_hat: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub n: usize,
}

fn boundary(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Least-squares spline fit with `k` terms and a heteroscedasticity-robust
/// covariance. Boundary knots are the sample range of `v`.
pub fn fit_series(sample: &Sample, k: usize) -> Result<SeriesFit> {
    fit_series_with(sample, k, HcVariant::Hc0)
}

pub fn fit_series_with(sample: &Sample, k: usize, hc: HcVariant) -> Result<SeriesFit> {
    let v = sample.v_scalar()?;
    let (lo, hi) = boundary(v);
    if !(lo < hi) {
        return Err(Error::DegenerateCovariate);
    }
    let basis = SplineBasisSpec::at_quantiles(v, k, lo, hi).map_err(|_| Error::RankDeficient { k })?;
    fit_series_on_basis(sample, basis, hc)
}

pub fn fit_series_on_basis(sample: &Sample, basis: SplineBasisSpec, hc: HcVariant) -> Result<SeriesFit> {
    let v = sample.v_scalar()?;
    let k = basis.k();
    let x = design_matrix(v, &basis)?;
    let y = DVector::from_column_slice(sample.y());
    let (beta_hat, bread) = linalg::ols(&x, &y).ok_or(Error::RankDeficient { k })?;
    let residuals = &y - &x * &beta_hat;
    let n = sample.n();
    let factor = match hc {
        HcVariant::Hc0 => 1.0,
        HcVariant::Hc1 if n > k => n as f64 / (n - k) as f64,
        HcVariant::Hc1 => return Err(Error::RankDeficient { k }),
    };
    let mut scaled = x.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= residuals[i].abs() * factor.sqrt();
    }
    let meat = scaled.tr_mul(&scaled);
    let mut omega_hat = &bread * meat * &bread * n as f64;
    omega_hat = (&omega_hat + omega_hat.transpose()) * 0.5;
    Ok(SeriesFit { basis, beta_hat, omega_hat, residuals, n })
}

/// Leave-one-out cross-validation score (mean squared deleted residual),
/// or `None` when the fit is rank deficient or has a leverage of one.
pub fn loo_cv_score(sample: &Sample, k: usize) -> Result<Option<f64>> {
    let v = sample.v_scalar()?;
    let (lo, hi) = boundary(v);
    let Ok(basis) = SplineBasisSpec::at_quantiles(v, k, lo, hi) else {
        return Ok(None);
    };
    let x = design_matrix(v, &basis)?;
    let y = DVector::from_column_slice(sample.y());
    let Some((beta, bread)) = linalg::ols(&x, &y) else {
        return Ok(None);
    };
    let resid = &y - &x * &beta;
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let row = x.row(i);
        let leverage = (row * &bread).dot(&row);
        if !(leverage < 1.0 - 1e-10) {
            return Ok(None);
        }
        total += (resid[i] / (1.0 - leverage)).powi(2);
    }
    let score = total / x.nrows() as f64;
    Ok(score.is_finite().then_some(score))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    /// Cross-validated number of terms.
    pub k_cv: usize,
    /// Undersmoothed number of terms actually used.
    pub k: usize,
    /// `(candidate, score)` for every admissible candidate.
    pub scores: Vec<(usize, f64)>,
}

/// Undersmoothing rule: `floor(k_cv * n^{-1/5} * n^{2/7})`.
pub fn undersmoothed_terms(k_cv: usize, n: usize) -> usize {
    let n = n as f64;
    (k_cv as f64 * n.powf(-0.2) * n.powf(2.0 / 7.0)).floor() as usize
}

/// Picks the number of series terms: cross-validate over `candidates`
/// (ties toward fewer terms), then undersmooth.
pub fn select_k(sample: &Sample, candidates: &[usize]) -> Result<KSelection> {
    let max = candidates.iter().copied().max().ok_or(Error::NoValidCandidate)?;
    if sample.n() <= max {
        return Err(Error::InvalidInput(format!(
            "need more than {max} observations to cross-validate, got {}",
            sample.n()
        )));
    }
    let mut scores = Vec::new();
    for &k in candidates {
        if let Some(score) = loo_cv_score(sample, k)? {
            scores.push((k, score));
        }
    }
    let (k_cv, _) = scores
        .iter()
        .copied()
        .reduce(|best, cur| if cur.1 < best.1 || (cur.1 == best.1 && cur.0 < best.0) { cur } else { best })
        .ok_or(Error::NoValidCandidate)?;
    Ok(KSelection { k_cv, k: undersmoothed_terms(k_cv, sample.n()), scores })
}

/// Evaluates the fit on `grid`: `theta(v) = p(v)' beta`,
/// `g(v) = p(v)' Omega^{1/2}` and `se(v) = ||g(v)|| / sqrt(n)`.
pub fn series_curve(fit: &SeriesFit, grid: &EvaluationGrid, side: Side) -> Result<(BoundCurve, InfluenceWeights)> {
    let points = grid.scalar_points()?;
    let p = design_matrix(points, &fit.basis)?;
    let root = linalg::psd_sqrt(&fit.omega_hat)?;
    let theta = &p * &fit.beta_hat;
    let g = &p * root;
    let scale = (fit.n as f64).sqrt();
    let se = g.row_iter().map(|r| r.norm() / scale).collect();
    let curve = BoundCurve::new(
        grid.clone(),
        theta.iter().copied().collect(),
        se,
        side,
        fit.n,
        Smoothing::Terms(fit.basis.k()),
        EstimatorKind::Series,
    )?;
    Ok((curve, InfluenceWeights::new(g, scale)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook recursive Cox-de Boor definition, independent of the
    /// production triangular scheme.
    fn cox_de_boor(i: usize, p: usize, v: f64, knots: &[f64], last: bool) -> f64 {
        if p == 0 {
            let inside = knots[i] <= v && v < knots[i + 1];
            // Close the final nonempty interval on the right.
            let closing = last && v == knots[i + 1] && knots[i] < knots[i + 1] && knots[i + 1] == *knots.last().unwrap();
            return if inside || closing { 1.0 } else { 0.0 };
        }
        let mut out = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            out += (v - knots[i]) / d1 * cox_de_boor(i, p - 1, v, knots, last);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            out += (knots[i + p + 1] - v) / d2 * cox_de_boor(i + 1, p - 1, v, knots, last);
        }
        out
    }

    fn cubic_spec() -> SplineBasisSpec {
        SplineBasisSpec::new(3, vec![-1.0, 0.2, 0.9], -2.0, 2.0).unwrap()
    }

    #[test]
    fn degree_zero_single_interval() {
        let spec = SplineBasisSpec::new(0, vec![], 0.0, 1.0).unwrap();
        assert_eq!(bspline_basis(0.37, &spec).unwrap(), vec![1.0]);
    }

    #[test]
    fn cubic_matches_recursive_oracle() {
        let spec = cubic_spec();
        let knots = spec.knot_vector();
        for &v in &[-2.0, -1.7, -1.0, -0.3, 0.2, 0.55, 1.3, 1.999, 2.0] {
            let basis = bspline_basis(v, &spec).unwrap();
            for (j, b) in basis.iter().enumerate() {
                let oracle = cox_de_boor(j, 3, v, &knots, v == spec.hi);
                assert!((b - oracle).abs() < 1e-13, "v={v} j={j}: {b} vs {oracle}");
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let spec = cubic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let v = rng.random_range(-2.0..2.0);
            let b = bspline_basis(v, &spec).unwrap();
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(b.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn outside_boundary_rejected() {
        assert!(matches!(bspline_basis(2.5, &cubic_spec()), Err(Error::OutsideBoundary { .. })));
    }

    #[test]
    fn undersmoothing_rule_values() {
        assert_eq!(undersmoothed_terms(9, 500), 15);
        assert_eq!(undersmoothed_terms(5, 100), 7);
        assert_eq!(undersmoothed_terms(5, 2), 5);
    }

    fn uniform_sample(n: usize, seed: u64, f: impl Fn(f64, &mut ChaCha8Rng) -> f64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = v.iter().map(|&x| f(x, &mut rng)).collect();
        Sample::univariate(y, vec![0.0; n], v).unwrap()
    }

    #[test]
    fn exact_spline_data_has_zero_residuals() {
        let s = uniform_sample(200, 3, |_, _| 0.0);
        let v = s.v_scalar().unwrap().to_vec();
        let (lo, hi) = boundary(&v);
        let spec = SplineBasisSpec::at_quantiles(&v, 7, lo, hi).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5, -1.0]);
        let y = design_matrix(&v, &spec).unwrap() * &b;
        let s = s.with_y(y.iter().copied().collect()).unwrap();
        let fit = fit_series(&s, 7).unwrap();
        assert!((&fit.beta_hat - &b).amax() < 1e-9);
        assert!(fit.residuals.amax() < 1e-9);
        assert!(fit.omega_hat.amax() < 1e-12);
    }

    #[test]
    fn constant_basis_is_mean() {
        let s = uniform_sample(50, 4, |_, r| r.random_range(0.0..1.0));
        let fit = fit_series(&s, 1).unwrap();
        assert!((fit.beta_hat[0] - crate::stats::mean(s.y())).abs() < 1e-12);
    }

    #[test]
    fn normal_equations_hold() {
        let s = uniform_sample(300, 5, |v, r| v.sin() + r.random_range(-1.0..1.0));
        let fit = fit_series(&s, 9).unwrap();
        let x = design_matrix(s.v_scalar().unwrap(), &fit.basis).unwrap();
        let y = DVector::from_column_slice(s.y());
        let lhs = x.tr_mul(&fit.residuals).amax();
        assert!(lhs <= 1e-8 * x.tr_mul(&y).amax());
    }

    #[test]
    fn sandwich_close_to_homoskedastic_formula() {
        // Oracle: with homoskedastic errors the sandwich converges to
        // sigma^2 * n (P'P)^{-1}.
        let s = uniform_sample(20_000, 6, |v, r| {
            let u1: f64 = r.random_range(0.0..1.0);
            let u2: f64 = r.random_range(0.0..1.0);
            v * 0.5 + 0.7 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let fit = fit_series(&s, 6).unwrap();
        let x = design_matrix(s.v_scalar().unwrap(), &fit.basis).unwrap();
        let homo = linalg::spd_inverse(&x.tr_mul(&x)).unwrap() * (0.49 * s.n() as f64);
        let rel = (&fit.omega_hat - &homo).amax() / homo.amax();
        assert!(rel < 0.1, "relative gap {rel}");
    }

    #[test]
    fn se_matches_quadratic_form() {
        let s = uniform_sample(400, 7, |v, r| v.abs() * r.random_range(-1.0..1.0));
        let fit = fit_series(&s, 8).unwrap();
        let grid = EvaluationGrid::uniform(-1.5, 1.5, 41).unwrap();
        let (curve, w) = series_curve(&fit, &grid, Side::Upper).unwrap();
        for (i, &v) in grid.scalar_points().unwrap().iter().enumerate() {
            let p = DVector::from_vec(bspline_basis(v, &fit.basis).unwrap());
            let q = (p.transpose() * &fit.omega_hat * &p)[(0, 0)] / s.n() as f64;
            assert!((curve.se[i].powi(2) - q).abs() <= 1e-8 * q);
        }
        for r in w.norm_consistency(&curve.se) {
            assert!((r - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn identity_omega_bounds_se() {
        let s = uniform_sample(100, 8, |_, r| r.random_range(0.0..1.0));
        let mut fit = fit_series(&s, 6).unwrap();
        fit.omega_hat = DMatrix::identity(6, 6);
        let grid = EvaluationGrid::uniform(-1.9, 1.9, 50).unwrap();
        let (curve, _) = series_curve(&fit, &grid, Side::Upper).unwrap();
        assert!(curve.se.iter().all(|&s| s <= 0.1 + 1e-15 && s > 0.0));
        fit.omega_hat = DMatrix::zeros(6, 6);
        let (curve, _) = series_curve(&fit, &grid, Side::Upper).unwrap();
        assert!(curve.se.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn affine_equivariance() {
        let s = uniform_sample(300, 9, |v, r| v * v + r.random_range(-0.5..0.5));
        let (a, c) = (-2.5, 4.0);
        let t = s.map_y(|y| a * y + c).unwrap();
        let grid = EvaluationGrid::uniform(-1.5, 1.5, 30).unwrap();
        let (c0, _) = series_curve(&fit_series(&s, 8).unwrap(), &grid, Side::Upper).unwrap();
        let (c1, _) = series_curve(&fit_series(&t, 8).unwrap(), &grid, Side::Upper).unwrap();
        for i in 0..grid.len() {
            assert!((c1.theta_hat[i] - (a * c0.theta_hat[i] + c)).abs() < 1e-9);
            assert!((c1.se[i] - a.abs() * c0.se[i]).abs() < 1e-9 * c0.se[i].max(1e-3));
        }
    }

    #[test]
    fn cv_prefers_more_terms_for_wiggly_truth() {
        let s = uniform_sample(800, 10, |v, r| (3.0 * v).sin() + 0.1 * r.random_range(-1.0..1.0));
        let sel = select_k(&s, &DEFAULT_CV_CANDIDATES).unwrap();
        assert!(sel.k_cv >= 7, "{sel:?}");
        assert_eq!(sel.k, undersmoothed_terms(sel.k_cv, 800));
        assert_eq!(sel.scores.len(), 5);
    }

    #[test]
    fn too_small_for_cv() {
        let s = uniform_sample(9, 1, |_, _| 0.0);
        assert!(select_k(&s, &DEFAULT_CV_CANDIDATES).is_err());
    }
}

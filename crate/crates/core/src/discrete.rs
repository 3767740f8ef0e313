//! Bound-generating functions on a finite support, estimated by cell means.

use nalgebra::DMatrix;

use crate::data::{BoundCurve, EstimatorKind, EvaluationGrid, InfluenceWeights, Sample, Side, Smoothing};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFit {
    pub support_points: Vec<Vec<f64>>,
    /// Cell means.
    pub gamma_hat: Vec<f64>,
    /// Diagonal of the asymptotic covariance of `sqrt(n) (gamma_hat - gamma)`.
    pub omega_diag: Vec<f64>,
    pub cell_counts: Vec<usize>,
    pub n: usize,
}

impl DiscreteFit {
    pub fn omega_hat(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.omega_diag.clone().into())
    }
}

/// Distinct covariate values in order of first appearance.
pub fn support_from_sample(sample: &Sample) -> Vec<Vec<f64>> {
    let mut support: Vec<Vec<f64>> = Vec::new();
    for i in 0..sample.n() {
        let row = sample.v_row(i);
        if !support.iter().any(|p| p.as_slice() == row) {
            support.push(row.to_vec());
        }
    }
    support
}

/// Cell means and their variance over the given support points.
///
/// Every observation must fall on a support point and every cell needs at
/// least two observations.
pub fn fit_discrete(sample: &Sample, support: &[Vec<f64>]) -> Result<DiscreteFit> {
    if support.is_empty() {
        return Err(Error::InvalidInput("no support points".into()));
    }
    let j = support.len();
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); j];
    for i in 0..sample.n() {
        let row = sample.v_row(i);
        let Some(cell) = support.iter().position(|p| p.as_slice() == row) else {
            return Err(Error::InvalidInput(format!(
                "observation {i} has covariate {row:?} outside the support"
            )));
        };
        cells[cell].push(sample.y()[i]);
    }
    let n = sample.n() as f64;
    let mut gamma_hat = Vec::with_capacity(j);
    let mut omega_diag = Vec::with_capacity(j);
    for (point, ys) in support.iter().zip(&cells) {
        if ys.len() < 2 {
            return Err(Error::SparseCell { point: format!("{point:?}"), count: ys.len() });
        }
        let nj = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / nj;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (nj - 1.0);
        gamma_hat.push(mean);
        omega_diag.push(n * var / nj);
    }
    Ok(DiscreteFit {
        support_points: support.to_vec(),
        gamma_hat,
        omega_diag,
        cell_counts: cells.iter().map(Vec::len).collect(),
        n: sample.n(),
    })
}

/// Curve and influence weights `g(v_j) = e_j' Omega^{1/2}` on the support.
pub fn discrete_curve(fit: &DiscreteFit, side: Side) -> Result<(BoundCurve, InfluenceWeights)> {
    let grid = EvaluationGrid::discrete(fit.support_points.clone())?;
    let roots: Vec<f64> = fit.omega_diag.iter().map(|w| w.sqrt()).collect();
    let scale = (fit.n as f64).sqrt();
    let se = roots.iter().map(|r| r / scale).collect();
    let curve = BoundCurve::new(
        grid,
        fit.gamma_hat.clone(),
        se,
        side,
        fit.n,
        Smoothing::None,
        EstimatorKind::Discrete,
    )?;
    let weights = InfluenceWeights::new(DMatrix::from_diagonal(&roots.into()), scale);
    Ok((curve, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cells() -> Sample {
        Sample::univariate(vec![1.0, 1.0, 3.0, 5.0], vec![1.0; 4], vec![0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn cell_means_and_variance() {
        let fit = fit_discrete(&two_cells(), &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(fit.gamma_hat, vec![1.0, 4.0]);
        assert_eq!(fit.omega_diag, vec![0.0, 4.0]);
        assert_eq!(fit.cell_counts, vec![2, 2]);
        let (curve, w) = discrete_curve(&fit, Side::Upper).unwrap();
        assert_eq!(curve.se, vec![0.0, 1.0]);
        assert_eq!(w.norm(1), 2.0);
    }

    #[test]
    fn constant_outcome_has_zero_variance() {
        let s = Sample::univariate(vec![3.5; 6], vec![0.0; 6], vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0]).unwrap();
        let fit = fit_discrete(&s, &support_from_sample(&s)).unwrap();
        assert_eq!(fit.gamma_hat, vec![3.5; 3]);
        assert_eq!(fit.omega_diag, vec![0.0; 3]);
    }

    #[test]
    fn single_cell_reduces_to_mean() {
        let ys = vec![1.0, 2.0, 4.0, 7.0];
        let s = Sample::univariate(ys.clone(), vec![0.0; 4], vec![0.0; 4]).unwrap();
        let fit = fit_discrete(&s, &[vec![0.0]]).unwrap();
        let (curve, _) = discrete_curve(&fit, Side::Lower).unwrap();
        let sd = crate::stats::sample_sd(&ys);
        assert!((curve.theta_hat[0] - 3.5).abs() < 1e-15);
        assert!((curve.se[0] - sd / 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_omega_gives_tenth() {
        let fit = DiscreteFit {
            support_points: vec![vec![0.0], vec![1.0]],
            gamma_hat: vec![0.0, 0.0],
            omega_diag: vec![1.0, 1.0],
            cell_counts: vec![50, 50],
            n: 100,
        };
        let (curve, _) = discrete_curve(&fit, Side::Upper).unwrap();
        assert_eq!(curve.se, vec![0.1, 0.1]);
    }

    #[test]
    fn permuting_support_permutes_output() {
        let s = two_cells();
        let (a, _) = discrete_curve(&fit_discrete(&s, &[vec![0.0], vec![1.0]]).unwrap(), Side::Upper).unwrap();
        let (b, _) = discrete_curve(&fit_discrete(&s, &[vec![1.0], vec![0.0]]).unwrap(), Side::Upper).unwrap();
        assert_eq!(a.theta_hat, vec![b.theta_hat[1], b.theta_hat[0]]);
        assert_eq!(a.se, vec![b.se[1], b.se[0]]);
    }

    #[test]
    fn sparse_cells_rejected() {
        let s = Sample::univariate(vec![1.0, 2.0, 3.0], vec![0.0; 3], vec![0.0, 0.0, 1.0]).unwrap();
        let err = fit_discrete(&s, &[vec![0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::SparseCell { count: 1, .. }));
        let err = fit_discrete(&s, &[vec![0.0], vec![2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::SparseCell { count: 0, .. }));
    }

    #[test]
    fn se_consistency_is_exact() {
        let s = Sample::univariate(
            vec![0.3, 1.7, 2.2, -0.4, 0.9, 5.1, 3.3],
            vec![0.0; 7],
            vec![0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0],
        )
        .unwrap();
        let fit = fit_discrete(&s, &support_from_sample(&s)).unwrap();
        let (curve, w) = discrete_curve(&fit, Side::Upper).unwrap();
        w.validate(&curve).unwrap();
        for r in w.norm_consistency(&curve.se) {
            assert!((r - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
        // Oracle: direct averaging per cell.
        assert!((curve.theta_hat[1] - (2.2 - 0.4 + 0.9) / 3.0).abs() < 1e-15);
    }
}

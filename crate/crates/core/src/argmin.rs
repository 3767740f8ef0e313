//! Estimation of the near-optimal set of the bound-generating function.

use crate::data::{BoundCurve, Side};

/// Slack rate used for the set estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetMode {
    /// `c_n = 1`.
    Parametric,
    /// `c_n = sqrt(log n)`.
    Nonparametric,
}

impl SetMode {
    /// Default `epsilon` for this mode.
    pub fn default_epsilon(self) -> f64 {
        match self {
            SetMode::Parametric => 0.0,
            SetMode::Nonparametric => 1e-6,
        }
    }
}

/// Grid indices of the estimated epsilon-argmin (argmax for lower bounds).
#[derive(Debug, Clone, PartialEq)]
pub struct ArgminSet {
    pub indices: Vec<usize>,
    pub threshold: f64,
    pub epsilon: f64,
    pub ell_n: f64,
    pub c_n: f64,
}

impl ArgminSet {
    /// Every point of the curve's grid.
    pub fn full(curve: &BoundCurve) -> Self {
        let sign = curve.side.sign();
        Self {
            indices: (0..curve.len()).collect(),
            threshold: sign * f64::INFINITY,
            epsilon: f64::INFINITY,
            ell_n: 0.0,
            c_n: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Measure of the set: member count times the per-point cell measure.
    pub fn measure(&self, curve: &BoundCurve) -> f64 {
        self.indices.len() as f64 * curve.grid.cell_measure()
    }
}

/// Set estimate with `log n` taken from the curve's sample size.
pub fn estimate_veps(curve: &BoundCurve, epsilon: f64, mode: SetMode) -> ArgminSet {
    estimate_veps_log_n(curve, (curve.n as f64).ln(), epsilon, mode)
}

/// Set estimate `{v : theta(v) <= min theta + ell_n c_n + epsilon}` (upper
/// side; mirrored for lower), with `ell_n = 2 sqrt(log n) sup s(v)`.
pub fn estimate_veps_log_n(curve: &BoundCurve, log_n: f64, epsilon: f64, mode: SetMode) -> ArgminSet {
    let root_log_n = log_n.max(0.0).sqrt();
    let ell_n = 2.0 * root_log_n * curve.max_se();
    let c_n = match mode {
        SetMode::Parametric => 1.0,
        SetMode::Nonparametric => root_log_n,
    };
    let slack = ell_n * c_n + epsilon.max(0.0);
    let best = curve.analog_bound();
    let (threshold, indices) = match curve.side {
        Side::Upper => {
            let t = best + slack;
            (t, (0..curve.len()).filter(|&i| curve.theta_hat[i] <= t).collect())
        }
        Side::Lower => {
            let t = best - slack;
            (t, (0..curve.len()).filter(|&i| curve.theta_hat[i] >= t).collect())
        }
    };
    ArgminSet { indices, threshold, epsilon, ell_n, c_n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EstimatorKind, EvaluationGrid, Smoothing};
    use proptest::prelude::*;

    fn curve(theta: Vec<f64>, se: Vec<f64>, side: Side, n: usize) -> BoundCurve {
        let g = EvaluationGrid::uniform(0.0, 1.0, theta.len()).unwrap();
        BoundCurve::new(g, theta, se, side, n, Smoothing::None, EstimatorKind::Discrete).unwrap()
    }

    #[test]
    fn zero_se_monotone_curve_gives_singleton() {
        let c = curve(vec![3.0, 2.0, 1.0, 0.5], vec![0.0; 4], Side::Upper, 100);
        assert_eq!(estimate_veps(&c, 0.0, SetMode::Nonparametric).indices, vec![3]);
        let c = c.with_side(Side::Lower);
        assert_eq!(estimate_veps(&c, 0.0, SetMode::Nonparametric).indices, vec![0]);
    }

    #[test]
    fn flat_curve_gives_full_grid() {
        let c = curve(vec![1.0; 6], vec![0.0; 6], Side::Upper, 100);
        assert_eq!(estimate_veps(&c, 0.0, SetMode::Parametric).indices, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn hand_threshold() {
        let c = curve(vec![0.0, 0.1, 5.0], vec![0.05; 3], Side::Upper, 55);
        let set = estimate_veps_log_n(&c, 4.0, 0.0, SetMode::Nonparametric);
        assert!((set.ell_n * set.c_n - 0.4).abs() < 1e-12);
        assert!((set.threshold - 0.4).abs() < 1e-12);
        assert_eq!(set.indices, vec![0, 1]);
        let par = estimate_veps_log_n(&c, 4.0, 0.0, SetMode::Parametric);
        assert_eq!(par.c_n, 1.0);
        assert_eq!(par.indices, vec![0, 1]);
    }

    proptest! {
        #[test]
        fn monotone_in_epsilon_and_contains_optimizers(
            theta in prop::collection::vec(-3.0f64..3.0, 2..40),
            se_scale in 0.0f64..0.2,
            e1 in 0.0f64..1.0,
            de in 0.0f64..1.0,
            lower in any::<bool>(),
        ) {
            let len = theta.len();
            let side = if lower { Side::Lower } else { Side::Upper };
            let se = (0..len).map(|i| se_scale * (1.0 + (i % 3) as f64)).collect();
            let c = curve(theta.clone(), se, side, 500);
            let small = estimate_veps(&c, e1, SetMode::Nonparametric);
            let big = estimate_veps(&c, e1 + de, SetMode::Nonparametric);
            prop_assert!(small.indices.iter().all(|i| big.contains(*i)));
            let best = c.analog_bound();
            for (i, t) in theta.iter().enumerate() {
                if *t == best {
                    prop_assert!(small.contains(i));
                }
            }
        }
    }
}

//! Precision-corrected bound estimates and confidence intervals.

use crate::argmin::ArgminSet;
use crate::critical::{CriticalValue, CriticalValueSource};
use crate::data::{BoundCurve, Side};
use crate::error::{Error, Result};
use crate::stats::norm_cdf;

/// Precision-corrected estimate of one bound at level `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedResult {
    pub p: f64,
    pub theta_p: f64,
    pub side: Side,
    pub k_used: CriticalValue,
    pub set_used: ArgminSet,
    /// Grid index attaining the corrected optimum.
    pub argopt_index: usize,
}

/// `min_{v in set} theta(v) + k s(v)` for the upper side,
/// `max_{v in set} theta(v) - k s(v)` for the lower side.
pub fn precision_corrected_bound(curve: &BoundCurve, set: &ArgminSet, k: &CriticalValue) -> Result<OneSidedResult> {
    if set.is_empty() {
        return Err(Error::InvalidInput("empty set".into()));
    }
    if !k.k.is_finite() {
        return Err(Error::InvalidInput(format!("critical value {} is not finite", k.k)));
    }
    if let Some(&i) = set.indices.iter().find(|&&i| i >= curve.len()) {
        return Err(Error::InvalidInput(format!("set index {i} outside the grid")));
    }
    let sign = curve.side.sign();
    // Work on the upper-side orientation: sign * theta + k s is minimized.
    let (argopt_index, value) = set
        .indices
        .iter()
        .map(|&i| (i, sign * curve.theta_hat[i] + k.k * curve.se[i]))
        .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(OneSidedResult {
        p: k.p,
        theta_p: sign * value,
        side: curve.side,
        k_used: k.clone(),
        set_used: set.clone(),
        argopt_index,
    })
}

/// A bound curve together with its set estimate and critical-value source.
#[derive(Debug, Clone, Copy)]
pub struct OneSidedProblem<'a> {
    pub curve: &'a BoundCurve,
    pub set: &'a ArgminSet,
    pub source: &'a CriticalValueSource,
}

impl OneSidedProblem<'_> {
    pub fn bound(&self, p: f64) -> Result<OneSidedResult> {
        precision_corrected_bound(self.curve, self.set, &self.source.k(p)?)
    }
}

/// Bound at `p = 1/2`, which lies on the conservative side of the true
/// bound with probability at least one half asymptotically.
pub fn half_median_unbiased(problem: &OneSidedProblem<'_>) -> Result<OneSidedResult> {
    problem.bound(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    IdentifiedSet,
    Parameter,
}

impl IntervalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalKind::IdentifiedSet => "identified-set",
            IntervalKind::Parameter => "parameter",
        }
    }
}

/// Rule for the sequence `tau_n` in the adaptive level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauRule {
    /// `tau_n = log n`.
    LogN,
    /// `tau_n = 1 / (sigma_n log n)` with `sigma_n` the larger
    /// interquartile spread of the two bound estimators.
    SigmaRule,
}

impl TauRule {
    pub fn as_str(self) -> &'static str {
        match self {
            TauRule::LogN => "log-n",
            TauRule::SigmaRule => "sigma",
        }
    }
}

/// Two-sided interval `[lo, hi]`. When the estimated bounds cross, `lo > hi`
/// is kept as is and `crossed` is set; the interval is then empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedInterval {
    pub lo: f64,
    pub hi: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub kind: IntervalKind,
    /// Level at which both one-sided bounds were evaluated.
    pub p_used: f64,
    pub delta_hat: Option<f64>,
    pub p_hat_n: Option<f64>,
    pub tau_n: Option<f64>,
    pub sigma_n: Option<f64>,
    pub crossed: bool,
}

impl TwoSidedInterval {
    pub fn is_empty(&self) -> bool {
        self.crossed
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(alpha))
    }
}

/// Bonferroni interval for the identified set from one-sided bounds at
/// `p = 1 - alpha / 2`.
pub fn ci_identified_set(lower: &OneSidedResult, upper: &OneSidedResult) -> Result<TwoSidedInterval> {
    if lower.side != Side::Lower || upper.side != Side::Upper {
        return Err(Error::InvalidInput("expected a lower and an upper result".into()));
    }
    if lower.p != upper.p {
        return Err(Error::LevelMismatch(lower.p, upper.p));
    }
    let alpha = 2.0 * (1.0 - lower.p);
    check_alpha(alpha)?;
    Ok(TwoSidedInterval {
        lo: lower.theta_p,
        hi: upper.theta_p,
        level: 1.0 - alpha,
        kind: IntervalKind::IdentifiedSet,
        p_used: lower.p,
        delta_hat: None,
        p_hat_n: None,
        tau_n: None,
        sigma_n: None,
        crossed: lower.theta_p > upper.theta_p,
    })
}

/// Adaptive level `1 - Phi(tau delta^+) alpha`.
pub fn adaptive_level(alpha: f64, tau: f64, delta_hat: f64) -> f64 {
    1.0 - norm_cdf(tau * delta_hat.max(0.0)) * alpha
}

/// Interval for the true parameter: both bounds at the adaptive level
/// `p_n`, which moves from `1 - alpha / 2` (point identification) toward
/// `1 - alpha` as the estimated set widens.
pub fn ci_parameter(
    lower: &OneSidedProblem<'_>,
    upper: &OneSidedProblem<'_>,
    alpha: f64,
    tau_rule: TauRule,
) -> Result<TwoSidedInterval> {
    check_alpha(alpha)?;
    if lower.curve.side != Side::Lower || upper.curve.side != Side::Upper {
        return Err(Error::InvalidInput("expected a lower and an upper curve".into()));
    }
    let n = lower.curve.n.min(upper.curve.n) as f64;
    let log_n = n.ln();
    let delta_hat = upper.bound(0.5)?.theta_p - lower.bound(0.5)?.theta_p;
    let (tau, sigma_n) = match tau_rule {
        TauRule::LogN => (log_n, None),
        TauRule::SigmaRule => {
            let spread = |pr: &OneSidedProblem<'_>| -> Result<f64> {
                Ok((pr.bound(0.75)?.theta_p - pr.bound(0.25)?.theta_p).abs())
            };
            let sigma = spread(upper)?.max(spread(lower)?);
            if sigma > 0.0 && log_n > 0.0 {
                (1.0 / (sigma * log_n), Some(sigma))
            } else {
                log::warn!("interquartile spread is zero; using tau = log n");
                (log_n, Some(sigma))
            }
        }
    };
    let p_hat = adaptive_level(alpha, tau, delta_hat);
    let lo = lower.bound(p_hat)?.theta_p;
    let hi = upper.bound(p_hat)?.theta_p;
    Ok(TwoSidedInterval {
        lo,
        hi,
        level: 1.0 - alpha,
        kind: IntervalKind::Parameter,
        p_used: p_hat,
        delta_hat: Some(delta_hat),
        p_hat_n: Some(p_hat),
        tau_n: Some(tau),
        sigma_n,
        crossed: lo > hi,
    })
}

/// Outcome of testing `inf_v theta(v) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegativityTest {
    pub reject: bool,
    pub theta_alpha: f64,
    pub result: OneSidedResult,
}

/// Rejects `inf_v theta(v) >= 0` at level `alpha` when the corrected
/// infimum at `p = 1 - alpha` is strictly negative.
pub fn test_nonnegativity(problem: &OneSidedProblem<'_>, alpha: f64) -> Result<NonnegativityTest> {
    check_alpha(alpha)?;
    if problem.curve.side != Side::Upper {
        return Err(Error::InvalidInput("the test statistic is an infimum; use an upper-side curve".into()));
    }
    let result = problem.bound(1.0 - alpha)?;
    Ok(NonnegativityTest { reject: result.theta_p < 0.0, theta_alpha: result.theta_p, result })
}

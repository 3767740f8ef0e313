use ibounds::argmin::SetMode;
use ibounds::critical::CvMethod;
use ibounds::data::{transform_outcome, Sample, Side, TransformForm, TransformSpec};
use ibounds::inference::{ci_identified_set, ci_parameter, half_median_unbiased, test_nonnegativity, TauRule};
use ibounds::montecarlo::{dgp_sample, DgpKind, DgpSpec};
use ibounds::pipeline::{fit_side, EstimatorChoice, FittedSide, GridSpec, SetChoice, SideConfig};

fn config(estimator: EstimatorChoice, cv_method: CvMethod, seed: u64) -> SideConfig {
    SideConfig {
        estimator,
        grid: GridSpec { points: 120, trim_pct: 5.0, hi: None },
        set: SetChoice::Estimate { epsilon: 1e-6, mode: SetMode::Nonparametric },
        cv_method,
        draws: 4000,
        seed,
    }
}

/// Bounded outcome with both bound transforms applied.
fn both_sides(sample: &Sample, estimator: EstimatorChoice, cv: CvMethod) -> (FittedSide, FittedSide) {
    let spec = |target| TransformSpec { t: 1.0, y0: -1.96 * 2.0, y1: 1.96 * 2.0, target, form: TransformForm::RealizedTreatment };
    let lo = transform_outcome(sample, &spec(Side::Lower)).unwrap();
    let hi = transform_outcome(sample, &spec(Side::Upper)).unwrap();
    (
        fit_side(&lo, Side::Lower, &config(estimator, cv, 1)).unwrap(),
        fit_side(&hi, Side::Upper, &config(estimator, cv, 2)).unwrap(),
    )
}

#[test]
fn synthetic_two_sided_pipeline() {
    let sample = dgp_sample(&DgpSpec::new(DgpKind::Kinked, 800).unwrap(), 42);
    for estimator in [EstimatorChoice::Series { terms: None }, EstimatorChoice::LocalLinear { bandwidth: None }] {
        let (lo, hi) = both_sides(&sample, estimator, CvMethod::Simulated);
        let l95 = lo.problem().bound(0.95).unwrap();
        let u95 = hi.problem().bound(0.95).unwrap();
        let set_ci = ci_identified_set(&l95, &u95).unwrap();
        assert!(!set_ci.crossed);
        assert!(set_ci.lo < set_ci.hi);
        let par = ci_parameter(&lo.problem(), &hi.problem(), 0.1, TauRule::SigmaRule).unwrap();
        let p = par.p_hat_n.unwrap();
        assert!((0.9..=0.95).contains(&p));
        // The parameter interval is nested in the set interval.
        assert!(par.lo >= set_ci.lo - 1e-12 && par.hi <= set_ci.hi + 1e-12);
        let l50 = half_median_unbiased(&lo.problem()).unwrap();
        assert!(l50.theta_p >= l95.theta_p);
        assert!(l50.theta_p <= lo.curve.analog_bound() + 1e-12);
    }
}

#[test]
fn analytic_critical_values_run_end_to_end() {
    let sample = dgp_sample(&DgpSpec::new(DgpKind::Flat, 600).unwrap(), 7);
    for cv in [CvMethod::KernelGumbel, CvMethod::KernelGumbelApprox, CvMethod::KernelHardleLinton] {
        let (lo, _) = both_sides(&sample, EstimatorChoice::LocalLinear { bandwidth: None }, cv);
        let k = lo.source.k(0.95).unwrap();
        assert!(k.k > 0.0 && k.a_n.is_some());
    }
    let (lo, _) = both_sides(&sample, EstimatorChoice::Series { terms: None }, CvMethod::SeriesExponential);
    let k = lo.source.k(0.95).unwrap();
    assert!(k.k.is_finite());
}

#[test]
fn discrete_bivariate_covariate() {
    // Two binary covariates; the bound-generating function is the cell mean.
    let mut y = Vec::new();
    let mut v = Vec::new();
    for i in 0..400 {
        let (a, b) = ((i % 2) as f64, ((i / 2) % 2) as f64);
        v.extend([a, b]);
        y.push(a + 2.0 * b + ((i * 7919) % 13) as f64 / 13.0 - 0.5);
    }
    let z = vec![1.0; 400];
    let s = Sample::new(y, z, v, 2).unwrap();
    let cfg = SideConfig {
        estimator: EstimatorChoice::Discrete,
        grid: GridSpec::default(),
        set: SetChoice::Estimate { epsilon: 0.0, mode: SetMode::Parametric },
        cv_method: CvMethod::Simulated,
        draws: 4000,
        seed: 3,
    };
    let up = fit_side(&s, Side::Upper, &cfg).unwrap();
    assert_eq!(up.curve.len(), 4);
    assert_eq!(up.set.indices, vec![up.curve.analog_index()]);
    let t = test_nonnegativity(&up.problem(), 0.05).unwrap();
    assert!(t.reject == (t.theta_alpha < 0.0));
}

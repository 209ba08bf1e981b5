//! End-to-end checks on the embedded operating-room-holds series.

use itsa::arx::{fit_arx, likelihood_ratio_test, predict_arx, select_baseline, ArxSpec};
use itsa::design::{build_design, InterventionSpec, TimeCoding};
use itsa::diagnostics::{acf, durbin_watson_test, ljung_box};
use itsa::effect::{effect_at, effect_series};
use itsa::ols::{fit_ols, gaussian_deviance, predict};
use itsa::{load_case_study, DesignMatrix};

const CONFOUNDERS: [&str; 3] = ["admissions", "discharges", "occupancy"];

fn full_design() -> DesignMatrix {
    build_design(
        &load_case_study(),
        InterventionSpec::new(53),
        &CONFOUNDERS,
        TimeCoding::SeriesStart,
    )
    .unwrap()
}

#[test]
fn full_segmented_model() {
    let d = full_design();
    let fit = fit_ols(&d).unwrap();
    let expected = [
        ("intercept", -50.64, 19.10, 0.009),
        ("time", -0.10, 0.10, 0.283),
        ("intervention", -12.01, 4.05, 0.004),
        ("time_after", 0.16, 0.12, 0.190),
        ("admissions", 0.07, 0.07, 0.250),
        ("discharges", -0.11, 0.08, 0.210),
        ("occupancy", 1.04, 0.22, 0.0),
    ];
    for (j, (name, coef, se, p)) in expected.iter().enumerate() {
        assert_eq!(fit.column_names[j], *name);
        assert!((fit.coefficients[j] - coef).abs() < 0.01, "{name}: {}", fit.coefficients[j]);
        assert!((fit.standard_errors[j] - se).abs() < 0.05, "{name}: {}", fit.standard_errors[j]);
        assert!((fit.p_values[j].value() - p).abs() < 0.005, "{name}: {}", fit.p_values[j].value());
    }
    let significant: Vec<bool> = fit.p_values.iter().map(|p| p.value() < 0.05).collect();
    assert_eq!(significant, [true, false, true, false, false, false, true]);
    let pred = predict(&fit, &d).unwrap();
    assert_eq!(pred, fit.fitted);
}

#[test]
fn segmented_deviance() {
    let d = full_design().select(&["intercept", "intervention", "occupancy"]).unwrap();
    let dev = gaussian_deviance(&fit_ols(&d).unwrap()).unwrap();
    assert!((dev - 852.84).abs() < 0.5, "{dev}");
}

#[test]
fn week_54_prediction_and_effect() {
    let d = full_design();
    let fit = fit_ols(&d).unwrap();
    let e = effect_at(&fit, &d, 54, 0.95).unwrap();
    assert!((e.fitted - 13.503).abs() < 1e-3, "{e:?}");
    assert!((e.counterfactual - 25.19).abs() < 1e-2, "{e:?}");
    assert!(e.fitted < e.counterfactual);
    let (lo, hi) = (e.ci_lower.unwrap(), e.ci_upper.unwrap());
    assert!(lo < e.relative_change.unwrap() && e.relative_change.unwrap() < hi);
    let series = effect_series(&fit, &d, 0.95).unwrap();
    assert_eq!(series.summary.post_weeks, 62);
    assert!(series.summary.mean_relative_change.unwrap() < -30.0);
    for pre in 1..53 {
        let e = effect_at(&fit, &d, pre, 0.95).unwrap();
        assert_eq!(e.absolute_change, 0.0);
        assert_eq!(e.fitted, e.counterfactual);
    }
}

#[test]
fn residual_diagnostics() {
    let d = full_design();
    let fit = fit_ols(&d).unwrap();
    let dw = durbin_watson_test(&fit.residuals, &d).unwrap();
    assert!((dw.statistic - 1.9795).abs() < 1e-3, "{dw:?}");
    assert!(dw.p_value.value() > 0.05);
    let r = acf(d.outcome(), 10).unwrap();
    // The outcome itself is autocorrelated at lag 1.
    assert!(r.correlations[0] > r.band);
}

#[test]
fn arx_pipeline() {
    let d = full_design();
    let cands: Vec<Vec<String>> = vec![
        vec!["intercept".into()],
        vec!["intercept".into(), "occupancy".into()],
        vec!["intercept".into(), "occupancy".into(), "admissions".into(), "discharges".into()],
    ];
    let sel = select_baseline(&d, 3, &cands).unwrap();
    assert_eq!(sel.trace.len(), 12);
    let base = sel.best().unwrap();
    assert_eq!(base.order, 2);
    assert_eq!(base.exogenous, ["intercept", "occupancy"]);
    let full = fit_arx(&d, &ArxSpec::new(2, &["intercept", "occupancy", "intervention"])).unwrap();
    let lrt = likelihood_ratio_test(base, &full).unwrap();
    assert!((lrt.lambda - 12.18).abs() < 0.05 && lrt.significant, "{lrt:?}");
    assert!((full.se_of("intervention").unwrap() - 2.65).abs() < 0.05);
    let trend = fit_arx(
        &d,
        &ArxSpec::new(2, &["intercept", "occupancy", "intervention", "time_after"]),
    )
    .unwrap();
    let lrt2 = likelihood_ratio_test(&full, &trend).unwrap();
    assert!(!lrt2.significant);
    let lb = ljung_box(&full.residuals, 10, 2).unwrap();
    assert!(lb.p_value.value() > 0.05);
    let pred = predict_arx(&full, &d).unwrap();
    assert!(pred[..2].iter().all(Option::is_none));
    // One in-sample prediction falls below zero.
    assert!(pred.iter().flatten().any(|&p| p < 0.0));
}

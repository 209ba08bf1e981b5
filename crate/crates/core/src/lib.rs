//! Interrupted time series analysis.
//!
//! Segmented regression with confounder control, serial-correlation
//! diagnostics, ARX(p) intervention models compared by likelihood-ratio
//! tests, and counterfactual effect estimates. The numerical code is generic
//! over [`Scalar`] (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod arx;
pub mod dataset;
pub mod design;
pub mod diagnostics;
pub mod distributions;
pub mod effect;
pub mod error;
pub mod linalg;
pub mod ols;
pub mod scalar;

pub use arx::{
    arx_deviance, fit_arx, likelihood_ratio_test, likelihood_ratio_test_at, predict_arx,
    select_baseline, ArxSpec,
};
pub use dataset::{load_case_study, parse_csv, ObservationRecord};
pub use design::{build_design, InterventionSpec, TimeCoding};
pub use diagnostics::{acf, durbin_watson, dw_p_value, ljung_box};
pub use effect::{counterfactual_series, effect_at, effect_series, LinearPredictor};
pub use error::{Error, Result};
pub use ols::{fit_ols, gaussian_deviance, predict};
pub use scalar::Scalar;

pub type TimeSeriesDataset = dataset::TimeSeriesDataset<f64>;
pub type DesignMatrix = design::DesignMatrix<f64>;
pub type OlsFit = ols::OlsFit<f64>;
pub type ArxFit = arx::ArxFit<f64>;
pub type LrtResult = arx::LrtResult<f64>;
pub type DwResult = diagnostics::DwResult<f64>;
pub type AcfResult = diagnostics::AcfResult<f64>;
pub type LjungBoxResult = diagnostics::LjungBoxResult<f64>;
pub type EffectEstimate = effect::EffectEstimate<f64>;
pub type EffectSeries = effect::EffectSeries<f64>;
pub type TailProbability = distributions::TailProbability<f64>;
pub type Matrix = linalg::Matrix<f64>;

pub type TimeSeriesDatasetF32 = dataset::TimeSeriesDataset<f32>;
pub type DesignMatrixF32 = design::DesignMatrix<f32>;
pub type OlsFitF32 = ols::OlsFit<f32>;
pub type ArxFitF32 = arx::ArxFit<f32>;

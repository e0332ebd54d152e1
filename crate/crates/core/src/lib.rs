//! Impulse and forced response of the fractionally damped oscillator
//!
//! ```text
//! ẍ + 2ζω_n^{2−β} D^β x + ω_n² x = h(t),   x(0) = ẋ(0) = 0
//! ```
//!
//! computed four ways: the exact bivariate Mittag-Leffler series
//! ([`ml_series`]), a closed-form damped-sine approximation ([`approx`]),
//! Grünwald-Letnikov finite differences ([`fdm`]) and the frequency response
//! ([`approx::frf_exact`]). [`equiv`] holds the equivalent frequency and
//! damping closed forms together with the estimators they are fitted from,
//! and [`response`] the convolution engine and canned comparison runs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference values in tests keep every digit of the high-precision oracle.
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod approx;
pub mod charroot;
pub mod equiv;
pub mod error;
pub mod fdm;
pub mod io;
pub mod ml_series;
pub mod model;
pub mod response;
pub mod specfun;

pub use approx::{frf_approx, frf_curve, frf_exact, impulse_approx, FrfCurve, FrfKind};
pub use charroot::{omega_d, solve_char_root, CharRoot};
pub use equiv::{fit_power_law, omega_d_eq, zeta_eq, FitTarget, PeakList, RegressionFit};
pub use error::{Error, Result};
pub use fdm::{fdm_solve, gl_weights, impulse_fdm, GlWeights};
pub use ml_series::{impulse_series, EvalMode, SeriesEval, SeriesOptions};
pub use model::{linspace_grid, validate_params, OscillatorParams, Quantity, TimeGrid, TimeSeries};
pub use response::{convolve, run_case, ComparisonReport, Excitation, Kernel, Scenario};

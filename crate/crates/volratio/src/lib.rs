//! Volatility-ratio toolkit.
//!
//! The crate is organised around a single idea: the ratio of an asset's
//! volatility to a market benchmark's volatility is a far better-behaved
//! object than either volatility alone, and a small amount of time-series
//! machinery built on top of that ratio yields usable multi-asset
//! volatility forecasts.
//!
//! Modules, roughly in pipeline order:
//!
//! - [`ingest`] — CSV price loading, log-return construction, panel alignment.
//! - [`volcore`] — rolling realized volatility, historical and dynamic
//!   volatility ratios, GARCH(1,1) estimation, ratio-distribution diagnostics.
//! - [`stattests`] — ADF, KPSS and Engle–Granger test batteries with
//!   response-surface critical values.
//! - [`linmod`] — closed-form OLS, MAPE, and the naive one-factor
//!   volatility model battery.
//! - [`arima`] — univariate ARIMA with exact Gaussian likelihood and
//!   automatic order selection.
//! - [`vecm`] — Johansen reduced-rank estimation of vector error-correction
//!   models on log-volatility panels, plus multi-step forecasting.
//! - [`portfolio`] — classical and VECM-based portfolio volatility
//!   forecasts, covariance reconstruction from ratios, and the forecast
//!   guardrail.
//! - [`bench`] — seeded Monte-Carlo benchmark of the VECM pipeline against
//!   the classical sample-covariance estimator, plus synthetic data
//!   generation.

pub mod arima;
pub mod bench;
pub mod error;
pub mod ingest;
pub mod linmod;
pub mod portfolio;
pub mod stattests;
pub mod vecm;
pub mod volcore;

mod linalg;
mod optim;
mod stats;

pub use error::{Error, Result};

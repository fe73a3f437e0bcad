//! Stationarity and cointegration test batteries.
//!
//! - [`adf_test`] — augmented Dickey–Fuller regression
//!   Δx_t = c + γ x_{t−1} + Σ φ_j Δx_{t−j} + e_t with the statistic being
//!   the t-ratio on γ, automatic lag choice by AIC over a common sample,
//!   and MacKinnon response-surface critical values and p-values.
//! - [`kpss_test`] — KPSS level-stationarity test (opposite null).
//! - [`engle_granger`] — two-step residual cointegration test: OLS of one
//!   volatility series on another with an intercept, then a no-constant
//!   Dickey–Fuller regression on the residuals evaluated against the
//!   two-variable cointegration surface.
//! - [`batch_classify`] — applies both tests across an asset panel and
//!   aggregates into per-horizon percentages; series shorter than
//!   [`MIN_TEST_OBS`] are counted as dropped, never aborting the batch.

mod kpss;
mod mackinnon;

pub use kpss::{kpss_test, KpssResult, KPSS_CRITICAL_VALUES};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::volcore::{RatioSeries, VolSeries};
use mackinnon::Surface;

/// Series shorter than this are reported as dropped by test batteries.
pub const MIN_TEST_OBS: usize = 25;

/// Deterministic terms included in the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regression {
    Constant,
    NoConstant,
}

/// Augmented Dickey–Fuller test result.
#[derive(Debug, Clone, Serialize)]
pub struct AdfResult {
    /// t-ratio on the lagged level.
    pub statistic: f64,
    /// MacKinnon (1994) approximate asymptotic p-value.
    pub p_value: f64,
    /// Number of lagged differences included.
    pub lags: usize,
    /// Effective regression sample size.
    pub n_obs: usize,
    /// (significance level, critical value) at 1%, 5%, 10%.
    pub critical_values: [(f64, f64); 3],
    pub regression: Regression,
}

impl AdfResult {
    /// True when the unit-root null is rejected at `alpha`. The canonical
    /// levels 1%/5%/10% use finite-sample critical values; other levels
    /// fall back to the p-value surface.
    pub fn rejects_at(&self, alpha: f64) -> bool {
        for (level, crit) in self.critical_values {
            if (alpha - level).abs() < 1e-9 {
                return self.statistic < crit;
            }
        }
        self.p_value < alpha
    }
}

/// Builds the ADF design for `lag` lagged differences with the regression
/// sample starting at difference index `start` (start ≥ lag), and runs OLS.
///
/// Returns (t-ratio on the level, AIC, effective nobs, k).
fn adf_ols(
    x: &[f64],
    diffs: &[f64],
    lag: usize,
    start: usize,
    regression: Regression,
) -> Result<(f64, f64, usize, usize)> {
    let nd = diffs.len();
    let n_eff = nd - start;
    let k = 1 + lag + if regression == Regression::Constant { 1 } else { 0 };
    if n_eff <= k + 1 {
        return Err(Error::SeriesTooShort {
            context: "adf regression",
            len: n_eff,
            min: k + 2,
        });
    }
    let mut design = DMatrix::<f64>::zeros(n_eff, k);
    let mut y = DVector::<f64>::zeros(n_eff);
    for (row, i) in (start..nd).enumerate() {
        y[row] = diffs[i];
        design[(row, 0)] = x[i]; // x_{t-1}: level preceding diff i
        for j in 1..=lag {
            design[(row, j)] = diffs[i - j];
        }
        if regression == Regression::Constant {
            design[(row, k - 1)] = 1.0;
        }
    }
    let sol = linalg::ols_solve(&design, &y)?;
    let se = (sol.sigma2 * sol.xtx_inv[(0, 0)]).sqrt();
    if !(se > 0.0) {
        return Err(Error::NonFinite("adf t-ratio"));
    }
    let t_ratio = sol.coef[0] / se;
    let ssr = sol.residuals.dot(&sol.residuals);
    let aic = n_eff as f64 * (ssr / n_eff as f64).ln() + 2.0 * k as f64;
    Ok((t_ratio, aic, n_eff, k))
}

/// Default maximum lag: floor(12 (n/100)^{1/4}), capped for small samples.
fn default_max_lags(n: usize, regression: Regression) -> usize {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let ntrend = if regression == Regression::Constant { 1 } else { 0 };
    schwert.min((n - 1) / 2 - ntrend - 1)
}

/// Core ADF computation; the caller chooses which MacKinnon surface maps
/// the statistic to p-values (plain unit-root vs. residual cointegration).
fn adf_core(
    x: &[f64],
    regression: Regression,
    max_lags: Option<usize>,
) -> Result<(f64, usize, usize)> {
    let n = x.len();
    if n < MIN_TEST_OBS {
        return Err(Error::SeriesTooShort {
            context: "adf_test",
            len: n,
            min: MIN_TEST_OBS,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adf_test input"));
    }
    let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let max_lag = match max_lags {
        Some(m) => m.min(default_max_lags(n, regression).max(1)),
        None => default_max_lags(n, regression),
    };

    // Lag choice by AIC over the common sample fixed at the largest lag,
    // then a final regression on the full available sample.
    let chosen = if max_lag == 0 {
        0
    } else {
        let mut best_lag = 0usize;
        let mut best_aic = f64::INFINITY;
        for lag in 0..=max_lag {
            let (_, aic, _, _) = adf_ols(x, &diffs, lag, max_lag, regression)?;
            if aic < best_aic {
                best_aic = aic;
                best_lag = lag;
            }
        }
        best_lag
    };
    let (stat, _, n_eff, _) = adf_ols(x, &diffs, chosen, chosen, regression)?;
    Ok((stat, chosen, n_eff))
}

/// Augmented Dickey–Fuller unit-root test.
///
/// `max_lags = None` selects the lag count by AIC up to the Schwert bound
/// floor(12 (n/100)^{1/4}); `Some(l)` caps the search at `l` (so
/// `Some(0)` forces the unaugmented regression).
pub fn adf_test(x: &[f64], regression: Regression, max_lags: Option<usize>) -> Result<AdfResult> {
    let (statistic, lags, n_obs) = adf_core(x, regression, max_lags)?;
    let surface = match regression {
        Regression::Constant => Surface::Constant,
        Regression::NoConstant => Surface::NoConstant,
    };
    Ok(AdfResult {
        statistic,
        p_value: mackinnon::p_value(surface, statistic),
        lags,
        n_obs,
        critical_values: mackinnon::critical_values(surface, n_obs),
        regression,
    })
}

/// Engle–Granger two-step cointegration test result.
#[derive(Debug, Clone, Serialize)]
pub struct CointResult {
    /// Step-1 intercept.
    pub alpha_hat: f64,
    /// Step-1 slope.
    pub beta_hat: f64,
    /// Dickey–Fuller t-ratio on the step-1 residuals.
    pub statistic: f64,
    /// p-value under the two-variable residual-cointegration surface.
    pub p_value: f64,
    pub lags: usize,
    pub n_obs: usize,
    pub critical_values: [(f64, f64); 3],
}

impl CointResult {
    /// True when the no-cointegration null is rejected at `alpha`.
    pub fn rejects_at(&self, alpha: f64) -> bool {
        for (level, crit) in self.critical_values {
            if (alpha - level).abs() < 1e-9 {
                return self.statistic < crit;
            }
        }
        self.p_value < alpha
    }
}

/// Engle–Granger two-step cointegration test of `y` against `x`
/// (equal-length, already aligned).
///
/// Step 1 regresses y = α + β x + ε with an intercept; step 2 runs a
/// no-constant Dickey–Fuller regression on the residuals, evaluated
/// against critical values that account for the estimated first step.
pub fn engle_granger(y: &[f64], x: &[f64], max_lags: Option<usize>) -> Result<CointResult> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            context: "engle_granger",
            left: y.len(),
            right: x.len(),
        });
    }
    let n = y.len();
    if n < MIN_TEST_OBS {
        return Err(Error::SeriesTooShort {
            context: "engle_granger",
            len: n,
            min: MIN_TEST_OBS,
        });
    }
    let mut design = DMatrix::<f64>::zeros(n, 2);
    let mut yv = DVector::<f64>::zeros(n);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        design[(i, 1)] = x[i];
        yv[i] = y[i];
    }
    let sol = linalg::ols_solve(&design, &yv)?;
    let residuals: Vec<f64> = sol.residuals.iter().copied().collect();

    let (statistic, lags, n_obs) = adf_core(&residuals, Regression::NoConstant, max_lags)?;
    Ok(CointResult {
        alpha_hat: sol.coef[0],
        beta_hat: sol.coef[1],
        statistic,
        p_value: mackinnon::p_value(Surface::CointConstant2, statistic),
        lags,
        n_obs,
        critical_values: mackinnon::critical_values(Surface::CointConstant2, n_obs),
    })
}

/// Engle–Granger on two volatility series, aligned on timestamps first.
pub fn engle_granger_series(
    asset: &VolSeries,
    market: &VolSeries,
    max_lags: Option<usize>,
) -> Result<CointResult> {
    let (a, m) = crate::volcore::align_vol_pair(asset, market);
    engle_granger(&a, &m, max_lags)
}

/// Per-item outcome inside a classification batch.
#[derive(Debug, Clone, Serialize)]
pub enum ItemOutcome {
    Tested {
        asset_id: String,
        stationary: bool,
        cointegrated: bool,
    },
    Dropped {
        asset_id: String,
        reason: String,
    },
}

/// Aggregate classification of a panel at one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub horizon: String,
    /// Percent of tested ratio series with a rejected unit root.
    pub stationary_pct: f64,
    /// Percent of tested volatility pairs found cointegrated.
    pub cointegrated_pct: f64,
    pub n_tested: usize,
    pub n_dropped: usize,
    pub items: Vec<ItemOutcome>,
}

impl BatchSummary {
    pub fn csv_header() -> &'static str {
        "horizon,stationary_pct,cointegrated_pct,n_tested,n_dropped"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.2},{:.2},{},{}",
            self.horizon, self.stationary_pct, self.cointegrated_pct, self.n_tested, self.n_dropped
        )
    }
}

/// Classifies every asset of a panel at one horizon: is its volatility
/// ratio stationary (ADF with constant), and is its volatility
/// cointegrated with the benchmark (Engle–Granger)?
///
/// `hvrs[i]` and `asset_vols[i]` must describe the same asset. Series too
/// short to test are counted in `n_dropped`; `n_tested + n_dropped`
/// always equals the panel size.
pub fn batch_classify(
    hvrs: &[RatioSeries],
    asset_vols: &[VolSeries],
    market_vol: &VolSeries,
    horizon: &str,
    alpha: f64,
) -> Result<BatchSummary> {
    if hvrs.len() != asset_vols.len() {
        return Err(Error::LengthMismatch {
            context: "batch_classify",
            left: hvrs.len(),
            right: asset_vols.len(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            message: format!("significance level must be in (0,1), got {alpha}"),
        });
    }

    let outcomes: Vec<Result<ItemOutcome>> = hvrs
        .par_iter()
        .zip(asset_vols.par_iter())
        .map(|(ratio, vol)| {
            let classify = || -> Result<(bool, bool)> {
                let adf = adf_test(&ratio.ratios, Regression::Constant, None)?;
                let eg = engle_granger_series(vol, market_vol, None)?;
                Ok((adf.rejects_at(alpha), eg.rejects_at(alpha)))
            };
            match classify() {
                Ok((stationary, cointegrated)) => Ok(ItemOutcome::Tested {
                    asset_id: ratio.asset_id.clone(),
                    stationary,
                    cointegrated,
                }),
                Err(e) if e.is_droppable() => Ok(ItemOutcome::Dropped {
                    asset_id: ratio.asset_id.clone(),
                    reason: e.to_string(),
                }),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut items = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        items.push(o?);
    }

    let mut n_tested = 0usize;
    let mut n_dropped = 0usize;
    let mut n_stationary = 0usize;
    let mut n_coint = 0usize;
    for item in &items {
        match item {
            ItemOutcome::Tested {
                stationary,
                cointegrated,
                ..
            } => {
                n_tested += 1;
                if *stationary {
                    n_stationary += 1;
                }
                if *cointegrated {
                    n_coint += 1;
                }
            }
            ItemOutcome::Dropped { .. } => n_dropped += 1,
        }
    }
    let pct = |num: usize| {
        if n_tested == 0 {
            0.0
        } else {
            100.0 * num as f64 / n_tested as f64
        }
    };
    Ok(BatchSummary {
        horizon: horizon.to_string(),
        stationary_pct: pct(n_stationary),
        cointegrated_pct: pct(n_coint),
        n_tested,
        n_dropped,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Frequency;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn random_walk(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut level = 0.0;
        (0..n)
            .map(|_| {
                level += rng.sample::<f64, _>(StandardNormal);
                level
            })
            .collect()
    }

    fn ar1(n: usize, phi: f64, rng: &mut impl Rng) -> Vec<f64> {
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn stationary_series_rejects_unit_root() {
        let mut rng = StdRng::seed_from_u64(10);
        let x = ar1(500, 0.5, &mut rng);
        let res = adf_test(&x, Regression::Constant, None).unwrap();
        assert!(res.rejects_at(0.01), "stat {}", res.statistic);
        assert!(res.p_value < 0.01);
    }

    #[test]
    fn random_walk_fails_to_reject() {
        let mut rng = StdRng::seed_from_u64(11);
        let x = random_walk(500, &mut rng);
        let res = adf_test(&x, Regression::Constant, None).unwrap();
        assert!(!res.rejects_at(0.05), "stat {}", res.statistic);
    }

    #[test]
    fn adf_statistic_is_scale_and_shift_invariant() {
        let mut rng = StdRng::seed_from_u64(12);
        let x = ar1(300, 0.7, &mut rng);
        let scaled: Vec<f64> = x.iter().map(|v| 250.0 * v + 17.0).collect();
        let r1 = adf_test(&x, Regression::Constant, Some(3)).unwrap();
        let r2 = adf_test(&scaled, Regression::Constant, Some(3)).unwrap();
        assert_relative_eq!(r1.statistic, r2.statistic, epsilon = 1e-8);
        assert_eq!(r1.lags, r2.lags);
    }

    #[test]
    fn lag_selection_finds_ar_structure_in_differences() {
        // Differences follow an AR(1), so the ADF regression needs lagged
        // difference terms; AIC should pick at least one.
        let mut rng = StdRng::seed_from_u64(13);
        let mut diff_state = 0.0;
        let mut level = 0.0;
        let x: Vec<f64> = (0..800)
            .map(|_| {
                diff_state = 0.6 * diff_state + rng.sample::<f64, _>(StandardNormal);
                level += diff_state;
                level
            })
            .collect();
        let res = adf_test(&x, Regression::Constant, None).unwrap();
        assert!(res.lags >= 1, "lags {}", res.lags);
    }

    #[test]
    fn short_series_is_droppable() {
        let x = vec![1.0; 20];
        let err = adf_test(&x, Regression::Constant, None).unwrap_err();
        assert!(err.is_droppable());
    }

    #[test]
    fn engle_granger_detects_cointegration() {
        let mut rng = StdRng::seed_from_u64(14);
        let x = random_walk(1000, &mut rng);
        let y: Vec<f64> = x
            .iter()
            .map(|v| 0.5 + 2.0 * v + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let res = engle_granger(&y, &x, None).unwrap();
        assert!(res.rejects_at(0.05), "stat {}", res.statistic);
        assert!((res.beta_hat - 2.0).abs() < 0.1, "beta {}", res.beta_hat);
    }

    #[test]
    fn engle_granger_independent_walks_not_cointegrated() {
        let mut rng = StdRng::seed_from_u64(15);
        let x = random_walk(1000, &mut rng);
        let y = random_walk(1000, &mut rng);
        let res = engle_granger(&y, &x, None).unwrap();
        assert!(!res.rejects_at(0.01), "stat {}", res.statistic);
    }

    /// Monte-Carlo oracle for the embedded response-surface tables: the
    /// simulated null 5% quantile must match the critical value to ±0.03.
    #[test]
    fn mackinnon_tables_match_simulated_null_quantiles() {
        use rayon::prelude::*;
        const REPS: usize = 50_000;
        const N: usize = 500;
        for (regression, surface_name) in [
            (Regression::Constant, "constant"),
            (Regression::NoConstant, "no constant"),
        ] {
            let stats: Vec<f64> = (0..REPS)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = StdRng::seed_from_u64(900_000 + rep as u64);
                    let x = random_walk(N, &mut rng);
                    adf_test(&x, regression, Some(0)).unwrap().statistic
                })
                .collect();
            let q5 = crate::stats::quantile_of(&stats, 0.05);
            let expected = match regression {
                Regression::Constant => mackinnon::critical_value(Surface::Constant, 1, N - 1),
                Regression::NoConstant => mackinnon::critical_value(Surface::NoConstant, 1, N - 1),
            };
            assert!(
                (q5 - expected).abs() < 0.03,
                "{surface_name}: simulated 5% quantile {q5:.4} vs table {expected:.4}"
            );
        }
    }

    #[test]
    fn batch_counts_dropped_and_tested() {
        let mut rng = StdRng::seed_from_u64(16);
        let make_vol = |id: &str, sigmas: Vec<f64>| VolSeries {
            asset_id: id.into(),
            frequency: Frequency::Day,
            window: 5,
            timestamps: (0..sigmas.len() as i64).collect(),
            sigmas,
        };
        let make_ratio = |id: &str, ratios: Vec<f64>| RatioSeries {
            asset_id: id.into(),
            benchmark_id: "mkt".into(),
            kind: crate::volcore::RatioKind::Hvr,
            window: 5,
            timestamps: (0..ratios.len() as i64).collect(),
            ratios,
            excluded: 0,
        };
        let market = make_vol(
            "mkt",
            (0..300)
                .map(|_| 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        // One healthy asset, one too short to test.
        let good_vol = make_vol(
            "good",
            (0..300)
                .map(|_| 1.2 + 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let good_ratio = make_ratio(
            "good",
            (0..300)
                .map(|_| 1.2 + 0.05 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let short_vol = make_vol("short", vec![1.0; 10]);
        let short_ratio = make_ratio("short", vec![1.0; 10]);

        let summary = batch_classify(
            &[good_ratio, short_ratio],
            &[good_vol, short_vol],
            &market,
            "5 days",
            0.05,
        )
        .unwrap();
        assert_eq!(summary.n_tested, 1);
        assert_eq!(summary.n_dropped, 1);
        assert_eq!(summary.n_tested + summary.n_dropped, 2);
        assert_eq!(
            BatchSummary::csv_header(),
            "horizon,stationary_pct,cointegrated_pct,n_tested,n_dropped"
        );
        let row = summary.to_csv_row();
        assert!(row.starts_with("5 days,"));
        assert!(row.ends_with(",1,1"));
    }
}

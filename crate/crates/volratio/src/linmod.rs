//! Closed-form linear models and fit metrics.
//!
//! Houses the naive one-factor volatility models
//!
//! ```text
//! M1:  sigma_i,t = beta · sigma_m,t + eps_t          (no intercept)
//! M2:  sigma_i,t = alpha + beta · sigma_m,t + eps_t  (intercept)
//! ```
//!
//! plus MAPE and the panel battery that aggregates per-asset fits into a
//! comparison row. Conventions: R² uses the centered total sum of squares
//! when an intercept is present and the uncentered sum when not (the only
//! definition under which the no-intercept model's fit shares are
//! coherent); the Gaussian log-likelihood counts the error variance as a
//! parameter in k for AIC = 2k − 2·logL and BIC = k·ln(n) − 2·logL;
//! coefficient p-values use the t distribution with n − k_coef degrees of
//! freedom.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::volcore::{align_vol_pair, VolSeries};

/// One estimated coefficient with its inference columns.
#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub value: f64,
    pub stderr: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// A fitted univariate linear model.
#[derive(Debug, Clone, Serialize)]
pub struct OlsFit {
    pub intercept: Option<Coefficient>,
    pub slope: Coefficient,
    pub r2: f64,
    pub adj_r2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
}

fn two_sided_t_pvalue(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Ordinary least squares of `y` on `x`, with or without an intercept.
pub fn ols(y: &[f64], x: &[f64], intercept: bool) -> Result<OlsFit> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            context: "ols",
            left: y.len(),
            right: x.len(),
        });
    }
    let n = y.len();
    if n < 3 {
        return Err(Error::SeriesTooShort {
            context: "ols",
            len: n,
            min: 3,
        });
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;

    let (slope_val, intercept_val, sxx) = if intercept {
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for i in 0..n {
            sxx += (x[i] - mean_x) * (x[i] - mean_x);
            sxy += (x[i] - mean_x) * (y[i] - mean_y);
        }
        if sxx <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "x",
                message: "regressor is constant; slope unidentified with intercept".into(),
            });
        }
        let b = sxy / sxx;
        (b, Some(mean_y - b * mean_x), sxx)
    } else {
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        if sxx <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "x",
                message: "regressor identically zero; slope unidentified".into(),
            });
        }
        let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| xi * yi).sum();
        (sxy / sxx, None, sxx)
    };

    let mut fitted = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut ssr = 0.0;
    for i in 0..n {
        let f = intercept_val.unwrap_or(0.0) + slope_val * x[i];
        fitted.push(f);
        let e = y[i] - f;
        residuals.push(e);
        ssr += e * e;
    }

    let k_coef = if intercept { 2.0 } else { 1.0 };
    let df = nf - k_coef;
    let sigma2 = ssr / df;

    let slope_se = (sigma2 / sxx).sqrt();
    let slope_t = slope_val / slope_se;
    let slope = Coefficient {
        value: slope_val,
        stderr: slope_se,
        t_stat: slope_t,
        p_value: two_sided_t_pvalue(slope_t, df),
    };
    let intercept_coef = intercept_val.map(|a| {
        let se = (sigma2 * (1.0 / nf + mean_x * mean_x / sxx)).sqrt();
        let t = a / se;
        Coefficient {
            value: a,
            stderr: se,
            t_stat: t,
            p_value: two_sided_t_pvalue(t, df),
        }
    });

    let tss = if intercept {
        y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>()
    } else {
        y.iter().map(|v| v * v).sum::<f64>()
    };
    let r2 = if tss > 0.0 { 1.0 - ssr / tss } else { 1.0 };
    let adj_r2 = if intercept {
        1.0 - (1.0 - r2) * (nf - 1.0) / (nf - 2.0)
    } else {
        1.0 - (1.0 - r2) * nf / (nf - 1.0)
    };

    // Gaussian log-likelihood at the ML variance SSR/n.
    let sigma2_ml = ssr / nf;
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2_ml).ln() + 1.0);
    let k = k_coef + 1.0; // coefficients + error variance
    let aic = 2.0 * k - 2.0 * log_likelihood;
    let bic = k * nf.ln() - 2.0 * log_likelihood;

    Ok(OlsFit {
        intercept: intercept_coef,
        slope,
        r2,
        adj_r2,
        log_likelihood,
        aic,
        bic,
        n_obs: n,
        residuals,
        fitted,
    })
}

/// Result of [`mape`]: the percentage error plus the zero-actual
/// exclusion count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Mape {
    /// 100 · mean(|actual − predicted| / |actual|) over included points.
    pub value: f64,
    /// Points excluded because the actual value was exactly zero.
    pub excluded: usize,
    pub n_used: usize,
}

/// Mean absolute percentage error, excluding exact-zero actuals.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<Mape> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            context: "mape",
            left: actual.len(),
            right: predicted.len(),
        });
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        if *a == 0.0 {
            excluded += 1;
        } else {
            sum += ((a - p) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::AllExcluded("mape: every actual value is zero"));
    }
    Ok(Mape {
        value: 100.0 * sum / used as f64,
        excluded,
        n_used: used,
    })
}

/// Naive volatility model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NaiveModel {
    /// Slope only: sigma_i = beta · sigma_m + eps.
    M1,
    /// Intercept and slope: sigma_i = alpha + beta · sigma_m + eps.
    M2,
}

impl std::fmt::Display for NaiveModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NaiveModel::M1 => write!(f, "M1"),
            NaiveModel::M2 => write!(f, "M2"),
        }
    }
}

/// Aggregated fit quality of one naive model across an asset panel at one
/// horizon. Percentage fields (significance share, adj-R², MAPE) are on
/// the 0–100 scale.
#[derive(Debug, Clone, Serialize)]
pub struct ModelComparison {
    pub horizon: String,
    pub model: NaiveModel,
    /// Share of assets whose slope is significant at p < 0.05.
    pub pct_beta_significant: f64,
    /// Mean adjusted R², percent.
    pub mean_adj_r2: f64,
    /// Mean in-sample MAPE of fitted vs. actual vols, percent.
    pub mean_mape: f64,
    pub mean_aic: f64,
    pub mean_bic: f64,
    pub n_assets: usize,
}

impl ModelComparison {
    pub fn csv_header() -> &'static str {
        "horizon,model,pct_beta_significant,mean_adj_r2,mean_mape,mean_aic,mean_bic"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.2},{:.2},{:.2},{:.4},{:.4}",
            self.horizon,
            self.model,
            self.pct_beta_significant,
            self.mean_adj_r2,
            self.mean_mape,
            self.mean_aic,
            self.mean_bic
        )
    }
}

/// Fits the chosen naive model per asset against the benchmark volatility
/// and aggregates into one comparison row.
pub fn naive_model_battery(
    asset_vols: &[VolSeries],
    market_vol: &VolSeries,
    model: NaiveModel,
    horizon: &str,
) -> Result<ModelComparison> {
    if asset_vols.is_empty() {
        return Err(Error::invalid("naive_model_battery: empty panel"));
    }
    let fits: Vec<Result<(bool, f64, f64, f64, f64)>> = asset_vols
        .par_iter()
        .map(|vol| {
            let (a, m) = align_vol_pair(vol, market_vol);
            let fit = ols(&a, &m, model == NaiveModel::M2)?;
            let mp = mape(&a, &fit.fitted)?;
            Ok((
                fit.slope.p_value < 0.05,
                fit.adj_r2,
                mp.value,
                fit.aic,
                fit.bic,
            ))
        })
        .collect();

    let mut n_sig = 0usize;
    let mut sum_adj = 0.0;
    let mut sum_mape = 0.0;
    let mut sum_aic = 0.0;
    let mut sum_bic = 0.0;
    let n = fits.len();
    for f in fits {
        let (sig, adj, mp, aic, bic) = f?;
        if sig {
            n_sig += 1;
        }
        sum_adj += adj;
        sum_mape += mp;
        sum_aic += aic;
        sum_bic += bic;
    }
    let nf = n as f64;
    Ok(ModelComparison {
        horizon: horizon.to_string(),
        model,
        pct_beta_significant: 100.0 * n_sig as f64 / nf,
        mean_adj_r2: 100.0 * sum_adj / nf,
        mean_mape: sum_mape / nf,
        mean_aic: sum_aic / nf,
        mean_bic: sum_bic / nf,
        n_assets: n,
    })
}

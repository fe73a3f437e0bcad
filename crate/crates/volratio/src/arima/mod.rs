//! Univariate ARIMA(p,d,q) estimation, automatic order selection, and
//! forecasting.
//!
//! - [`fit_arima`] maximizes the exact Gaussian likelihood of the
//!   ARMA(p,q) on the d-times-differenced series through the Kalman
//!   filter, with Hannan–Rissanen starting values and a
//!   stationarity/invertibility-preserving reparametrization, so every
//!   reported optimum satisfies the root conditions by construction.
//! - [`auto_order`] picks d by successive stationarity checks and (p,q)
//!   by a stepwise information-criterion search.
//! - [`forecast`] produces h-step point forecasts integrated back to
//!   levels, with standard errors from the cumulated psi-weights.
//! - [`order_census`] tabulates selected orders across a panel and scores
//!   the most frequent triple in-sample.

mod auto;
mod kalman;

pub use auto::{auto_order, order_census, AutoOrderConfig, InformationCriterion, OrderCensus};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::mean;
use kalman::{
    ar_to_unconstrained, is_stationary_ar, ma_to_unconstrained, run_filter, unconstrained_to_ar,
    unconstrained_to_ma, ArmaForm,
};
use crate::optim::{gradient_norm, nelder_mead_restarted, NmOptions};

/// An ARIMA order triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q }
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// A fitted ARIMA model. The AR polynomial 1 − φ_1B − ... − φ_pB^p is
/// stationary and the MA polynomial 1 + θ_1B + ... + θ_qB^q invertible.
#[derive(Debug, Clone, Serialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    /// Mean of the differenced series (0 when fitted without intercept).
    pub intercept: f64,
    /// Innovation variance (concentrated maximum-likelihood estimate).
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    /// Effective observations after differencing.
    pub n_obs: usize,
}

impl ArimaModel {
    /// Builds a model from explicit coefficients, enforcing the root
    /// invariants. Likelihood-derived fields are meaningless here and set
    /// to NaN; use [`fit_arima`] for estimated models.
    pub fn from_parts(
        order: ArimaOrder,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        intercept: f64,
        sigma2: f64,
    ) -> Result<Self> {
        if ar_coeffs.len() != order.p || ma_coeffs.len() != order.q {
            return Err(Error::invalid(
                "from_parts: coefficient lengths do not match the order",
            ));
        }
        if !is_stationary_ar(&ar_coeffs) {
            return Err(Error::invalid(
                "from_parts: AR polynomial has a root inside the unit circle",
            ));
        }
        let flipped: Vec<f64> = ma_coeffs.iter().map(|v| -v).collect();
        if !is_stationary_ar(&flipped) {
            return Err(Error::invalid(
                "from_parts: MA polynomial has a root inside the unit circle",
            ));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                message: "must be positive and finite".into(),
            });
        }
        Ok(ArimaModel {
            order,
            ar_coeffs,
            ma_coeffs,
            intercept,
            sigma2,
            log_likelihood: f64::NAN,
            aic: f64::NAN,
            bic: f64::NAN,
            n_obs: 0,
        })
    }
}

/// First difference applied `d` times.
pub(crate) fn difference(x: &[f64], d: usize) -> Vec<f64> {
    let mut cur = x.to_vec();
    for _ in 0..d {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    cur
}

/// Number of free parameters including the innovation variance.
fn param_count(p: usize, q: usize, intercept: bool) -> f64 {
    (p + q + usize::from(intercept) + 1) as f64
}

struct HrStart {
    mu: f64,
    ar: Vec<f64>,
    ma: Vec<f64>,
}

/// Hannan–Rissanen starting values: a long autoregression supplies proxy
/// innovations, then one OLS pass on lagged values and lagged proxies
/// gives initial AR/MA coefficients. Invalid (non-stationary or
/// non-invertible) starts are shrunk toward zero.
fn hannan_rissanen(w: &[f64], p: usize, q: usize, intercept: bool) -> HrStart {
    let n = w.len();
    let mu = if intercept { mean(w) } else { 0.0 };
    let z: Vec<f64> = w.iter().map(|v| v - mu).collect();

    let zeros = HrStart {
        mu,
        ar: vec![0.0; p],
        ma: vec![0.0; q],
    };
    if p == 0 && q == 0 {
        return zeros;
    }

    let fit_lags = |targets: &[f64], regs: &[Vec<f64>]| -> Option<Vec<f64>> {
        let rows = targets.len();
        let cols = regs.len();
        if rows <= cols + 2 || cols == 0 {
            return None;
        }
        let design = nalgebra::DMatrix::from_fn(rows, cols, |i, j| regs[j][i]);
        let yv = nalgebra::DVector::from_column_slice(targets);
        crate::linalg::ols_solve(&design, &yv)
            .ok()
            .map(|s| s.coef.iter().copied().collect())
    };

    let (mut ar0, mut ma0) = if q == 0 {
        // Pure AR: directly regress z_t on its first p lags.
        let rows = n.saturating_sub(p);
        let targets: Vec<f64> = z[p..].to_vec();
        let regs: Vec<Vec<f64>> = (1..=p)
            .map(|lag| (p..n).map(|t| z[t - lag]).collect())
            .collect();
        match fit_lags(&targets, &regs) {
            Some(c) if rows > p + 2 => (c, Vec::new()),
            _ => return zeros,
        }
    } else {
        // Stage 1: long AR for proxy innovations.
        let l = (p + q + 3).max(5).min(n / 4);
        if l == 0 || n <= l + p + q + 3 {
            return zeros;
        }
        let targets: Vec<f64> = z[l..].to_vec();
        let regs: Vec<Vec<f64>> = (1..=l)
            .map(|lag| (l..n).map(|t| z[t - lag]).collect())
            .collect();
        let long_ar = match fit_lags(&targets, &regs) {
            Some(c) => c,
            None => return zeros,
        };
        let mut eps = vec![0.0; n];
        for t in l..n {
            let pred: f64 = (1..=l).map(|lag| long_ar[lag - 1] * z[t - lag]).sum();
            eps[t] = z[t] - pred;
        }
        // Stage 2: regress on value lags and proxy-innovation lags over
        // the common sample.
        let start = l + p.max(q);
        if n <= start + p + q + 3 {
            return zeros;
        }
        let targets: Vec<f64> = z[start..].to_vec();
        let mut regs: Vec<Vec<f64>> = Vec::with_capacity(p + q);
        for lag in 1..=p {
            regs.push((start..n).map(|t| z[t - lag]).collect());
        }
        for lag in 1..=q {
            regs.push((start..n).map(|t| eps[t - lag]).collect());
        }
        match fit_lags(&targets, &regs) {
            Some(c) => (c[..p].to_vec(), c[p..].to_vec()),
            None => return zeros,
        }
    };

    // Shrink toward zero until both polynomials satisfy the root bounds.
    for _ in 0..200 {
        let ma_flipped: Vec<f64> = ma0.iter().map(|v| -v).collect();
        if is_stationary_ar(&ar0) && is_stationary_ar(&ma_flipped) {
            return HrStart {
                mu,
                ar: ar0,
                ma: ma0,
            };
        }
        for c in ar0.iter_mut().chain(ma0.iter_mut()) {
            *c *= 0.9;
        }
    }
    zeros
}

fn pack_start(start: &HrStart, intercept: bool) -> Vec<f64> {
    let mut x = Vec::with_capacity(start.ar.len() + start.ma.len() + 1);
    if intercept {
        x.push(start.mu);
    }
    x.extend(ar_to_unconstrained(&start.ar).unwrap_or_else(|| vec![0.0; start.ar.len()]));
    x.extend(ma_to_unconstrained(&start.ma).unwrap_or_else(|| vec![0.0; start.ma.len()]));
    x
}

/// Fits an ARIMA(p,d,q) by exact Gaussian maximum likelihood on the
/// d-times-differenced series. The intercept, when requested, is the mean
/// of the differenced series and is estimated jointly.
pub fn fit_arima(x: &[f64], order: ArimaOrder, intercept: bool) -> Result<ArimaModel> {
    let ArimaOrder { p, d, q } = order;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit_arima input"));
    }
    let min = 25 + p + d + q;
    if x.len() < min {
        return Err(Error::SeriesTooShort {
            context: "fit_arima",
            len: x.len(),
            min,
        });
    }
    let w = difference(x, d);
    let n = w.len();
    let nf = n as f64;

    let finish = |ar: Vec<f64>, ma: Vec<f64>, mu: f64, sigma2: f64, ll: f64| -> Result<ArimaModel> {
        let k = param_count(p, q, intercept);
        Ok(ArimaModel {
            order,
            ar_coeffs: ar,
            ma_coeffs: ma,
            intercept: mu,
            sigma2,
            log_likelihood: ll,
            aic: 2.0 * k - 2.0 * ll,
            bic: k * nf.ln() - 2.0 * ll,
            n_obs: n,
        })
    };

    if p == 0 && q == 0 {
        // Degenerate white-noise case: closed form.
        let mu = if intercept { mean(&w) } else { 0.0 };
        let ssq: f64 = w.iter().map(|v| (v - mu) * (v - mu)).sum();
        let sigma2 = ssq / nf;
        if !(sigma2 > 0.0) {
            return Err(Error::invalid(
                "fit_arima: differenced series has zero variance",
            ));
        }
        let ll = -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
        return finish(Vec::new(), Vec::new(), mu, sigma2, ll);
    }

    let unpack = |params: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let (mu, rest) = if intercept {
            (params[0], &params[1..])
        } else {
            (0.0, params)
        };
        (mu, unconstrained_to_ar(&rest[..p]), unconstrained_to_ma(&rest[p..]))
    };
    let objective = |params: &[f64]| -> f64 {
        let (mu, ar, ma) = unpack(params);
        let z: Vec<f64> = w.iter().map(|v| v - mu).collect();
        match run_filter(&z, &ar, &ma) {
            Some(run) => -run.loglik,
            None => f64::INFINITY,
        }
    };

    let hr = hannan_rissanen(&w, p, q, intercept);
    let base = pack_start(&hr, intercept);
    let mut zero_coeffs = vec![0.0; base.len()];
    if intercept {
        zero_coeffs[0] = hr.mu;
    }
    let starts: Vec<Vec<f64>> = vec![
        base.clone(),
        zero_coeffs,
        base.iter().map(|v| v + 0.3).collect(),
        base.iter().map(|v| v - 0.3).collect(),
    ];

    let opts = NmOptions {
        max_iterations: 4000,
        f_tolerance: 1e-10,
        initial_step: 0.2,
    };
    let mut best: Option<crate::optim::NmResult> = None;
    for start in &starts {
        let res = nelder_mead_restarted(objective, start, &opts);
        let better = match &best {
            Some(b) => res.fx < b.fx,
            None => true,
        };
        if better && res.fx.is_finite() {
            best = Some(res);
        }
        if best.as_ref().map(|b| b.converged).unwrap_or(false) {
            break;
        }
    }
    let best = best.ok_or(Error::AllFitsFailed(starts.len()))?;
    if !best.converged {
        return Err(Error::NoConvergence {
            iterations: best.iterations,
            spread: best.spread,
            grad_norm: gradient_norm(objective, &best.x),
        });
    }

    let (mu, ar, ma) = unpack(&best.x);
    let z: Vec<f64> = w.iter().map(|v| v - mu).collect();
    let run = run_filter(&z, &ar, &ma)
        .ok_or_else(|| Error::invalid("fit_arima: filter failed at the reported optimum"))?;
    finish(ar, ma, mu, run.sigma2, run.loglik)
}

/// Point forecasts with standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct Forecast {
    /// Level-scale point forecasts for horizons 1..=h.
    pub values: Vec<f64>,
    /// Forecast standard errors, nondecreasing in the horizon.
    pub standard_errors: Vec<f64>,
}

/// Psi-weights of theta(B) / (phi(B)(1−B)^d), the moving-average
/// representation driving forecast-error variances.
fn psi_weights(ar: &[f64], ma: &[f64], d: usize, h: usize) -> Vec<f64> {
    // Full autoregressive polynomial in the 1 + c_1B + ... convention.
    let mut c = vec![1.0];
    let mut base = vec![1.0];
    base.extend(ar.iter().map(|v| -v));
    c = poly_mul(&c, &base);
    for _ in 0..d {
        c = poly_mul(&c, &[1.0, -1.0]);
    }
    let mut psi = vec![0.0; h];
    if h == 0 {
        return psi;
    }
    psi[0] = 1.0;
    for j in 1..h {
        let mut s = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for i in 1..=j.min(c.len() - 1) {
            s -= c[i] * psi[j - i];
        }
        psi[j] = s;
    }
    psi
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Forecasts `h` steps ahead from the end of `x` under `model`. For
/// integrated models the forecasts are accumulated back to the level
/// scale from the last observed values.
pub fn forecast(model: &ArimaModel, x: &[f64], h: usize) -> Result<Forecast> {
    if h == 0 {
        return Err(Error::InvalidParameter {
            name: "h",
            message: "forecast horizon must be at least 1".into(),
        });
    }
    let d = model.order.d;
    if x.len() < d + 1 {
        return Err(Error::SeriesTooShort {
            context: "forecast",
            len: x.len(),
            min: d + 1,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forecast input"));
    }

    let w = difference(x, d);
    let z: Vec<f64> = w.iter().map(|v| v - model.intercept).collect();
    let run = run_filter(&z, &model.ar_coeffs, &model.ma_coeffs).ok_or_else(|| {
        Error::UnstableForecast("state filter degenerated on the supplied series".into())
    })?;

    let form = ArmaForm::new(&model.ar_coeffs, &model.ma_coeffs);
    let mut state = run.final_state;
    let mut diff_forecasts = Vec::with_capacity(h);
    for _ in 0..h {
        diff_forecasts.push(state[0] + model.intercept);
        state = &form.t_mat * state;
    }

    // Last observed value of each difference order 0..d, used to
    // accumulate the differenced forecasts back to levels.
    let mut tails = Vec::with_capacity(d);
    let mut cur = x.to_vec();
    for _ in 0..d {
        tails.push(*cur.last().expect("nonempty by precondition"));
        cur = difference(&cur, 1);
    }
    let mut values = Vec::with_capacity(h);
    for &wf in &diff_forecasts {
        let mut v = wf;
        for k in (0..d).rev() {
            v += tails[k];
            tails[k] = v;
        }
        values.push(v);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::UnstableForecast(
            "forecast diverged to a non-finite value".into(),
        ));
    }

    let psi = psi_weights(&model.ar_coeffs, &model.ma_coeffs, d, h);
    let mut cum = 0.0;
    let standard_errors = psi
        .iter()
        .map(|p| {
            cum += p * p;
            (model.sigma2 * cum).sqrt()
        })
        .collect();

    Ok(Forecast {
        values,
        standard_errors,
    })
}

/// One-step-ahead fitted values on the level scale, paired with the
/// levels they predict (the first `d` observations have no prediction).
pub(crate) fn one_step_fitted(model: &ArimaModel, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.order.d;
    if x.len() < d + 1 {
        return Err(Error::SeriesTooShort {
            context: "one_step_fitted",
            len: x.len(),
            min: d + 1,
        });
    }
    let w = difference(x, d);
    let z: Vec<f64> = w.iter().map(|v| v - model.intercept).collect();
    let run = run_filter(&z, &model.ar_coeffs, &model.ma_coeffs)
        .ok_or_else(|| Error::invalid("one_step_fitted: filter degenerated"))?;
    let actual: Vec<f64> = x[d..].to_vec();
    let fitted: Vec<f64> = actual
        .iter()
        .zip(&run.innovations)
        .map(|(level, v)| level - v)
        .collect();
    Ok((actual, fitted))
}

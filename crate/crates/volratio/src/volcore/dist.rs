//! Distributional diagnostics for volatility-ratio series.
//!
//! Volatility ratios are strictly positive and empirically heavy-tailed in
//! logs, so the diagnostics work on ln(ratio): moments, normal QQ points,
//! and the degrees of freedom of a location-scale Student-t fitted by
//! maximum likelihood (EM for location/scale at fixed dof, profiled over a
//! log-spaced dof grid and refined by golden-section search).

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats;

/// Upper bound for the fitted t degrees of freedom; effectively Gaussian.
const MAX_DOF: f64 = 300.0;
const MIN_DOF: f64 = 1.0;

/// Diagnostics for the log of a ratio series.
#[derive(Debug, Clone, Serialize)]
pub struct DistDiagnostics {
    pub n: usize,
    /// Ratios dropped because they were not strictly positive.
    pub excluded_nonpositive: usize,
    pub log_mean: f64,
    pub log_std: f64,
    pub log_skewness: f64,
    pub log_excess_kurtosis: f64,
    /// (theoretical standard-normal quantile, standardized empirical
    /// quantile) pairs, both nondecreasing.
    pub qq: Vec<(f64, f64)>,
    /// ML degrees of freedom of a location-scale Student-t on the logs,
    /// capped at 300 (values that large are indistinguishable from normal).
    pub fitted_t_dof: f64,
    pub fitted_t_location: f64,
    pub fitted_t_scale: f64,
}

/// Log-likelihood of a location-scale Student-t sample.
fn t_log_likelihood(xs: &[f64], mu: f64, s: f64, nu: f64) -> f64 {
    let n = xs.len() as f64;
    let c = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - s.ln();
    let mut ll = n * c;
    for &x in xs {
        let d = (x - mu) / s;
        ll -= 0.5 * (nu + 1.0) * (d * d / nu).ln_1p();
    }
    ll
}

/// EM iteration for location and scale at fixed dof. Returns (mu, s, ll).
fn t_em_fixed_dof(xs: &[f64], nu: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mut mu = stats::mean(xs);
    let mut s2 = stats::sample_variance(xs).max(1e-300);
    for _ in 0..500 {
        let s = s2.sqrt();
        let mut wsum = 0.0;
        let mut wx = 0.0;
        for &x in xs {
            let d = (x - mu) / s;
            let w = (nu + 1.0) / (nu + d * d);
            wsum += w;
            wx += w * x;
        }
        let mu_new = wx / wsum;
        let mut s2_new = 0.0;
        for &x in xs {
            let d = (x - mu) / s;
            let w = (nu + 1.0) / (nu + d * d);
            s2_new += w * (x - mu_new) * (x - mu_new);
        }
        s2_new /= n;
        s2_new = s2_new.max(1e-300);
        let delta = (mu_new - mu).abs() + (s2_new - s2).abs();
        mu = mu_new;
        s2 = s2_new;
        if delta < 1e-12 * (1.0 + s2) {
            break;
        }
    }
    let s = s2.sqrt();
    (mu, s, t_log_likelihood(xs, mu, s, nu))
}

/// Profile ML over dof: coarse log-spaced grid, then golden-section
/// refinement of ln(dof) around the grid maximum.
fn fit_t_dof(xs: &[f64]) -> (f64, f64, f64) {
    const GRID: usize = 41;
    let lo = MIN_DOF.ln();
    let hi = MAX_DOF.ln();
    let mut best = (MIN_DOF, f64::NEG_INFINITY, 0usize);
    for i in 0..GRID {
        let nu = (lo + (hi - lo) * i as f64 / (GRID - 1) as f64).exp();
        let (_, _, ll) = t_em_fixed_dof(xs, nu);
        if ll > best.1 {
            best = (nu, ll, i);
        }
    }
    // Bracket the maximum with the neighboring grid points.
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut a = (best.0.ln() - step).max(lo);
    let mut b = (best.0.ln() + step).min(hi);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = t_em_fixed_dof(xs, c.exp()).2;
    let mut fd = t_em_fixed_dof(xs, d.exp()).2;
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = t_em_fixed_dof(xs, c.exp()).2;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = t_em_fixed_dof(xs, d.exp()).2;
        }
        if (b - a).abs() < 1e-6 {
            break;
        }
    }
    let nu = ((a + b) / 2.0).exp();
    let (mu, s, _) = t_em_fixed_dof(xs, nu);
    (mu, s, nu)
}

/// Distributional diagnostics of a positive ratio series.
///
/// Non-positive ratios cannot be log-transformed; they are excluded and
/// counted. At least 8 usable values are required.
pub fn hvr_distribution(ratios: &[f64]) -> Result<DistDiagnostics> {
    let mut logs: Vec<f64> = Vec::with_capacity(ratios.len());
    let mut excluded = 0usize;
    for &r in ratios {
        if r > 0.0 && r.is_finite() {
            logs.push(r.ln());
        } else {
            excluded += 1;
        }
    }
    if logs.len() < 8 {
        return Err(Error::SeriesTooShort {
            context: "hvr_distribution",
            len: logs.len(),
            min: 8,
        });
    }

    let n = logs.len();
    let log_mean = stats::mean(&logs);
    let log_std = stats::sample_std(&logs);
    let log_skewness = stats::skewness(&logs);
    let log_excess_kurtosis = stats::excess_kurtosis(&logs);

    let mut sorted = logs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let denom = if log_std > 0.0 { log_std } else { 1.0 };
    let qq: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = (i as f64 + 0.5) / n as f64;
            (normal.inverse_cdf(p), (x - log_mean) / denom)
        })
        .collect();

    let (fitted_t_location, fitted_t_scale, fitted_t_dof) = fit_t_dof(&logs);

    Ok(DistDiagnostics {
        n,
        excluded_nonpositive: excluded,
        log_mean,
        log_std,
        log_skewness,
        log_excess_kurtosis,
        qq,
        fitted_t_dof,
        fitted_t_location,
        fitted_t_scale,
    })
}

//! GARCH(1,1) estimation by Gaussian quasi-maximum likelihood.
//!
//! Model: r_t = sigma_t z_t with
//!
//! ```text
//! sigma²_t = omega + alpha r²_{t-1} + beta sigma²_{t-1}
//! ```
//!
//! The recursion is initialized at the sample variance of the returns.
//! Optimization runs over an unconstrained reparameterization that
//! enforces omega > 0, alpha ≥ 0, beta ≥ 0 and the stationarity cap
//! alpha + beta ≤ 0.9999, starting from a variance-targeting initializer
//! (alpha = 0.05, beta = 0.90, omega matching the sample variance).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{self, NmOptions};
use crate::stats;

/// Minimum number of observations accepted by [`fit_garch11`].
pub const MIN_OBS: usize = 100;

const PERSISTENCE_CAP: f64 = 0.9999;

/// A fitted GARCH(1,1) model together with its terminal filter state.
#[derive(Debug, Clone, Serialize)]
pub struct GarchModel {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub log_likelihood: f64,
    pub n_obs: usize,
    /// sigma²_n: conditional variance at the final in-sample step.
    pub last_sigma2: f64,
    /// r²_n: final squared return.
    pub last_eps2: f64,
    pub iterations: usize,
}

impl GarchModel {
    /// Persistence alpha + beta.
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Unconditional variance omega / (1 − alpha − beta).
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    /// One-step-ahead conditional variance sigma²_{n+1|n}.
    pub fn one_step_variance(&self) -> f64 {
        self.omega + self.alpha * self.last_eps2 + self.beta * self.last_sigma2
    }

    /// One-step-ahead conditional volatility sigma_{n+1|n}.
    pub fn one_step_volatility(&self) -> f64 {
        self.one_step_variance().sqrt()
    }

    /// Multi-step variance forecasts sigma²_{n+j|n} for j = 1..=h, which
    /// decay geometrically toward the unconditional variance.
    pub fn forecast_variances(&self, h: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(h);
        let mut v = self.one_step_variance();
        for _ in 0..h {
            out.push(v);
            v = self.omega + self.persistence() * v;
        }
        out
    }
}

fn params_from_unconstrained(x: &[f64]) -> (f64, f64, f64) {
    let omega = x[0].exp();
    let s = PERSISTENCE_CAP / (1.0 + (-x[1]).exp());
    let f = 1.0 / (1.0 + (-x[2]).exp());
    let alpha = s * f;
    let beta = s - alpha;
    (omega, alpha, beta)
}

fn unconstrained_from_params(omega: f64, alpha: f64, beta: f64) -> [f64; 3] {
    let s = (alpha + beta).clamp(1e-6, PERSISTENCE_CAP * (1.0 - 1e-9));
    let f = (alpha / s).clamp(1e-9, 1.0 - 1e-9);
    [
        omega.ln(),
        (s / (PERSISTENCE_CAP - s)).ln(),
        (f / (1.0 - f)).ln(),
    ]
}

/// Negative average Gaussian log-likelihood (constants included) of the
/// GARCH(1,1) recursion for the given returns.
fn neg_log_likelihood(returns: &[f64], sigma2_init: f64, omega: f64, alpha: f64, beta: f64) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    let mut sigma2 = sigma2_init;
    let mut nll = 0.0;
    for (t, r) in returns.iter().enumerate() {
        if t > 0 {
            let prev = returns[t - 1];
            sigma2 = omega + alpha * prev * prev + beta * sigma2;
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return f64::INFINITY;
        }
        nll += 0.5 * (LN_2PI + sigma2.ln() + r * r / sigma2);
    }
    nll
}

/// Fits GARCH(1,1) to a return series by quasi-maximum likelihood.
///
/// Requires at least [`MIN_OBS`] observations — short samples make the
/// likelihood surface too flat for the persistence split to be meaningful.
pub fn fit_garch11(returns: &[f64]) -> Result<GarchModel> {
    if returns.len() < MIN_OBS {
        return Err(Error::SeriesTooShort {
            context: "fit_garch11",
            len: returns.len(),
            min: MIN_OBS,
        });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("fit_garch11 input"));
    }
    let sample_var = stats::sample_variance(returns);
    if !(sample_var > 0.0) {
        return Err(Error::invalid(
            "fit_garch11: returns have zero sample variance",
        ));
    }

    let alpha0 = 0.05;
    let beta0 = 0.90;
    let omega0 = sample_var * (1.0 - alpha0 - beta0);
    let x0 = unconstrained_from_params(omega0, alpha0, beta0);

    let objective = |x: &[f64]| {
        let (omega, alpha, beta) = params_from_unconstrained(x);
        neg_log_likelihood(returns, sample_var, omega, alpha, beta)
    };
    let opts = NmOptions {
        max_iterations: 4000,
        f_tolerance: 1e-10,
        initial_step: 0.2,
    };
    let res = optim::nelder_mead_restarted(objective, &x0, &opts);
    if !res.converged {
        let grad_norm = optim::gradient_norm(objective, &res.x);
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            spread: res.spread,
            grad_norm,
        });
    }

    let (omega, alpha, beta) = params_from_unconstrained(&res.x);
    // Re-run the filter to capture the terminal state.
    let mut sigma2 = sample_var;
    for t in 1..returns.len() {
        let prev = returns[t - 1];
        sigma2 = omega + alpha * prev * prev + beta * sigma2;
    }
    let last = returns[returns.len() - 1];
    Ok(GarchModel {
        omega,
        alpha,
        beta,
        log_likelihood: -res.fx,
        n_obs: returns.len(),
        last_sigma2: sigma2,
        last_eps2: last * last,
        iterations: res.iterations,
    })
}

/// Dynamic volatility ratio: the ratio of one-step-ahead conditional
/// volatility forecasts, sigma_{i,n+1|n} / sigma_{m,n+1|n}.
pub fn dvr(asset: &GarchModel, market: &GarchModel) -> f64 {
    asset.one_step_volatility() / market.one_step_volatility()
}

/// Simulates a GARCH(1,1) path (used by tests and synthetic benchmarks).
#[cfg(test)]
pub(crate) fn simulate_garch11(
    omega: f64,
    alpha: f64,
    beta: f64,
    n: usize,
    burn_in: usize,
    rng: &mut impl rand::Rng,
) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut sigma2 = omega / (1.0 - alpha - beta);
    let mut out = Vec::with_capacity(n);
    let mut prev_r = 0.0;
    for t in 0..(n + burn_in) {
        if t > 0 {
            sigma2 = omega + alpha * prev_r * prev_r + beta * sigma2;
        }
        let z: f64 = StandardNormal.sample(rng);
        let r = sigma2.sqrt() * z;
        if t >= burn_in {
            out.push(r);
        }
        prev_r = r;
    }
    out
}

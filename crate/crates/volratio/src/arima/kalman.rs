//! State-space evaluation of the exact Gaussian ARMA likelihood.
//!
//! An ARMA(p,q) process is cast in the Harvey companion form with state
//! dimension m = max(p, q+1):
//!
//! ```text
//! alpha_{t+1} = T alpha_t + R eps_{t+1},    y_t = alpha_t[0]
//! ```
//!
//! where T carries the AR coefficients in its first column and an identity
//! superdiagonal, and R = (1, theta_1, ..., theta_q)'. The Kalman filter is
//! run with unit innovation variance; sigma² is concentrated out in closed
//! form, and the initial state covariance is the exact stationary solution
//! of the discrete Lyapunov equation.
//!
//! Also houses the bijection between unconstrained reals and
//! stationary/invertible coefficient vectors via tanh-mapped partial
//! autocorrelations and the Durbin–Levinson recursion.

use nalgebra::{DMatrix, DVector};

use crate::linalg::solve_discrete_lyapunov;

/// Companion-form matrices for an ARMA(p,q) process.
pub(crate) struct ArmaForm {
    pub t_mat: DMatrix<f64>,
    pub r_vec: DVector<f64>,
}

impl ArmaForm {
    pub fn new(ar: &[f64], ma: &[f64]) -> Self {
        let m = ar.len().max(ma.len() + 1).max(1);
        let mut t_mat = DMatrix::zeros(m, m);
        for (i, &phi) in ar.iter().enumerate() {
            t_mat[(i, 0)] = phi;
        }
        for i in 0..m - 1 {
            t_mat[(i, i + 1)] = 1.0;
        }
        let mut r_vec = DVector::zeros(m);
        r_vec[0] = 1.0;
        for (j, &theta) in ma.iter().enumerate() {
            r_vec[j + 1] = theta;
        }
        ArmaForm { t_mat, r_vec }
    }
}

/// Output of one filtering pass over a (mean-adjusted) series.
pub(crate) struct FilterRun {
    /// Exact log-likelihood at the concentrated innovation variance.
    pub loglik: f64,
    /// Concentrated innovation variance estimate.
    pub sigma2: f64,
    /// One-step-ahead prediction errors v_t.
    pub innovations: Vec<f64>,
    /// Predicted state for the period after the last observation.
    pub final_state: DVector<f64>,
}

/// Runs the Kalman filter for an ARMA(p,q) on `y` (already mean-adjusted).
/// Returns `None` when the recursion degenerates numerically, which the
/// optimizer treats as an infinite objective.
pub(crate) fn run_filter(y: &[f64], ar: &[f64], ma: &[f64]) -> Option<FilterRun> {
    let n = y.len();
    if n == 0 {
        return None;
    }
    let form = ArmaForm::new(ar, ma);
    let q_mat = &form.r_vec * form.r_vec.transpose();
    let mut p_mat = solve_discrete_lyapunov(&form.t_mat, &q_mat).ok()?;
    let m = form.t_mat.nrows();
    let mut a = DVector::<f64>::zeros(m);

    let mut ssq = 0.0;
    let mut sum_log_f = 0.0;
    let mut innovations = Vec::with_capacity(n);
    for &yt in y {
        let f = p_mat[(0, 0)];
        if !f.is_finite() || f <= 1e-300 {
            return None;
        }
        let v = yt - a[0];
        innovations.push(v);
        ssq += v * v / f;
        sum_log_f += f.ln();

        // Measurement update: observation is the first state component and
        // carries no noise, so the gain is P e1 / f.
        let gain = p_mat.column(0) / f;
        let a_filt = &a + &gain * v;
        let p_filt = &p_mat - &gain * p_mat.row(0);
        a = &form.t_mat * a_filt;
        let p_next = &form.t_mat * p_filt * form.t_mat.transpose() + &q_mat;
        p_mat = (&p_next + p_next.transpose()) * 0.5;
    }

    let nf = n as f64;
    let sigma2 = ssq / nf;
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return None;
    }
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + 1.0)
        - 0.5 * nf * sigma2.ln()
        - 0.5 * sum_log_f;
    if !loglik.is_finite() {
        return None;
    }
    Some(FilterRun {
        loglik,
        sigma2,
        innovations,
        final_state: a,
    })
}

/// Durbin–Levinson: maps partial autocorrelations (each in (−1,1)) to the
/// coefficients of a stationary AR polynomial 1 − c_1 B − ... − c_k B^k.
pub(crate) fn pacf_to_ar(pacf: &[f64]) -> Vec<f64> {
    let k = pacf.len();
    let mut cur = vec![0.0; k];
    let mut prev = vec![0.0; k];
    for j in 0..k {
        let pj = pacf[j];
        for i in 0..j {
            cur[i] = prev[i] - pj * prev[j - 1 - i];
        }
        cur[j] = pj;
        prev[..=j].copy_from_slice(&cur[..=j]);
    }
    cur
}

/// Inverse Durbin–Levinson. Returns `None` when the coefficients do not
/// correspond to a stationary polynomial (some implied partial
/// autocorrelation ≥ 1 in magnitude).
pub(crate) fn ar_to_pacf(ar: &[f64]) -> Option<Vec<f64>> {
    let k = ar.len();
    let mut work = ar.to_vec();
    let mut pacf = vec![0.0; k];
    for j in (0..k).rev() {
        let pj = work[j];
        if !pj.is_finite() || pj.abs() >= 1.0 {
            return None;
        }
        pacf[j] = pj;
        if j > 0 {
            let denom = 1.0 - pj * pj;
            let prev: Vec<f64> = (0..j)
                .map(|i| (work[i] + pj * work[j - 1 - i]) / denom)
                .collect();
            work[..j].copy_from_slice(&prev);
        }
    }
    Some(pacf)
}

/// Unconstrained reals → stationary AR coefficients.
pub(crate) fn unconstrained_to_ar(x: &[f64]) -> Vec<f64> {
    let pacf: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
    pacf_to_ar(&pacf)
}

/// Stationary AR coefficients → unconstrained reals.
pub(crate) fn ar_to_unconstrained(ar: &[f64]) -> Option<Vec<f64>> {
    let pacf = ar_to_pacf(ar)?;
    Some(
        pacf.iter()
            .map(|v| v.clamp(-1.0 + 1e-10, 1.0 - 1e-10).atanh())
            .collect(),
    )
}

/// Unconstrained reals → invertible MA coefficients (polynomial
/// 1 + theta_1 B + ... with roots outside the unit circle).
pub(crate) fn unconstrained_to_ma(x: &[f64]) -> Vec<f64> {
    unconstrained_to_ar(x).iter().map(|v| -v).collect()
}

/// Invertible MA coefficients → unconstrained reals.
pub(crate) fn ma_to_unconstrained(ma: &[f64]) -> Option<Vec<f64>> {
    let flipped: Vec<f64> = ma.iter().map(|v| -v).collect();
    ar_to_unconstrained(&flipped)
}

/// True when 1 − c_1 B − ... − c_k B^k has all roots outside the unit circle.
pub(crate) fn is_stationary_ar(coeffs: &[f64]) -> bool {
    ar_to_pacf(coeffs).is_some()
}

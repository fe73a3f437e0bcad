//! KPSS test for level stationarity.
//!
//! Statistic: eta = sum_t S_t² / (n² s²_lr), where S_t are partial sums of
//! the demeaned series and s²_lr is the Bartlett-kernel Newey–West
//! long-run variance with bandwidth floor(4 (n/100)^{1/4}) by default.
//! The null hypothesis is stationarity (the reverse of the ADF null), so
//! large statistics reject stationarity.

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper-tail critical values for the level-stationarity statistic.
pub const KPSS_CRITICAL_VALUES: [(f64, f64); 4] = [
    (0.10, 0.347),
    (0.05, 0.463),
    (0.025, 0.574),
    (0.01, 0.739),
];

#[derive(Debug, Clone, Serialize)]
pub struct KpssResult {
    pub statistic: f64,
    pub bandwidth: usize,
    pub n_obs: usize,
}

impl KpssResult {
    /// True when level stationarity is rejected at the given significance
    /// level, which must be one of 0.10, 0.05, 0.025, 0.01.
    pub fn rejects_at(&self, alpha: f64) -> Result<bool> {
        for (level, crit) in KPSS_CRITICAL_VALUES {
            if (alpha - level).abs() < 1e-9 {
                return Ok(self.statistic > crit);
            }
        }
        Err(Error::InvalidParameter {
            name: "alpha",
            message: format!("KPSS critical values available at 0.10/0.05/0.025/0.01, got {alpha}"),
        })
    }
}

fn default_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// KPSS level-stationarity test.
pub fn kpss_test(x: &[f64], bandwidth: Option<usize>) -> Result<KpssResult> {
    let n = x.len();
    if n < 12 {
        return Err(Error::SeriesTooShort {
            context: "kpss_test",
            len: n,
            min: 12,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kpss_test input"));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let e: Vec<f64> = x.iter().map(|v| v - mean).collect();

    let mut partial = 0.0;
    let mut sum_s2 = 0.0;
    for &et in &e {
        partial += et;
        sum_s2 += partial * partial;
    }

    let bw = bandwidth.unwrap_or_else(|| default_bandwidth(n)).min(n - 1);
    let mut lrv = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for j in 1..=bw {
        let mut gamma_j = 0.0;
        for t in j..n {
            gamma_j += e[t] * e[t - j];
        }
        gamma_j /= n as f64;
        let w = 1.0 - j as f64 / (bw + 1) as f64;
        lrv += 2.0 * w * gamma_j;
    }
    if !(lrv > 0.0) {
        return Err(Error::invalid("kpss_test: nonpositive long-run variance"));
    }

    Ok(KpssResult {
        statistic: sum_s2 / (n as f64 * n as f64 * lrv),
        bandwidth: bw,
        n_obs: n,
    })
}

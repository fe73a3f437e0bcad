//! Core volatility estimators and volatility ratios.
//!
//! Two ratio notions are provided:
//!
//! - the historical volatility ratio (HVR): rolling realized volatility of
//!   an asset divided by the rolling realized volatility of a market
//!   benchmark over the same window, σ_{i,t}^{(k)} / σ_{m,t}^{(k)};
//! - the dynamic volatility ratio (DVR): the ratio of one-step-ahead
//!   conditional volatility forecasts from GARCH(1,1) fits of asset and
//!   market returns, σ_{i,t+1|t} / σ_{m,t+1|t}.
//!
//! Realized volatility is the unbiased sample standard deviation (k − 1
//! divisor, mean subtracted) of the k most recent log returns, reported in
//! per-period units with no annualization.

mod dist;
mod garch;

pub use dist::{hvr_distribution, DistDiagnostics};
pub use garch::{dvr, fit_garch11, GarchModel};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{Frequency, ReturnSeries};
use crate::stats;

/// Rolling realized-volatility series.
#[derive(Debug, Clone, Serialize)]
pub struct VolSeries {
    pub asset_id: String,
    pub frequency: Frequency,
    /// Rolling window length in observations.
    pub window: usize,
    /// Timestamp of the last return in each window.
    pub timestamps: Vec<i64>,
    pub sigmas: Vec<f64>,
}

impl VolSeries {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// `timestamp,value` CSV representation, full float precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,value\n");
        for (ts, v) in self.timestamps.iter().zip(&self.sigmas) {
            out.push_str(&format!("{ts},{v}\n"));
        }
        out
    }

    /// JSON metadata sidecar describing the series.
    pub fn metadata_json(&self) -> String {
        serde_json::json!({
            "asset": self.asset_id,
            "frequency": self.frequency,
            "window": self.window,
            "n_obs": self.len(),
        })
        .to_string()
    }
}

/// Which ratio a [`RatioSeries`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Hvr,
    Dvr,
}

/// A volatility-ratio series (asset relative to benchmark).
#[derive(Debug, Clone, Serialize)]
pub struct RatioSeries {
    pub asset_id: String,
    pub benchmark_id: String,
    pub kind: RatioKind,
    pub window: usize,
    pub timestamps: Vec<i64>,
    pub ratios: Vec<f64>,
    /// Common timestamps skipped because the benchmark volatility was zero.
    pub excluded: usize,
}

impl RatioSeries {
    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,value\n");
        for (ts, v) in self.timestamps.iter().zip(&self.ratios) {
            out.push_str(&format!("{ts},{v}\n"));
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        serde_json::json!({
            "asset": self.asset_id,
            "benchmark": self.benchmark_id,
            "kind": self.kind,
            "window": self.window,
            "n_obs": self.len(),
            "excluded": self.excluded,
        })
        .to_string()
    }
}

/// Rolling realized volatility with window `k`.
///
/// Output element t is the sample standard deviation of returns
/// t−k+1..=t, so the series has n − k + 1 points and inherits the
/// timestamp of each window's last return.
pub fn rolling_vol(r: &ReturnSeries, k: usize) -> Result<VolSeries> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "window",
            message: format!("rolling window must be at least 2, got {k}"),
        });
    }
    if r.len() < k {
        return Err(Error::SeriesTooShort {
            context: "rolling_vol",
            len: r.len(),
            min: k,
        });
    }
    let sigmas: Vec<f64> = r.returns.windows(k).map(stats::sample_std).collect();
    let timestamps: Vec<i64> = r.timestamps[k - 1..].to_vec();
    Ok(VolSeries {
        asset_id: r.asset_id.clone(),
        frequency: r.frequency,
        window: k,
        timestamps,
        sigmas,
    })
}

/// Intersects two volatility series on timestamps, returning the paired
/// sigma values (first series, then second).
pub fn align_vol_pair(a: &VolSeries, b: &VolSeries) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a.timestamps[i].cmp(&b.timestamps[j]) {
            std::cmp::Ordering::Equal => {
                xs.push(a.sigmas[i]);
                ys.push(b.sigmas[j]);
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    (xs, ys)
}

/// Historical volatility ratio of an asset against a market benchmark.
///
/// Both series must share the same window and frequency. The ratio is
/// computed on common timestamps; points where the benchmark volatility is
/// zero are excluded and counted rather than producing infinities.
pub fn hvr(asset: &VolSeries, market: &VolSeries) -> Result<RatioSeries> {
    if asset.window != market.window {
        return Err(Error::InvalidParameter {
            name: "window",
            message: format!(
                "asset window {} does not match benchmark window {}",
                asset.window, market.window
            ),
        });
    }
    if asset.frequency != market.frequency {
        return Err(Error::MixedFrequencies(format!(
            "{} is {} but {} is {}",
            asset.asset_id, asset.frequency, market.asset_id, market.frequency
        )));
    }
    let mut timestamps = Vec::new();
    let mut ratios = Vec::new();
    let mut excluded = 0usize;
    let mut i = 0usize;
    let mut j = 0usize;
    while i < asset.len() && j < market.len() {
        let (ta, tm) = (asset.timestamps[i], market.timestamps[j]);
        if ta == tm {
            let sm = market.sigmas[j];
            if sm > 0.0 {
                timestamps.push(ta);
                ratios.push(asset.sigmas[i] / sm);
            } else {
                excluded += 1;
            }
            i += 1;
            j += 1;
        } else if ta < tm {
            i += 1;
        } else {
            j += 1;
        }
    }
    if ratios.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    Ok(RatioSeries {
        asset_id: asset.asset_id.clone(),
        benchmark_id: market.asset_id.clone(),
        kind: RatioKind::Hvr,
        window: asset.window,
        timestamps,
        ratios,
        excluded,
    })
}

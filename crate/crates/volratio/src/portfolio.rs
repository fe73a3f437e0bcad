//! Portfolio-level risk measures.
//!
//! - [`classical_vol`] — sample-covariance portfolio volatility
//!   σ_p = sqrt(wᵀΣw) over a trailing window.
//! - [`vecm_portfolio_forecast`] — forecast pipeline: per-step variances
//!   wᵀD̂_{t+j} ρ̂ D̂_{t+j} w from forecasted vols and a fixed correlation,
//!   aggregated as the root of the mean variance, with the stability
//!   guardrail applied; an unstable volatility forecast degrades to the
//!   guardrail fallback instead of failing.
//! - [`guardrail`] — replaces a forecast exceeding `mult ×` the trailing
//!   average (strict inequality, default 3×) with that average.
//! - [`covariance_reconstruct`] — Σ_ij = ρ_ij · ratio_i · ratio_j · σ²_m,
//!   the ratio-based covariance assembly; with realized ratios and the
//!   same-window sample correlation it reproduces the sample covariance
//!   exactly.
//! - [`capm_beta`] — systematic risk as Corr(i,m) × vol ratio.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::vecm::{forecast_logvol, LogVolPanel, VecmModel};

/// Default guardrail multiplier.
pub const DEFAULT_GUARDRAIL_MULT: f64 = 3.0;

/// A portfolio: ordered asset ids and positive weights in (0,1).
///
/// Weights are used as drawn, without normalization; relative accuracy
/// metrics are invariant to the overall scale. [`PortfolioSpec::normalized`]
/// rescales to sum one when a convex combination is wanted.
#[derive(Debug, Clone, Serialize)]
pub struct PortfolioSpec {
    pub asset_ids: Vec<String>,
    pub weights: Vec<f64>,
}

impl PortfolioSpec {
    pub fn new(asset_ids: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if asset_ids.len() != weights.len() {
            return Err(Error::LengthMismatch {
                context: "PortfolioSpec",
                left: asset_ids.len(),
                right: weights.len(),
            });
        }
        if asset_ids.len() < 2 {
            return Err(Error::invalid("PortfolioSpec: need at least two assets"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0 || *w >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                message: "every weight must lie strictly inside (0,1)".into(),
            });
        }
        Ok(PortfolioSpec { asset_ids, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same portfolio with weights rescaled to sum to one.
    pub fn normalized(&self) -> PortfolioSpec {
        let total: f64 = self.weights.iter().sum();
        PortfolioSpec {
            asset_ids: self.asset_ids.clone(),
            weights: self.weights.iter().map(|w| w / total).collect(),
        }
    }
}

/// A validated return-correlation matrix with its estimation-window size.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    matrix: DMatrix<f64>,
    pub window: usize,
}

impl CorrelationMatrix {
    /// Wraps and validates: square, symmetric, unit diagonal, eigenvalues
    /// ≥ −1e−8.
    pub fn new(matrix: DMatrix<f64>, window: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("CorrelationMatrix: matrix must be square"));
        }
        let n = matrix.nrows();
        for i in 0..n {
            if (matrix[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!(
                    "CorrelationMatrix: diagonal entry {i} is {}, expected 1",
                    matrix[(i, i)]
                )));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "CorrelationMatrix: asymmetry at ({i},{j})"
                    )));
                }
                if matrix[(i, j)].abs() > 1.0 + 1e-10 {
                    return Err(Error::invalid(format!(
                        "CorrelationMatrix: entry ({i},{j}) = {} outside [−1,1]",
                        matrix[(i, j)]
                    )));
                }
            }
        }
        let min_eig = nalgebra::SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < -1e-8 {
            return Err(Error::invalid(format!(
                "CorrelationMatrix: not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(CorrelationMatrix { matrix, window })
    }

    /// Sample correlation of the last `window` rows of a returns matrix.
    pub fn from_returns(returns: &DMatrix<f64>, window: usize) -> Result<Self> {
        let cov = sample_covariance_window(returns, window)?;
        let n = cov.nrows();
        let mut stds = Vec::with_capacity(n);
        for i in 0..n {
            let v = cov[(i, i)];
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "returns",
                    message: format!("column {i} has no variance over the window"),
                });
            }
            stds.push(v.sqrt());
        }
        let mut corr = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                corr[(i, j)] = cov[(i, j)] / (stds[i] * stds[j]);
            }
            corr[(i, i)] = 1.0;
        }
        // Enforce exact symmetry before validation.
        let corr = (&corr + corr.transpose()) * 0.5;
        CorrelationMatrix::new(corr, window)
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Sample covariance (n−1 divisor) of the last `window` rows.
pub fn sample_covariance_window(returns: &DMatrix<f64>, window: usize) -> Result<DMatrix<f64>> {
    let t = returns.nrows();
    if window < 2 {
        return Err(Error::InvalidParameter {
            name: "window",
            message: "covariance needs at least two rows".into(),
        });
    }
    if window > t {
        return Err(Error::SeriesTooShort {
            context: "sample_covariance_window",
            len: t,
            min: window,
        });
    }
    let n = returns.ncols();
    let start = t - window;
    let mut means = vec![0.0; n];
    for j in 0..n {
        for i in start..t {
            means[j] += returns[(i, j)];
        }
        means[j] /= window as f64;
    }
    let mut cov = DMatrix::zeros(n, n);
    for i in start..t {
        for a in 0..n {
            let da = returns[(i, a)] - means[a];
            for b in 0..=a {
                cov[(a, b)] += da * (returns[(i, b)] - means[b]);
            }
        }
    }
    let denom = (window - 1) as f64;
    for a in 0..n {
        for b in 0..=a {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

fn check_assets(context: &'static str, spec: &PortfolioSpec, n: usize) -> Result<()> {
    if spec.len() != n {
        return Err(Error::LengthMismatch {
            context,
            left: spec.len(),
            right: n,
        });
    }
    Ok(())
}

/// Classical portfolio volatility: σ_p = sqrt(wᵀ Σ w) with Σ the sample
/// covariance of the last `window` rows.
pub fn classical_vol(returns: &DMatrix<f64>, spec: &PortfolioSpec, window: usize) -> Result<f64> {
    check_assets("classical_vol", spec, returns.ncols())?;
    let cov = sample_covariance_window(returns, window)?;
    let w = nalgebra::DVector::from_column_slice(&spec.weights);
    let var = (w.transpose() * cov * w)[(0, 0)];
    Ok(var.max(0.0).sqrt())
}

/// Sample standard deviation of the portfolio's return series over all
/// rows of `returns` (used both for realized targets and the trailing
/// guardrail average).
pub fn portfolio_return_vol(returns: &DMatrix<f64>, spec: &PortfolioSpec) -> Result<f64> {
    check_assets("portfolio_return_vol", spec, returns.ncols())?;
    let t = returns.nrows();
    if t < 2 {
        return Err(Error::SeriesTooShort {
            context: "portfolio_return_vol",
            len: t,
            min: 2,
        });
    }
    let series: Vec<f64> = (0..t)
        .map(|i| {
            spec.weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * returns[(i, j)])
                .sum()
        })
        .collect();
    Ok(crate::stats::sample_std(&series))
}

/// Per-step portfolio variances wᵀ D_j ρ D_j w from an h×n matrix of
/// forecasted vols.
pub fn portfolio_variance_per_step(
    vols: &DMatrix<f64>,
    spec: &PortfolioSpec,
    corr: &CorrelationMatrix,
) -> Result<Vec<f64>> {
    check_assets("portfolio_variance_per_step", spec, vols.ncols())?;
    if corr.n() != spec.len() {
        return Err(Error::LengthMismatch {
            context: "portfolio_variance_per_step",
            left: corr.n(),
            right: spec.len(),
        });
    }
    let n = spec.len();
    let r = corr.matrix();
    let mut out = Vec::with_capacity(vols.nrows());
    for step in 0..vols.nrows() {
        let mut var = 0.0;
        for a in 0..n {
            let xa = spec.weights[a] * vols[(step, a)];
            for b in 0..n {
                var += xa * r[(a, b)] * spec.weights[b] * vols[(step, b)];
            }
        }
        out.push(var.max(0.0));
    }
    Ok(out)
}

/// Root of the mean per-step variance.
pub fn aggregate_vol(per_step_variances: &[f64]) -> f64 {
    let h = per_step_variances.len().max(1) as f64;
    (per_step_variances.iter().sum::<f64>() / h).sqrt()
}

/// Applies the stability guardrail: a forecast strictly greater than
/// `multiplier ×` the trailing average is replaced by the trailing
/// average. Returns (final value, triggered flag).
pub fn guardrail(forecast_vol: f64, trailing_avg: f64, multiplier: f64) -> Result<(f64, bool)> {
    if !(trailing_avg > 0.0) || !trailing_avg.is_finite() {
        return Err(Error::InvalidParameter {
            name: "trailing_avg",
            message: format!("must be positive and finite (got {trailing_avg})"),
        });
    }
    if !(multiplier > 0.0) {
        return Err(Error::InvalidParameter {
            name: "multiplier",
            message: "guardrail multiplier must be positive".into(),
        });
    }
    if !forecast_vol.is_finite() || forecast_vol > multiplier * trailing_avg {
        Ok((trailing_avg, true))
    } else {
        Ok((forecast_vol, false))
    }
}

/// Method tag carried by a [`ForecastResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ForecastMethod {
    Vecm,
    Classical,
    HvrRecon,
    DvrRecon,
}

impl std::fmt::Display for ForecastMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ForecastMethod::Vecm => "VECM",
            ForecastMethod::Classical => "Classical",
            ForecastMethod::HvrRecon => "HVR-recon",
            ForecastMethod::DvrRecon => "DVR-recon",
        };
        write!(f, "{s}")
    }
}

/// Outcome of one portfolio volatility forecast.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastResult {
    pub method: ForecastMethod,
    /// σ²_{p,t+j} for j = 1..h (empty when the underlying forecast was
    /// unstable and the fallback was used directly).
    pub per_step_variances: Vec<f64>,
    /// Root of the mean per-step variance (the pre-guardrail forecast).
    pub aggregate_vol: f64,
    pub guardrail_triggered: bool,
    /// Trailing-average volatility substituted when the guardrail fired.
    pub fallback_value: Option<f64>,
    /// Human-readable notes (instability reports etc.).
    pub diagnostics: Vec<String>,
}

impl ForecastResult {
    /// The volatility number a consumer should use: the fallback when the
    /// guardrail fired, the aggregate otherwise.
    pub fn final_vol(&self) -> f64 {
        match (self.guardrail_triggered, self.fallback_value) {
            (true, Some(v)) => v,
            _ => self.aggregate_vol,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Json(e.to_string()))
    }
}

/// Full forecast pipeline for one portfolio: h-step volatility forecasts
/// from the fitted VECM, per-step quadratic forms against the fixed
/// correlation, root-mean-variance aggregation, then the guardrail.
///
/// An unstable volatility forecast (diverging recursion) is not an error:
/// it degrades to the trailing average with the guardrail flagged, which
/// is exactly the consumer-facing stability rule.
pub fn vecm_portfolio_forecast(
    model: &VecmModel,
    panel: &LogVolPanel,
    spec: &PortfolioSpec,
    corr: &CorrelationMatrix,
    h: usize,
    trailing_avg: f64,
    guardrail_mult: f64,
) -> Result<ForecastResult> {
    check_assets("vecm_portfolio_forecast", spec, model.n)?;
    match forecast_logvol(model, panel, h, false) {
        Ok(vf) => {
            let per_step = portfolio_variance_per_step(&vf.vols, spec, corr)?;
            let agg = aggregate_vol(&per_step);
            let (final_vol, triggered) = guardrail(agg, trailing_avg, guardrail_mult)?;
            Ok(ForecastResult {
                method: ForecastMethod::Vecm,
                per_step_variances: per_step,
                aggregate_vol: agg,
                guardrail_triggered: triggered,
                fallback_value: triggered.then_some(final_vol),
                diagnostics: Vec::new(),
            })
        }
        Err(Error::UnstableForecast(reason)) => {
            guardrail(f64::INFINITY, trailing_avg, guardrail_mult)?;
            Ok(ForecastResult {
                method: ForecastMethod::Vecm,
                per_step_variances: Vec::new(),
                aggregate_vol: trailing_avg,
                guardrail_triggered: true,
                fallback_value: Some(trailing_avg),
                diagnostics: vec![format!("unstable volatility forecast: {reason}")],
            })
        }
        Err(other) => Err(other),
    }
}

/// Ratio-based covariance assembly: Σ_ij = ρ_ij · ratio_i · ratio_j · σ²_m.
pub fn covariance_reconstruct(
    ratios: &[f64],
    market_vol: f64,
    corr: &CorrelationMatrix,
) -> Result<DMatrix<f64>> {
    if ratios.len() != corr.n() {
        return Err(Error::LengthMismatch {
            context: "covariance_reconstruct",
            left: ratios.len(),
            right: corr.n(),
        });
    }
    if ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "ratios",
            message: "volatility ratios must be positive and finite".into(),
        });
    }
    if !(market_vol > 0.0) || !market_vol.is_finite() {
        return Err(Error::InvalidParameter {
            name: "market_vol",
            message: "market volatility must be positive and finite".into(),
        });
    }
    let n = ratios.len();
    let m2 = market_vol * market_vol;
    let r = corr.matrix();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        r[(i, j)] * ratios[i] * ratios[j] * m2
    }))
}

/// Systematic-risk coefficient from a return correlation and a
/// volatility ratio: β = Corr(i,m) · ratio.
pub fn capm_beta(corr_im: f64, hvr_i: f64) -> Result<f64> {
    if !corr_im.is_finite() || corr_im.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter {
            name: "corr_im",
            message: format!("correlation must lie in [−1,1] (got {corr_im})"),
        });
    }
    if !(hvr_i > 0.0) || !hvr_i.is_finite() {
        return Err(Error::InvalidParameter {
            name: "hvr_i",
            message: "volatility ratio must be positive and finite".into(),
        });
    }
    Ok(corr_im * hvr_i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Frequency;
    use crate::vecm::{build_panel, fit_vecm, Deterministic};
    use crate::volcore::VolSeries;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn spec2(w1: f64, w2: f64) -> PortfolioSpec {
        PortfolioSpec::new(vec!["a".into(), "b".into()], vec![w1, w2]).unwrap()
    }

    fn random_returns(t: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        DMatrix::from_fn(t, n, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn classical_vol_orthogonal_two_asset_case() {
        // Exact sample moments: uncorrelated columns with sample std 0.02.
        let a = (3.0e-4f64).sqrt();
        let returns = DMatrix::from_row_slice(4, 2, &[a, a, -a, a, a, -a, -a, -a]);
        let sigma = classical_vol(&returns, &spec2(0.5, 0.5), 4).unwrap();
        assert_relative_eq!(sigma, (2.0 * 0.25 * 4.0e-4).sqrt(), epsilon = 1e-10);
        assert!((sigma - 0.014142).abs() < 1e-5);
    }

    #[test]
    fn classical_vol_perfect_correlation_collapses_to_weighted_sum() {
        let mut rng = StdRng::seed_from_u64(91);
        let base: Vec<f64> = (0..100).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let returns = DMatrix::from_fn(100, 2, |i, j| if j == 0 { base[i] } else { 2.0 * base[i] });
        let spec = spec2(0.3, 0.6);
        let sigma = classical_vol(&returns, &spec, 100).unwrap();
        let s1 = crate::stats::sample_std(&base);
        assert_relative_eq!(sigma, 0.3 * s1 + 0.6 * (2.0 * s1), epsilon = 1e-12);
    }

    #[test]
    fn classical_vol_degenerate_weight_limit() {
        let returns = random_returns(300, 2, 92);
        let spec = spec2(0.7, 1e-9);
        let sigma = classical_vol(&returns, &spec, 300).unwrap();
        let col: Vec<f64> = (0..300).map(|i| returns[(i, 0)]).collect();
        let expected = 0.7 * crate::stats::sample_std(&col);
        assert!((sigma - expected).abs() / expected < 1e-6);
    }

    #[test]
    fn classical_vol_window_exceeding_data_errors() {
        let returns = random_returns(50, 2, 93);
        assert!(classical_vol(&returns, &spec2(0.5, 0.5), 51).is_err());
    }

    #[test]
    fn spec_rejects_out_of_range_weights() {
        assert!(PortfolioSpec::new(vec!["a".into(), "b".into()], vec![0.5, 1.0]).is_err());
        assert!(PortfolioSpec::new(vec!["a".into(), "b".into()], vec![0.5, 0.0]).is_err());
        assert!(PortfolioSpec::new(vec!["a".into()], vec![0.5]).is_err());
        let p = PortfolioSpec::new(vec!["a".into(), "b".into()], vec![0.9, 0.3]).unwrap();
        let n = p.normalized();
        assert_relative_eq!(n.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn per_step_variance_hand_example() {
        let vols = DMatrix::from_row_slice(1, 2, &[0.02, 0.01]);
        let mut r = DMatrix::identity(2, 2);
        r[(0, 1)] = 0.5;
        r[(1, 0)] = 0.5;
        let corr = CorrelationMatrix::new(r, 100).unwrap();
        let vars = portfolio_variance_per_step(&vols, &spec2(0.6, 0.4), &corr).unwrap();
        assert_relative_eq!(vars[0], 2.08e-4, epsilon = 1e-12);
        assert_relative_eq!(aggregate_vol(&vars), 2.08e-4f64.sqrt(), epsilon = 1e-12);
        assert!((aggregate_vol(&vars) - 0.014422).abs() < 1e-5);
    }

    #[test]
    fn identity_correlation_sums_squared_terms() {
        let vols = DMatrix::from_row_slice(3, 2, &[0.02, 0.01, 0.02, 0.01, 0.02, 0.01]);
        let corr = CorrelationMatrix::new(DMatrix::identity(2, 2), 10).unwrap();
        let spec = spec2(0.6, 0.4);
        let vars = portfolio_variance_per_step(&vols, &spec, &corr).unwrap();
        for v in vars {
            assert_relative_eq!(
                v,
                0.36 * 4.0e-4 + 0.16 * 1.0e-4,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn aggregate_is_root_mean_variance_bitwise() {
        let vars = vec![1.0e-4, 2.0e-4, 3.0e-4, 4.0e-4, 5.0e-4];
        let expected = (vars.iter().sum::<f64>() / 5.0).sqrt();
        assert_eq!(aggregate_vol(&vars), expected);
    }

    #[test]
    fn vol_scaling_is_homogeneous_degree_one() {
        let mut rng = StdRng::seed_from_u64(94);
        let vols = DMatrix::from_fn(4, 3, |_, _| 0.01 + 0.02 * rng.gen::<f64>());
        let corr = CorrelationMatrix::from_returns(&random_returns(200, 3, 95), 200).unwrap();
        let spec =
            PortfolioSpec::new(vec!["a".into(), "b".into(), "c".into()], vec![0.2, 0.5, 0.3])
                .unwrap();
        let base = aggregate_vol(&portfolio_variance_per_step(&vols, &spec, &corr).unwrap());
        for &c in &[0.5, 2.0, 17.0] {
            let scaled_vols = &vols * c;
            let scaled =
                aggregate_vol(&portfolio_variance_per_step(&scaled_vols, &spec, &corr).unwrap());
            assert_relative_eq!(scaled, c * base, epsilon = 1e-12);
        }
    }

    #[test]
    fn guardrail_behavior_at_and_around_threshold() {
        let (v, hit) = guardrail(0.4, 0.1, 3.0).unwrap();
        assert_eq!((v, hit), (0.1, true));
        let (v, hit) = guardrail(0.2, 0.1, 3.0).unwrap();
        assert_eq!((v, hit), (0.2, false));
        // Exactly 3× passes through: the rule is strict.
        let (v, hit) = guardrail(0.3, 0.1, 3.0).unwrap();
        assert_eq!((v, hit), (0.3 , false));
        assert!(guardrail(0.2, 0.0, 3.0).is_err());
        assert!(guardrail(0.2, -0.1, 3.0).is_err());
    }

    #[test]
    fn guardrail_output_never_exceeds_max_of_inputs() {
        let mut rng = StdRng::seed_from_u64(96);
        for _ in 0..500 {
            let forecast = rng.gen::<f64>() * 2.0;
            let trailing = 1e-6 + rng.gen::<f64>();
            let (v, _) = guardrail(forecast, trailing, 3.0).unwrap();
            assert!(v <= forecast.max(trailing) + 1e-15);
        }
    }

    #[test]
    fn reconstruction_reproduces_sample_covariance() {
        let returns = random_returns(400, 5, 97);
        let window = 400;
        let cov = sample_covariance_window(&returns, window).unwrap();
        let corr = CorrelationMatrix::from_returns(&returns, window).unwrap();
        // Market = asset 0; realized ratios relative to it.
        let market_vol = cov[(0, 0)].sqrt();
        let ratios: Vec<f64> = (0..5).map(|i| cov[(i, i)].sqrt() / market_vol).collect();
        let rebuilt = covariance_reconstruct(&ratios, market_vol, &corr).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(rebuilt[(i, j)], cov[(i, j)], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn unit_ratios_identity_correlation_give_market_variance_diagonal() {
        let corr = CorrelationMatrix::new(DMatrix::identity(3, 3), 10).unwrap();
        let sigma = covariance_reconstruct(&[1.0, 1.0, 1.0], 0.02, &corr).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 4.0e-4 } else { 0.0 };
                assert_relative_eq!(sigma[(i, j)], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reconstruction_preserves_psd() {
        let mut rng = StdRng::seed_from_u64(98);
        for round in 0..10 {
            let corr = CorrelationMatrix::from_returns(&random_returns(300, 4, 200 + round), 300)
                .unwrap();
            let ratios: Vec<f64> = (0..4).map(|_| 0.2 + 2.0 * rng.gen::<f64>()).collect();
            let sigma = covariance_reconstruct(&ratios, 0.05, &corr).unwrap();
            let min_eig = nalgebra::SymmetricEigen::new(sigma)
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(min_eig >= -1e-12, "min eigenvalue {min_eig}");
        }
    }

    #[test]
    fn capm_beta_examples_and_oracle() {
        assert_relative_eq!(capm_beta(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(capm_beta(0.5, 1.6).unwrap(), 0.8, epsilon = 1e-15);
        assert!(capm_beta(1.2, 1.0).is_err());
        assert!(capm_beta(0.5, 0.0).is_err());

        // Corr × vol ratio equals the regression beta Cov/Var.
        let mut rng = StdRng::seed_from_u64(99);
        let market: Vec<f64> = (0..5000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let asset: Vec<f64> = market
            .iter()
            .map(|m| 0.8 * m + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let corr = crate::stats::correlation(&asset, &market);
        let ratio = crate::stats::sample_std(&asset) / crate::stats::sample_std(&market);
        let n = market.len() as f64;
        let mm = market.iter().sum::<f64>() / n;
        let ma = asset.iter().sum::<f64>() / n;
        let cov: f64 = market
            .iter()
            .zip(&asset)
            .map(|(m, a)| (m - mm) * (a - ma))
            .sum::<f64>()
            / (n - 1.0);
        let var: f64 = market.iter().map(|m| (m - mm) * (m - mm)).sum::<f64>() / (n - 1.0);
        assert_relative_eq!(capm_beta(corr, ratio).unwrap(), cov / var, epsilon = 1e-10);
    }

    fn fitted_bivariate() -> (VecmModel, LogVolPanel) {
        let mut rng = StdRng::seed_from_u64(100);
        let ts: Vec<i64> = (0..900).collect();
        let mut s1 = 0.0f64;
        let mut s2 = 0.0f64;
        let mut v1 = Vec::with_capacity(900);
        let mut v2 = Vec::with_capacity(900);
        for _ in 0..900 {
            let ec = s1 - s2;
            s1 += -0.15 * ec + 0.05 * rng.sample::<f64, _>(StandardNormal);
            s2 += 0.08 * ec + 0.05 * rng.sample::<f64, _>(StandardNormal);
            v1.push((0.02f64.ln() + s1).exp());
            v2.push((0.02f64.ln() + s2).exp());
        }
        let a = VolSeries {
            asset_id: "a".into(),
            frequency: Frequency::Day,
            window: 5,
            timestamps: ts.clone(),
            sigmas: v1,
        };
        let b = VolSeries {
            asset_id: "b".into(),
            frequency: Frequency::Day,
            window: 5,
            timestamps: ts,
            sigmas: v2,
        };
        let panel = build_panel(&[a, b]).unwrap();
        let model = fit_vecm(&panel, Some(2), Some(1)).unwrap();
        (model, panel)
    }

    #[test]
    fn full_vecm_pipeline_produces_positive_vol() {
        let (model, panel) = fitted_bivariate();
        let corr = CorrelationMatrix::from_returns(&random_returns(500, 2, 101), 500).unwrap();
        let spec = spec2(0.6, 0.4);
        let res =
            vecm_portfolio_forecast(&model, &panel, &spec, &corr, 10, 0.02, 3.0).unwrap();
        assert_eq!(res.method, ForecastMethod::Vecm);
        assert_eq!(res.per_step_variances.len(), 10);
        assert!(res.final_vol() > 0.0);
        assert_relative_eq!(
            res.aggregate_vol,
            aggregate_vol(&res.per_step_variances),
            epsilon = 1e-15
        );
    }

    #[test]
    fn tight_multiplier_forces_fallback() {
        let (model, panel) = fitted_bivariate();
        let corr = CorrelationMatrix::from_returns(&random_returns(500, 2, 102), 500).unwrap();
        let spec = spec2(0.6, 0.4);
        let trailing = 1e-6;
        let res = vecm_portfolio_forecast(&model, &panel, &spec, &corr, 5, trailing, 3.0).unwrap();
        assert!(res.guardrail_triggered);
        assert_eq!(res.fallback_value, Some(trailing));
        assert_eq!(res.final_vol(), trailing);
    }

    #[test]
    fn unstable_forecast_degrades_to_fallback() {
        let (_, panel) = fitted_bivariate();
        let explosive = VecmModel {
            asset_ids: panel.asset_ids.clone(),
            n: 2,
            rank: 1,
            lag: 1,
            deterministic: Deterministic::None,
            alpha: DMatrix::from_column_slice(2, 1, &[6.0, -6.0]),
            beta: DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            beta_const: DVector::zeros(0),
            gamma: Vec::new(),
            pi: DMatrix::zeros(2, 2),
            residual_cov: DMatrix::identity(2, 2) * 0.01,
            eigenvalues: vec![0.0, 0.0],
            pi_singular_values: vec![0.0, 0.0],
            n_obs: 0,
        };
        let corr = CorrelationMatrix::new(DMatrix::identity(2, 2), 10).unwrap();
        let spec = spec2(0.5, 0.5);
        let res =
            vecm_portfolio_forecast(&explosive, &panel, &spec, &corr, 400, 0.015, 3.0).unwrap();
        assert!(res.guardrail_triggered);
        assert_eq!(res.fallback_value, Some(0.015));
        assert!(res.per_step_variances.is_empty());
        assert!(!res.diagnostics.is_empty());
    }

    #[test]
    fn degenerate_vecm_agrees_with_classical() {
        // Forecast vols pinned at the sample stds and the correlation from
        // the same window: the quadratic form must reproduce wᵀΣw.
        let returns = random_returns(600, 3, 103);
        let window = 600;
        let cov = sample_covariance_window(&returns, window).unwrap();
        let corr = CorrelationMatrix::from_returns(&returns, window).unwrap();
        let stds: Vec<f64> = (0..3).map(|i| cov[(i, i)].sqrt()).collect();
        let spec =
            PortfolioSpec::new(vec!["a".into(), "b".into(), "c".into()], vec![0.3, 0.4, 0.3])
                .unwrap();
        let vols = DMatrix::from_fn(4, 3, |_, j| stds[j]);
        let vars = portfolio_variance_per_step(&vols, &spec, &corr).unwrap();
        let direct = classical_vol(&returns, &spec, window).unwrap();
        assert_relative_eq!(aggregate_vol(&vars), direct, epsilon = 1e-10);
    }

    #[test]
    fn forecast_result_serializes_with_expected_fields() {
        let res = ForecastResult {
            method: ForecastMethod::HvrRecon,
            per_step_variances: vec![1e-4, 2e-4],
            aggregate_vol: 0.0122,
            guardrail_triggered: false,
            fallback_value: None,
            diagnostics: vec!["note".into()],
        };
        let text = res.to_json().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["method"], "HvrRecon");
        assert_eq!(parsed["per_step_variances"].as_array().unwrap().len(), 2);
        assert!(parsed["aggregate_vol"].is_number());
        assert_eq!(parsed["guardrail_triggered"], false);
    }

    #[test]
    fn correlation_matrix_validation() {
        let mut bad_diag = DMatrix::identity(2, 2);
        bad_diag[(0, 0)] = 0.9;
        assert!(CorrelationMatrix::new(bad_diag, 10).is_err());
        let mut asym = DMatrix::identity(2, 2);
        asym[(0, 1)] = 0.5;
        assert!(CorrelationMatrix::new(asym, 10).is_err());
        let mut not_psd = DMatrix::identity(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    not_psd[(i, j)] = if (i + j) % 2 == 0 { 0.99 } else { -0.99 };
                }
            }
        }
        not_psd[(0, 2)] = 0.99;
        not_psd[(2, 0)] = 0.99;
        not_psd[(0, 1)] = -0.99;
        not_psd[(1, 0)] = -0.99;
        not_psd[(1, 2)] = 0.99;
        not_psd[(2, 1)] = 0.99;
        assert!(CorrelationMatrix::new(not_psd, 10).is_err());
    }

    #[test]
    fn portfolio_return_vol_matches_manual() {
        let returns = random_returns(50, 2, 104);
        let spec = spec2(0.25, 0.5);
        let manual: Vec<f64> = (0..50)
            .map(|i| 0.25 * returns[(i, 0)] + 0.5 * returns[(i, 1)])
            .collect();
        assert_relative_eq!(
            portfolio_return_vol(&returns, &spec).unwrap(),
            crate::stats::sample_std(&manual),
            epsilon = 1e-15
        );
    }
}

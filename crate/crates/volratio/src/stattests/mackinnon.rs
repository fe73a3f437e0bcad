//! MacKinnon response-surface critical values and approximate p-values for
//! Dickey–Fuller-type statistics.
//!
//! Critical values follow the updated (2010) response surfaces
//! cv(T) = b0 + b1/T + b2/T² + b3/T³, and p-values the earlier (1994)
//! regression surfaces mapping the statistic through a cubic into a normal
//! CDF, with separate small-p/large-p regimes.
//!
//! Three surfaces are embedded:
//!
//! - `NoConstant`: DF regression without deterministic terms (used on
//!   residuals in the two-step cointegration test);
//! - `Constant`: DF regression with an intercept (the headline unit-root
//!   test on ratio series);
//! - `CointConstant2`: residual-based cointegration statistic for two
//!   variables with a constant in the first-step regression.
//!
//! The tables are cross-checked by a Monte-Carlo oracle in the test suite:
//! simulated null distributions must reproduce the 5% quantile to ±0.03.

use statrs::distribution::{ContinuousCDF, Normal};

/// Which null-distribution surface to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Surface {
    NoConstant,
    Constant,
    CointConstant2,
}

/// Rows: 1%, 5%, 10%. Columns: b0, b1, b2, b3.
const CV_NO_CONSTANT: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];

const CV_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];

const CV_COINT_CONSTANT_2: [[f64; 4]; 3] = [
    [-3.89644, -10.9519, -33.527, 0.0],
    [-3.33613, -6.1101, -6.823, 0.0],
    [-3.04445, -4.2412, -2.720, 0.0],
];

// 1994 p-value surfaces: below `star` the small-p cubic applies, above it
// the large-p cubic; outside [min, max] the p-value saturates at 0 or 1.
struct PSurface {
    star: f64,
    min: f64,
    max: f64,
    small_p: [f64; 3],
    large_p: [f64; 4],
}

const P_NO_CONSTANT: PSurface = PSurface {
    star: -1.04,
    min: -19.04,
    max: f64::INFINITY,
    small_p: [0.6344, 1.2378, 3.2496e-2],
    large_p: [0.4797, 9.3557e-1, -6.999e-2, 3.3066e-3],
};

const P_CONSTANT: PSurface = PSurface {
    star: -1.61,
    min: -18.83,
    max: 2.74,
    small_p: [2.1659, 1.4412, 3.8269e-2],
    large_p: [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2],
};

const P_COINT_CONSTANT_2: PSurface = PSurface {
    star: -2.62,
    min: -18.86,
    max: 0.92,
    small_p: [2.92, 1.5012, 3.9796e-2],
    large_p: [2.1945, 6.4695e-1, -2.9198e-1, -4.2377e-2],
};

fn cv_table(surface: Surface) -> &'static [[f64; 4]; 3] {
    match surface {
        Surface::NoConstant => &CV_NO_CONSTANT,
        Surface::Constant => &CV_CONSTANT,
        Surface::CointConstant2 => &CV_COINT_CONSTANT_2,
    }
}

fn p_surface(surface: Surface) -> &'static PSurface {
    match surface {
        Surface::NoConstant => &P_NO_CONSTANT,
        Surface::Constant => &P_CONSTANT,
        Surface::CointConstant2 => &P_COINT_CONSTANT_2,
    }
}

/// Finite-sample critical value for significance level index
/// 0 → 1%, 1 → 5%, 2 → 10%, at effective sample size `t_obs`.
pub(crate) fn critical_value(surface: Surface, level_idx: usize, t_obs: usize) -> f64 {
    let b = &cv_table(surface)[level_idx];
    let t = t_obs as f64;
    b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t)
}

/// All three (level, critical value) pairs for reporting.
pub(crate) fn critical_values(surface: Surface, t_obs: usize) -> [(f64, f64); 3] {
    [
        (0.01, critical_value(surface, 0, t_obs)),
        (0.05, critical_value(surface, 1, t_obs)),
        (0.10, critical_value(surface, 2, t_obs)),
    ]
}

/// Approximate asymptotic p-value of a Dickey–Fuller-type statistic.
pub(crate) fn p_value(surface: Surface, stat: f64) -> f64 {
    let s = p_surface(surface);
    if stat > s.max {
        return 1.0;
    }
    if stat < s.min {
        return 0.0;
    }
    let poly = if stat <= s.star {
        let c = &s.small_p;
        c[0] + c[1] * stat + c[2] * stat * stat
    } else {
        let c = &s.large_p;
        c[0] + c[1] * stat + c[2] * stat * stat + c[3] * stat * stat * stat
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.cdf(poly)
}

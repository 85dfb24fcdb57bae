//! Law of `sup |B_t|` for a standard Brownian bridge and the Gumbel limit of
//! the packing statistic.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const TERM_EPS: f64 = 1e-16;

/// `P(sup |B_t| <= x)` via the theta-function form, accurate for small `x`.
fn cdf_small(x: f64) -> f64 {
    let c = PI * PI / (8.0 * x * x);
    let mut sum = 0.0;
    for k in 1..200 {
        let j = (2 * k - 1) as f64;
        let term = (-j * j * c).exp();
        sum += term;
        if term < TERM_EPS * sum.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (2.0 * PI).sqrt() / x * sum
}

/// `2 Σ (-1)^{k+1} exp(-2 k² x²)`, stopped once a term drops below 1e-16.
fn sf_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..1000 {
        let k = k as f64;
        let term = 2.0 * (-2.0 * k * k * x * x).exp();
        if term < TERM_EPS {
            break;
        }
        sum += sign * term;
        sign = -sign;
    }
    sum
}

/// `P(sup_{t∈[0,1]} |B_t| > x)`.
///
/// Returns 1 at `x = 0` by convention; negative or NaN input is a domain
/// error.
pub fn kolmogorov_sf(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("kolmogorov_sf needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let v = if x < 1.0 { 1.0 - cdf_small(x) } else { sf_series(x) };
    Ok(v.clamp(0.0, 1.0))
}

/// `P(sup_{t∈[0,1]} |B_t| <= x)`; zero for `x <= 0`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        0.0
    } else if x < 1.0 {
        cdf_small(x).clamp(0.0, 1.0)
    } else {
        (1.0 - sf_series(x)).clamp(0.0, 1.0)
    }
}

/// Critical value `c` with `P(sup |B_t| > c) = alpha`.
pub fn kolmogorov_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (mut lo, mut hi) = (1e-3, 10.0);
    if kolmogorov_sf(lo)? <= alpha {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Null CDF of the packing statistic: `exp(-(8π)^{-1/2} e^{-x/2})`.
pub fn packing_gumbel_cdf(x: f64) -> f64 {
    (-(8.0 * PI).sqrt().recip() * (-0.5 * x).exp()).exp()
}

/// Upper `alpha` point of the packing Gumbel law.
pub fn packing_gumbel_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(-2.0 * (-(8.0 * PI).sqrt() * (-alpha).ln_1p()).ln())
}

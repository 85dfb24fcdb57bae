//! Likelihood-ratio second moment for FvML alternatives and closed-form
//! competitor powers under the low-rank model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::marginal::log_null_kernel_mass;
use crate::specfun::quad::{integrate, MAX_EVALS};
use crate::specfun::{fvml_log_normalizer, normal_cdf, normal_quantile, packing_gumbel_cdf, packing_gumbel_quantile};

const LOG_GUARD: f64 = 700.0;

/// `E_0[L_n²]` for the FvML likelihood ratio of `n` observations:
///
/// `E_U[exp(n(2 ln C_p(κ) - ln C_p(κ√(2(1+U)))))]`
///
/// with `U` distributed as the null inner product. Fails with `Overflow`
/// when the log integrand exceeds 700.
pub fn fvml_llr_second_moment(n: usize, p: usize, kappa: f64) -> Result<f64> {
    if p < 3 {
        return Err(Error::domain(format!("dimension p = {p} must be >= 3")));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if kappa == 0.0 {
        return Ok(1.0);
    }
    let nf = n as f64;
    let base = 2.0 * fvml_log_normalizer(kappa, p)?;
    let top = nf * (base - fvml_log_normalizer(2.0 * kappa, p)?);
    // ln C_p is decreasing in its argument, so the integrand peaks at U = 1
    if top > LOG_GUARD {
        return Err(Error::Overflow(format!(
            "log integrand reaches {top:.1} > {LOG_GUARD}; signal too strong"
        )));
    }
    let h = (p as f64 - 3.0) / 2.0;
    let log_f = |u: f64| -> f64 {
        if u <= -1.0 || u >= 1.0 {
            return if h == 0.0 { f64::NAN } else { f64::NEG_INFINITY };
        }
        let k2 = kappa * (2.0 * (1.0 + u)).sqrt();
        let lc = fvml_log_normalizer(k2, p).unwrap_or(f64::NAN);
        h * (-u * u).ln_1p() + nf * (base - lc)
    };
    // locate the peak of the log integrand on a coarse grid, then bracket it
    let grid = 400;
    let (mut arg, mut peak) = (0.0, f64::NEG_INFINITY);
    for i in 1..grid {
        let u = -1.0 + 2.0 * i as f64 / grid as f64;
        let v = log_f(u);
        if v > peak {
            peak = v;
            arg = u;
        }
    }
    if !peak.is_finite() {
        return Err(Error::domain("log integrand is not finite"));
    }
    let edge = |toward: f64| -> f64 {
        let (mut inside, mut outside) = (arg, toward);
        if h == 0.0 || log_f(toward) - peak >= -60.0 {
            return toward;
        }
        for _ in 0..100 {
            let mid = 0.5 * (inside + outside);
            if log_f(mid) - peak >= -60.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        outside
    };
    let (lo, hi) = (edge(-1.0), edge(1.0));
    let pts = [lo, arg, hi];
    let r = integrate(|u| (log_f(u) - peak).exp(), &pts, 0.0, 1e-10, MAX_EVALS);
    let log_mass = log_null_kernel_mass(p);
    Ok((peak + r.value.ln() - log_mass).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Competitor {
    /// Two-sided Rayleigh: `√(p/k) R_n → N(0, 1)`.
    Rayleigh2Sided,
    /// `1 - Φ(z_α - τ/2)` with `τ = n(1 - k/p)`.
    Bingham,
    /// Upper-tailed Packing with Gumbel limit of the rank-`k` statistic.
    Packing,
}

impl std::str::FromStr for Competitor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rayleigh" | "rayleigh2sided" | "rayleigh_two_sided" => Ok(Competitor::Rayleigh2Sided),
            "bingham" => Ok(Competitor::Bingham),
            "packing" => Ok(Competitor::Packing),
            _ => Err(Error::Config(format!("unknown competitor `{s}`"))),
        }
    }
}

/// Asymptotic power of a competitor test against the rank-`k` uniform law.
///
/// For Packing, `P_n = (p/k) P_n^{(k)} + (p/k - 1)(4 ln n - ln ln n)` where
/// `P_n^{(k)}` is the statistic computed in dimension `k`, which has the
/// Gumbel limit; rejection `P_n ≥ x_α` therefore has probability
/// `1 - G((k/p) x_α - (1 - k/p)(4 ln n - ln ln n))`.
pub fn competitor_low_rank_power(method: Competitor, n: usize, p: usize, k: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if k < 2 || k > p {
        return Err(Error::domain(format!("need 2 <= k <= p, got k={k}, p={p}")));
    }
    let ratio = k as f64 / p as f64;
    let nf = n as f64;
    Ok(match method {
        Competitor::Bingham => {
            let tau = nf * (1.0 - ratio);
            1.0 - normal_cdf(normal_quantile(1.0 - alpha)? - tau / 2.0)
        }
        Competitor::Rayleigh2Sided => {
            let z = normal_quantile(1.0 - alpha / 2.0)?;
            2.0 * (1.0 - normal_cdf(z / ratio.sqrt()))
        }
        Competitor::Packing => {
            if n < 3 {
                return Err(Error::domain("packing needs n >= 3"));
            }
            let x = packing_gumbel_quantile(alpha)?;
            let drift = (1.0 - ratio) * (4.0 * nf.ln() - nf.ln().ln());
            1.0 - packing_gumbel_cdf(ratio * x - drift)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llr_null_and_guard() {
        assert_eq!(fvml_llr_second_moment(500, 500, 0.0).unwrap(), 1.0);
        assert!(matches!(
            fvml_llr_second_moment(100_000, 50, 40.0),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn llr_monotone_small() {
        let mut prev = 0.0;
        for k in [0.0, 1.0, 2.0, 4.0] {
            let v = fvml_llr_second_moment(200, 200, k).unwrap();
            assert!(v >= 1.0 - 1e-12 && v >= prev, "kappa={k}: {v}");
            prev = v;
        }
    }

    #[test]
    fn competitor_closed_forms() {
        // τ = 80(1 - 76/80) = 4
        let b = competitor_low_rank_power(Competitor::Bingham, 80, 80, 76, 0.05).unwrap();
        assert!((b - 0.639).abs() < 1e-3, "{b}");
        let r = competitor_low_rank_power(Competitor::Rayleigh2Sided, 80, 80, 80, 0.05).unwrap();
        assert!((r - 0.05).abs() < 1e-12);
        let b0 = competitor_low_rank_power(Competitor::Bingham, 80, 80, 80, 0.05).unwrap();
        assert!((b0 - 0.05).abs() < 1e-12);
        let pk = competitor_low_rank_power(Competitor::Packing, 80, 80, 80, 0.05).unwrap();
        assert!((pk - 0.05).abs() < 1e-12);
    }
}

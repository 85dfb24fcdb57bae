//! Test statistics, reference laws and decision rules.
//!
//! * `SupDistance`: `T_n = sup_t |F_N(t) - m(t)|` over the `N = n(n-1)/2`
//!   pairwise inner products; `√N·T_n` is asymptotically Kolmogorov.
//! * `Rayleigh`: `R_n = √(2p)/n Σ_{i<j} X_iᵀX_j`, standard normal null.
//! * `Bingham`: `B_n = p/n Σ_{i<j} ((X_iᵀX_j)² - 1/p)`, standard normal null.
//! * `Packing`: `P_n = p max (X_iᵀX_j)² - 4 ln n + ln ln n`, Gumbel null.
//! * `Projection`: one-sample KS distance of `X_iᵀU` from `m`, `√n·D`
//!   asymptotically Kolmogorov.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{sample_uniform_direction, PreparedModel, RngSeed, ModelSpec};
use crate::specfun::{
    kolmogorov_quantile, kolmogorov_sf, normal_cdf, normal_quantile, normal_sf,
    packing_gumbel_cdf, packing_gumbel_quantile, NullCdf,
};
use crate::sphere::{dot, pairwise_inner_products, InnerProductList, UnitPointSet};

/// Seed used for the projection direction when none is supplied.
pub const DEFAULT_DIRECTION_SEED: u64 = 0x5eed_d1ec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SupDistance,
    Rayleigh,
    Bingham,
    Packing,
    Projection,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SupDistance,
        Method::Rayleigh,
        Method::Bingham,
        Method::Packing,
        Method::Projection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SupDistance => "sup_distance",
            Method::Rayleigh => "rayleigh",
            Method::Bingham => "bingham",
            Method::Packing => "packing",
            Method::Projection => "projection",
        }
    }

    pub fn supports(self, tail: Tail) -> bool {
        match self {
            Method::SupDistance | Method::Projection => tail == Tail::Upper,
            Method::Rayleigh | Method::Bingham | Method::Packing => true,
        }
    }

    fn check_tail(self, tail: Tail) -> Result<()> {
        if self.supports(tail) {
            Ok(())
        } else {
            Err(Error::BadTail {
                method: self.name().into(),
                tail: tail.to_string(),
            })
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sup_distance" | "supdistance" | "sup" | "t" => Ok(Method::SupDistance),
            "rayleigh" | "r" => Ok(Method::Rayleigh),
            "bingham" | "b" => Ok(Method::Bingham),
            "packing" | "p" => Ok(Method::Packing),
            "projection" | "d" => Ok(Method::Projection),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    Upper,
    TwoSided,
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tail::Upper => "upper",
            Tail::TwoSided => "two_sided",
        })
    }
}

impl FromStr for Tail {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "upper" => Ok(Tail::Upper),
            "two_sided" | "twosided" | "both" => Ok(Tail::TwoSided),
            _ => Err(Error::Config(format!("unknown tail `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Calibration {
    #[default]
    Asymptotic,
    MonteCarlo { reps: usize, seed: u64 },
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Calibration::Asymptotic => f.write_str("asymptotic"),
            Calibration::MonteCarlo { reps, seed } => write!(f, "monte_carlo(reps={reps};seed={seed})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub standardized: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub tail: Tail,
    pub calibration: Calibration,
}

impl TestOutcome {
    pub const CSV_HEADER: &'static str =
        "method,statistic,standardized,p_value,reject,alpha,tail,calibration";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{},{},{},{}",
            self.method,
            self.statistic,
            self.standardized,
            self.p_value,
            self.reject,
            self.alpha,
            self.tail,
            self.calibration
        )
    }
}

/// Exact `sup_t |F_N(t) - F(t)|` for sorted `values` and a continuous `F`.
///
/// Equal values are one jump: the one-sided terms at their first and last
/// index bound every index in between.
pub fn sup_distance_sorted<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let n = values.len() as f64;
    let mut best = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        let f = cdf(v);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        best = best.max(above).max(below);
    }
    best.clamp(0.0, 1.0)
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::domain(format!("packing statistic needs n >= 3, got {n}")));
    }
    Ok(())
}

/// All pair-based statistics from one inner-product list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStatistics {
    pub t: f64,
    pub rayleigh: f64,
    pub bingham: f64,
    /// `None` for `n < 3`.
    pub packing: Option<f64>,
}

impl PairStatistics {
    pub fn new(list: &InnerProductList, m: &NullCdf) -> Self {
        Self::with_cdf(list, m.dim(), |t| m.eval(t))
    }

    /// Same as [`PairStatistics::new`] with any evaluator of the null CDF.
    pub fn with_cdf<F: Fn(f64) -> f64>(list: &InnerProductList, p: usize, cdf: F) -> Self {
        let n = list.n() as f64;
        let p = p as f64;
        let inv_p = 1.0 / p;
        let (mut s1, mut s2) = (0.0, 0.0);
        for &s in list.values() {
            s1 += s;
            s2 += s * s - inv_p;
        }
        PairStatistics {
            t: sup_distance_sorted(list.values(), cdf),
            rayleigh: (2.0 * p).sqrt() / n * s1,
            bingham: p / n * s2,
            packing: (list.n() >= 3).then(|| packing_from_max(list.max_square(), list.n(), p)),
        }
    }

    pub fn get(&self, method: Method) -> Option<f64> {
        match method {
            Method::SupDistance => Some(self.t),
            Method::Rayleigh => Some(self.rayleigh),
            Method::Bingham => Some(self.bingham),
            Method::Packing => self.packing,
            Method::Projection => None,
        }
    }
}

fn packing_from_max(max_sq: f64, n: usize, p: f64) -> f64 {
    let ln_n = (n as f64).ln();
    p * max_sq - 4.0 * ln_n + ln_n.ln()
}

pub fn statistic_t(s: &UnitPointSet) -> f64 {
    let m = NullCdf::new(s.p()).expect("p >= 2 by construction");
    sup_distance_sorted(pairwise_inner_products(s).values(), |t| m.eval(t))
}

pub fn statistic_r(s: &UnitPointSet) -> f64 {
    let list = pairwise_inner_products(s);
    (2.0 * s.p() as f64).sqrt() / s.n() as f64 * list.values().iter().sum::<f64>()
}

pub fn statistic_b(s: &UnitPointSet) -> f64 {
    let list = pairwise_inner_products(s);
    let p = s.p() as f64;
    p / s.n() as f64 * list.values().iter().map(|v| v * v - 1.0 / p).sum::<f64>()
}

pub fn statistic_p(s: &UnitPointSet) -> Result<f64> {
    check_n(s.n())?;
    let list = pairwise_inner_products(s);
    Ok(packing_from_max(list.max_square(), s.n(), s.p() as f64))
}

/// KS distance of the projections `x·u` (any count, sorted in place) from
/// the null law `m_p`.
pub fn projection_sup_distance(proj: &mut [f64], p: usize) -> Result<f64> {
    let m = NullCdf::new(p)?;
    for v in proj.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    proj.sort_unstable_by(f64::total_cmp);
    Ok(sup_distance_sorted(proj, |t| m.eval(t)))
}

pub fn statistic_projection_d(s: &UnitPointSet, direction: &[f64]) -> Result<f64> {
    if direction.len() != s.p() {
        return Err(Error::BadShape(format!(
            "direction has {} entries, expected {}",
            direction.len(),
            s.p()
        )));
    }
    let norm = dot(direction, direction).sqrt();
    if !((norm - 1.0).abs() <= 1e-8) {
        return Err(Error::NotUnit { row: 0, norm });
    }
    let mut proj: Vec<f64> = s.rows().map(|x| dot(x, direction)).collect();
    projection_sup_distance(&mut proj, s.p())
}

/// Deterministic pseudo-random projection direction.
pub fn projection_direction(p: usize, seed: u64) -> Vec<f64> {
    sample_uniform_direction(p, &mut RngSeed::new(seed, 0).rng())
}

/// Raw statistic of `method` on `s`; `direction` is required for `Projection`.
pub fn statistic(s: &UnitPointSet, method: Method, direction: Option<&[f64]>) -> Result<f64> {
    match method {
        Method::SupDistance => Ok(statistic_t(s)),
        Method::Rayleigh => Ok(statistic_r(s)),
        Method::Bingham => Ok(statistic_b(s)),
        Method::Packing => statistic_p(s),
        Method::Projection => {
            let d = direction.ok_or_else(|| Error::domain("projection needs a direction"))?;
            statistic_projection_d(s, d)
        }
    }
}

/// Scale on which the reference law is stated.
pub fn standardize(method: Method, statistic: f64, n: usize) -> f64 {
    let n = n as f64;
    match method {
        Method::SupDistance => (n * (n - 1.0) / 2.0).sqrt() * statistic,
        Method::Projection => n.sqrt() * statistic,
        _ => statistic,
    }
}

/// Asymptotic p-value of a standardized statistic.
pub fn asymptotic_p_value(method: Method, standardized: f64, tail: Tail) -> Result<f64> {
    method.check_tail(tail)?;
    let p = match (method, tail) {
        (Method::SupDistance | Method::Projection, _) => kolmogorov_sf(standardized.max(0.0))?,
        (Method::Rayleigh | Method::Bingham, Tail::Upper) => normal_sf(standardized),
        (Method::Rayleigh | Method::Bingham, Tail::TwoSided) => 2.0 * normal_sf(standardized.abs()),
        (Method::Packing, Tail::Upper) => 1.0 - packing_gumbel_cdf(standardized),
        (Method::Packing, Tail::TwoSided) => {
            let g = packing_gumbel_cdf(standardized);
            2.0 * g.min(1.0 - g)
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Asymptotic critical region on the standardized scale: `(lower, upper)`,
/// reject when below `lower` or at/above `upper`.
pub fn asymptotic_critical_values(method: Method, alpha: f64, tail: Tail) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    method.check_tail(tail)?;
    Ok(match (method, tail) {
        (Method::SupDistance | Method::Projection, _) => (f64::NEG_INFINITY, kolmogorov_quantile(alpha)?),
        (Method::Rayleigh | Method::Bingham, Tail::Upper) => {
            (f64::NEG_INFINITY, normal_quantile(1.0 - alpha)?)
        }
        (Method::Rayleigh | Method::Bingham, Tail::TwoSided) => {
            let z = normal_quantile(1.0 - alpha / 2.0)?;
            (-z, z)
        }
        (Method::Packing, Tail::Upper) => (f64::NEG_INFINITY, packing_gumbel_quantile(alpha)?),
        (Method::Packing, Tail::TwoSided) => (
            packing_gumbel_quantile(1.0 - alpha / 2.0)?,
            packing_gumbel_quantile(alpha / 2.0)?,
        ),
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Runs one test. A `Projection` test uses a direction drawn from
/// [`DEFAULT_DIRECTION_SEED`]; see [`run_projection_test`] to supply one.
pub fn run_test(
    s: &UnitPointSet,
    method: Method,
    alpha: f64,
    tail: Tail,
    calibration: Calibration,
) -> Result<TestOutcome> {
    if method == Method::Projection {
        let u = projection_direction(s.p(), DEFAULT_DIRECTION_SEED);
        return run_projection_test(s, &u, alpha, tail, calibration);
    }
    let stat = statistic(s, method, None)?;
    decide(method, stat, s.n(), s.p(), alpha, tail, calibration)
}

pub fn run_projection_test(
    s: &UnitPointSet,
    direction: &[f64],
    alpha: f64,
    tail: Tail,
    calibration: Calibration,
) -> Result<TestOutcome> {
    let stat = statistic_projection_d(s, direction)?;
    decide(Method::Projection, stat, s.n(), s.p(), alpha, tail, calibration)
}

/// Applies the decision rule to a precomputed statistic.
pub fn decide(
    method: Method,
    stat: f64,
    n: usize,
    p: usize,
    alpha: f64,
    tail: Tail,
    calibration: Calibration,
) -> Result<TestOutcome> {
    let region = CriticalRegion::new(method, n, p, alpha, tail, calibration)?;
    Ok(region.outcome(stat))
}

#[derive(Clone, Debug)]
enum Reference {
    /// Bounds on the standardized scale.
    Asymptotic { lo: f64, hi: f64 },
    /// Sorted null draws of the raw statistic.
    MonteCarlo { null: Vec<f64> },
}

/// Rejection rule for one `(method, n, p, alpha, tail, calibration)`,
/// built once and applied to many statistics.
#[derive(Clone, Debug)]
pub struct CriticalRegion {
    method: Method,
    n: usize,
    alpha: f64,
    tail: Tail,
    calibration: Calibration,
    reference: Reference,
}

impl CriticalRegion {
    pub fn new(
        method: Method,
        n: usize,
        p: usize,
        alpha: f64,
        tail: Tail,
        calibration: Calibration,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        method.check_tail(tail)?;
        if method == Method::Packing {
            check_n(n)?;
        }
        let reference = match calibration {
            Calibration::Asymptotic => {
                let (lo, hi) = asymptotic_critical_values(method, alpha, tail)?;
                Reference::Asymptotic { lo, hi }
            }
            Calibration::MonteCarlo { reps, seed } => {
                if reps < 1000 {
                    return Err(Error::CalibrationUnavailable(format!(
                        "Monte Carlo calibration needs at least 1000 reps, got {reps}"
                    )));
                }
                let mut null = mc_null_statistics(n, p, method, reps, seed)?;
                null.sort_unstable_by(f64::total_cmp);
                Reference::MonteCarlo { null }
            }
        };
        Ok(CriticalRegion {
            method,
            n,
            alpha,
            tail,
            calibration,
            reference,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn rejects(&self, stat: f64) -> bool {
        match &self.reference {
            Reference::Asymptotic { lo, hi } => {
                let z = standardize(self.method, stat, self.n);
                z >= *hi || z < *lo
            }
            Reference::MonteCarlo { null } => mc_decision(null, stat, self.alpha, self.tail).1,
        }
    }

    pub fn outcome(&self, stat: f64) -> TestOutcome {
        let standardized = standardize(self.method, stat, self.n);
        let (p_value, reject) = match &self.reference {
            Reference::Asymptotic { .. } => (
                asymptotic_p_value(self.method, standardized, self.tail).unwrap_or(f64::NAN),
                self.rejects(stat),
            ),
            Reference::MonteCarlo { null } => mc_decision(null, stat, self.alpha, self.tail),
        };
        TestOutcome {
            method: self.method,
            statistic: stat,
            standardized,
            p_value,
            reject,
            alpha: self.alpha,
            tail: self.tail,
            calibration: self.calibration,
        }
    }
}

/// Empirical `q`-quantile: order statistic `ceil(q R)` clamped to `[1, R]`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let r = sorted.len();
    let k = ((q * r as f64).ceil() as usize).clamp(1, r);
    sorted[k - 1]
}

fn mc_decision(null: &[f64], stat: f64, alpha: f64, tail: Tail) -> (f64, bool) {
    let r = null.len() as f64;
    let above = null.len() - null.partition_point(|&v| v < stat);
    let below = null.partition_point(|&v| v <= stat);
    let p_up = (1.0 + above as f64) / (r + 1.0);
    let p_low = (1.0 + below as f64) / (r + 1.0);
    match tail {
        Tail::Upper => (p_up, stat > empirical_quantile(null, 1.0 - alpha)),
        Tail::TwoSided => {
            let hi = empirical_quantile(null, 1.0 - alpha / 2.0);
            let lo = empirical_quantile(null, alpha / 2.0);
            ((2.0 * p_up.min(p_low)).min(1.0), stat > hi || stat < lo)
        }
    }
}

/// Null statistics over `reps` seeded uniform samples (stream = rep index),
/// in rep order.
pub fn mc_null_statistics(n: usize, p: usize, method: Method, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if method == Method::Packing {
        check_n(n)?;
    }
    let model = PreparedModel::new(&ModelSpec::Uniform { p })?;
    let m = NullCdf::new(p)?;
    let mut e1 = vec![0.0; p];
    e1[0] = 1.0;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = model.sample(n, RngSeed::new(seed, r as u64))?;
            if method == Method::Projection {
                return statistic_projection_d(&s, &e1);
            }
            let stats = PairStatistics::new(&pairwise_inner_products(&s), &m);
            Ok(stats.get(method).expect("pair statistic"))
        })
        .collect()
}

/// Empirical `(1-α)` quantile of the raw statistic under the null.
pub fn calibrate_critical_value_mc(
    n: usize,
    p: usize,
    method: Method,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if reps < 1000 {
        return Err(Error::CalibrationUnavailable(format!(
            "Monte Carlo calibration needs at least 1000 reps, got {reps}"
        )));
    }
    let mut null = mc_null_statistics(n, p, method, reps, seed)?;
    null.sort_unstable_by(f64::total_cmp);
    Ok(empirical_quantile(&null, 1.0 - alpha))
}

/// `Φ` re-export for callers computing standardized normal powers.
pub fn standard_normal_cdf(u: f64) -> f64 {
    normal_cdf(u)
}

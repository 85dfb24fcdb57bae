//! Deterministic large-sample quantities: the distance `d` between the
//! inner-product laws of an alternative and of the null, the drifts of the
//! limiting shifted bridges, and closed-form competitor powers.

mod bridge;
mod llr;

pub use bridge::{predict_asymptotic_power, simulate_sup_shifted_bridge, BridgeLaw, DEFAULT_GRID};
pub use llr::{competitor_low_rank_power, fvml_llr_second_moment, Competitor};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::sup_distance_sorted;
use crate::samplers::{cached_marginal, ModelSpec, PreparedModel, RngSeed};
use crate::specfun::{normal_pdf, normal_quantile, MarginalKind, NullCdf, NullCdfTable};
use crate::sphere::dot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    /// `b(t) = τ²/√2 · φ(Φ⁻¹(t))`
    Fvml,
    /// `b(t) = τ/(2√2) · Φ⁻¹(t) φ(Φ⁻¹(t))`
    Quadratic,
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fvml" => Ok(ShiftKind::Fvml),
            "quadratic" | "watson" | "low_rank" | "lowrank" => Ok(ShiftKind::Quadratic),
            _ => Err(Error::Config(format!("unknown shift kind `{s}`"))),
        }
    }
}

/// Drift `b(t)` of the shifted bridge `B_t - b(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFunction {
    pub kind: ShiftKind,
    pub tau: f64,
}

impl ShiftFunction {
    pub fn new(kind: ShiftKind, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be finite and >= 0, got {tau}")));
        }
        Ok(ShiftFunction { kind, tau })
    }

    pub fn fvml(tau: f64) -> Self {
        ShiftFunction { kind: ShiftKind::Fvml, tau }
    }

    pub fn quadratic(tau: f64) -> Self {
        ShiftFunction {
            kind: ShiftKind::Quadratic,
            tau,
        }
    }

    /// `b(t)`; zero at and outside the endpoints.
    pub fn value(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        let u = normal_quantile(t).expect("t in (0, 1)");
        match self.kind {
            ShiftKind::Fvml => self.tau * self.tau / std::f64::consts::SQRT_2 * normal_pdf(u),
            ShiftKind::Quadratic => {
                self.tau / (2.0 * std::f64::consts::SQRT_2) * u * normal_pdf(u)
            }
        }
    }

    /// `sup_t |b(t)|`.
    pub fn max_abs(&self) -> f64 {
        let phi0 = normal_pdf(0.0);
        match self.kind {
            ShiftKind::Fvml => self.tau * self.tau / std::f64::consts::SQRT_2 * phi0,
            ShiftKind::Quadratic => self.tau / (2.0 * std::f64::consts::SQRT_2) * normal_pdf(1.0),
        }
    }

    /// Limit of `n·d` implied by the drift: `sup_u |b(Φ(u))|`.
    pub fn limit_nd(&self) -> f64 {
        self.max_abs() * std::f64::consts::SQRT_2
    }
}

pub fn shift_value(shift: &ShiftFunction, t: f64) -> f64 {
    shift.value(t)
}

// ---------------------------------------------------------------------------
// signal parametrizations

/// FvML concentration at signal `τ`: `κ = τ p^{3/4} / √n`.
pub fn fvml_kappa(tau: f64, n: usize, p: usize) -> f64 {
    tau * (p as f64).powf(0.75) / (n as f64).sqrt()
}

/// Watson concentration at signal `τ`: `κ = p^{3/2} √τ / (2(√n + √(τp)))`.
pub fn watson_kappa(tau: f64, n: usize, p: usize) -> f64 {
    let (n, p) = (n as f64, p as f64);
    p.powf(1.5) * tau.sqrt() / (2.0 * (n.sqrt() + (tau * p).sqrt()))
}

/// Low-rank dimension at signal `τ`: `k = round(p(1 - τ/n))`.
pub fn low_rank_k(tau: f64, n: usize, p: usize) -> usize {
    (p as f64 * (1.0 - tau / n as f64)).round().max(0.0) as usize
}

// ---------------------------------------------------------------------------
// alternative inner-product laws

/// Composite Gauss–Legendre panels over each marginal's effective support.
pub const ALT_PANELS: usize = 48;
pub const ALT_ORDER: usize = 8;

#[derive(Clone, Debug)]
enum AltKind {
    /// `P(XᵀY ≤ s) = E[m_{p-1}((s - TT')/√((1-T²)(1-T'²)))]`
    Tangent {
        t: Vec<f64>,
        c: Vec<f64>,
        w: Vec<f64>,
        inner: Arc<NullCdfTable>,
    },
    LowRank {
        mk: NullCdf,
    },
}

/// CDF of `√p·XᵀY` for independent `X, Y` from an FvML, Watson or low-rank
/// model.
#[derive(Clone, Debug)]
pub struct AltInnerCdf {
    p: usize,
    sqrt_p: f64,
    kind: AltKind,
}

impl AltInnerCdf {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        Self::with_nodes(model, ALT_PANELS, ALT_ORDER)
    }

    /// As [`AltInnerCdf::new`] with an explicit quadrature resolution.
    pub fn with_nodes(model: &ModelSpec, panels: usize, order: usize) -> Result<Self> {
        model.validate()?;
        let p = model.dim();
        let kind = match model {
            ModelSpec::Fvml { kappa, .. } | ModelSpec::Watson { kappa, .. } => {
                let mk = if matches!(model, ModelSpec::Fvml { .. }) {
                    MarginalKind::Fvml
                } else {
                    MarginalKind::Watson
                };
                let marginal = cached_marginal(mk, p, *kappa)?;
                let nodes = marginal.quadrature_nodes(panels, order);
                let t: Vec<f64> = nodes.iter().map(|n| n.0).collect();
                let c = t.iter().map(|t| (1.0 - t * t).max(0.0).sqrt()).collect();
                let w = nodes.iter().map(|n| n.1).collect();
                AltKind::Tangent {
                    t,
                    c,
                    w,
                    inner: cached_null_table(p - 1)?,
                }
            }
            ModelSpec::LowRank { k, .. } => AltKind::LowRank { mk: NullCdf::new(*k)? },
            other => {
                return Err(Error::domain(format!(
                    "no quadrature route for the {} model",
                    other.family()
                )))
            }
        };
        Ok(AltInnerCdf {
            p,
            sqrt_p: (p as f64).sqrt(),
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// `P(√p·XᵀY ≤ u)`.
    pub fn eval(&self, u: f64) -> f64 {
        let s = u / self.sqrt_p;
        match &self.kind {
            AltKind::LowRank { mk } => mk.eval(s),
            AltKind::Tangent { t, c, w, inner } => {
                let k = t.len();
                let mut total = 0.0;
                for i in 0..k {
                    let (ti, ci) = (t[i], c[i]);
                    let mut row = 0.5 * w[i] * cond_cdf(inner, s, ti * ti, ci * ci);
                    for j in i + 1..k {
                        row += w[j] * cond_cdf(inner, s, ti * t[j], ci * c[j]);
                    }
                    total += 2.0 * w[i] * row;
                }
                total.clamp(0.0, 1.0)
            }
        }
    }
}

#[inline]
fn cond_cdf(inner: &NullCdfTable, s: f64, tt: f64, cc: f64) -> f64 {
    let num = s - tt;
    if cc <= 0.0 {
        return if num >= 0.0 { 1.0 } else { 0.0 };
    }
    inner.eval(num / cc)
}

fn cached_null_table(p: usize) -> Result<Arc<NullCdfTable>> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<NullCdfTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut g = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = g.get(&p) {
        return Ok(t.clone());
    }
    let t = Arc::new(NullCdfTable::new(p)?);
    g.insert(p, t.clone());
    Ok(t)
}

pub fn alt_inner_cdf(model: &ModelSpec, u: f64) -> Result<f64> {
    Ok(AltInnerCdf::new(model)?.eval(u))
}

// ---------------------------------------------------------------------------
// distance d

#[derive(Clone, Copy, Debug)]
pub struct DistanceOptions {
    /// Initial uniform u-grid over the window.
    pub grid: usize,
    /// Final tolerance on the location of the maximizer.
    pub tol: f64,
    pub panels: usize,
    pub order: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            grid: 4096,
            tol: 1e-8,
            panels: ALT_PANELS,
            order: ALT_ORDER,
        }
    }
}

/// `d = sup_u |P_alt(√p XᵀY ≤ u) - P_0(√p XᵀY ≤ u)|` by quadrature.
pub fn distance_d(model: &ModelSpec) -> Result<f64> {
    distance_d_with(model, DistanceOptions::default())
}

pub fn distance_d_with(model: &ModelSpec, opts: DistanceOptions) -> Result<f64> {
    let alt = AltInnerCdf::with_nodes(model, opts.panels, opts.order)?;
    let null = NullCdf::new(alt.p)?;
    let sqrt_p = alt.sqrt_p;
    let gap = |u: f64| (alt.eval(u) - null.eval(u / sqrt_p)).abs();

    let (lo, hi) = window(&alt, &null);
    let g = opts.grid.max(8);
    let h = (hi - lo) / (g - 1) as f64;
    let values: Vec<f64> = (0..g)
        .into_par_iter()
        .map(|i| gap(lo + h * i as f64))
        .collect();
    // refine around the best few local maxima
    let mut peaks: Vec<usize> = (0..g)
        .filter(|&i| {
            (i == 0 || values[i] >= values[i - 1]) && (i + 1 == g || values[i] >= values[i + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    peaks.truncate(4);
    let mut best = values.iter().copied().fold(0.0, f64::max);
    for i in peaks {
        let a = lo + h * i.saturating_sub(1) as f64;
        let b = lo + h * (i + 1).min(g - 1) as f64;
        best = best.max(golden_max(&gap, a, b, opts.tol));
    }
    Ok(best)
}

/// Window of `u` where either CDF lies within `[1e-12, 1 - 1e-12]`.
fn window(alt: &AltInnerCdf, null: &NullCdf) -> (f64, f64) {
    let sp = alt.sqrt_p;
    let lower = |f: &dyn Fn(f64) -> f64| bisect_level(f, 1e-12, -sp, sp);
    let upper = |f: &dyn Fn(f64) -> f64| bisect_level(f, 1.0 - 1e-12, -sp, sp);
    let a = |u: f64| alt.eval(u);
    let n = |u: f64| null.eval(u / sp);
    (lower(&a).min(lower(&n)), upper(&a).max(upper(&n)))
}

/// Smallest `u` in `[lo, hi]` with `f(u) >= level` for nondecreasing `f`.
fn bisect_level(f: &dyn Fn(f64) -> f64, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    if f(lo) >= level {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    hi
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - R * (b - a);
    let mut x2 = a + R * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f1.max(f2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - R * (b - a);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
    }
    best
}

/// Monte Carlo `d̂`: KS distance between `M` sampled inner products `XᵀY`
/// (independent pairs) and the null law `m_p`.
pub fn estimate_distance_d_mc(model: &ModelSpec, pairs: usize, seed: u64) -> Result<f64> {
    if pairs < 10_000 {
        return Err(Error::domain(format!("need at least 10^4 pairs, got {pairs}")));
    }
    let s = sample_pair_products(model, pairs, seed)?;
    let m = NullCdf::new(model.dim())?;
    Ok(sup_distance_sorted(&s, |t| m.eval(t)))
}

const PAIR_CHUNK: usize = 1024;

/// Sorted inner products of `pairs` independent pairs; chunk `c` of 1024
/// pairs draws from stream `c`.
pub fn sample_pair_products(model: &ModelSpec, pairs: usize, seed: u64) -> Result<Vec<f64>> {
    let prepared = PreparedModel::new(model)?;
    let p = prepared.dim();
    let chunks = pairs.div_ceil(PAIR_CHUNK);
    let mut out: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = RngSeed::new(seed, c as u64).rng();
            let count = PAIR_CHUNK.min(pairs - c * PAIR_CHUNK);
            let mut x = vec![0.0; p];
            let mut y = vec![0.0; p];
            let mut scratch = vec![0.0; p];
            (0..count)
                .map(|_| {
                    prepared.draw_into(&mut rng, &mut x, &mut scratch);
                    prepared.draw_into(&mut rng, &mut y, &mut scratch);
                    dot(&x, &y).clamp(-1.0, 1.0)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_unstable_by(f64::total_cmp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::normal_cdf;

    #[test]
    fn shift_values() {
        for k in [ShiftKind::Fvml, ShiftKind::Quadratic] {
            let b = ShiftFunction::new(k, 1.3).unwrap();
            assert_eq!(b.value(0.0), 0.0);
            assert_eq!(b.value(1.0), 0.0);
        }
        let f = ShiftFunction::fvml(1.0);
        assert!((f.value(0.5) - 0.282_094_791_773_878_1).abs() < 1e-14);
        let q = ShiftFunction::quadratic(1.0);
        let t1 = normal_cdf(1.0);
        let expect = normal_pdf(1.0) / (2.0 * std::f64::consts::SQRT_2);
        assert!((q.value(t1) - expect).abs() < 1e-12);
        assert!((expect - 0.085_55).abs() < 1e-4);
        let peak = 1.0 / (4.0 * (std::f64::consts::PI * std::f64::consts::E).sqrt());
        assert!((q.max_abs() - peak).abs() < 1e-15);
    }

    #[test]
    fn parametrizations() {
        assert!((fvml_kappa(1.0, 1000, 1000) - 1000f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(low_rank_k(2.0, 1000, 10_000), 9980);
        let k = watson_kappa(1.0, 1000, 3000);
        assert!((k - 951.0).abs() < 1.0, "{k}");
    }

    #[test]
    fn null_reduction() {
        for model in [
            ModelSpec::Fvml { p: 60, kappa: 0.0, mu: None },
            ModelSpec::Watson { p: 60, kappa: 0.0, mu: None },
            ModelSpec::LowRank { p: 60, k: 60, rotate: false },
        ] {
            let alt = AltInnerCdf::new(&model).unwrap();
            let m = NullCdf::new(60).unwrap();
            for u in [-2.0, 0.0, 2.0] {
                let d = (alt.eval(u) - m.eval(u / 60f64.sqrt())).abs();
                assert!(d < 1e-8, "{model:?} u={u}: {d}");
            }
        }
    }

    #[test]
    fn alt_cdf_monotone() {
        let alt = AltInnerCdf::new(&ModelSpec::Watson { p: 200, kappa: 60.0, mu: None }).unwrap();
        let mut prev = 0.0;
        for i in 0..512 {
            let v = alt.eval(-6.0 + 12.0 * i as f64 / 511.0);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn zero_signal_distance() {
        let opts = DistanceOptions { grid: 256, ..Default::default() };
        let d = distance_d_with(&ModelSpec::Fvml { p: 100, kappa: 0.0, mu: None }, opts).unwrap();
        assert!(d <= 1e-7, "{d}");
    }

    #[test]
    fn mc_pairs_deterministic() {
        let m = ModelSpec::Uniform { p: 10 };
        let a = sample_pair_products(&m, 3000, 9).unwrap();
        let b = sample_pair_products(&m, 3000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3000);
        assert!(estimate_distance_d_mc(&m, 100, 1).is_err());
    }
}

//! Seeded samplers for the uniform law and the alternatives: FvML, Watson,
//! low-rank uniform, α-spherical and the simplex cap mixture.
//!
//! Every sampler writes unit vectors. FvML, Watson and cap draws share the
//! tangent-normal construction `X = H(T, √(1-T²) W)` where `W` is uniform on
//! the sphere of `R^{p-1}` and `H` is the Householder reflection taking `e₁`
//! to the axis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{Marginal, MarginalKind};
use crate::sphere::{dot, UnitPointSet};

pub type SphereRng = ChaCha8Rng;

/// Data-generating law.
///
/// `mu` defaults to the first coordinate axis and `eps` to `1/(4p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Uniform {
        p: usize,
    },
    Fvml {
        p: usize,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
    },
    Watson {
        p: usize,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
    },
    LowRank {
        p: usize,
        k: usize,
        #[serde(default)]
        rotate: bool,
    },
    AlphaSpherical {
        p: usize,
        alpha: f64,
    },
    CapMixture {
        p: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::Uniform { p }
            | ModelSpec::Fvml { p, .. }
            | ModelSpec::Watson { p, .. }
            | ModelSpec::LowRank { p, .. }
            | ModelSpec::AlphaSpherical { p, .. }
            | ModelSpec::CapMixture { p, .. } => p,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Uniform { .. } => "uniform",
            ModelSpec::Fvml { .. } => "fvml",
            ModelSpec::Watson { .. } => "watson",
            ModelSpec::LowRank { .. } => "low_rank",
            ModelSpec::AlphaSpherical { .. } => "alpha_spherical",
            ModelSpec::CapMixture { .. } => "cap_mixture",
        }
    }

    /// Cap radius with the default applied.
    pub fn cap_eps(p: usize, eps: Option<f64>) -> f64 {
        eps.unwrap_or(1.0 / (4.0 * p as f64))
    }

    /// Checks every parameter constraint without building anything.
    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if p < 2 {
            return Err(Error::domain(format!("dimension p = {p} must be >= 2")));
        }
        match self {
            ModelSpec::Uniform { .. } => Ok(()),
            ModelSpec::Fvml { kappa, mu, .. } | ModelSpec::Watson { kappa, mu, .. } => {
                if p < 3 {
                    return Err(Error::domain("FvML/Watson need p >= 3"));
                }
                if !(*kappa >= 0.0 && kappa.is_finite()) {
                    return Err(Error::domain(format!("kappa must be finite and >= 0, got {kappa}")));
                }
                if let Some(mu) = mu {
                    check_axis(mu, p)?;
                }
                Ok(())
            }
            ModelSpec::LowRank { k, .. } => {
                if *k < 2 || *k > p {
                    return Err(Error::domain(format!("need 2 <= k <= p, got k={k}, p={p}")));
                }
                Ok(())
            }
            ModelSpec::AlphaSpherical { alpha, .. } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::domain(format!("alpha must lie in (0, 2), got {alpha}")));
                }
                Ok(())
            }
            ModelSpec::CapMixture { eps, .. } => {
                if p < 3 {
                    return Err(Error::domain("cap mixture needs p >= 3"));
                }
                let e = Self::cap_eps(p, *eps);
                if !(e > 0.0 && e < std::f64::consts::FRAC_PI_4) {
                    return Err(Error::domain(format!("cap radius must lie in (0, π/4), got {e}")));
                }
                Ok(())
            }
        }
    }
}

fn check_axis(mu: &[f64], p: usize) -> Result<()> {
    if mu.len() != p {
        return Err(Error::BadShape(format!("mu has {} entries, expected {p}", mu.len())));
    }
    let norm = dot(mu, mu).sqrt();
    if !((norm - 1.0).abs() <= 1e-8) {
        return Err(Error::NotUnit { row: 0, norm });
    }
    Ok(())
}

/// Master seed plus replication stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        RngSeed { master, stream }
    }

    pub fn rng(&self) -> SphereRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master);
        r.set_stream(self.stream);
        r
    }
}

type CacheKey = (u8, usize, u64);

fn marginal_cache() -> &'static Mutex<HashMap<CacheKey, Arc<Marginal>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Marginal>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Shared, lazily built marginal table for `(kind, p, param)`.
pub fn cached_marginal(kind: MarginalKind, p: usize, param: f64) -> Result<Arc<Marginal>> {
    let tag = match kind {
        MarginalKind::Fvml => 0,
        MarginalKind::Watson => 1,
        MarginalKind::CapAngle => 2,
    };
    let key = (tag, p, param.to_bits());
    let mut cache = marginal_cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(m) = cache.get(&key) {
        return Ok(m.clone());
    }
    let m = Arc::new(match kind {
        MarginalKind::Fvml => Marginal::fvml(p, param)?,
        MarginalKind::Watson => Marginal::watson(p, param)?,
        MarginalKind::CapAngle => Marginal::cap_angle(p, param)?,
    });
    cache.insert(key, m.clone());
    Ok(m)
}

fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Writes a uniform direction into `out`.
pub fn fill_uniform_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        fill_normal(rng, out);
        let norm = dot(out, out).sqrt();
        if norm > 1e-150 {
            for v in out.iter_mut() {
                *v /= norm;
            }
            return;
        }
    }
}

pub fn sample_uniform_direction<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; p];
    fill_uniform_direction(rng, &mut x);
    x
}

/// `x ← H x` for the reflection `H` swapping `e₁` and `axis`.
fn reflect_e1_to(axis: &[f64], x: &mut [f64]) {
    // v = e₁ - axis, vᵀv = 2(1 - axis₀)
    let vv = 2.0 * (1.0 - axis[0]);
    if vv <= 1e-300 {
        return;
    }
    let vx = x[0] - dot(axis, x);
    let c = 2.0 * vx / vv;
    x[0] -= c;
    for (xi, ai) in x.iter_mut().zip(axis) {
        *xi += c * ai;
    }
}

/// Writes `H(cos, sin·W)` for a uniform `W ⟂ e₁` into `out`.
fn fill_tangent<R: Rng + ?Sized>(axis: &[f64], cos: f64, sin: f64, rng: &mut R, out: &mut [f64]) {
    fill_uniform_direction(rng, &mut out[1..]);
    for v in out[1..].iter_mut() {
        *v *= sin;
    }
    out[0] = cos;
    reflect_e1_to(axis, out);
}

/// Draws `X = T μ + √(1-T²) W` with `T` from `marginal`.
pub fn sample_tangent_normal<R: Rng + ?Sized>(
    marginal: &Marginal,
    mu: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if matches!(marginal.kind(), MarginalKind::CapAngle) {
        return Err(Error::domain("tangent-normal draws need an FvML or Watson marginal"));
    }
    check_axis(mu, marginal.dim())?;
    let mut x = vec![0.0; mu.len()];
    let t = marginal.sample(rng);
    fill_tangent(mu, t, (1.0 - t * t).max(0.0).sqrt(), rng, &mut x);
    Ok(x)
}

fn fill_lowrank<R: Rng + ?Sized>(k: usize, rot: Option<&LowRankRotation>, rng: &mut R, out: &mut [f64]) {
    fill_uniform_direction(rng, &mut out[..k]);
    out[k..].fill(0.0);
    if let Some(r) = rot {
        r.apply(out);
    }
}

/// Fixed rotation for the rotated low-rank sampler: the product of two
/// Householder reflections with directions drawn from a seed tied to `(p, k)`.
#[derive(Clone, Debug)]
struct LowRankRotation {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LowRankRotation {
    fn new(p: usize, k: usize) -> Self {
        let mut rng = RngSeed::new(0x9e37_79b9_7f4a_7c15 ^ p as u64, k as u64).rng();
        LowRankRotation {
            a: sample_uniform_direction(p, &mut rng),
            b: sample_uniform_direction(p, &mut rng),
        }
    }

    fn apply(&self, x: &mut [f64]) {
        for v in [&self.a, &self.b] {
            let c = 2.0 * dot(v, x);
            for (xi, vi) in x.iter_mut().zip(v.iter()) {
                *xi -= c * vi;
            }
        }
    }
}

/// Uniform draw from the unit sphere of the first `k` coordinates.
pub fn sample_lowrank<R: Rng + ?Sized>(p: usize, k: usize, rotate: bool, rng: &mut R) -> Result<Vec<f64>> {
    ModelSpec::LowRank { p, k, rotate }.validate()?;
    let rot = rotate.then(|| LowRankRotation::new(p, k));
    let mut x = vec![0.0; p];
    fill_lowrank(k, rot.as_ref(), rng, &mut x);
    Ok(x)
}

fn fill_alpha_spherical<R: Rng + ?Sized>(alpha: f64, rng: &mut R, out: &mut [f64]) {
    // magnitudes V^{-1/α} kept as logs, since they overflow for small α
    let mut top = f64::NEG_INFINITY;
    for v in out.iter_mut() {
        let u: f64 = 1.0 - rng.random::<f64>();
        let l = -u.ln() / alpha;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        *v = sign * l;
        top = top.max(l);
    }
    for v in out.iter_mut() {
        *v = v.signum() * (v.abs() - top).exp();
    }
    let norm = dot(out, out).sqrt();
    for v in out.iter_mut() {
        *v /= norm;
    }
}

/// Normalized vector of i.i.d. symmetric Pareto(α) coordinates.
pub fn sample_alpha_spherical<R: Rng + ?Sized>(p: usize, alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    ModelSpec::AlphaSpherical { p, alpha }.validate()?;
    let mut x = vec![0.0; p];
    fill_alpha_spherical(alpha, rng, &mut x);
    Ok(x)
}

/// Vertex `i ∈ 0..=p` of the centered regular simplex in `R^p`.
///
/// `u_i = e_i - 1/(p+1)` in `R^{p+1}` is rescaled to unit length, then the
/// reflection taking `1/√(p+1)` to `e_{p+1}` moves the zero-sum hyperplane
/// onto the first `p` coordinates.
pub fn simplex_vertex(p: usize, i: usize, out: &mut [f64]) {
    assert!(i <= p && out.len() == p);
    let m = (p + 1) as f64;
    let scale = (m / p as f64).sqrt();
    let r = 1.0 / m.sqrt();
    let ww = 2.0 - 2.0 * r;
    // w = r·1 - e_{p+1}; u·1 = 0 so w·u = -u_{p+1}
    let u_last = scale * (if i == p { 1.0 } else { 0.0 } - 1.0 / m);
    let c = 2.0 * (-u_last) / ww;
    for (j, o) in out.iter_mut().enumerate() {
        let u = scale * (if j == i { 1.0 } else { 0.0 } - 1.0 / m);
        *o = u - c * r;
    }
}

/// The `p+1` unit vectors with pairwise inner products `-1/p`.
pub fn build_simplex_frame(p: usize) -> Result<Vec<Vec<f64>>> {
    if p < 3 {
        return Err(Error::domain(format!("simplex frame needs p >= 3, got {p}")));
    }
    Ok((0..=p)
        .map(|i| {
            let mut v = vec![0.0; p];
            simplex_vertex(p, i, &mut v);
            v
        })
        .collect())
}

fn fill_cap<R: Rng + ?Sized>(angle: &Marginal, vertex: &mut [f64], rng: &mut R, out: &mut [f64]) -> usize {
    let p = out.len();
    let label = rng.random_range(0..=p);
    simplex_vertex(p, label, vertex);
    let theta = angle.sample(rng);
    fill_tangent(vertex, theta.cos(), theta.sin(), rng, out);
    label
}

/// One draw from the equal-weight mixture of uniform caps of angular radius
/// `eps` around the simplex vertices. Returns the cap label and the point.
pub fn sample_cap_mixture<R: Rng + ?Sized>(p: usize, eps: f64, rng: &mut R) -> Result<(usize, Vec<f64>)> {
    ModelSpec::CapMixture { p, eps: Some(eps) }.validate()?;
    let angle = cached_marginal(MarginalKind::CapAngle, p, eps)?;
    let mut vertex = vec![0.0; p];
    let mut x = vec![0.0; p];
    let label = fill_cap(&angle, &mut vertex, rng, &mut x);
    Ok((label, x))
}

#[derive(Clone, Debug)]
enum Prepared {
    Uniform,
    Tangent { marginal: Arc<Marginal>, mu: Vec<f64> },
    LowRank { k: usize, rot: Option<LowRankRotation> },
    Alpha { alpha: f64 },
    Cap { angle: Arc<Marginal> },
}

/// A validated model with its tables built, ready for repeated sampling.
#[derive(Clone, Debug)]
pub struct PreparedModel {
    spec: ModelSpec,
    p: usize,
    inner: Prepared,
}

impl PreparedModel {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.dim();
        let axis = |mu: &Option<Vec<f64>>| {
            mu.clone().unwrap_or_else(|| {
                let mut e = vec![0.0; p];
                e[0] = 1.0;
                e
            })
        };
        let inner = match spec {
            ModelSpec::Uniform { .. } => Prepared::Uniform,
            ModelSpec::Fvml { kappa, mu, .. } => Prepared::Tangent {
                marginal: cached_marginal(MarginalKind::Fvml, p, *kappa)?,
                mu: axis(mu),
            },
            ModelSpec::Watson { kappa, mu, .. } => Prepared::Tangent {
                marginal: cached_marginal(MarginalKind::Watson, p, *kappa)?,
                mu: axis(mu),
            },
            ModelSpec::LowRank { k, rotate, .. } => Prepared::LowRank {
                k: *k,
                rot: rotate.then(|| LowRankRotation::new(p, *k)),
            },
            ModelSpec::AlphaSpherical { alpha, .. } => Prepared::Alpha { alpha: *alpha },
            ModelSpec::CapMixture { eps, .. } => Prepared::Cap {
                angle: cached_marginal(MarginalKind::CapAngle, p, ModelSpec::cap_eps(p, *eps))?,
            },
        };
        Ok(PreparedModel {
            spec: spec.clone(),
            p,
            inner,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Writes one draw into `out` (length `p`).
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut [f64]) {
        match &self.inner {
            Prepared::Uniform => fill_uniform_direction(rng, out),
            Prepared::Tangent { marginal, mu } => {
                let t = marginal.sample(rng);
                fill_tangent(mu, t, (1.0 - t * t).max(0.0).sqrt(), rng, out);
            }
            Prepared::LowRank { k, rot } => fill_lowrank(*k, rot.as_ref(), rng, out),
            Prepared::Alpha { alpha } => fill_alpha_spherical(*alpha, rng, out),
            Prepared::Cap { angle } => {
                fill_cap(angle, scratch, rng, out);
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.p];
        let mut scratch = vec![0.0; self.p];
        self.draw_into(rng, &mut x, &mut scratch);
        x
    }

    /// `n` i.i.d. draws from one RNG stream.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<UnitPointSet> {
        if n < 2 {
            return Err(Error::BadShape(format!("need n >= 2, got {n}")));
        }
        let p = self.p;
        let mut data = vec![0.0; n * p];
        let mut scratch = vec![0.0; p];
        for row in data.chunks_exact_mut(p) {
            self.draw_into(rng, row, &mut scratch);
        }
        Ok(UnitPointSet::from_unit_rows(data, n, p))
    }

    pub fn sample(&self, n: usize, seed: RngSeed) -> Result<UnitPointSet> {
        self.sample_with(n, &mut seed.rng())
    }
}

/// `n` i.i.d. draws from `model`; bit-identical for identical seeds.
pub fn sample(model: &ModelSpec, n: usize, seed: RngSeed) -> Result<UnitPointSet> {
    PreparedModel::new(model)?.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(x: &[f64]) -> f64 {
        dot(x, x).sqrt()
    }

    #[test]
    fn seeds_are_reproducible() {
        let m = ModelSpec::Watson {
            p: 20,
            kappa: 5.0,
            mu: None,
        };
        let a = sample(&m, 10, RngSeed::new(3, 1)).unwrap();
        let b = sample(&m, 10, RngSeed::new(3, 1)).unwrap();
        let c = sample(&m, 10, RngSeed::new(3, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn every_sampler_is_unit() {
        let p = 30;
        let mut mu = vec![0.0; p];
        mu[3] = 0.6;
        mu[7] = -0.8;
        let models = [
            ModelSpec::Uniform { p },
            ModelSpec::Fvml { p, kappa: 12.0, mu: Some(mu.clone()) },
            ModelSpec::Watson { p, kappa: 40.0, mu: Some(mu) },
            ModelSpec::LowRank { p, k: 4, rotate: true },
            ModelSpec::AlphaSpherical { p, alpha: 0.3 },
            ModelSpec::CapMixture { p, eps: None },
        ];
        for m in &models {
            let s = sample(m, 50, RngSeed::new(11, 0)).unwrap();
            for r in s.rows() {
                assert!((norm(r) - 1.0).abs() < 1e-10, "{m:?}");
            }
        }
    }

    #[test]
    fn lowrank_embedding_has_zero_tail() {
        let mut rng = RngSeed::new(1, 0).rng();
        let x = sample_lowrank(10, 3, false, &mut rng).unwrap();
        assert!(x[3..].iter().all(|&v| v == 0.0));
        assert!(sample_lowrank(10, 1, false, &mut rng).is_err());
        assert!(sample_lowrank(10, 11, false, &mut rng).is_err());
    }

    #[test]
    fn householder_moves_axis() {
        let p = 5;
        let mu = [0.0, 0.0, 1.0, 0.0, 0.0];
        let mut x = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        reflect_e1_to(&mu, &mut x);
        for j in 0..p {
            assert!((x[j] - mu[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn simplex_geometry() {
        for p in [3, 4, 17, 200] {
            let f = build_simplex_frame(p).unwrap();
            assert_eq!(f.len(), p + 1);
            let mut sum = vec![0.0; p];
            for (i, v) in f.iter().enumerate() {
                assert!((norm(v) - 1.0).abs() < 1e-12);
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                for w in &f[i + 1..] {
                    assert!((dot(v, w) + 1.0 / p as f64).abs() < 1e-10);
                }
            }
            assert!(norm(&sum) < 1e-10);
        }
        assert!(build_simplex_frame(2).is_err());
    }

    #[test]
    fn cap_draws_stay_in_cap() {
        let p = 50;
        let eps = 1.0 / (4.0 * p as f64);
        let mut rng = RngSeed::new(5, 0).rng();
        let frame = build_simplex_frame(p).unwrap();
        for _ in 0..500 {
            let (l, x) = sample_cap_mixture(p, eps, &mut rng).unwrap();
            let c = dot(&x, &frame[l]).clamp(-1.0, 1.0);
            assert!(c.acos() <= eps * (1.0 + 1e-9));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::Fvml { p: 5, kappa: -1.0, mu: None }.validate().is_err());
        assert!(ModelSpec::Fvml { p: 3, kappa: 1.0, mu: Some(vec![1.0, 1.0, 0.0]) }
            .validate()
            .is_err());
        assert!(ModelSpec::AlphaSpherical { p: 5, alpha: 2.0 }.validate().is_err());
        assert!(ModelSpec::CapMixture { p: 5, eps: Some(1.0) }.validate().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let m: ModelSpec = serde_json::from_str(r#"{"family":"low_rank","p":80,"k":76}"#).unwrap();
        assert_eq!(m, ModelSpec::LowRank { p: 80, k: 76, rotate: false });
        let s = serde_json::to_string(&ModelSpec::Watson { p: 6, kappa: 1.5, mu: None }).unwrap();
        assert_eq!(s, r#"{"family":"watson","p":6,"kappa":1.5}"#);
    }
}

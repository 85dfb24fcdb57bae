//! One-dimensional laws of the projection `μ·X` for rotationally symmetric
//! models, and of the polar angle inside a spherical cap.
//!
//! All three kernels are handled in log space around their modes. The
//! effective support is the set where the log-kernel is within
//! [`SUPPORT_DROP`] of its maximum; mass outside it is below `e^-60`
//! relative to the peak and is ignored.

use rand::Rng;

use super::beta::ln_beta;
use super::quad::{integrate, GaussLegendre, MAX_EVALS};
use crate::error::{Error, Result};

pub const SUPPORT_DROP: f64 = 60.0;
const TABLE_PANELS: usize = 1024;
const PANEL_ORDER: usize = 10;
const REL_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MarginalKind {
    /// density ∝ exp(κt)(1-t²)^{(p-3)/2} on [-1, 1]
    Fvml,
    /// density ∝ exp(κt²)(1-t²)^{(p-3)/2} on [-1, 1]
    Watson,
    /// polar angle θ ∈ [0, ε] of a uniform point in a cap: density ∝ sin^{p-2}θ
    CapAngle,
}

/// Normalized 1-D density handle with moments, CDF and inverse-CDF sampling.
#[derive(Clone, Debug)]
pub struct Marginal {
    kind: MarginalKind,
    p: usize,
    param: f64,
    exponent: f64,
    lo: f64,
    hi: f64,
    modes: Vec<f64>,
    shift: f64,
    log_mass: f64,
    edges: Vec<f64>,
    cum: Vec<f64>,
    rule: GaussLegendre,
}

impl Marginal {
    pub fn fvml(p: usize, kappa: f64) -> Result<Self> {
        Self::fvml_impl(p, kappa, true)
    }

    /// Untabulated handle: normalizer and moments only (no CDF/quantile).
    fn fvml_impl(p: usize, kappa: f64, tabulate: bool) -> Result<Self> {
        check_dim(p)?;
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("FvML concentration must be >= 0, got {kappa}")));
        }
        let h = (p as f64 - 3.0) / 2.0;
        let mode = if kappa == 0.0 {
            0.0
        } else {
            // positive root of κt² + (p-3)t - κ = 0
            2.0 * kappa / (2.0 * h + (4.0 * h * h + 4.0 * kappa * kappa).sqrt())
        };
        Self::build(MarginalKind::Fvml, p, kappa, h, (-1.0, 1.0), vec![mode], tabulate)
    }

    pub fn watson(p: usize, kappa: f64) -> Result<Self> {
        check_dim(p)?;
        if !kappa.is_finite() {
            return Err(Error::domain(format!("Watson concentration must be finite, got {kappa}")));
        }
        let h = (p as f64 - 3.0) / 2.0;
        let modes = if kappa > h && kappa > 0.0 {
            let t = (1.0 - h / kappa).max(0.0).sqrt();
            vec![-t, t]
        } else {
            vec![0.0]
        };
        Self::build(MarginalKind::Watson, p, kappa, h, (-1.0, 1.0), modes, true)
    }

    /// Polar angle of a uniform draw from a cap of angular radius `eps`.
    pub fn cap_angle(p: usize, eps: f64) -> Result<Self> {
        check_dim(p)?;
        if !(eps > 0.0 && eps < std::f64::consts::FRAC_PI_4) {
            return Err(Error::domain(format!("cap radius must lie in (0, π/4), got {eps}")));
        }
        let h = p as f64 - 2.0;
        Self::build(MarginalKind::CapAngle, p, eps, h, (0.0, eps), vec![eps], true)
    }

    fn build(
        kind: MarginalKind,
        p: usize,
        param: f64,
        exponent: f64,
        domain: (f64, f64),
        modes: Vec<f64>,
        tabulate: bool,
    ) -> Result<Self> {
        let mut m = Marginal {
            kind,
            p,
            param,
            exponent,
            lo: domain.0,
            hi: domain.1,
            modes,
            shift: 0.0,
            log_mass: 0.0,
            edges: Vec::new(),
            cum: Vec::new(),
            rule: GaussLegendre::new(PANEL_ORDER),
        };
        m.shift = m
            .modes
            .iter()
            .map(|&t| m.log_kernel(t))
            .fold(f64::NEG_INFINITY, f64::max);
        if !m.shift.is_finite() {
            return Err(Error::domain("log-kernel is not finite at its mode"));
        }
        let first = m.modes[0];
        let last = *m.modes.last().unwrap();
        m.lo = m.find_edge(first, domain.0);
        m.hi = m.find_edge(last, domain.1);
        let mass = m.integrate_weighted(|_| 1.0);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::domain("marginal kernel has no mass"));
        }
        m.log_mass = mass.ln();
        if tabulate {
            m.build_table();
        }
        Ok(m)
    }

    /// Unnormalized log-kernel.
    #[inline]
    pub fn log_kernel(&self, t: f64) -> f64 {
        match self.kind {
            MarginalKind::Fvml | MarginalKind::Watson => {
                if t <= -1.0 || t >= 1.0 {
                    return if self.exponent == 0.0 {
                        self.tilt(t.clamp(-1.0, 1.0))
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                let base = if self.exponent == 0.0 {
                    0.0
                } else {
                    self.exponent * ((1.0 - t).ln() + (1.0 + t).ln())
                };
                self.tilt(t) + base
            }
            MarginalKind::CapAngle => {
                if t <= 0.0 {
                    return if self.exponent == 0.0 { 0.0 } else { f64::NEG_INFINITY };
                }
                self.exponent * t.sin().ln()
            }
        }
    }

    #[inline]
    fn tilt(&self, t: f64) -> f64 {
        match self.kind {
            MarginalKind::Fvml => self.param * t,
            MarginalKind::Watson => self.param * t * t,
            MarginalKind::CapAngle => 0.0,
        }
    }

    /// Normalized log-density.
    #[inline]
    pub fn log_density(&self, t: f64) -> f64 {
        self.log_kernel(t) - self.shift - self.log_mass
    }

    pub fn density(&self, t: f64) -> f64 {
        self.log_density(t).exp()
    }

    /// `ln ∫ kernel` over the domain.
    pub fn log_normalizer(&self) -> f64 {
        self.shift + self.log_mass
    }

    pub fn kind(&self) -> MarginalKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Concentration κ (or cap radius for the cap angle).
    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    fn find_edge(&self, mode: f64, bound: f64) -> f64 {
        let target = self.shift - SUPPORT_DROP;
        if self.log_kernel(bound) >= target {
            return bound;
        }
        let (mut inside, mut outside) = (mode, bound);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if self.log_kernel(mid) >= target {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        outside
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.lo];
        pts.extend(self.modes.iter().copied().filter(|&m| m > self.lo && m < self.hi));
        if self.modes.len() > 1 && self.lo < 0.0 && self.hi > 0.0 {
            pts.push(0.0);
        }
        pts.push(self.hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `∫ g(t) exp(kernel(t) - shift) dt` over the effective support.
    fn integrate_weighted<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let pts = self.breakpoints();
        integrate(
            |t| g(t) * (self.log_kernel(t) - self.shift).exp(),
            &pts,
            0.0,
            REL_TOL,
            MAX_EVALS,
        )
        .value
    }

    /// `E[g(T)]` by adaptive quadrature.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.integrate_weighted(g) / self.log_mass.exp()
    }

    /// `E[T^k]` for `k <= 8`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k > 8 {
            return Err(Error::domain(format!("moment order {k} above 8")));
        }
        Ok(self.expectation(|t| t.powi(k as i32)))
    }

    fn build_table(&mut self) {
        let n = TABLE_PANELS;
        let width = (self.hi - self.lo) / n as f64;
        let mut edges = Vec::with_capacity(n + 1);
        let mut cum = Vec::with_capacity(n + 1);
        edges.push(self.lo);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.lo + width * i as f64;
            let b = if i + 1 == n { self.hi } else { a + width };
            acc += self.panel_mass(a, b);
            edges.push(b);
            cum.push(acc);
        }
        self.edges = edges;
        self.cum = cum;
    }

    fn panel_mass(&self, a: f64, b: f64) -> f64 {
        self.rule
            .integrate(|t| (self.log_kernel(t) - self.shift).exp(), a, b)
    }

    fn table_total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// `P(T <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.lo {
            return 0.0;
        }
        if t >= self.hi {
            return 1.0;
        }
        let k = self.panel_of(t);
        let partial = self.panel_mass(self.edges[k], t);
        ((self.cum[k] + partial) / self.table_total()).clamp(0.0, 1.0)
    }

    fn panel_of(&self, t: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= t);
        k.saturating_sub(1).min(self.edges.len() - 2)
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let target = u * self.table_total();
        let k = self
            .cum
            .partition_point(|&c| c <= target)
            .saturating_sub(1)
            .min(self.edges.len() - 2);
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        let r = target - self.cum[k];
        let (mut lo, mut hi) = (a, b);
        let mut t = a + (b - a) * (r / (self.cum[k + 1] - self.cum[k]).max(f64::MIN_POSITIVE));
        t = t.clamp(a, b);
        for _ in 0..60 {
            let g = self.panel_mass(a, t) - r;
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = (self.log_kernel(t) - self.shift).exp();
            let mut next = if d > 0.0 { t - g / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * (b - a).max(f64::MIN_POSITIVE) || hi - lo <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        t
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Discrete approximation of the law: composite Gauss–Legendre nodes over
    /// the effective support with weights normalized to sum to one.
    pub fn quadrature_nodes(&self, panels: usize, order: usize) -> Vec<(f64, f64)> {
        let rule = GaussLegendre::new(order);
        let mut pts = self.breakpoints();
        // subdivide each breakpoint interval into equal panels
        let span = self.hi - self.lo;
        let mut nodes = Vec::with_capacity(panels * order + order * pts.len());
        pts.dedup();
        for w in pts.windows(2) {
            let k = ((panels as f64 * (w[1] - w[0]) / span).ceil() as usize).max(1);
            let h = (w[1] - w[0]) / k as f64;
            for j in 0..k {
                let a = w[0] + h * j as f64;
                for (t, wt) in rule.mapped(a, a + h) {
                    nodes.push((t, wt * (self.log_kernel(t) - self.shift).exp()));
                }
            }
        }
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        for n in &mut nodes {
            n.1 /= total;
        }
        nodes
    }
}

fn check_dim(p: usize) -> Result<()> {
    if p < 3 {
        return Err(Error::domain(format!("dimension p = {p} must be >= 3")));
    }
    Ok(())
}

/// Log of `∫_{-1}^{1} (1-t²)^{(p-3)/2} dt = B(1/2, (p-1)/2)`.
pub fn log_null_kernel_mass(p: usize) -> f64 {
    ln_beta(0.5, (p as f64 - 1.0) / 2.0)
}

/// Density handle for `μ·X` under a Watson law with concentration `kappa`.
pub fn watson_marginal(kappa: f64, p: usize) -> Result<Marginal> {
    Marginal::watson(p, kappa)
}

/// `ln Z_p(κ)` with `Z_p(κ) = E_0[exp(κ (μ·X)²)]` under the uniform law.
pub fn watson_log_z(kappa: f64, p: usize) -> Result<f64> {
    Ok(Marginal::watson(p, kappa)?.log_normalizer() - log_null_kernel_mass(p))
}

/// `ln C_p(κ)` with `C_p(κ) = 1 / E_0[exp(κ μ·X)]`, the FvML normalizer
/// relative to the uniform law.
pub fn fvml_log_normalizer(kappa: f64, p: usize) -> Result<f64> {
    check_dim(p)?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("FvML concentration must be >= 0, got {kappa}")));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    if kappa <= 2.0 * (p as f64).sqrt() {
        fvml_log_normalizer_small(kappa, p)
    } else {
        fvml_log_normalizer_log_space(kappa, p)
    }
}

/// `-ln(1 + E_0[cosh(κT) - 1])`, keeping relative accuracy in the deviation
/// from zero for weak concentration.
pub(crate) fn fvml_log_normalizer_small(kappa: f64, p: usize) -> Result<f64> {
    let tilted = Marginal::fvml_impl(p, kappa, false)?;
    let null = Marginal::fvml_impl(p, 0.0, false)?;
    let lo = tilted.lo.min(null.lo);
    let hi = tilted.hi.max(null.hi);
    let h = (p as f64 - 3.0) / 2.0;
    let base = |t: f64| {
        if h == 0.0 {
            1.0
        } else if t <= -1.0 || t >= 1.0 {
            0.0
        } else {
            (h * ((1.0 - t).ln() + (1.0 + t).ln())).exp()
        }
    };
    let pts = [lo, 0.0, tilted.modes[0].max(1e-300).min(hi), hi];
    let mut pts = pts.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let num = integrate(
        |t| {
            let s = (0.5 * kappa * t).sinh();
            2.0 * s * s * base(t)
        },
        &pts,
        0.0,
        REL_TOL,
        MAX_EVALS,
    )
    .value;
    let den = integrate(base, &pts, 0.0, REL_TOL, MAX_EVALS).value;
    Ok(-(num / den).ln_1p())
}

pub(crate) fn fvml_log_normalizer_log_space(kappa: f64, p: usize) -> Result<f64> {
    let tilted = Marginal::fvml_impl(p, kappa, false)?;
    Ok(-(tilted.log_normalizer() - log_null_kernel_mass(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::quad::GaussLegendre;

    /// Composite Gauss–Legendre over all of [-1, 1] with many panels: an
    /// independent rule with no support truncation.
    fn brute_log_integral(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
        let gl = GaussLegendre::new(20);
        let h = 2.0 / panels as f64;
        (0..panels)
            .map(|i| gl.integrate(&f, -1.0 + h * i as f64, -1.0 + h * (i + 1) as f64))
            .sum::<f64>()
            .ln()
    }

    #[test]
    fn null_moments_match_beta_identities() {
        for p in [3usize, 10, 100, 1000] {
            let m = Marginal::fvml(p, 0.0).unwrap();
            let pf = p as f64;
            assert!((m.moment(2).unwrap() - 1.0 / pf).abs() < 1e-12 / pf);
            let m4 = 3.0 / (pf * (pf + 2.0));
            assert!((m.moment(4).unwrap() - m4).abs() < 1e-11 * m4);
            assert!(m.moment(1).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_mass_matches_beta() {
        for p in [3usize, 4, 50, 777] {
            let m = Marginal::fvml(p, 0.0).unwrap();
            assert!((m.log_normalizer() - log_null_kernel_mass(p)).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn normalizer_zero_and_routes_agree() {
        assert_eq!(fvml_log_normalizer(0.0, 50).unwrap(), 0.0);
        for &(p, k) in &[(50usize, 3.0), (200, 10.0), (1000, 40.0), (3, 1.5)] {
            let a = fvml_log_normalizer_small(k, p).unwrap();
            let b = fvml_log_normalizer_log_space(k, p).unwrap();
            assert!((a - b).abs() < 1e-11, "p={p} κ={k}: {a} vs {b}");
        }
    }

    #[test]
    fn normalizer_two_rule_cross_check() {
        let (p, kappa) = (200usize, 10.0);
        let h = (p as f64 - 3.0) / 2.0;
        let log_e = brute_log_integral(|t| (kappa * t + h * (1.0 - t * t).ln()).exp(), 4000)
            - brute_log_integral(|t| (h * (1.0 - t * t).ln()).exp(), 4000);
        let v = fvml_log_normalizer(kappa, p).unwrap();
        assert!((v + log_e).abs() < 1e-9, "{v} vs {}", -log_e);
    }

    #[test]
    fn p3_normalizer_closed_form() {
        // p = 3: E_0 e^{κT} = sinh(κ)/κ
        let k: f64 = 2.5;
        let v = fvml_log_normalizer(k, 3).unwrap();
        assert!((v + (k.sinh() / k).ln()).abs() < 1e-12);
    }

    #[test]
    fn watson_moment_identity() {
        for &(p, kappa) in &[(600usize, 150.0), (3000, 951.0), (100, 10.0)] {
            let m = watson_marginal(kappa, p).unwrap();
            let delta = p as f64 / 2.0 - kappa;
            let e2 = m.moment(2).unwrap();
            let e4 = m.moment(4).unwrap();
            let resid = 1.0 - 2.0 * delta * e2 - 2.0 * kappa * e4;
            assert!(resid.abs() < 1e-8, "p={p} κ={kappa}: {resid}");
        }
    }

    #[test]
    fn watson_bimodal_regime() {
        let m = watson_marginal(60.0, 50).unwrap();
        assert_eq!(m.modes().len(), 2);
        assert!(m.moment(1).unwrap().abs() < 1e-12);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn cdf_and_quantile_invert() {
        let m = Marginal::fvml(100, 8.0).unwrap();
        for &u in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
            let t = m.quantile(u);
            assert!((m.cdf(t) - u).abs() < 1e-10, "u={u}");
        }
        let c = Marginal::cap_angle(2000, 1.0 / 8000.0).unwrap();
        for &u in &[0.0, 0.2, 0.9, 1.0] {
            let t = c.quantile(u);
            assert!(t >= 0.0 && t <= 1.0 / 8000.0);
        }
    }

    #[test]
    fn table_cdf_matches_adaptive() {
        let m = watson_marginal(150.0, 600).unwrap();
        for &t in &[-0.1, -0.02, 0.0, 0.05, 0.12] {
            let adaptive = m.expectation(|s| if s <= t { 1.0 } else { 0.0 });
            // the indicator makes adaptive quadrature crude; compare loosely
            assert!((m.cdf(t) - adaptive).abs() < 1e-6);
        }
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn discrete_nodes_reproduce_moments() {
        let m = Marginal::fvml(1000, 5.6).unwrap();
        let nodes = m.quadrature_nodes(8, 16);
        let e2: f64 = nodes.iter().map(|(t, w)| w * t * t).sum();
        assert!((e2 / m.moment(2).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn domain_errors() {
        assert!(Marginal::fvml(2, 1.0).is_err());
        assert!(Marginal::fvml(10, -1.0).is_err());
        assert!(Marginal::cap_angle(10, 1.0).is_err());
        assert!(fvml_log_normalizer(-1.0, 10).is_err());
        assert!(watson_marginal(1.0, 10).unwrap().moment(9).is_err());
    }
}

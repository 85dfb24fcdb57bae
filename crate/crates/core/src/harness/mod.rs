//! Seeded Monte Carlo experiments: size, null-law checks, power curves and
//! the non-local alternatives.
//!
//! Replication `r` of signal index `i` for family `f` draws from stream
//! `f << 56 | i << 32 | r` of the master seed, so every cell is reproducible
//! on its own and results do not depend on the thread count.

mod svg;

pub use svg::power_curve_svg;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{fvml_kappa, low_rank_k, watson_kappa};
use crate::error::{Error, Result};
use crate::hypothesis::{
    projection_sup_distance, CriticalRegion, Calibration, Method, PairStatistics, Tail,
};
use crate::samplers::{fill_uniform_direction, ModelSpec, PreparedModel, RngSeed, SphereRng};
use crate::specfun::{kolmogorov_cdf, packing_gumbel_quantile, NullCdfTable};
use crate::hypothesis::sup_distance_sorted;
use crate::sphere::{dot, pairwise_inner_products};

pub const DEFAULT_REPS: usize = 2000;
pub const DEFAULT_NONLOCAL_REPS: usize = 200;

/// Model family with any parameters not driven by the signal `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyTemplate {
    Uniform,
    /// `κ = τ p^{3/4} / √n`
    Fvml {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
    },
    /// `κ = p^{3/2} √τ / (2(√n + √(τp)))`
    Watson {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
    },
    /// `k = round(p(1 - τ/n))`
    LowRank {
        #[serde(default)]
        rotate: bool,
    },
    /// `τ` unused.
    AlphaSpherical { alpha: f64 },
    /// `τ` unused.
    CapMixture {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
}

impl FamilyTemplate {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTemplate::Uniform => "uniform",
            FamilyTemplate::Fvml { .. } => "fvml",
            FamilyTemplate::Watson { .. } => "watson",
            FamilyTemplate::LowRank { .. } => "low_rank",
            FamilyTemplate::AlphaSpherical { .. } => "alpha_spherical",
            FamilyTemplate::CapMixture { .. } => "cap_mixture",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            FamilyTemplate::Uniform => 0,
            FamilyTemplate::Fvml { .. } => 1,
            FamilyTemplate::Watson { .. } => 2,
            FamilyTemplate::LowRank { .. } => 3,
            FamilyTemplate::AlphaSpherical { .. } => 4,
            FamilyTemplate::CapMixture { .. } => 5,
        }
    }

    /// Concrete model at signal `tau` for sample size `n` in dimension `p`.
    pub fn model(&self, tau: f64, n: usize, p: usize) -> Result<ModelSpec> {
        let spec = match self {
            FamilyTemplate::Uniform => ModelSpec::Uniform { p },
            FamilyTemplate::Fvml { mu } => ModelSpec::Fvml {
                p,
                kappa: fvml_kappa(tau, n, p),
                mu: mu.clone(),
            },
            FamilyTemplate::Watson { mu } => {
                let kappa = watson_kappa(tau, n, p);
                if kappa >= p as f64 / 2.0 {
                    return Err(Error::InRegime(format!(
                        "Watson kappa = {kappa:.3} >= p/2 = {} at tau = {tau}",
                        p as f64 / 2.0
                    )));
                }
                ModelSpec::Watson { p, kappa, mu: mu.clone() }
            }
            FamilyTemplate::LowRank { rotate } => {
                let k = low_rank_k(tau, n, p);
                if k < 2 || k > p {
                    return Err(Error::InRegime(format!("low-rank k = {k} outside [2, {p}] at tau = {tau}")));
                }
                ModelSpec::LowRank { p, k, rotate: *rotate }
            }
            FamilyTemplate::AlphaSpherical { alpha } => ModelSpec::AlphaSpherical { p, alpha: *alpha },
            FamilyTemplate::CapMixture { eps } => ModelSpec::CapMixture { p, eps: *eps },
        };
        spec.validate().map_err(|e| Error::InRegime(e.to_string()))?;
        Ok(spec)
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

fn default_grid() -> Vec<f64> {
    vec![0.0]
}

fn default_methods() -> Vec<Method> {
    vec![Method::SupDistance, Method::Rayleigh, Method::Bingham, Method::Packing]
}

/// JSON experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub model_family: FamilyTemplate,
    #[serde(default = "default_grid")]
    pub signal_grid: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tails: BTreeMap<Method, Tail>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub calibration: BTreeMap<Method, Calibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn new(n: usize, p: usize, model_family: FamilyTemplate) -> Self {
        ExperimentConfig {
            n,
            p,
            alpha: default_alpha(),
            reps: DEFAULT_REPS,
            model_family,
            signal_grid: default_grid(),
            methods: default_methods(),
            seed: 0,
            tails: BTreeMap::new(),
            calibration: BTreeMap::new(),
            output_path: None,
        }
    }

    pub fn tail(&self, m: Method) -> Tail {
        self.tails.get(&m).copied().unwrap_or_default()
    }

    pub fn calibration_for(&self, m: Method) -> Calibration {
        self.calibration.get(&m).copied().unwrap_or_default()
    }

    /// Checks the config and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n < 2 || self.p < 2 {
            return cfg(format!("need n >= 2 and p >= 2, got n={}, p={}", self.n, self.p));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return cfg(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.reps < 100 {
            return cfg(format!("reps must be >= 100, got {}", self.reps));
        }
        if self.signal_grid.is_empty() {
            return cfg("signal_grid is empty".into());
        }
        if self.signal_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return cfg("signal_grid values must be finite and >= 0".into());
        }
        if self.signal_grid.windows(2).any(|w| w[1] <= w[0]) {
            return cfg("signal_grid must be strictly increasing".into());
        }
        if self.methods.is_empty() {
            return cfg("methods is empty".into());
        }
        for &m in &self.methods {
            if !m.supports(self.tail(m)) {
                return Err(Error::BadTail {
                    method: m.name().into(),
                    tail: self.tail(m).to_string(),
                });
            }
            if m == Method::Packing && self.n < 3 {
                return cfg("packing needs n >= 3".into());
            }
        }
        for &tau in &self.signal_grid {
            self.model_family.model(tau, self.n, self.p)?;
        }
        let mut warnings = Vec::new();
        if matches!(self.model_family, FamilyTemplate::Watson { .. }) {
            let floor = 5.0 * (self.n as f64).powf(2.0 / 3.0);
            if (self.p as f64) < floor {
                warnings.push(format!(
                    "p = {} is below 5 n^(2/3) = {floor:.0}; the Watson local limit may be inaccurate",
                    self.p
                ));
            }
        }
        Ok(warnings)
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Parses a JSON config; errors name the offending field path and line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            line: inner.line(),
            field: path,
            msg: inner.to_string(),
        }
    })?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn save_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// simulation engine

/// Raw statistics of one replication, indexed like [`Method::ALL`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepStats(pub [Option<f64>; 5]);

impl RepStats {
    pub fn get(&self, m: Method) -> Option<f64> {
        self.0[method_index(m)]
    }
}

fn method_index(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).expect("known method")
}

pub fn stream_id(family: u64, signal_index: usize, rep: usize) -> u64 {
    (family << 56) | ((signal_index as u64) << 32) | rep as u64
}

fn one_rep(model: &PreparedModel, n: usize, table: &NullCdfTable, want_projection: bool, rng: &mut SphereRng) -> Result<RepStats> {
    let s = model.sample_with(n, rng)?;
    let list = pairwise_inner_products(&s);
    let ps = PairStatistics::with_cdf(&list, s.p(), |t| table.eval(t));
    let mut out = [Some(ps.t), Some(ps.rayleigh), Some(ps.bingham), ps.packing, None];
    if want_projection {
        let mut u = vec![0.0; s.p()];
        fill_uniform_direction(rng, &mut u);
        let mut proj: Vec<f64> = s.rows().map(|x| dot(x, &u)).collect();
        out[4] = Some(projection_sup_distance(&mut proj, s.p())?);
    }
    Ok(RepStats(out))
}

/// Statistics of `reps` replications of `model` in rep order.
pub fn simulate_statistics(
    model: &ModelSpec,
    n: usize,
    reps: usize,
    seed: u64,
    family_tag: u64,
    signal_index: usize,
    projection: bool,
) -> Result<Vec<RepStats>> {
    let prepared = PreparedModel::new(model)?;
    let table = NullCdfTable::new(model.dim())?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngSeed::new(seed, stream_id(family_tag, signal_index, r)).rng();
            one_rep(&prepared, n, &table, projection, &mut rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodRate {
    pub method: Method,
    pub rate: f64,
    pub se: f64,
    pub reps: usize,
    pub rejections: usize,
}

impl MethodRate {
    fn from_count(method: Method, rejections: usize, reps: usize) -> Self {
        let rate = rejections as f64 / reps as f64;
        MethodRate {
            method,
            rate,
            se: (rate * (1.0 - rate) / reps as f64).sqrt(),
            reps,
            rejections,
        }
    }
}

fn regions(cfg: &ExperimentConfig) -> Result<Vec<CriticalRegion>> {
    cfg.methods
        .iter()
        .map(|&m| CriticalRegion::new(m, cfg.n, cfg.p, cfg.alpha, cfg.tail(m), cfg.calibration_for(m)))
        .collect()
}

fn rates(stats: &[RepStats], regions: &[CriticalRegion]) -> Vec<MethodRate> {
    regions
        .iter()
        .map(|reg| {
            let hits = stats
                .iter()
                .filter(|s| s.get(reg.method()).is_some_and(|v| reg.rejects(v)))
                .count();
            MethodRate::from_count(reg.method(), hits, stats.len())
        })
        .collect()
}

/// Null rejection rates; the model family is replaced by the uniform law.
pub fn run_size_experiment(cfg: &ExperimentConfig) -> Result<Vec<MethodRate>> {
    let mut cfg = cfg.clone();
    cfg.model_family = FamilyTemplate::Uniform;
    cfg.signal_grid = vec![0.0];
    cfg.validate()?;
    let regs = regions(&cfg)?;
    let want_proj = cfg.methods.contains(&Method::Projection);
    let stats = simulate_statistics(
        &ModelSpec::Uniform { p: cfg.p },
        cfg.n,
        cfg.reps,
        cfg.seed,
        FamilyTemplate::Uniform.tag(),
        0,
        want_proj,
    )?;
    Ok(rates(&stats, &regs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullDistributionCheck {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    /// KS distance of `√(n(n-1)/2)·T_n` from the Kolmogorov law.
    pub ks: f64,
    /// Empirical rejection rate of the asymptotic 5% test.
    pub size_05: f64,
    #[serde(skip)]
    pub standardized: Vec<f64>,
}

pub fn run_null_distribution_check(n: usize, p: usize, reps: usize, seed: u64) -> Result<NullDistributionCheck> {
    if reps < 1 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let stats = simulate_statistics(&ModelSpec::Uniform { p }, n, reps, seed, FamilyTemplate::Uniform.tag(), 0, false)?;
    let scale = ((n * (n - 1)) as f64 / 2.0).sqrt();
    let mut z: Vec<f64> = stats.iter().map(|s| scale * s.0[0].expect("T")).collect();
    z.sort_unstable_by(f64::total_cmp);
    let ks = sup_distance_sorted(&z, kolmogorov_cdf);
    let reg = CriticalRegion::new(Method::SupDistance, n, p, 0.05, Tail::Upper, Calibration::Asymptotic)?;
    let size = stats.iter().filter(|s| reg.rejects(s.0[0].unwrap())).count() as f64 / reps as f64;
    Ok(NullDistributionCheck {
        n,
        p,
        reps,
        ks,
        size_05: size,
        standardized: z,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerCell {
    pub tau: f64,
    pub method: Method,
    pub rate: f64,
    pub se: f64,
    pub reps: usize,
    pub rejections: usize,
}

/// Rejection rates per signal value and method, with run metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerCurve {
    pub family: String,
    pub config_hash: String,
    pub seed: u64,
    pub reps: usize,
    pub wall_clock_secs: f64,
    pub cells: Vec<PowerCell>,
}

impl PowerCurve {
    pub const CSV_HEADER: &'static str = "family,tau,method,rate,se,reps,seed";

    pub fn rate(&self, tau: f64, method: Method) -> Option<&PowerCell> {
        self.cells.iter().find(|c| c.tau == tau && c.method == method)
    }

    /// Column of rates for one method in signal order.
    pub fn series(&self, method: Method) -> Vec<&PowerCell> {
        self.cells.iter().filter(|c| c.method == method).collect()
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = Vec::new();
        for c in &self.cells {
            if !m.contains(&c.method) {
                m.push(c.method);
            }
        }
        m
    }

    /// Rates in `[0, 1]` and SE consistent with the binomial formula.
    pub fn check_invariants(&self) -> Result<()> {
        for c in &self.cells {
            let se = (c.rate * (1.0 - c.rate) / c.reps as f64).sqrt();
            if !(0.0..=1.0).contains(&c.rate) || (c.se - se).abs() > 1e-12 || c.rejections > c.reps {
                return Err(Error::Config(format!("invariant breach in cell {c:?}")));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.family, c.tau, c.method, c.rate, c.se, c.reps, self.seed
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("utf-8")
    }
}

pub fn export_csv(curve: &PowerCurve, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    curve.write_csv(&mut f)?;
    f.flush()?;
    Ok(())
}

/// One row of an exported power-curve CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerRow {
    pub family: String,
    pub tau: f64,
    pub method: Method,
    pub rate: f64,
    pub se: f64,
    pub reps: usize,
    pub seed: u64,
}

pub fn read_power_csv(path: impl AsRef<Path>) -> Result<Vec<PowerRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        line: 0,
        field: String::new(),
        msg: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, field: String::new(), msg: e.to_string() })?;
        let field = |j: usize, name: &str| -> Result<String> {
            rec.get(j).map(str::to_string).ok_or_else(|| Error::Parse {
                line,
                field: name.into(),
                msg: "missing".into(),
            })
        };
        let num = |j: usize, name: &str| -> Result<f64> {
            field(j, name)?.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
                line,
                field: name.into(),
                msg: e.to_string(),
            })
        };
        out.push(PowerRow {
            family: field(0, "family")?,
            tau: num(1, "tau")?,
            method: field(2, "method")?.parse()?,
            rate: num(3, "rate")?,
            se: num(4, "se")?,
            reps: num(5, "reps")? as usize,
            seed: field(6, "seed")?.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                line,
                field: "seed".into(),
                msg: e.to_string(),
            })?,
        });
    }
    Ok(out)
}

/// Rejection rates over the signal grid for every configured method.
pub fn run_power_curve(cfg: &ExperimentConfig) -> Result<PowerCurve> {
    cfg.validate()?;
    let start = Instant::now();
    let regs = regions(cfg)?;
    let want_proj = cfg.methods.contains(&Method::Projection);
    let tag = cfg.model_family.tag();
    let mut cells = Vec::new();
    for (i, &tau) in cfg.signal_grid.iter().enumerate() {
        let model = cfg.model_family.model(tau, cfg.n, cfg.p)?;
        let stats = simulate_statistics(&model, cfg.n, cfg.reps, cfg.seed, tag, i, want_proj)?;
        for r in rates(&stats, &regs) {
            cells.push(PowerCell {
                tau,
                method: r.method,
                rate: r.rate,
                se: r.se,
                reps: r.reps,
                rejections: r.rejections,
            });
        }
    }
    let curve = PowerCurve {
        family: cfg.model_family.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        reps: cfg.reps,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        cells,
    };
    curve.check_invariants()?;
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlocalKind {
    CapMixture,
    AlphaSpherical { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlocalResult {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub rates: Vec<MethodRate>,
    pub mean_r: f64,
    pub mean_abs_r: f64,
    pub se_abs_r: f64,
    /// `3(n-1)/(2√(2p))`, the bound on `|R_n|` for the cap mixture.
    pub r_bound: f64,
    pub share_b_negative: f64,
    /// Share of reps with `P_n` below the null `α`-quantile.
    pub share_p_low: f64,
}

/// All four pairwise tests (upper tail, asymptotic calibration) against a
/// non-local alternative, with diagnostics.
pub fn run_nonlocal_experiment(
    kind: NonlocalKind,
    n: usize,
    p: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<NonlocalResult> {
    let (family, model) = match kind {
        NonlocalKind::CapMixture => {
            if p < 2 * n * n {
                return Err(Error::Config(format!("cap mixture needs p >= 2n² = {}, got {p}", 2 * n * n)));
            }
            (FamilyTemplate::CapMixture { eps: None }, ModelSpec::CapMixture { p, eps: None })
        }
        NonlocalKind::AlphaSpherical { alpha: a } => (
            FamilyTemplate::AlphaSpherical { alpha: a },
            ModelSpec::AlphaSpherical { p, alpha: a },
        ),
    };
    if reps < 2 {
        return Err(Error::Config("reps must be >= 2".into()));
    }
    let methods = [Method::SupDistance, Method::Rayleigh, Method::Bingham, Method::Packing];
    let regs: Vec<CriticalRegion> = methods
        .iter()
        .map(|&m| CriticalRegion::new(m, n, p, alpha, Tail::Upper, Calibration::Asymptotic))
        .collect::<Result<_>>()?;
    let stats = simulate_statistics(&model, n, reps, seed, family.tag(), 0, false)?;
    let rf = reps as f64;
    let r: Vec<f64> = stats.iter().map(|s| s.0[1].unwrap()).collect();
    let mean_r = r.iter().sum::<f64>() / rf;
    let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let mean_abs = abs.iter().sum::<f64>() / rf;
    let var_abs = abs.iter().map(|v| (v - mean_abs).powi(2)).sum::<f64>() / (rf - 1.0);
    let low_p = packing_gumbel_quantile(1.0 - alpha)?;
    Ok(NonlocalResult {
        n,
        p,
        reps,
        rates: rates(&stats, &regs),
        mean_r,
        mean_abs_r: mean_abs,
        se_abs_r: (var_abs / rf).sqrt(),
        r_bound: 3.0 * (n as f64 - 1.0) / (2.0 * (2.0 * p as f64).sqrt()),
        share_b_negative: stats.iter().filter(|s| s.0[2].unwrap() < 0.0).count() as f64 / rf,
        share_p_low: stats
            .iter()
            .filter(|s| s.0[3].is_some_and(|v| v < low_p))
            .count() as f64
            / rf,
    })
}

//! Experiment configuration, the parallel trial runner and result
//! persistence.
//!
//! A run is a pure function of its [`ExperimentConfig`]: trial `i` draws its
//! coefficients from stream `(master_seed, i)`, trials are evaluated in
//! parallel and folded in index order, so the per-trial summaries and every
//! aggregate are identical for any worker count.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{GEventChecker, KacPolynomial};
use crate::gauss::{self, DomainSpec};
use crate::grid::{self, SampleGrid};
use crate::linearize::{separation_audit, MuBuilder, SeparationReport};
use crate::process::{ExtendedMark, Interval, PointProcess};
use crate::roots::{self, RootSet};
use crate::sampler::{CoefficientLaw, SeedSpec};
use crate::stats::{self, Ensemble, ExtendedIntensityReport, MomentReport, TrialSummary, UniversalityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MuPoisson,
    NuPoisson,
    MuNuCompare,
    Covariance,
    GaussOracle,
    Universality,
    ExtendedIntensity,
    SeparationAudit,
}

impl ExperimentKind {
    pub const ALL: [Self; 8] = [
        Self::MuPoisson,
        Self::NuPoisson,
        Self::MuNuCompare,
        Self::Covariance,
        Self::GaussOracle,
        Self::Universality,
        Self::ExtendedIntensity,
        Self::SeparationAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MuPoisson => "mu-poisson",
            Self::NuPoisson => "nu-poisson",
            Self::MuNuCompare => "mu-nu-compare",
            Self::Covariance => "covariance",
            Self::GaussOracle => "gauss-oracle",
            Self::Universality => "universality",
            Self::ExtendedIntensity => "extended-intensity",
            Self::SeparationAudit => "separation-audit",
        }
    }

    fn needs_mu(self) -> bool {
        matches!(
            self,
            Self::MuPoisson
                | Self::MuNuCompare
                | Self::Universality
                | Self::ExtendedIntensity
                | Self::SeparationAudit
        )
    }

    fn needs_nu(self) -> bool {
        matches!(self, Self::NuPoisson | Self::MuNuCompare | Self::Universality)
    }

    fn has_trials(self) -> bool {
        self.needs_mu() || self.needs_nu()
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `signed` counts `n²(|z| − 1)` and `n²ρ`; `reflected` negates both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    #[default]
    Signed,
    Reflected,
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(Self::Signed),
            "reflected" => Ok(Self::Reflected),
            other => Err(Error::InvalidConfig(format!("unknown sign convention `{other}`"))),
        }
    }
}

fn default_n() -> usize {
    1024
}
fn default_k0() -> f64 {
    grid::DEFAULT_K0
}
fn default_kappa() -> f64 {
    grid::DEFAULT_KAPPA
}
fn default_p_max() -> u32 {
    grid::DEFAULT_P_MAX
}
fn default_law() -> String {
    "gaussian".into()
}
fn default_law_b() -> String {
    "rademacher".into()
}
fn default_intervals() -> Vec<[f64; 2]> {
    vec![[-3.0, 3.0]]
}
fn default_trials() -> usize {
    100
}
fn default_angle_count() -> usize {
    50
}
fn default_radii() -> Vec<f64> {
    vec![0.2, 1.0, f64::INFINITY]
}
fn default_v() -> [f64; 2] {
    [-PI / 2.0, PI / 2.0]
}
fn default_mc_samples() -> usize {
    10_000_000
}
fn default_bins() -> usize {
    12
}
fn default_true() -> bool {
    true
}

/// Flat, typed experiment configuration. Every field except the output
/// settings is echoed into the result and covered by its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_k0")]
    pub k0: f64,
    #[serde(default)]
    pub n_override: Option<usize>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_p_max")]
    pub p_max: u32,
    #[serde(default = "default_law")]
    pub law: String,
    #[serde(default)]
    pub law_params: Vec<f64>,
    /// Count intervals `U`; the first one drives agreement and universality.
    #[serde(default = "default_intervals")]
    pub intervals: Vec<[f64; 2]>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sign_convention: SignConvention,
    /// Pool extended marks of `μ^♯` and run the shape check.
    #[serde(default)]
    pub extended: bool,
    /// Run the derivative-control check on every trial.
    #[serde(default)]
    pub check_g: bool,
    /// Covariance angles; empty means `angle_count` equispaced angles in
    /// `[n^{−1/2}, π − n^{−1/2}]`.
    #[serde(default)]
    pub angles: Vec<f64>,
    #[serde(default = "default_angle_count")]
    pub angle_count: usize,
    /// Gaussian-oracle radii; `inf` (or the string `"inf"`) means no bound.
    #[serde(default = "default_radii", with = "radii_serde")]
    pub radii: Vec<f64>,
    #[serde(default = "default_v")]
    pub v: [f64; 2],
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Second ensemble of the universality experiment.
    #[serde(default = "default_law_b")]
    pub law_b: String,
    #[serde(default)]
    pub law_b_params: Vec<f64>,
    /// Chi-square cells for the radial-mark uniformity check.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Keep per-trial summaries in the JSON result.
    #[serde(default = "default_true")]
    pub keep_summaries: bool,

    /// Worker threads; 0 uses every core.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub csv: Option<PathBuf>,
    /// Directory for SVG plots.
    #[serde(default, skip_serializing)]
    pub plots: Option<PathBuf>,
    /// CSV of all roots of accepted trials (`trial,re,im,residual`).
    #[serde(default, skip_serializing)]
    pub dump_roots: Option<PathBuf>,
}

/// JSON has no infinity, so infinite radii travel as the string `"inf"`.
mod radii_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Radius {
        Finite(f64),
        Named(String),
    }

    pub fn serialize<S: Serializer>(radii: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Radius> = radii
            .iter()
            .map(|&r| if r.is_finite() { Radius::Finite(r) } else { Radius::Named("inf".into()) })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Radius>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Radius::Finite(x) => Ok(x),
                Radius::Named(s) if s == "inf" => Ok(f64::INFINITY),
                Radius::Named(s) => Err(serde::de::Error::custom(format!("bad radius `{s}`"))),
            })
            .collect()
    }
}

impl ExperimentConfig {
    /// All defaults for one experiment kind.
    pub fn new(experiment: ExperimentKind) -> Self {
        let mut t = toml::Table::new();
        t.insert("experiment".into(), experiment.name().into());
        Self::deserialize(t).expect("defaults deserialize")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Parses a file whose `experiment` key may be omitted; if present it
    /// must equal `kind`.
    pub fn from_toml_with_kind(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        match table.get("experiment").and_then(|v| v.as_str()) {
            Some(k) if k != kind.name() => {
                return Err(Error::MismatchedConfig(format!(
                    "config file is for `{k}`, command line asks for `{kind}`"
                )))
            }
            _ => {
                table.insert("experiment".into(), kind.name().into());
            }
        }
        Ok(Self::deserialize(table)?)
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        Self::from_toml_with_kind(&fs::read_to_string(path)?, kind)
    }

    pub fn law(&self) -> Result<CoefficientLaw> {
        CoefficientLaw::from_name(&self.law, &self.law_params)
    }

    pub fn law_b(&self) -> Result<CoefficientLaw> {
        CoefficientLaw::from_name(&self.law_b, &self.law_b_params)
    }

    pub fn count_intervals(&self) -> Vec<Interval> {
        self.intervals.iter().map(|&[a, b]| Interval::new(a, b)).collect()
    }

    pub fn grid(&self) -> Result<SampleGrid> {
        grid::build_grid(self.n, self.k0, self.kappa, self.p_max, self.n_override)
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        for &[a, b] in &self.intervals {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return bad(format!("interval [{a}, {b}] is not a finite closed interval"));
            }
        }
        match self.experiment {
            ExperimentKind::Covariance => {
                if self.angles.iter().any(|t| !(0.0..=PI).contains(t)) {
                    return bad("covariance angles must lie in [0, π]".into());
                }
                if self.angles.is_empty() && self.angle_count == 0 {
                    return bad("angle_count must be positive".into());
                }
            }
            ExperimentKind::GaussOracle => {
                if self.intervals.is_empty() {
                    return bad("gauss-oracle needs an interval U".into());
                }
                if self.radii.iter().any(|r| r.is_nan() || *r < 0.0) {
                    return bad("radii must be non-negative".into());
                }
                if !(self.v[0] <= self.v[1]) {
                    return bad("V must satisfy lo ≤ hi".into());
                }
                if self.mc_samples == 0 {
                    return bad("mc_samples must be positive".into());
                }
                self.oracle_big_n()?;
            }
            kind => {
                debug_assert!(kind.has_trials());
                if self.intervals.is_empty() {
                    return bad("at least one count interval is required".into());
                }
                if self.trials < 2 {
                    return bad("at least two trials are required".into());
                }
                if self.bins < 2 {
                    return bad("bins must be at least 2".into());
                }
                self.law()?;
                if kind == ExperimentKind::Universality {
                    self.law_b()?;
                }
                self.grid()?;
            }
        }
        Ok(())
    }

    fn oracle_big_n(&self) -> Result<usize> {
        match self.n_override {
            Some(0) => Err(Error::InvalidConfig("N override must be ≥ 1".into())),
            Some(m) => Ok(m),
            None => match grid::grid_size(self.n, self.k0) {
                0 => Err(Error::InvalidConfig("N = ⌊n²/log^K0 n⌋ is zero".into())),
                m => Ok(m),
            },
        }
    }

    /// SHA-256 of the echoed configuration (compact JSON).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Seed of the second universality ensemble.
pub fn derived_seed(master_seed: u64) -> u64 {
    master_seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    pub big_n: usize,
    pub k0: f64,
    pub kappa: f64,
    pub p_max: u32,
    pub bad_arc_fraction: f64,
}

impl GridInfo {
    fn of(g: &SampleGrid) -> Self {
        Self {
            n: g.n(),
            big_n: g.big_n(),
            k0: g.k0(),
            kappa: g.kappa(),
            p_max: g.p_max(),
            bad_arc_fraction: grid::bad_arc_fraction(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMoments {
    pub interval: Interval,
    pub moments: Vec<MomentReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatMassReport {
    pub mu_rate: Option<f64>,
    pub nu_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestReport {
    pub samples: usize,
    pub rate: f64,
    pub ks: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootGateReport {
    pub attempted: usize,
    pub accepted: usize,
    pub max_residual: f64,
}

impl RootGateReport {
    pub fn acceptance(&self) -> f64 {
        self.accepted as f64 / self.attempted.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GReport {
    pub trials: usize,
    pub passed: usize,
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub t: f64,
    pub sigma: Vec<Vec<f64>>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub n: usize,
    pub sigma0: Vec<Vec<f64>>,
    pub entries: Vec<CovarianceEntry>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    /// `None` for `r = ∞`.
    pub r: Option<f64>,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub lebesgue_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussOracleReport {
    pub n: usize,
    pub big_n: usize,
    pub u: Interval,
    pub v: Interval,
    pub samples: usize,
    pub rows: Vec<OracleRow>,
}

/// Aggregates; fields not produced by an experiment are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub mu_sharp_moments: Vec<IntervalMoments>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub nu_sharp_moments: Vec<IntervalMoments>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub flat_mass: Option<FlatMassReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nearest: Option<NearestReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub agreement_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g_check: Option<GReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub separation: Option<SeparationReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub extended: Option<ExtendedIntensityReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub root_gate: Option<RootGateReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub covariance: Option<CovarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gauss_oracle: Option<GaussOracleReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub universality: Option<UniversalityReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub universality_b: Option<Box<Report>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTrial {
    pub trial_index: u64,
    pub reason: String,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub software_version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<GridInfo>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub excluded_trials: Vec<ExcludedTrial>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub summaries: Option<Vec<TrialSummary>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub summaries_b: Option<Vec<TrialSummary>>,
    pub report: Report,
    /// Pooled `μ^♯` marks, for plots only.
    #[serde(skip)]
    pub pooled_mu_marks: Vec<f64>,
}

impl RunResult {
    /// The JSON with the wall time zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.wall_time_s = 0.0;
        serde_json::to_string_pretty(&c).expect("result serializes")
    }
}

struct TrialCtx<'a> {
    grid: &'a SampleGrid,
    builder: MuBuilder<'a>,
    g_checker: Option<GEventChecker>,
    law: CoefficientLaw,
    master_seed: u64,
    intervals: Vec<Interval>,
    reflect: bool,
    need_mu: bool,
    need_nu: bool,
    extended: bool,
    keep_roots: bool,
}

struct TrialOutcome {
    summary: Option<TrialSummary>,
    excluded: Option<ExcludedTrial>,
    extended: Vec<ExtendedMark>,
    mu_marks: Vec<f64>,
    separation: Option<SeparationReport>,
    g: Option<(bool, f64)>,
    roots: Option<RootSet>,
    max_residual: Option<f64>,
}

fn counts(p: &PointProcess, intervals: &[Interval], reflect: bool) -> Vec<u64> {
    intervals
        .iter()
        .map(|u| {
            let s = if reflect { Interval::new(-u.hi, -u.lo) } else { *u };
            p.count(&s) as u64
        })
        .collect()
}

impl TrialCtx<'_> {
    fn run(&self, index: u64) -> TrialOutcome {
        let seed = SeedSpec::new(self.master_seed, index);
        let coeffs = self
            .law
            .draw_coefficients(self.grid.n(), seed)
            .expect("degree validated");
        let poly = KacPolynomial::new(coeffs).expect("finite coefficients");
        let mut out = TrialOutcome {
            summary: None,
            excluded: None,
            extended: Vec::new(),
            mu_marks: Vec::new(),
            separation: None,
            g: None,
            roots: None,
            max_residual: None,
        };

        let g = self.g_checker.as_ref().map(|c| c.check(&poly));
        out.g = g.map(|r| (r.passed, r.worst_ratio));

        let mut summary = TrialSummary::mu_only(index, Vec::new(), Vec::new(), 0);
        summary.g_passed = g.map(|r| r.passed);
        if self.need_mu {
            let mu = self.builder.build(&poly);
            summary.mu_sharp = counts(&mu.sharp, &self.intervals, self.reflect);
            summary.mu_flat = counts(&mu.flat, &self.intervals, self.reflect);
            summary.mu_flat_total = mu.flat.total() as u64;
            let sharp = if self.reflect { mu.sharp.reflected() } else { mu.sharp };
            out.mu_marks = sharp.marks().to_vec();
            if self.extended {
                out.extended = sharp.extended().unwrap_or_default().to_vec();
            }
            if g.is_some_and(|r| r.passed) {
                out.separation = Some(separation_audit(&mu.hits, self.grid));
            }
        }
        if self.need_nu {
            let rs = match roots::find_all_roots(&poly) {
                Ok(rs) if rs.passes_gate() => rs,
                Ok(rs) => {
                    let reason = format!("residual {:e} above gate", rs.max_residual());
                    log::warn!("trial {index} excluded: {reason}");
                    out.excluded = Some(ExcludedTrial { trial_index: index, reason });
                    return out;
                }
                Err(e) => {
                    log::warn!("trial {index} excluded: {e}");
                    out.excluded = Some(ExcludedTrial {
                        trial_index: index,
                        reason: e.to_string(),
                    });
                    return out;
                }
            };
            out.max_residual = Some(rs.max_residual());
            let (sharp, flat) = roots::build_nu(&rs, self.grid);
            let nu_sharp = counts(&sharp, &self.intervals, self.reflect);
            summary.nu_flat = Some(counts(&flat, &self.intervals, self.reflect));
            summary.nu_flat_total = Some(flat.total() as u64);
            summary.nearest_distance = Some(roots::nearest_distance(&rs).expect("degree ≥ 1"));
            if self.need_mu {
                summary.agreement = Some(summary.mu_sharp[0] == nu_sharp[0]);
            }
            summary.nu_sharp = Some(nu_sharp);
            if self.keep_roots {
                out.roots = Some(rs);
            }
        }
        out.summary = Some(summary);
        out
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

struct Ensemble1 {
    summaries: Vec<TrialSummary>,
    excluded: Vec<ExcludedTrial>,
    report: Report,
    mu_marks: Vec<f64>,
    roots: Vec<(u64, RootSet)>,
}

fn run_ensemble(
    cfg: &ExperimentConfig,
    grid: &SampleGrid,
    law: CoefficientLaw,
    master_seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<Ensemble1> {
    let kind = cfg.experiment;
    let check_g = cfg.check_g || kind == ExperimentKind::SeparationAudit;
    let ctx = TrialCtx {
        grid,
        builder: MuBuilder::new(grid),
        g_checker: check_g.then(|| GEventChecker::new(grid.n())),
        law,
        master_seed,
        intervals: cfg.count_intervals(),
        reflect: cfg.sign_convention == SignConvention::Reflected,
        need_mu: kind.needs_mu(),
        need_nu: kind.needs_nu(),
        extended: cfg.extended || kind == ExperimentKind::ExtendedIntensity,
        keep_roots: cfg.dump_roots.is_some(),
    };
    let done = AtomicUsize::new(0);
    let m = cfg.trials;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..m as u64)
            .into_par_iter()
            .map(|i| {
                let o = ctx.run(i);
                let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                if d.is_multiple_of((m / 10).max(1)) {
                    log::info!("{kind}: {d}/{m} trials");
                }
                o
            })
            .collect()
    });

    let mut e = Ensemble1 {
        summaries: Vec::with_capacity(m),
        excluded: Vec::new(),
        report: Report::default(),
        mu_marks: Vec::new(),
        roots: Vec::new(),
    };
    let mut extended = Vec::new();
    let mut separation: Option<SeparationReport> = None;
    let mut g = GReport {
        trials: 0,
        passed: 0,
        worst_ratio: 0.0,
    };
    let mut max_residual: f64 = 0.0;
    for (i, o) in outcomes.into_iter().enumerate() {
        if let Some((passed, ratio)) = o.g {
            g.trials += 1;
            g.passed += passed as usize;
            g.worst_ratio = g.worst_ratio.max(ratio);
        }
        if let Some(x) = o.excluded {
            e.excluded.push(x);
            continue;
        }
        if let Some(s) = o.separation {
            separation.get_or_insert_with(SeparationReport::default).merge(&s);
        }
        if let Some(r) = o.max_residual {
            max_residual = max_residual.max(r);
        }
        if let Some(rs) = o.roots {
            e.roots.push((i as u64, rs));
        }
        extended.extend(o.extended);
        e.mu_marks.extend(o.mu_marks);
        e.summaries.push(o.summary.expect("accepted trial has a summary"));
    }

    if ctx.need_nu {
        let attempted = m;
        let accepted = e.summaries.len();
        e.report.root_gate = Some(RootGateReport {
            attempted,
            accepted,
            max_residual,
        });
        if (attempted - accepted) as f64 > 0.01 * attempted as f64 {
            return Err(Error::TooManyRootFailures {
                failed: attempted - accepted,
                total: attempted,
            });
        }
    }
    if e.summaries.len() < 2 {
        return Err(Error::Empty("fewer than two accepted trials"));
    }

    let intervals = ctx.intervals.clone();
    let moments = |u: &Interval, pick: &dyn Fn(&TrialSummary) -> Option<u64>| -> Result<Option<IntervalMoments>> {
        let Some(c) = e.summaries.iter().map(pick).collect::<Option<Vec<u64>>>() else {
            return Ok(None);
        };
        let moments = (1..=4)
            .map(|k| stats::empirical_factorial_moments(&c, k, u))
            .collect::<Result<_>>()?;
        Ok(Some(IntervalMoments { interval: *u, moments }))
    };
    for (j, u) in intervals.iter().enumerate() {
        if ctx.need_mu {
            e.report.mu_sharp_moments.extend(moments(u, &|s| s.mu_sharp.get(j).copied())?);
        }
        if ctx.need_nu {
            e.report.nu_sharp_moments.extend(moments(u, &|s| s.nu_sharp.as_ref().map(|c| c[j]))?);
        }
    }

    let (mu_rate, nu_rate) = stats::flat_mass_rate(&e.summaries)?;
    e.report.flat_mass = Some(FlatMassReport {
        mu_rate: ctx.need_mu.then_some(mu_rate),
        nu_rate,
    });
    if ctx.need_nu {
        let d: Vec<f64> = e.summaries.iter().filter_map(|s| s.nearest_distance).collect();
        let ks = stats::ks_exponential(&d, 1.0 / 6.0)?;
        e.report.nearest = Some(NearestReport {
            samples: d.len(),
            rate: 1.0 / 6.0,
            ks,
            p_value: stats::ks_p_value(ks, d.len()),
        });
    }
    if ctx.need_mu && ctx.need_nu {
        e.report.agreement_rate = Some(stats::agreement_rate(&e.summaries)?);
    }
    if check_g {
        e.report.g_check = Some(g);
        e.report.separation = Some(separation.unwrap_or_default());
    }
    if ctx.extended {
        e.report.extended = Some(stats::extended_intensity_check(&extended, &intervals[0], cfg.bins));
    }
    Ok(e)
}

fn covariance_report(cfg: &ExperimentConfig) -> CovarianceReport {
    let n = cfg.n;
    let angles = if cfg.angles.is_empty() {
        let lo = (n as f64).powf(-0.5);
        let m = cfg.angle_count;
        if m == 1 {
            vec![PI / 2.0]
        } else {
            (0..m)
                .map(|i| lo + (PI - 2.0 * lo) * i as f64 / (m - 1) as f64)
                .collect()
        }
    } else {
        cfg.angles.clone()
    };
    let s0 = gauss::sigma0();
    let entries: Vec<CovarianceEntry> = angles
        .par_iter()
        .map(|&t| {
            let s = gauss::covariance_single(t, n);
            CovarianceEntry {
                t,
                max_deviation: s.max_abs_diff(&s0),
                sigma: s.rows(),
            }
        })
        .collect();
    CovarianceReport {
        n,
        sigma0: s0.rows(),
        max_deviation: entries.iter().map(|e| e.max_deviation).fold(0.0, f64::max),
        entries,
    }
}

fn gauss_oracle_report(cfg: &ExperimentConfig) -> Result<GaussOracleReport> {
    let big_n = cfg.oracle_big_n()?;
    let [a, b] = cfg.intervals[0];
    let u = Interval::new(a, b);
    let v = Interval::new(cfg.v[0], cfg.v[1]);
    let domains: Vec<DomainSpec> = cfg
        .radii
        .iter()
        .map(|&r| DomainSpec {
            u,
            v,
            r,
            big_n,
            n: cfg.n,
        })
        .collect();
    let mc = gauss::gaussian_prob_mc(&domains, cfg.mc_samples, cfg.master_seed)?;
    let rows = domains
        .iter()
        .zip(mc)
        .map(|(d, m)| {
            let closed = gauss::gaussian_prob_closed_form(d);
            OracleRow {
                r: d.r.is_finite().then_some(d.r),
                closed_form: closed,
                monte_carlo: m.value,
                std_error: m.std_error,
                z_score: m.z_score(closed),
                lebesgue_measure: gauss::lebesgue_measure(d).ok(),
            }
        })
        .collect();
    Ok(GaussOracleReport {
        n: cfg.n,
        big_n,
        u,
        v,
        samples: cfg.mc_samples,
        rows,
    })
}

/// Runs one experiment. Output files are written by [`write_outputs`].
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = thread_pool(cfg.workers)?;
    let mut result = RunResult {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        wall_time_s: 0.0,
        grid: None,
        excluded_trials: Vec::new(),
        summaries: None,
        summaries_b: None,
        report: Report::default(),
        pooled_mu_marks: Vec::new(),
    };
    match cfg.experiment {
        ExperimentKind::Covariance => {
            result.report.covariance = Some(pool.install(|| covariance_report(cfg)));
        }
        ExperimentKind::GaussOracle => {
            result.report.gauss_oracle = Some(pool.install(|| gauss_oracle_report(cfg))?);
        }
        kind => {
            let grid = cfg.grid()?;
            result.grid = Some(GridInfo::of(&grid));
            let a = run_ensemble(cfg, &grid, cfg.law()?, cfg.master_seed, &pool)?;
            if let Some(path) = &cfg.dump_roots {
                dump_roots(path, &a.roots)?;
            }
            if kind == ExperimentKind::Universality {
                let b = run_ensemble(cfg, &grid, cfg.law_b()?, derived_seed(cfg.master_seed), &pool)?;
                let ens = |s: &[TrialSummary]| Ensemble {
                    n: grid.n(),
                    k0: grid.k0(),
                    big_n: grid.big_n(),
                    intervals: cfg.count_intervals(),
                    summaries: s.to_vec(),
                };
                // equal trial counts are required; drop the tail of the larger
                let m = a.summaries.len().min(b.summaries.len());
                let mut report = a.report;
                report.universality =
                    Some(stats::universality_compare(&ens(&a.summaries[..m]), &ens(&b.summaries[..m]))?);
                report.universality_b = Some(Box::new(b.report));
                result.report = report;
                result.excluded_trials = a.excluded;
                result.excluded_trials.extend(b.excluded);
                if cfg.keep_summaries {
                    result.summaries_b = Some(b.summaries);
                }
            } else {
                result.report = a.report;
                result.excluded_trials = a.excluded;
            }
            result.pooled_mu_marks = a.mu_marks;
            if cfg.keep_summaries {
                result.summaries = Some(a.summaries);
            }
        }
    }
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(result)
}

fn dump_roots(path: &Path, roots: &[(u64, RootSet)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "re", "im", "residual"])?;
    for (i, rs) in roots {
        roots::write_roots_csv(&mut w, *i, rs)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the JSON result, the per-trial CSV and the SVG plots requested by
/// the configuration.
pub fn write_outputs(result: &RunResult) -> Result<()> {
    let cfg = &result.config;
    if let Some(path) = &cfg.output {
        create_parent(path)?;
        fs::write(path, serde_json::to_string_pretty(result)?)?;
    }
    if let Some(path) = &cfg.csv {
        create_parent(path)?;
        let summaries = result.summaries.clone().unwrap_or_default();
        write_summaries_csv(path, &result.config_hash, &cfg.count_intervals(), &summaries)?;
    }
    if let Some(dir) = &cfg.plots {
        fs::create_dir_all(dir)?;
        write_plots(dir, result)?;
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Per-trial table. The first line is `# config_hash=<hex>`; columns are
/// `trial_index`, then `mu_sharp_j`, `mu_flat_j`, `nu_sharp_j`, `nu_flat_j`
/// per interval `j`, then `mu_flat_total`, `nu_flat_total`,
/// `nearest_distance`, `g_passed`, `agreement`. Missing values are empty.
pub fn write_summaries_csv(
    path: &Path,
    config_hash: &str,
    intervals: &[Interval],
    summaries: &[TrialSummary],
) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["trial_index".to_string()];
    for j in 0..intervals.len() {
        for p in ["mu_sharp", "mu_flat", "nu_sharp", "nu_flat"] {
            header.push(format!("{p}_{j}"));
        }
    }
    header.extend(
        ["mu_flat_total", "nu_flat_total", "nearest_distance", "g_passed", "agreement"].map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for s in summaries {
        let mut row = vec![s.trial_index.to_string()];
        for j in 0..intervals.len() {
            row.push(opt(s.mu_sharp.get(j).map(u64::to_string)));
            row.push(opt(s.mu_flat.get(j).map(u64::to_string)));
            row.push(opt(s.nu_sharp.as_ref().map(|v| v[j].to_string())));
            row.push(opt(s.nu_flat.as_ref().map(|v| v[j].to_string())));
        }
        row.push(s.mu_flat_total.to_string());
        row.push(opt(s.nu_flat_total.map(|v| v.to_string())));
        row.push(opt(s.nearest_distance.map(|v| v.to_string())));
        row.push(opt(s.g_passed.map(|v| v.to_string())));
        row.push(opt(s.agreement.map(|v| v.to_string())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 320.0;
const PAD: f64 = 40.0;

fn svg_open(title: &str, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<!-- config_hash={hash} -->");
    let _ = writeln!(s, r#"<text x="{PAD}" y="20">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        SVG_W - 2.0 * PAD,
        SVG_H - 2.0 * PAD
    );
    s
}

fn polyline(pts: &[(f64, f64)], x_max: f64, y_max: f64, color: &str) -> String {
    let sx = |x: f64| PAD + (SVG_W - 2.0 * PAD) * (x / x_max).clamp(0.0, 1.0);
    let sy = |y: f64| SVG_H - PAD - (SVG_H - 2.0 * PAD) * (y / y_max).clamp(0.0, 1.0);
    let mut s = String::from(r#"<polyline fill="none" stroke=""#);
    s.push_str(color);
    s.push_str(r#"" points=""#);
    for &(x, y) in pts {
        let _ = write!(s, "{:.2},{:.2} ", sx(x), sy(y));
    }
    s.push_str("\"/>\n");
    s
}

fn write_plots(dir: &Path, result: &RunResult) -> Result<()> {
    let hash = &result.config_hash;
    let distances: Vec<f64> = result
        .summaries
        .iter()
        .flatten()
        .filter_map(|s| s.nearest_distance)
        .collect();
    if !distances.is_empty() {
        let mut d = distances;
        d.sort_by(f64::total_cmp);
        let x_max = 30.0;
        let m = d.len() as f64;
        let ecdf: Vec<(f64, f64)> = d.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / m)).collect();
        let exact: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let x = x_max * i as f64 / 100.0;
                (x, 1.0 - (-x / 6.0).exp())
            })
            .collect();
        let mut s = svg_open("nearest distance: empirical CDF (black) vs 1 - exp(-x/6) (red)", hash);
        s.push_str(&polyline(&ecdf, x_max, 1.0, "black"));
        s.push_str(&polyline(&exact, x_max, 1.0, "red"));
        s.push_str("</svg>\n");
        fs::write(dir.join("nearest_cdf.svg"), s)?;
    }
    if !result.pooled_mu_marks.is_empty() {
        let grid = result.grid.as_ref().expect("trial runs have a grid");
        let l = (grid.n as f64).ln();
        let bins = 24;
        let width = 2.0 * l / bins as f64;
        let mut h = vec![0usize; bins];
        for &x in &result.pooled_mu_marks {
            let b = ((x + l) / width).floor();
            if b >= 0.0 && (b as usize) < bins {
                h[b as usize] += 1;
            }
        }
        let trials = result.summaries.as_ref().map_or(1, Vec::len).max(1) as f64;
        let dens: Vec<f64> = h.iter().map(|&c| c as f64 / (trials * width)).collect();
        let y_max = dens.iter().copied().fold(1.0 / 6.0, f64::max);
        let mut steps = Vec::new();
        for (i, &y) in dens.iter().enumerate() {
            steps.push((i as f64 * width, y));
            steps.push(((i + 1) as f64 * width, y));
        }
        let flat = [(0.0, 1.0 / 12.0), (2.0 * l, 1.0 / 12.0)];
        let mut s = svg_open("mu-sharp mark intensity per trial (black) vs 1/12 (red), x from -log n to log n", hash);
        s.push_str(&polyline(&steps, 2.0 * l, y_max, "black"));
        s.push_str(&polyline(&flat, 2.0 * l, y_max, "red"));
        s.push_str("</svg>\n");
        fs::write(dir.join("mu_intensity.svg"), s)?;
    }
    Ok(())
}

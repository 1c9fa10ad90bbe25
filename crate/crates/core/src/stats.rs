//! Estimators and tests over trial summaries: factorial moments,
//! Kolmogorov–Smirnov distances, μ/ν agreement, flat mass, the extended
//! intensity shape and two-ensemble comparisons.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::process::{ExtendedMark, Interval};
use crate::tolerances;

/// `(x)_k = max{0, x(x−1)…(x−k+1)}`.
pub fn falling_factorial(x: i64, k: u32) -> i128 {
    assert!(k >= 1, "falling factorial needs k ≥ 1");
    let mut acc: i128 = 1;
    for j in 0..k as i64 {
        let f = (x - j) as i128;
        if f <= 0 {
            return 0;
        }
        acc *= f;
    }
    acc
}

/// Mean of `(count)_k` over trials against the Poisson target `(|U|/12)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub trials: usize,
}

impl MomentReport {
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            (self.estimate - self.target).abs() / self.std_error
        } else if self.estimate == self.target {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score() <= sigmas
    }
}

/// `(|U|/12)^k`.
pub fn poisson_target(u: &Interval, k: u32) -> f64 {
    (u.len() / 12.0).powi(k as i32)
}

pub fn empirical_factorial_moments(counts: &[u64], k: u32, u: &Interval) -> Result<MomentReport> {
    if counts.len() < 2 {
        return Err(Error::Empty("need at least two trials"));
    }
    let vals: Vec<f64> = counts
        .iter()
        .map(|&c| falling_factorial(c as i64, k) as f64)
        .collect();
    let (mean, se) = mean_and_se(&vals);
    Ok(MomentReport {
        k,
        estimate: mean,
        std_error: se,
        target: poisson_target(u, k),
        trials: counts.len(),
    })
}

/// Sample mean and its standard error (unbiased variance).
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `sup_x |F_M(x) − F(x)|`. Sorts `samples` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let m = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// KS distance to `1 − e^{−rate·x}`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples"));
    }
    let mut s = samples.to_vec();
    Ok(ks_statistic(&mut s, |x| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-rate * x).exp()
        }
    }))
}

/// `sup_x |F_A(x) − F_B(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("two-sample KS needs both samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`, the limiting survival function of
/// `√M · D_M`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS distance `d` from `m` samples.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    kolmogorov_survival((sm + 0.12 + 0.11 / sm) * d)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Least-squares slope through `(x, y)` points.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One trial's counts per configured interval, plus whole-line flat masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_index: u64,
    pub mu_sharp: Vec<u64>,
    pub mu_flat: Vec<u64>,
    pub mu_flat_total: u64,
    pub nu_sharp: Option<Vec<u64>>,
    pub nu_flat: Option<Vec<u64>>,
    pub nu_flat_total: Option<u64>,
    pub nearest_distance: Option<f64>,
    pub g_passed: Option<bool>,
    /// `μ^♯(U) = ν^♯(U)` on the first interval.
    pub agreement: Option<bool>,
}

impl TrialSummary {
    /// μ-only summary.
    pub fn mu_only(trial_index: u64, mu_sharp: Vec<u64>, mu_flat: Vec<u64>, mu_flat_total: u64) -> Self {
        Self {
            trial_index,
            mu_sharp,
            mu_flat,
            mu_flat_total,
            nu_sharp: None,
            nu_flat: None,
            nu_flat_total: None,
            nearest_distance: None,
            g_passed: None,
            agreement: None,
        }
    }
}

/// Fraction of trials with `μ^♯(U) = ν^♯(U)`.
pub fn agreement_rate(summaries: &[TrialSummary]) -> Result<f64> {
    let flags: Vec<bool> = summaries.iter().filter_map(|s| s.agreement).collect();
    if flags.is_empty() {
        return Err(Error::Empty("no trials with both processes"));
    }
    Ok(flags.iter().filter(|&&a| a).count() as f64 / flags.len() as f64)
}

/// Fractions of trials with `μ^♭(ℝ) > 0` and (when available) `ν^♭(ℝ) > 0`.
pub fn flat_mass_rate(summaries: &[TrialSummary]) -> Result<(f64, Option<f64>)> {
    if summaries.is_empty() {
        return Err(Error::Empty("no trials"));
    }
    let m = summaries.len() as f64;
    let mu = summaries.iter().filter(|s| s.mu_flat_total > 0).count() as f64 / m;
    let nu: Vec<u64> = summaries.iter().filter_map(|s| s.nu_flat_total).collect();
    let nu = (!nu.is_empty()).then(|| nu.iter().filter(|&&c| c > 0).count() as f64 / nu.len() as f64);
    Ok((mu, nu))
}

/// `1 − e^{−12s²}(1 + 12s²)`: the CDF of the derivative radius under the
/// intensity `∝ s² e^{−12 s²}` on the plane.
pub fn radius_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let a = 12.0 * s * s;
    1.0 - (-a).exp() * (1.0 + a)
}

/// Marginal shape tests of the extended marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedIntensityReport {
    pub marks: usize,
    /// Fewer than the minimum number of marks; the tests below are not run.
    pub inconclusive: bool,
    pub theta_ks: f64,
    pub theta_p: f64,
    /// Chi-square over equal bins of `U` for the radial mark.
    pub x_chi2: f64,
    pub x_dof: usize,
    pub x_p: f64,
    pub x_in_u: usize,
    pub radius_ks: f64,
    pub radius_p: f64,
    /// Fraction of angular offsets `y` in `[0, π]`; the offsets produced by
    /// the construction lie in `[−π/2, π/2]`.
    pub y_in_zero_pi: Option<f64>,
    pub theta_pass: bool,
    pub x_pass: bool,
    pub radius_pass: bool,
}

impl ExtendedIntensityReport {
    pub fn passed(&self) -> bool {
        !self.inconclusive && self.theta_pass && self.x_pass && self.radius_pass
    }
}

/// Tests (i) `θ` uniform on `[0, π]`, (ii) the radial mark uniform over `U`
/// (chi-square on `bins` equal cells), (iii) the derivative radius against
/// [`radius_cdf`].
pub fn extended_intensity_check(
    marks: &[ExtendedMark],
    u: &Interval,
    bins: usize,
) -> ExtendedIntensityReport {
    let mut report = ExtendedIntensityReport {
        marks: marks.len(),
        inconclusive: marks.len() < tolerances::EXTENDED_MIN_MARKS,
        theta_ks: f64::NAN,
        theta_p: f64::NAN,
        x_chi2: f64::NAN,
        x_dof: bins.saturating_sub(1),
        x_p: f64::NAN,
        x_in_u: 0,
        radius_ks: f64::NAN,
        radius_p: f64::NAN,
        y_in_zero_pi: None,
        theta_pass: false,
        x_pass: false,
        radius_pass: false,
    };
    if report.inconclusive {
        return report;
    }
    let m = marks.len();

    let mut theta: Vec<f64> = marks.iter().map(|e| e.theta).collect();
    report.theta_ks = ks_statistic(&mut theta, |t| (t / PI).clamp(0.0, 1.0));
    report.theta_p = ks_p_value(report.theta_ks, m);

    let mut cells = vec![0u64; bins];
    let width = u.len() / bins as f64;
    for e in marks.iter().filter(|e| u.contains(e.x)) {
        let b = (((e.x - u.lo) / width) as usize).min(bins - 1);
        cells[b] += 1;
    }
    let inside: u64 = cells.iter().sum();
    report.x_in_u = inside as usize;
    if inside > 0 && bins >= 2 {
        let expected = inside as f64 / bins as f64;
        report.x_chi2 = cells
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        report.x_p = ChiSquared::new((bins - 1) as f64)
            .map(|d| d.sf(report.x_chi2))
            .unwrap_or(f64::NAN);
    }

    let mut radius: Vec<f64> = marks.iter().map(ExtendedMark::derivative_radius).collect();
    report.radius_ks = ks_statistic(&mut radius, radius_cdf);
    report.radius_p = ks_p_value(report.radius_ks, m);

    let ys: Vec<f64> = marks.iter().filter_map(|e| e.y).collect();
    if !ys.is_empty() {
        let inside = ys.iter().filter(|&&y| (0.0..=PI).contains(&y)).count();
        report.y_in_zero_pi = Some(inside as f64 / ys.len() as f64);
    }

    report.theta_pass = report.theta_ks <= tolerances::THETA_KS;
    report.x_pass = report.x_p >= tolerances::CHI2_MIN_P;
    report.radius_pass = report.radius_ks <= tolerances::RADIUS_KS;
    report
}

/// One ensemble of trials together with the parameters that must match for
/// two ensembles to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub n: usize,
    pub k0: f64,
    pub big_n: usize,
    pub intervals: Vec<Interval>,
    pub summaries: Vec<TrialSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub mean_a: f64,
    pub mean_b: f64,
    pub z: f64,
}

impl ZTest {
    pub fn from_samples(a: &[f64], b: &[f64]) -> Self {
        let (ma, sa) = mean_and_se(a);
        let (mb, sb) = mean_and_se(b);
        let se = sa.hypot(sb);
        let z = if se > 0.0 {
            (ma - mb).abs() / se
        } else if ma == mb {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            mean_a: ma,
            mean_b: mb,
            z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub mu_counts: ZTest,
    pub nu_counts: Option<ZTest>,
    pub nearest_ks: Option<f64>,
    pub z_limit: f64,
    pub ks_limit: f64,
    pub passed: bool,
}

/// Two-sample z-tests on `μ^♯(U)` (and `ν^♯(U)`) counts over the first
/// interval, and a two-sample KS distance on nearest distances.
pub fn universality_compare(a: &Ensemble, b: &Ensemble) -> Result<UniversalityReport> {
    if a.n != b.n || a.k0 != b.k0 || a.big_n != b.big_n {
        return Err(Error::MismatchedConfig(format!(
            "(n, K0, N) = ({}, {}, {}) vs ({}, {}, {})",
            a.n, a.k0, a.big_n, b.n, b.k0, b.big_n
        )));
    }
    if a.intervals != b.intervals || a.intervals.is_empty() {
        return Err(Error::MismatchedConfig("count intervals differ".into()));
    }
    if a.summaries.len() != b.summaries.len() {
        return Err(Error::MismatchedConfig(format!(
            "{} vs {} trials",
            a.summaries.len(),
            b.summaries.len()
        )));
    }
    let counts = |e: &Ensemble| -> Vec<f64> { e.summaries.iter().map(|s| s.mu_sharp[0] as f64).collect() };
    let mu = ZTest::from_samples(&counts(a), &counts(b));

    let nu_counts = |e: &Ensemble| -> Option<Vec<f64>> {
        e.summaries
            .iter()
            .map(|s| s.nu_sharp.as_ref().map(|v| v[0] as f64))
            .collect()
    };
    let nu = match (nu_counts(a), nu_counts(b)) {
        (Some(x), Some(y)) => Some(ZTest::from_samples(&x, &y)),
        _ => None,
    };
    let dists = |e: &Ensemble| -> Option<Vec<f64>> {
        e.summaries.iter().map(|s| s.nearest_distance).collect()
    };
    let ks = match (dists(a), dists(b)) {
        (Some(x), Some(y)) => Some(ks_two_sample(&x, &y)?),
        _ => None,
    };
    let z_limit = tolerances::UNIVERSALITY_Z;
    let ks_limit = tolerances::UNIVERSALITY_KS;
    let passed = mu.z <= z_limit
        && nu.is_none_or(|t| t.z <= z_limit)
        && ks.is_none_or(|d| d <= ks_limit);
    Ok(UniversalityReport {
        mu_counts: mu,
        nu_counts: nu,
        nearest_ks: ks,
        z_limit,
        ks_limit,
        passed,
    })
}

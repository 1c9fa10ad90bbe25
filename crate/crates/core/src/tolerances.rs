//! Desk-scale tolerances.
//!
//! The limit theorems give only asymptotic rates, so every finite-n threshold
//! below was either fixed by the acceptance criteria or frozen from a pilot
//! run. Pilot provenance is noted next to each value; rerun the pilots with
//! the `kacpp` binary when changing defaults.

/// Bad-arc fraction `≤ C·n^{2κ−1}`. Pilot: K0 = 2, κ = 0.1, P_max = 4 gives
/// `fraction / n^{2κ−1}` = 3.78, 3.46, 3.25, 2.82 at n = 512, 1024, 2048,
/// 8192.
pub const BAD_ARC_CONSTANT: f64 = 5.0;

/// `‖Σ(t) − Σ₀‖_max ≤ C·n^{−ε}` for `t ∈ [n^{ε−1}, π − n^{ε−1}]`. Pilot:
/// n = 4096, ε = 0.5, 2000 angles: worst deviation × n^ε = 0.43.
pub const COVARIANCE_CONSTANT: f64 = 0.6;

/// Off-diagonal block entries `≤ C·n^{−1/2}` for an `n^{1/2}`-spread pair.
/// Pilot: n = 4096, t₁ ∈ {0.3, 1, 2}: worst entry × n^{1/2} ≤ 0.48.
pub const OFF_DIAGONAL_CONSTANT: f64 = 0.75;

/// `c_k` in `λ_min ≥ c_k γ^{6k−3}` for `γ ≤ 1`. Pilot: k = 1 gives
/// `λ_min = 0.0329` (that of `Σ₀`); k = 2 with pairs `γ/n` apart at t = 1,
/// n ∈ {512, 2048, 8192}, γ ∈ [0.05, 1] gives `λ_min/γ⁹ ≥ 4.8e−7` (attained
/// at γ = 1; the observed log-log slope is about 6).
pub fn eigen_constant(k: usize) -> f64 {
    match k {
        1 => 0.02,
        2 => 2e-7,
        _ => 0.0,
    }
}

/// Fewer pooled extended marks than this make the shape check inconclusive.
pub const EXTENDED_MIN_MARKS: usize = 100;
/// `θ`-marginal KS limit.
pub const THETA_KS: f64 = 0.05;
/// Derivative-radius KS limit.
pub const RADIUS_KS: f64 = 0.08;
/// Minimum chi-square p-value for the radial-mark uniformity check.
pub const CHI2_MIN_P: f64 = 1e-3;

/// Nearest-distance KS limit against `1 − e^{−x/6}` at n = 1024.
pub const NEAREST_KS: f64 = 0.06;
/// Minimum `P(μ^♯(U) = ν^♯(U))` at n = 1024.
pub const AGREEMENT_MIN: f64 = 0.90;
/// Minimum fraction of trials passing the residual gate.
pub const ROOT_ACCEPTANCE_MIN: f64 = 0.99;

/// Two-sample z limit (in standard errors) for mean counts.
pub const UNIVERSALITY_Z: f64 = 4.0;
/// Two-sample KS limit for nearest distances.
pub const UNIVERSALITY_KS: f64 = 0.08;

/// Standard errors allowed between a factorial moment and its target.
pub const MOMENT_SIGMAS: f64 = 4.0;
/// Standard errors allowed for Monte Carlo probabilities against closed forms.
pub const MC_SIGMAS: f64 = 4.0;

/// Rate of trials with `μ^♭(ℝ) > 0` at n = 2048, K0 = 2, κ = 0.1.
/// Pilot: 400 Gaussian trials (seed 9001) gave 0.005.
pub const MU_FLAT_RATE_MAX: f64 = 0.03;
/// Rate of trials with `ν^♭(ℝ) > 0` at n = 1024, K0 = 2, κ = 0.1.
/// Pilot: 400 Gaussian trials (seed 9003) gave 0.0175.
pub const NU_FLAT_RATE_MAX: f64 = 0.05;

/// Minimum fraction of Gaussian trials at n = 1024 passing the derivative
/// check. Pilot: 500 of 500 (seed 9002), worst ratio 0.16.
pub const G_PASS_RATE_MIN: f64 = 0.998;

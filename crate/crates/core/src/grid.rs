//! The sampling grid `θ_α = πα/N`, its arcs `I_α` and annuli `C_α`, and the
//! smooth / spread classification of angles.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default grid exponent: `N = ⌊n² / log² n⌋`.
pub const DEFAULT_K0: f64 = 2.0;
/// Default smoothness exponent, `γ = n^κ`.
pub const DEFAULT_KAPPA: f64 = 0.1;
/// Default smoothness range `p₀ ∈ 1..=P_max+1`.
pub const DEFAULT_P_MAX: u32 = 4;

/// Angles `θ_α = πα/N`, `α = 0..=N`, with arcs
/// `I_α = [θ_α − π/2N, θ_α + π/2N)` (the last one closed) so that the arcs
/// partition `[−π/2N, π + π/2N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    n: usize,
    big_n: usize,
    k0: f64,
    kappa: f64,
    p_max: u32,
    smooth_mask: Vec<bool>,
}

/// `⌊n² / log^{K0} n⌋`.
pub fn grid_size(n: usize, k0: f64) -> usize {
    let nf = n as f64;
    (nf * nf / crate::log_n(n).powf(k0)).floor() as usize
}

/// Builds the grid. Without an override `N = ⌊n²/log^{K0} n⌋`, which must be
/// at least `4n`; an override is used verbatim.
pub fn build_grid(
    n: usize,
    k0: f64,
    kappa: f64,
    p_max: u32,
    n_override: Option<usize>,
) -> Result<SampleGrid> {
    if n < 16 {
        return Err(Error::InvalidGrid(format!("degree {n} below 16")));
    }
    if !(k0.is_finite() && kappa.is_finite()) {
        return Err(Error::InvalidGrid("K0 and kappa must be finite".into()));
    }
    let big_n = match n_override {
        Some(0) => return Err(Error::InvalidGrid("N override must be ≥ 1".into())),
        Some(m) => m,
        None => {
            let m = grid_size(n, k0);
            if m < 4 * n {
                return Err(Error::InvalidGrid(format!(
                    "N = ⌊n²/log^{k0} n⌋ = {m} is below 4n = {} for n = {n}; \
                     lower K0 or pass an explicit N",
                    4 * n
                )));
            }
            m
        }
    };
    let gamma = (n as f64).powf(kappa);
    let smooth_mask = (0..=big_n)
        .map(|a| grid_point_smooth(a, big_n, gamma, n, p_max))
        .collect();
    Ok(SampleGrid {
        n,
        big_n,
        k0,
        kappa,
        p_max,
        smooth_mask,
    })
}

/// Smoothness at `θ_α` using the exact residues `p₀α mod N`, so the mask is
/// exactly symmetric under `α ↦ N − α`.
fn grid_point_smooth(alpha: usize, big_n: usize, gamma: f64, n: usize, p_max: u32) -> bool {
    let threshold = gamma / n as f64;
    (1..=p_max as u64 + 1).all(|p0| {
        let r = (p0 * alpha as u64) % big_n as u64;
        let d = r.min(big_n as u64 - r) as f64 / big_n as f64;
        d > threshold
    })
}

/// `‖x‖_{ℝ/ℤ}`.
fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// `t` is `γ`-smooth iff `‖p₀t/π‖ > γ/n` for every `p₀ = 1..=P_max+1`.
pub fn is_smooth(t: f64, gamma: f64, n: usize, p_max: u32) -> bool {
    let threshold = gamma / n as f64;
    (1..=p_max + 1).all(|p0| dist_to_integer(p0 as f64 * t / PI) > threshold)
}

/// `(t₁..t_k)` is `γ`-spread iff all pairwise gaps among the `t_i` and the
/// sentinels `0`, `π` are at least `γ/n`.
pub fn is_spread(ts: &[f64], gamma: f64, n: usize) -> bool {
    let threshold = gamma / n as f64;
    ts.iter().enumerate().all(|(i, &a)| {
        a >= threshold
            && PI - a >= threshold
            && ts[i + 1..].iter().all(|&b| (a - b).abs() >= threshold)
    })
}

impl SampleGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `N`; the grid has `N + 1` points.
    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn p_max(&self) -> u32 {
        self.p_max
    }

    /// `γ = n^κ`.
    pub fn gamma(&self) -> f64 {
        (self.n as f64).powf(self.kappa)
    }

    pub fn len(&self) -> usize {
        self.big_n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn theta(&self, alpha: usize) -> f64 {
        PI * alpha as f64 / self.big_n as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..=self.big_n).map(|a| self.theta(a)).collect()
    }

    /// Endpoints `(θ_α − π/2N, θ_α + π/2N)` of `I_α`.
    pub fn interval(&self, alpha: usize) -> (f64, f64) {
        let two_n = 2.0 * self.big_n as f64;
        let a = 2.0 * alpha as f64;
        (PI * (a - 1.0) / two_n, PI * (a + 1.0) / two_n)
    }

    /// `t ∈ I_α` under the half-open convention.
    pub fn arc_contains(&self, alpha: usize, t: f64) -> bool {
        let (lo, hi) = self.interval(alpha);
        lo <= t && (t < hi || (alpha == self.big_n && t == hi))
    }

    /// The unique `α` with `t ∈ I_α`, if any.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !t.is_finite() {
            return None;
        }
        let guess = ((t * 2.0 * self.big_n as f64 / PI + 1.0) / 2.0).floor();
        if guess < -1.0 || guess > self.big_n as f64 + 1.0 {
            return None;
        }
        let g = guess as i64;
        (g - 1..=g + 1)
            .filter(|&a| a >= 0 && a <= self.big_n as i64)
            .map(|a| a as usize)
            .find(|&a| self.arc_contains(a, t))
    }

    pub fn smooth_mask(&self) -> &[bool] {
        &self.smooth_mask
    }

    pub fn is_smooth_at(&self, alpha: usize) -> bool {
        self.smooth_mask[alpha]
    }

    /// Half-width `log n / n²` of the radial band of every `C_α`.
    pub fn radial_halfwidth(&self) -> f64 {
        let nf = self.n as f64;
        crate::log_n(self.n) / (nf * nf)
    }

    pub fn annulus(&self, alpha: usize) -> AnnulusSpec {
        let (lo, hi) = self.interval(alpha);
        AnnulusSpec {
            alpha,
            radial_halfwidth: self.radial_halfwidth(),
            arc_lo: lo,
            arc_hi: hi,
            closed_right: alpha == self.big_n,
        }
    }

    /// The `α` with `z ∈ C_α`, for `Im z ≥ 0`.
    pub fn locate_root(&self, z: Complex64) -> Option<usize> {
        if !(z.im >= 0.0) {
            return None;
        }
        if (1.0 - z.norm()).abs() > self.radial_halfwidth() {
            return None;
        }
        // abs() maps a −0.0 imaginary part to the upper half-plane
        self.locate(z.im.abs().atan2(z.re))
    }
}

/// `C_α = {z : |1 − |z|| ≤ log n/n², arg z ∈ I_α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub alpha: usize,
    pub radial_halfwidth: f64,
    pub arc_lo: f64,
    pub arc_hi: f64,
    pub closed_right: bool,
}

impl AnnulusSpec {
    pub fn contains(&self, z: Complex64) -> bool {
        if (1.0 - z.norm()).abs() > self.radial_halfwidth {
            return false;
        }
        let t = z.im.atan2(z.re);
        self.arc_lo <= t && (t < self.arc_hi || (self.closed_right && t == self.arc_hi))
    }
}

/// `#{α : θ_α not smooth} / (N + 1)`.
pub fn bad_arc_fraction(grid: &SampleGrid) -> f64 {
    let bad = grid.smooth_mask.iter().filter(|&&s| !s).count();
    bad as f64 / grid.len() as f64
}

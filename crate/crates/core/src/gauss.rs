//! Gaussian-side exact computations: the covariance of `W(t)` and its limit
//! `Σ₀`, eigenvalue diagnostics, the phase-space domain `𝒟_{U,V,r}` with its
//! measure and Gaussian probability, and Monte Carlo oracles for all of them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::Interval;
use crate::sampler::SeedSpec;

/// Symmetric `dim × dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `max_{ij} |a_ij − b_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{ij} |a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// The `4×4` block at block position `(bi, bj)`.
    pub fn block(&self, bi: usize, bj: usize) -> CovarianceMatrix {
        let mut b = Self::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                b.set(i, j, self.get(4 * bi + i, 4 * bj + j));
            }
        }
        b
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_nalgebra())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Smallest eigenvalue at least `−1e−10·trace`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-10 * self.trace().abs()
    }
}

/// The limiting covariance of `W(t) = (X, Y, X'/n, Y'/n)`.
pub fn sigma0() -> CovarianceMatrix {
    CovarianceMatrix::from_rows(&[
        vec![0.5, 0.0, 0.0, 0.25],
        vec![0.0, 0.5, -0.25, 0.0],
        vec![0.0, -0.25, 1.0 / 6.0, 0.0],
        vec![0.25, 0.0, 0.0, 1.0 / 6.0],
    ])
}

/// `v_k(t) = (cos kt, sin kt, −(k/n) sin kt, (k/n) cos kt)`, so that
/// `W(t) = n^{−1/2} Σ_k ξ_k v_k(t)`.
#[inline]
fn coefficient_vector(k: usize, t: f64, n: f64) -> [f64; 4] {
    let (s, c) = (k as f64 * t).sin_cos();
    let q = k as f64 / n;
    [c, s, -q * s, q * c]
}

/// Exact covariance of `W(t)` for standardized coefficients:
/// `(1/n) Σ_{k=0}^{n} v_k(t) v_k(t)ᵀ`.
pub fn covariance_single(t: f64, n: usize) -> CovarianceMatrix {
    covariance_joint(&[t], n)
}

/// Exact covariance of `(W(t_1), …, W(t_k))`.
pub fn covariance_joint(ts: &[f64], n: usize) -> CovarianceMatrix {
    let k = ts.len();
    let dim = 4 * k;
    let nf = n as f64;
    let mut m = CovarianceMatrix::zeros(dim);
    let mut v = vec![0.0; dim];
    for j in 0..=n {
        for (i, &t) in ts.iter().enumerate() {
            v[4 * i..4 * i + 4].copy_from_slice(&coefficient_vector(j, t, nf));
        }
        for a in 0..dim {
            for b in a..dim {
                m.data[a * dim + b] += v[a] * v[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let x = m.get(a, b) / nf;
            m.set(a, b, x);
            m.set(b, a, x);
        }
    }
    m
}

/// `λ_min` of the joint covariance of the tuple.
pub fn min_eigenvalue_diagnostic(ts: &[f64], n: usize) -> f64 {
    covariance_joint(ts, n).min_eigenvalue()
}

/// `c_k · γ^{6k−3}`, the lower-bound shape for `λ_min` on `γ`-spread
/// `k`-tuples, with `c_k` from [`crate::tolerances`].
pub fn eigenvalue_bound(k: usize, gamma: f64) -> f64 {
    crate::tolerances::eigen_constant(k) * gamma.powi(6 * k as i32 - 3)
}

/// Lower-triangular factor `L` with `LLᵀ = A` for positive semidefinite `A`.
/// Pivots within `1e−10·trace` of zero zero out their column.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(cov: &CovarianceMatrix) -> Result<Self> {
        let dim = cov.dim();
        let tol = 1e-10 * cov.trace().abs().max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut d = cov.get(j, j);
            for k in 0..j {
                d -= l[j * dim + k] * l[j * dim + k];
            }
            if d < -tol {
                return Err(Error::NotPositiveSemidefinite { row: j, pivot: d });
            }
            if d <= tol {
                continue;
            }
            let ljj = d.sqrt();
            l[j * dim + j] = ljj;
            for i in j + 1..dim {
                let mut s = cov.get(i, j);
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = s / ljj;
            }
        }
        Ok(Self { dim, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `L g` with `g` standard normal into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, g: &mut [f64], out: &mut [f64]) {
        for x in g.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        for i in 0..self.dim {
            out[i] = (0..=i).map(|k| self.l[i * self.dim + k] * g[k]).sum();
        }
    }
}

/// `count` draws from `N(0, cov)`.
pub fn sample_gaussian_w(
    cov: &CovarianceMatrix,
    count: usize,
    seed: SeedSpec,
) -> Result<Vec<Vec<f64>>> {
    let chol = Cholesky::new(cov)?;
    let mut rng = seed.rng();
    let mut g = vec![0.0; chol.dim()];
    Ok((0..count)
        .map(|_| {
            let mut out = vec![0.0; chol.dim()];
            chol.sample_into(&mut rng, &mut g, &mut out);
            out
        })
        .collect())
}

/// `𝒟_{U,V,r} = {(w, z) ∈ ℝ²×ℝ² : w·z^⊥/|z|² ∈ U/n, w·z/|z|² ∈ (n/N)V, |z| < r}`
/// with `z^⊥ = (−z₂, z₁)`. For `w = (X, Y)` and `z = (X'/n, Y'/n)` these are
/// exactly `n²ρ ∈ U`, `N(θ − τ) ∈ V` and `|(X', Y')| < rn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub u: Interval,
    pub v: Interval,
    /// `f64::INFINITY` for no bound.
    pub r: f64,
    pub big_n: usize,
    pub n: usize,
}

impl DomainSpec {
    /// `V = [−π/2, π/2]`, the angular offsets allowed by `τ ∈ I_α`.
    pub fn full_arc(u: Interval, r: f64, big_n: usize, n: usize) -> Self {
        Self {
            u,
            v: Interval::symmetric(PI / 2.0),
            r,
            big_n,
            n,
        }
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        let (x, y, xp, yp) = (w[0], w[1], w[2], w[3]);
        let z2 = xp * xp + yp * yp;
        if z2 == 0.0 || !(z2 < self.r * self.r) {
            return false;
        }
        let n = self.n as f64;
        let radial = (y * xp - x * yp) / z2 * n;
        let angular = (x * xp + y * yp) / z2 * self.big_n as f64 / n;
        self.u.contains(radial) && self.v.contains(angular)
    }
}

/// `m(𝒟_{U,V,r}) = π r⁴ |U||V| / (2N)`.
pub fn lebesgue_measure(d: &DomainSpec) -> Result<f64> {
    if !d.r.is_finite() {
        return Err(Error::InfiniteMeasure);
    }
    Ok(PI * d.r.powi(4) * d.u.len() * d.v.len() / (2.0 * d.big_n as f64))
}

/// `I(r) = ∫_{|z|≤r} |z|² e^{−12|z|²} dm(z) = (π/144)(1 − e^{−12r²}(1 + 12r²))`.
pub fn radial_integral(r: f64) -> f64 {
    if r.is_infinite() {
        return PI / 144.0;
    }
    let s = 12.0 * r * r;
    PI / 144.0 * (1.0 - (-s).exp() * (1.0 + s))
}

/// Leading term `(12/π²)(|U||V|/N)·I(r)` of `P(W₀ ∈ 𝒟_{U,V,r})`; meaningful
/// for `|U|, |V| ≤ n^{0.1}`.
pub fn gaussian_prob_closed_form(d: &DomainSpec) -> f64 {
    12.0 / (PI * PI) * (d.u.len() * d.v.len() / d.big_n as f64) * radial_integral(d.r)
}

/// A Monte Carlo proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn proportion(hits: u64, samples: usize) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }

    /// `|value − target| / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.std_error.max(f64::MIN_POSITIVE)
    }
}

const MC_BLOCK: usize = 1 << 18;

/// Counts, for each predicate, how many of `samples` draws of `N(0, cov)`
/// satisfy it. Blocks of draws use their own seed streams, so the result does
/// not depend on the thread count.
pub fn gaussian_mc_counts<F>(
    cov: &CovarianceMatrix,
    samples: usize,
    master_seed: u64,
    predicates: &[F],
) -> Result<Vec<u64>>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let chol = Cholesky::new(cov)?;
    let blocks = samples.div_ceil(MC_BLOCK);
    let dim = chol.dim();
    let per_block: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = SeedSpec::new(master_seed, b as u64).rng();
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut g = vec![0.0; dim];
            let mut w = vec![0.0; dim];
            let mut hits = vec![0u64; predicates.len()];
            for _ in 0..count {
                chol.sample_into(&mut rng, &mut g, &mut w);
                for (h, p) in hits.iter_mut().zip(predicates) {
                    *h += p(&w) as u64;
                }
            }
            hits
        })
        .collect();
    let mut total = vec![0u64; predicates.len()];
    for h in per_block {
        for (t, x) in total.iter_mut().zip(h) {
            *t += x;
        }
    }
    Ok(total)
}

/// `P(W ∈ 𝒟)` for `W ~ N(0, Σ₀)` by Monte Carlo, one estimate per domain,
/// all from the same draws.
pub fn gaussian_prob_mc(
    domains: &[DomainSpec],
    samples: usize,
    master_seed: u64,
) -> Result<Vec<McEstimate>> {
    let preds: Vec<_> = domains
        .iter()
        .map(|d| move |w: &[f64]| d.contains(w))
        .collect();
    let hits = gaussian_mc_counts(&sigma0(), samples, master_seed, &preds)?;
    Ok(hits
        .into_iter()
        .map(|h| McEstimate::proportion(h, samples))
        .collect())
}

/// Volume of a finite-radius domain by uniform sampling in its bounding box.
pub fn lebesgue_measure_mc(d: &DomainSpec, samples: usize, seed: SeedSpec) -> Result<McEstimate> {
    if !d.r.is_finite() {
        return Err(Error::InfiniteMeasure);
    }
    let n = d.n as f64;
    let umax = d.u.lo.abs().max(d.u.hi.abs()) / n;
    let vmax = d.v.lo.abs().max(d.v.hi.abs()) * n / d.big_n as f64;
    // |w| ≤ |z|·√(umax² + vmax²) since w's coordinates along z and z^⊥ are bounded
    let b = d.r * umax.hypot(vmax);
    let box_volume = (2.0 * b).powi(2) * (2.0 * d.r).powi(2);
    let mut rng = seed.rng();
    let mut hits = 0u64;
    for _ in 0..samples {
        let w = [
            rng.random_range(-b..=b),
            rng.random_range(-b..=b),
            rng.random_range(-d.r..=d.r),
            rng.random_range(-d.r..=d.r),
        ];
        hits += d.contains(&w) as u64;
    }
    let p = McEstimate::proportion(hits, samples);
    Ok(McEstimate {
        value: p.value * box_volume,
        std_error: p.std_error * box_volume,
        samples,
    })
}

/// Axis-aligned box in `ℝ⁴`.
pub type Box4 = [Interval; 4];

fn in_box(b: &Box4, w: &[f64]) -> bool {
    b.iter().zip(w).all(|(i, &x)| i.contains(x))
}

/// `|P(W(t_i) ∈ B_i ∀i) − Π_i P(W₀ ∈ B_i)|` with its Monte Carlo error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectEstimate {
    pub joint: f64,
    pub product: f64,
    pub defect: f64,
    pub std_error: f64,
}

/// Decorrelation defect: the joint probability under the exact covariance of
/// `(W(t_1), …, W(t_k))` against the product of `Σ₀` marginals.
pub fn decorrelation_defect(
    ts: &[f64],
    boxes: &[Box4],
    n: usize,
    samples: usize,
    master_seed: u64,
) -> Result<DefectEstimate> {
    assert_eq!(ts.len(), boxes.len(), "one box per angle");
    let k = ts.len();
    let joint_pred = |w: &[f64]| (0..k).all(|i| in_box(&boxes[i], &w[4 * i..4 * i + 4]));
    let joint = gaussian_mc_counts(&covariance_joint(ts, n), samples, master_seed, &[joint_pred])?[0];
    let joint = McEstimate::proportion(joint, samples);

    let preds: Vec<_> = boxes.iter().map(|b| move |w: &[f64]| in_box(b, w)).collect();
    let marg = gaussian_mc_counts(&sigma0(), samples, master_seed ^ 0x9e37_79b9_7f4a_7c15, &preds)?;
    let marg: Vec<McEstimate> = marg
        .into_iter()
        .map(|h| McEstimate::proportion(h, samples))
        .collect();
    let product: f64 = marg.iter().map(|m| m.value).product();
    // delta method for the product of independent estimates
    let var_prod: f64 = (0..k)
        .map(|i| {
            let others: f64 = (0..k).filter(|&j| j != i).map(|j| marg[j].value).product();
            (others * marg[i].std_error).powi(2)
        })
        .sum();
    Ok(DefectEstimate {
        joint: joint.value,
        product,
        defect: (joint.value - product).abs(),
        std_error: (joint.std_error.powi(2) + var_prod).sqrt(),
    })
}

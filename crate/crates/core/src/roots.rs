//! All roots of `f` by Aberth–Ehrlich iteration, and the close-root
//! processes `ν^♯`, `ν^♭` and nearest-distance statistic built from them.

use std::io::Write;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FieldSample, KacPolynomial};
use crate::grid::SampleGrid;
use crate::process::{ExtendedMark, PointProcess};

/// Relative correction below which a root is frozen.
pub const CONVERGENCE_TOL: f64 = 1e-14;
pub const MAX_SWEEPS: usize = 200;
/// Normalized residual a trial must meet to be accepted.
pub const RESIDUAL_GATE: f64 = 1e-8;
/// Roots with `|Im z| ≤ REAL_SNAP·max(1, |z|)` are made real.
pub const REAL_SNAP: f64 = 1e-10;
pub const PAIRING_TOL: f64 = 1e-8;

/// Roots of `f` with their normalized residuals
/// `|f(z)| / (max_k |ξ_k| · max(1, |z|)^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    /// Degree of the polynomial the roots came from, before trimming.
    pub n: usize,
    pub roots: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub sweeps: usize,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes_gate(&self) -> bool {
        self.max_residual() <= RESIDUAL_GATE
    }

    /// Largest distance from a non-real root's conjugate to the nearest root.
    pub fn pairing_defect(&self) -> f64 {
        self.roots
            .iter()
            .filter(|z| z.im != 0.0)
            .map(|z| {
                let c = z.conj();
                self.roots
                    .iter()
                    .map(|w| (w - c).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

/// Polynomial `a_0 + a_1 z + … + a_d z^d` with `a_0, a_d ≠ 0`.
struct Trimmed<'a> {
    a: &'a [f64],
    d: usize,
}

impl Trimmed<'_> {
    /// `f'(z)/f(z)`. Outside the unit disk the reversed polynomial
    /// `q(w) = w^d f(1/w)` is evaluated instead, so powers of `|z|` never
    /// overflow.
    fn log_derivative(&self, z: Complex64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        if z.norm_sqr() <= 1.0 {
            let (mut p, mut dp) = (zero, zero);
            for &c in self.a.iter().rev() {
                dp = dp * z + p;
                p = p * z + c;
            }
            dp / p
        } else {
            let w = z.inv();
            let (mut q, mut dq) = (zero, zero);
            for &c in self.a.iter() {
                dq = dq * w + q;
                q = q * w + c;
            }
            w * (self.d as f64 - w * dq / q)
        }
    }

    /// `|f(z)| / max(1, |z|)^d`.
    fn scaled_abs(&self, z: Complex64) -> f64 {
        if z.norm_sqr() <= 1.0 {
            self.a
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |p, &c| p * z + c)
                .norm()
        } else {
            let w = z.inv();
            self.a
                .iter()
                .fold(Complex64::new(0.0, 0.0), |q, &c| q * w + c)
                .norm()
        }
    }
}

fn initial_guesses(a: &[f64], d: usize) -> Vec<Complex64> {
    let radius = (a[0].abs() / a[d].abs()).powf(1.0 / d as f64);
    let df = d as f64;
    (0..d)
        .map(|j| {
            // alternate slightly inside and outside the circle, and rotate
            // off the real axis so no guess is conjugate-symmetric
            let r = radius * (1.0 + if j % 2 == 0 { 0.5 } else { -0.5 } / df);
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / df + 0.4 / df;
            Complex64::from_polar(r, phi)
        })
        .collect()
}

/// All `n` roots by Aberth–Ehrlich iteration (Gauss–Seidel order, converged
/// roots frozen) followed by one Newton step per root.
///
/// Trailing zero coefficients lower the degree; leading zero coefficients
/// contribute exact roots at the origin.
pub fn find_all_roots(poly: &KacPolynomial) -> Result<RootSet> {
    let coeffs = poly.coeffs();
    let Some(top) = coeffs.iter().rposition(|&c| c != 0.0) else {
        return Err(Error::InvalidPolynomial("zero polynomial".into()));
    };
    let low = coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
    let a = &coeffs[low..=top];
    let d = top - low;
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let mut roots = vec![Complex64::new(0.0, 0.0); low];
    let mut sweeps = 0;
    if d > 0 {
        let p = Trimmed { a, d };
        let mut z = initial_guesses(a, d);
        let mut frozen = vec![false; d];
        let mut active = d;
        while active > 0 && sweeps < MAX_SWEEPS {
            sweeps += 1;
            for j in 0..d {
                if frozen[j] {
                    continue;
                }
                let zj = z[j];
                let ratio = p.log_derivative(zj);
                let repulsion: Complex64 = z
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &zk)| (zj - zk).inv())
                    .sum();
                let w = (ratio - repulsion).inv();
                if !w.re.is_finite() || !w.im.is_finite() {
                    // exact hit on a root: f(z) = 0 makes ratio infinite
                    frozen[j] = true;
                    active -= 1;
                    continue;
                }
                z[j] = zj - w;
                if w.norm() <= CONVERGENCE_TOL * z[j].norm().max(1.0) {
                    frozen[j] = true;
                    active -= 1;
                }
            }
        }
        for zj in z.iter_mut() {
            let step = p.log_derivative(*zj).inv();
            if step.re.is_finite() && step.im.is_finite() {
                let polished = *zj - step;
                if p.scaled_abs(polished) <= p.scaled_abs(*zj) {
                    *zj = polished;
                }
            }
            if zj.im.abs() <= REAL_SNAP * zj.norm().max(1.0) {
                zj.im = 0.0;
            }
        }
        let residual_of = |zj: &Complex64| {
            // |f(z)| / max(1,|z|)^n where f = z^low · (trimmed part)
            let mut r = p.scaled_abs(*zj) / scale;
            if zj.norm() < 1.0 {
                r *= zj.norm().powi(low as i32);
            }
            r
        };
        let residuals: Vec<f64> = z.iter().map(residual_of).collect();
        if active > 0 {
            return Err(Error::RootsNotConverged {
                sweeps,
                worst_residual: residuals.iter().copied().fold(0.0, f64::max),
            });
        }
        roots.extend(z);
        let mut all = vec![0.0; low];
        all.extend(residuals);
        return Ok(RootSet {
            n: poly.degree(),
            roots,
            residuals: all,
            sweeps,
        });
    }
    Ok(RootSet {
        n: poly.degree(),
        residuals: vec![0.0; roots.len()],
        roots,
        sweeps,
    })
}

/// One root of `ν`: the arc it falls in and its mark `n²(|z| − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuHit {
    pub alpha: usize,
    pub smooth: bool,
    pub root: Complex64,
    pub mark: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuResult {
    pub sharp: PointProcess,
    pub flat: PointProcess,
    pub hits: Vec<NuHit>,
}

/// `ν^♯`, `ν^♭` over roots with `Im z ≥ 0` in some `C_α`. With grid samples
/// supplied, both processes carry extended marks
/// `(θ_α, n²(|z|−1), —, X'(θ_α)/n, Y'(θ_α)/n)`.
pub fn nu_with_marks(
    roots: &RootSet,
    grid: &SampleGrid,
    samples: Option<&[FieldSample]>,
) -> NuResult {
    let nn = (grid.n() * grid.n()) as f64;
    let (mut sharp, mut flat) = match samples {
        Some(_) => (PointProcess::with_extended(), PointProcess::with_extended()),
        None => (PointProcess::new(), PointProcess::new()),
    };
    let mut hits = Vec::new();
    for &z in &roots.roots {
        let Some(alpha) = grid.locate_root(z) else {
            continue;
        };
        let mark = nn * (z.norm() - 1.0);
        let smooth = grid.is_smooth_at(alpha);
        let ext = samples.map(|s| {
            let (dx, dy) = s[alpha].normalized_derivative();
            ExtendedMark {
                theta: grid.theta(alpha),
                x: mark,
                y: None,
                dx,
                dy,
            }
        });
        if smooth {
            sharp.push(mark, ext);
        } else {
            flat.push(mark, ext);
        }
        hits.push(NuHit {
            alpha,
            smooth,
            root: z,
            mark,
        });
    }
    NuResult { sharp, flat, hits }
}

/// `(ν^♯, ν^♭)`.
pub fn build_nu(roots: &RootSet, grid: &SampleGrid) -> (PointProcess, PointProcess) {
    let r = nu_with_marks(roots, grid, None);
    (r.sharp, r.flat)
}

/// `n² · min_i |1 − |z_i||`.
pub fn nearest_distance(roots: &RootSet) -> Result<f64> {
    let nn = (roots.n * roots.n) as f64;
    roots
        .roots
        .iter()
        .map(|z| (1.0 - z.norm()).abs())
        .reduce(f64::min)
        .map(|d| nn * d)
        .ok_or(Error::Empty("root set"))
}

/// Writes `trial,re,im,residual` rows.
pub fn write_roots_csv<W: Write>(
    writer: &mut csv::Writer<W>,
    trial: u64,
    roots: &RootSet,
) -> Result<()> {
    for (z, r) in roots.roots.iter().zip(&roots.residuals) {
        writer.serialize((trial, z.re, z.im, r))?;
    }
    Ok(())
}
